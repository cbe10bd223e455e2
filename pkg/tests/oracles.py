"""Independent reference implementations used to check the package.

Nothing here calls into the code under test except to read fitted tree
arrays; routing, weighting, CDFs and Shapley sums are redone from scratch,
in exact rational arithmetic where that is possible.
"""

from fractions import Fraction
from itertools import combinations
from math import factorial

import numpy as np


def route(tree, row):
    """Leaf id reached by ``row``, walking the node arrays by hand."""
    node = 0
    while tree.feature[node] >= 0:
        f = int(tree.feature[node])
        node = int(tree.left[node]) if row[f] <= tree.threshold[node] else int(tree.right[node])
    return node


def exact_weights(forest, X_train, x):
    """Observation weights as Fractions, leaf membership over all rows."""
    n = len(X_train)
    k = len(forest)
    w = [Fraction(0)] * n
    for tree in forest:
        target = route(tree, x)
        members = [i for i in range(n) if route(tree, X_train[i]) == target]
        for i in members:
            w[i] += Fraction(1, len(members) * k)
    return w


def exact_quantile(targets, weights, alpha):
    """``inf{y : F(y) >= alpha}`` from the sorted weighted empirical CDF.

    ``alpha`` is taken at its decimal value, e.g. 0.05 means exactly 1/20.
    """
    a = Fraction(str(alpha))
    pairs = sorted(zip(targets, weights))
    cum = Fraction(0)
    for i, (y, w) in enumerate(pairs):
        cum += w
        last_of_value = i + 1 == len(pairs) or pairs[i + 1][0] != y
        if last_of_value and cum >= a:
            return y
    return pairs[-1][0]


def exact_cdf(targets, weights, y):
    return sum((w for t, w in zip(targets, weights) if t <= y), Fraction(0))


def shapley_by_subsets(f, x, background, groups):
    """Shapley values of the interventional game, built from first principles.

    ``v(S)`` is the mean of ``f`` over hybrids that take the columns of the
    groups in ``S`` from ``x`` and all others from a background row.
    """
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(background)
    M = len(groups)

    def value(S):
        total = 0.0
        for b in background:
            z = b.copy()
            for j in S:
                z[list(groups[j])] = x[list(groups[j])]
            total += float(np.asarray(f(z[None, :])).ravel()[0])
        return total / len(background)

    cache = {}
    for r in range(M + 1):
        for S in combinations(range(M), r):
            cache[S] = value(S)
    phi = np.zeros(M)
    for i in range(M):
        others = [j for j in range(M) if j != i]
        for r in range(M):
            coef = factorial(r) * factorial(M - r - 1) / factorial(M)
            for S in combinations(others, r):
                with_i = tuple(sorted(S + (i,)))
                phi[i] += coef * (cache[with_i] - cache[S])
    return cache[()], phi, cache[tuple(range(M))]


# hand-computed metric fixtures: (actual, predicted, mae, rmse)
POINT_FIXTURES = [
    ([1.0, 3.0], [1.0, 3.0], 0.0, 0.0),
    ([0.0, 2.0], [1.0, 1.0], 1.0, 1.0),
    ([0.0, 0.0, 6.0], [0.0, 0.0, 0.0], 2.0, 12.0 ** 0.5),
]
