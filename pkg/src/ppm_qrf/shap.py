"""KernelSHAP attributions over original (pre-encoding) features.

Features are masked group-wise: switching off a one-hot encoded feature swaps
its whole column group for the background row's.  ``explain_kernel`` fits the
additive model by Shapley-kernel weighted least squares with the empty and
full coalitions as hard constraints; ``exact_shapley`` enumerates every
subset and serves as the oracle for it.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, TextIO

import numpy as np

from .qrf.forest import QrfModel, level_alphas, model_outputs

MAX_EXACT_FEATURES = 20
RIDGE = 1e-10
_HYBRID_CELLS = 1 << 22  # hybrid matrix cells materialized per chunk


class ShapError(ValueError):
    pass


class DegenerateCoalition(ShapError):
    pass


class SingularSystem(ShapError):
    pass


class TooManyFeatures(ShapError):
    pass


class UnknownFeature(ShapError, KeyError):
    pass


class ShapSchemaMismatch(ShapError):
    pass


class EmptyInput(ShapError):
    pass


class LengthMismatch(ShapError):
    pass


class ExplanationTarget(enum.Enum):
    POINT = "point"
    LOWER = "lower"
    UPPER = "upper"
    WIDTH = "width"


ALL_TARGETS = tuple(ExplanationTarget)


@dataclass(frozen=True, eq=False)
class Explanation:
    intercept: float
    phi: np.ndarray
    fx: float
    target: ExplanationTarget | None = None
    coalitions_used: int = 0
    exact: bool = False
    feature_names: tuple[str, ...] = ()

    @property
    def local_accuracy_gap(self) -> float:
        return abs(self.intercept + float(np.sum(self.phi)) - self.fx)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, map(float, self.phi)))


# ---------------------------------------------------------------------------
# Coalitions and masking
# ---------------------------------------------------------------------------


def kernel_weight(M: int, s: int) -> float:
    """Shapley kernel ``(M-1) / (C(M, s) * s * (M-s))`` for a proper coalition."""
    if s <= 0 or s >= M:
        raise DegenerateCoalition(f"coalition size {s} has infinite kernel weight for M={M}")
    return (M - 1) / (math.comb(M, s) * s * (M - s))


def _groups(groups, p: int) -> list[np.ndarray]:
    if groups is None:
        return [np.array([j]) for j in range(p)]
    if isinstance(groups, Mapping):
        groups = list(groups.values())
    out = [np.asarray(g, dtype=int) for g in groups]
    cols = np.concatenate(out) if out else np.array([], dtype=int)
    if len(cols) != p or len(np.unique(cols)) != p:
        raise ShapSchemaMismatch("feature groups must partition the encoded columns")
    return out


def column_mask(masks: np.ndarray, groups: Sequence[np.ndarray], p: int) -> np.ndarray:
    """Expand coalition masks over original features to encoded-column masks."""
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    cols = np.zeros((masks.shape[0], p), dtype=bool)
    for j, g in enumerate(groups):
        cols[:, g] = masks[:, j : j + 1]
    return cols


def hybrid_rows(x: np.ndarray, masks: np.ndarray, background: np.ndarray, groups) -> np.ndarray:
    """Rows mixing ``x`` (mask 1) with each background row (mask 0).

    Returns shape ``(n_masks * B, p)``, coalition-major.
    """
    background = np.atleast_2d(background)
    p = background.shape[1]
    cols = column_mask(masks, _groups(groups, p), p)
    hyb = np.where(cols[:, None, :], x[None, None, :], background[None, :, :])
    return hyb.reshape(-1, p)


def _as_matrix(out, n: int) -> np.ndarray:
    out = np.asarray(out, dtype=float)
    return out.reshape(n, -1)


def coalition_values(f: Callable, x, masks: np.ndarray, background: np.ndarray, groups=None) -> np.ndarray:
    """Mean model output over background hybrids, one row per coalition.

    ``f`` maps an ``(n, p)`` matrix to ``(n,)`` or ``(n, T)`` outputs; the
    result has shape ``(n_masks, T)``.
    """
    x = np.asarray(getattr(x, "values", x), dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[1] != x.shape[0]:
        raise ShapSchemaMismatch("background rows and x have different widths")
    B, p = background.shape
    grp = _groups(groups, p)
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    per_chunk = max(1, _HYBRID_CELLS // (B * p))
    parts = []
    for start in range(0, len(masks), per_chunk):
        block = masks[start : start + per_chunk]
        out = _as_matrix(f(hybrid_rows(x, block, background, grp)), len(block) * B)
        parts.append(out.reshape(len(block), B, -1).mean(axis=1))
    return np.vstack(parts) if parts else np.zeros((0, 1))


def masked_prediction(f: Callable, x, z, background, groups=None) -> float:
    """``E_b[f(hybrid(x, b, z))]`` for a single coalition ``z``."""
    return float(coalition_values(f, x, np.asarray(z, dtype=bool)[None, :], background, groups)[0, 0])


def _mask_from_bits(bits: np.ndarray, M: int) -> np.ndarray:
    return ((bits[:, None] >> np.arange(M)) & 1).astype(bool)


def enumerate_coalitions(M: int) -> np.ndarray:
    """All proper, non-empty coalitions ordered by their bit pattern."""
    bits = np.arange(1, 2**M - 1, dtype=np.int64)
    return _mask_from_bits(bits, M)


def default_budget(M: int) -> int:
    return min(2**M - 2, 2 * M + 2048)


def sample_coalitions(M: int, budget: int, rng: np.random.Generator):
    """Coalitions and regression weights for a KernelSHAP fit.

    Returns ``(masks, weights, exact)``.  When every proper coalition fits in
    ``budget`` they are all enumerated with their kernel weights.  Otherwise
    whole size classes (``s`` together with ``M - s``) are enumerated while
    the budget share they would receive covers them, and the rest is filled
    with complement pairs drawn with probability proportional to each class's
    kernel mass; every sampled coalition carries an equal share of the
    remaining mass.
    """
    if M < 1:
        raise ValueError("need at least one feature")
    if 2**M - 2 <= budget:
        masks = enumerate_coalitions(M)
        sizes = masks.sum(axis=1)
        w = np.array([kernel_weight(M, int(s)) for s in sizes]) if len(masks) else np.zeros(0)
        return masks, w, True
    if budget < 2 * M + 2:
        raise ValueError(f"budget {budget} below the minimum {2 * M + 2} for sampling")

    classes = list(range(1, M // 2 + 1))
    count = {s: math.comb(M, s) * (1 if 2 * s == M else 2) for s in classes}
    mass = {s: (M - 1) / (s * (M - s)) * (1 if 2 * s == M else 2) for s in classes}
    mass_left = sum(mass.values())
    left = budget
    masks, weights = [], []
    pending = list(classes)
    for s in classes:
        if count[s] <= left and left * mass[s] / mass_left >= count[s] - 1e-8:
            for combo in itertools.combinations(range(M), s):
                m = np.zeros(M, dtype=bool)
                m[list(combo)] = True
                masks.append(m)
                weights.append(kernel_weight(M, s))
                if 2 * s != M:
                    masks.append(~m)
                    weights.append(kernel_weight(M, M - s))
            left -= count[s]
            mass_left -= mass[s]
            pending.remove(s)
        else:
            break
    n_pairs = left // 2
    if pending and n_pairs:
        p = np.array([mass[s] for s in pending])
        p = p / p.sum()
        share = mass_left / (2 * n_pairs)
        drawn = rng.choice(len(pending), size=n_pairs, p=p)
        for c in drawn:
            s = pending[c]
            m = np.zeros(M, dtype=bool)
            m[rng.choice(M, size=s, replace=False)] = True
            masks.append(m)
            masks.append(~m)
            weights.extend((share, share))
    return np.array(masks, dtype=bool).reshape(-1, M), np.array(weights), False


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def solve_kernel_wls(masks: np.ndarray, weights: np.ndarray, values: np.ndarray,
                     base: np.ndarray, fx: np.ndarray) -> np.ndarray:
    """Constrained weighted least squares for the additive model.

    Minimizes ``sum_z w(z) (v(z) - phi0 - z.phi)^2`` subject to
    ``phi0 = base`` and ``phi0 + sum(phi) = fx`` by solving the KKT system.
    ``values`` is ``(C, T)``; returns ``phi`` as ``(T, M)``.  Each target
    column is a separate right-hand side of the same system, so the result
    is linear in the responses.
    """
    masks = np.atleast_2d(masks).astype(float)
    C, M = masks.shape
    if len({m.tobytes() for m in masks.astype(bool)}) < M - 1:
        raise SingularSystem(f"{C} coalitions cannot identify {M} attributions; raise the budget")
    T = np.size(base)
    values = np.asarray(values, dtype=float).reshape(C, T)
    A = np.hstack([np.ones((C, 1)), masks])
    Aw = A * np.asarray(weights, dtype=float)[:, None]
    gram = A.T @ Aw
    scale = max(float(np.trace(gram)) / (M + 1), 1.0)
    gram += RIDGE * scale * np.eye(M + 1)
    cons = np.zeros((2, M + 1))
    cons[0, 0] = 1.0
    cons[1, :] = 1.0
    kkt = np.zeros((M + 3, M + 3))
    kkt[: M + 1, : M + 1] = gram
    kkt[: M + 1, M + 1 :] = cons.T
    kkt[M + 1 :, : M + 1] = cons
    rhs = np.zeros((M + 3, T))
    rhs[: M + 1] = Aw.T @ values
    rhs[M + 1] = np.asarray(base, dtype=float).reshape(T)
    rhs[M + 2] = np.asarray(fx, dtype=float).reshape(T)
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return sol[1 : M + 1].T


def _prepare(f, x, background, groups):
    x = np.asarray(getattr(x, "values", x), dtype=float).ravel()
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if len(background) < 1:
        raise ValueError("background set must contain at least one row")
    if background.shape[1] != len(x):
        raise ShapSchemaMismatch("background rows and x have different widths")
    grp = _groups(groups, len(x))
    return x, background, grp


def _names(feature_names, M):
    return tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(M))


def explain_kernel(f: Callable, x, background, groups=None, budget: int | None = None, seed: int = 0,
                   feature_names: Sequence[str] | None = None,
                   target: ExplanationTarget | None = None) -> Explanation:
    """KernelSHAP explanation of a scalar model ``f`` at ``x``."""
    x, background, grp = _prepare(f, x, background, groups)
    M = len(grp)
    budget = default_budget(M) if budget is None else budget
    masks, weights, exact = sample_coalitions(M, budget, np.random.default_rng(seed))
    ends = np.vstack([np.zeros(M, dtype=bool), np.ones(M, dtype=bool)])
    vals = coalition_values(f, x, np.vstack([ends, masks]), background, grp)
    base, fx = vals[0], _as_matrix(f(x[None, :]), 1)[0]
    phi = solve_kernel_wls(masks, weights, vals[2:], base, fx)
    return Explanation(float(base[0]), phi[0], float(fx[0]), target, len(masks), exact, _names(feature_names, M))


def exact_shapley(f: Callable, x, background, groups=None,
                  feature_names: Sequence[str] | None = None,
                  target: ExplanationTarget | None = None) -> Explanation:
    """Shapley values by enumerating all ``2^M`` coalitions."""
    x, background, grp = _prepare(f, x, background, groups)
    M = len(grp)
    if M > MAX_EXACT_FEATURES:
        raise TooManyFeatures(f"exact enumeration limited to {MAX_EXACT_FEATURES} features, got {M}")
    bits = np.arange(2**M, dtype=np.int64)
    v = coalition_values(f, x, _mask_from_bits(bits, M), background, grp)[:, 0]
    size = np.array([bin(b).count("1") for b in bits])
    coef = np.array([math.factorial(s) * math.factorial(M - s - 1) / math.factorial(M) if s < M else 0.0
                     for s in range(M + 1)])
    phi = np.empty(M)
    for i in range(M):
        without = bits[(bits >> i) & 1 == 0]
        phi[i] = np.sum(coef[size[without]] * (v[without | (1 << i)] - v[without]))
    fx = float(_as_matrix(f(x[None, :]), 1)[0, 0])
    return Explanation(float(v[0]), phi, fx, target, 2**M, True, _names(feature_names, M))


# ---------------------------------------------------------------------------
# Forest-specific explanations
# ---------------------------------------------------------------------------


def forest_function(model: QrfModel, level: float = 0.90) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized ``rows -> (point, lower, upper)`` for ``model``."""
    alphas = level_alphas(level)

    def f(rows):
        mean, q = model_outputs(model, rows, alphas)
        return np.column_stack([mean, q[:, 0], q[:, 1]])

    return f


def target_function(model: QrfModel, target: ExplanationTarget, level: float = 0.90) -> Callable:
    """Scalar model output for one explanation target."""
    f = forest_function(model, level)

    def g(rows):
        out = f(rows)
        if target is ExplanationTarget.POINT:
            return out[:, 0]
        if target is ExplanationTarget.LOWER:
            return out[:, 1]
        if target is ExplanationTarget.UPPER:
            return out[:, 2]
        return out[:, 2] - out[:, 1]

    return g


def _target_columns(out: np.ndarray) -> dict[ExplanationTarget, np.ndarray]:
    return {
        ExplanationTarget.POINT: out[:, 0],
        ExplanationTarget.LOWER: out[:, 1],
        ExplanationTarget.UPPER: out[:, 2],
        ExplanationTarget.WIDTH: out[:, 2] - out[:, 1],
    }


@dataclass(frozen=True, eq=False)
class InstanceExplanation:
    explanations: Mapping[ExplanationTarget, Explanation]
    width_from_bounds: np.ndarray | None = None
    width_discrepancy: float | None = None

    def __getitem__(self, target: ExplanationTarget) -> Explanation:
        return self.explanations[target]


def explain_instance(model: QrfModel, x, targets: Sequence[ExplanationTarget] = ALL_TARGETS,
                     background=None, budget: int | None = None, seed: int = 0, level: float = 0.90,
                     groups=None, feature_names: Sequence[str] | None = None) -> InstanceExplanation:
    """Explain several forest outputs at ``x`` with shared coalitions.

    The interval width is explained directly and also recovered as
    ``phi(upper) - phi(lower)``; the largest coordinate difference between the
    two is reported as ``width_discrepancy``.
    """
    if background is None:
        raise ValueError("a background set is required")
    if groups is None and model.encoder is not None:
        groups = model.encoder.original_feature_groups
        feature_names = feature_names or model.encoder.group_names
    f = forest_function(model, level)
    x, background, grp = _prepare(f, x, background, groups)
    M = len(grp)
    budget = default_budget(M) if budget is None else budget
    masks, weights, exact = sample_coalitions(M, budget, np.random.default_rng(seed))
    ends = np.vstack([np.zeros(M, dtype=bool), np.ones(M, dtype=bool)])
    vals = coalition_values(f, x, np.vstack([ends, masks]), background, grp)
    fx_all = f(x[None, :])
    cols = _target_columns(vals)
    fx_cols = _target_columns(fx_all)
    order = list(ALL_TARGETS)
    V = np.column_stack([cols[t] for t in order])
    base = V[0]
    fx = np.array([fx_cols[t][0] for t in order])
    phi = solve_kernel_wls(masks, weights, V[2:], base, fx)
    names = _names(feature_names, M)
    result = {}
    for j, t in enumerate(order):
        if t in targets:
            result[t] = Explanation(float(base[j]), phi[j], float(fx[j]), t, len(masks), exact, names)
    wanted = set(targets)
    width_b = disc = None
    if ExplanationTarget.WIDTH in wanted:
        width_b = phi[order.index(ExplanationTarget.UPPER)] - phi[order.index(ExplanationTarget.LOWER)]
        disc = float(np.max(np.abs(width_b - phi[order.index(ExplanationTarget.WIDTH)]))) if M else 0.0
    return InstanceExplanation(result, width_b, disc)


def instance_seed(seed: int, instance_id: int) -> int:
    return int(np.random.SeedSequence([seed, instance_id]).generate_state(1, dtype=np.uint64)[0])


def explain_many(model: QrfModel, X: np.ndarray, instance_ids: Sequence[int], background: np.ndarray,
                 targets: Sequence[ExplanationTarget] = ALL_TARGETS, budget: int | None = None,
                 seed: int = 0, level: float = 0.90, workers: int = 1) -> list[InstanceExplanation]:
    """Explain rows of ``X``; RNG per instance comes from ``(seed, instance_id)``."""

    def one(args):
        row, iid = args
        return explain_instance(model, row, targets, background, budget, instance_seed(seed, int(iid)), level)

    jobs = list(zip(np.atleast_2d(X), instance_ids))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, jobs))
    return [one(j) for j in jobs]


def sample_background(X: np.ndarray, size: int = 100, seed: int = 0) -> np.ndarray:
    """Uniform subsample of training rows without replacement."""
    X = np.atleast_2d(X)
    if size >= len(X):
        return X.copy()
    idx = np.sort(np.random.default_rng(seed).choice(len(X), size=size, replace=False))
    return X[idx]


# ---------------------------------------------------------------------------
# Aggregations and exports
# ---------------------------------------------------------------------------


def global_importance(explanations: Sequence[Explanation]) -> list[tuple[str, float]]:
    """Mean absolute attribution per feature, sorted descending (stable)."""
    if not explanations:
        raise EmptyInput("no explanations to aggregate")
    names = explanations[0].feature_names
    if any(e.feature_names != names for e in explanations):
        raise ShapSchemaMismatch("explanations use different feature sets")
    imp = np.mean(np.abs(np.vstack([e.phi for e in explanations])), axis=0)
    order = sorted(range(len(names)), key=lambda j: -imp[j])
    return [(names[j], float(imp[j])) for j in order]


def summary_data(explanations: Sequence[Explanation], feature_values: Sequence[Mapping],
                 top_k: int | None = 10) -> list[tuple[str, object, float]]:
    """Long-format ``(feature, value, phi)`` rows ordered by global importance."""
    if len(explanations) != len(feature_values):
        raise LengthMismatch("explanations and feature values differ in length")
    ranking = [name for name, _ in global_importance(explanations)]
    if top_k is not None:
        ranking = ranking[:top_k]
    rows = []
    for name in ranking:
        for e, vals in zip(explanations, feature_values):
            rows.append((name, vals[name], float(e.phi[e.feature_names.index(name)])))
    return rows


def dependence_data(explanations: Sequence[Explanation], feature_values: Sequence[Mapping],
                    primary: str, color: str, profiles: Sequence[str] | None = None,
                    profile: str | None = None) -> list[tuple[object, float, object]]:
    """Per-instance ``(primary value, phi of primary, color value)`` triples.

    With ``profile`` set, only instances whose entry in ``profiles`` matches
    are kept.
    """
    if len(explanations) != len(feature_values):
        raise LengthMismatch("explanations and feature values differ in length")
    if explanations:
        for name in (primary, color):
            if name not in explanations[0].feature_names:
                raise UnknownFeature(name)
    rows = []
    for i, (e, vals) in enumerate(zip(explanations, feature_values)):
        if profile is not None and (profiles is None or profiles[i] != profile):
            continue
        rows.append((vals[primary], float(e.phi[e.feature_names.index(primary)]), vals[color]))
    return rows


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_explanations(items: Sequence[tuple[object, Explanation, Mapping]], sink: TextIO) -> None:
    """CSV ``instance_id,target,feature,feature_value,phi,intercept,fx``."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["instance_id", "target", "feature", "feature_value", "phi", "intercept", "fx"])
    for iid, e, vals in items:
        for name, phi in zip(e.feature_names, e.phi):
            writer.writerow([iid, e.target.value if e.target else "", name, _cell(vals.get(name)),
                             repr(float(phi)), repr(e.intercept), repr(e.fx)])


def write_importance(importance: Sequence[tuple[str, float]], sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["feature", "mean_abs_phi"])
    for name, v in importance:
        writer.writerow([name, repr(v)])
