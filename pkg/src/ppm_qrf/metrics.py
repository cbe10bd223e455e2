"""Point and interval quality metrics (all durations in minutes)."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

DEFAULT_EPSILON = 1e-6


class MetricsError(ValueError):
    pass


class LengthMismatch(MetricsError):
    pass


class EmptyInput(MetricsError):
    pass


class AllExcluded(MetricsError):
    pass


@dataclass(frozen=True)
class PointMetrics:
    rmse: float
    mae: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IntervalMetrics:
    picp: float
    mpiw: float
    mrpiw: float
    n: int
    n_excluded_rwidth: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CoverageBreakdown:
    below_lower: float
    above_upper: float
    below_lower_given_miss: float | None
    above_upper_given_miss: float | None
    n_miss: int
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def _vectors(*arrays, names=None):
    out = [np.asarray(a, dtype=float).ravel() for a in arrays]
    n = len(out[0])
    if any(len(a) != n for a in out):
        raise LengthMismatch(f"input lengths differ: {[len(a) for a in out]}")
    if n == 0:
        raise EmptyInput("metrics need at least one instance")
    return out


def point_metrics(actual: Sequence[float], predicted: Sequence[float]) -> PointMetrics:
    y, yhat = _vectors(actual, predicted)
    err = y - yhat
    return PointMetrics(float(np.sqrt(np.mean(err * err))), float(np.mean(np.abs(err))), len(y))


def _bounds(intervals):
    """Accept a sequence of PredictionInterval or a (lower, upper, point) triple of arrays."""
    if isinstance(intervals, tuple) and len(intervals) == 3 and np.ndim(intervals[0]) == 1:
        return intervals
    if hasattr(intervals, "lower") and hasattr(intervals, "point"):
        return intervals.lower, intervals.upper, intervals.point
    lower = [iv.lower for iv in intervals]
    upper = [iv.upper for iv in intervals]
    point = [iv.point for iv in intervals]
    return lower, upper, point


def interval_metrics(actual, intervals, epsilon: float = DEFAULT_EPSILON) -> IntervalMetrics:
    """PICP over closed intervals, MPIW, and MRPIW over points above ``epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    y, lo, hi, pt = _vectors(actual, *_bounds(intervals))
    covered = (lo <= y) & (y <= hi)
    width = hi - lo
    keep = pt > epsilon
    if not keep.any():
        raise AllExcluded(f"every point prediction is <= {epsilon}; rWidth undefined")
    rwidth = width[keep] / pt[keep]
    return IntervalMetrics(
        picp=float(np.mean(covered)),
        mpiw=float(np.mean(width)),
        mrpiw=float(np.mean(rwidth)),
        n=len(y),
        n_excluded_rwidth=int((~keep).sum()),
    )


def coverage_breakdown(actual, intervals) -> CoverageBreakdown:
    """Share of instances falling below / above their interval."""
    y, lo, hi, _ = _vectors(actual, *_bounds(intervals))
    below = int((y < lo).sum())
    above = int((y > hi).sum())
    n = len(y)
    miss = below + above
    return CoverageBreakdown(
        below_lower=below / n,
        above_upper=above / n,
        below_lower_given_miss=below / miss if miss else None,
        above_upper_given_miss=above / miss if miss else None,
        n_miss=miss,
        n=n,
    )


def evaluation_report(actual, intervals, epsilon: float = DEFAULT_EPSILON) -> dict:
    """Point + interval metrics in one JSON-ready dict.

    Interval metrics are ``None`` when every point prediction is excluded.
    """
    lo, hi, pt = (np.asarray(v, dtype=float) for v in _bounds(intervals))
    report = {"point": point_metrics(actual, pt).to_dict()}
    try:
        report["interval"] = interval_metrics(actual, (lo, hi, pt), epsilon).to_dict()
    except AllExcluded:
        report["interval"] = None
    report["coverage"] = coverage_breakdown(actual, (lo, hi, pt)).to_dict()
    return report
