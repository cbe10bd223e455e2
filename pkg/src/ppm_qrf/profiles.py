"""Low/medium/high uncertainty profiles from rWidth percentile cuts."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence, TextIO

import numpy as np

from .metrics import AllExcluded, DEFAULT_EPSILON, EmptyInput, interval_metrics, point_metrics


class ProfileError(ValueError):
    pass


class TooFewInstances(ProfileError):
    pass


class NonFiniteInput(ProfileError):
    pass


class UncertaintyProfile(enum.IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class ProfileThresholds:
    low_cut: float
    high_cut: float
    p_low: float = 25.0
    p_high: float = 75.0
    n_calibration: int = 0

    def __post_init__(self):
        if not 0 < self.p_low < self.p_high < 100:
            raise ValueError("percentiles must satisfy 0 < p_low < p_high < 100")
        if self.low_cut > self.high_cut:
            raise ValueError("low_cut exceeds high_cut")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc) -> "ProfileThresholds":
        return cls(float(doc["low_cut"]), float(doc["high_cut"]), float(doc["p_low"]),
                   float(doc["p_high"]), int(doc["n_calibration"]))

    def dump(self, sink: TextIO) -> None:
        json.dump(self.to_dict(), sink, indent=2, sort_keys=True)


def calibrate_thresholds(validation_rwidths: Sequence[float], p_low: float = 25.0,
                         p_high: float = 75.0) -> ProfileThresholds:
    """Percentile cuts with linear interpolation at index ``p/100 * (n - 1)``."""
    r = np.asarray(validation_rwidths, dtype=float).ravel()
    if len(r) < 4:
        raise TooFewInstances(f"need at least 4 rWidth values, got {len(r)}")
    if not np.all(np.isfinite(r)):
        raise NonFiniteInput("rWidth values must be finite")
    r = np.sort(r)
    low, high = np.percentile(r, [p_low, p_high], method="linear")
    return ProfileThresholds(float(low), float(high), float(p_low), float(p_high), len(r))


def assign_profile(rwidth: float, thresholds: ProfileThresholds) -> UncertaintyProfile:
    """Strictly below the low cut is LOW, strictly above the high cut is HIGH."""
    if not math.isfinite(rwidth):
        raise NonFiniteInput(f"rWidth must be finite, got {rwidth}")
    if rwidth < thresholds.low_cut:
        return UncertaintyProfile.LOW
    if rwidth > thresholds.high_cut:
        return UncertaintyProfile.HIGH
    return UncertaintyProfile.MEDIUM


def assign_profiles(rwidths: Sequence[float], thresholds: ProfileThresholds) -> list[UncertaintyProfile]:
    return [assign_profile(float(r), thresholds) for r in rwidths]


def per_profile_report(actual, lower, upper, point, thresholds: ProfileThresholds,
                       epsilon: float = DEFAULT_EPSILON) -> dict:
    """Metrics and instance share per profile.

    Instances whose point prediction is at most ``epsilon`` have no rWidth
    and are counted under ``"unassigned"``.  Profiles without instances get
    ``n = 0`` and ``None`` metrics.
    """
    y, lo, hi, pt = (np.asarray(v, dtype=float) for v in (actual, lower, upper, point))
    n = len(y)
    if n == 0:
        raise EmptyInput("profile report needs at least one instance")
    labels = profile_labels(lo, hi, pt, thresholds, epsilon)
    report = {}
    for prof in UncertaintyProfile:
        mask = labels == prof.label
        k = int(mask.sum())
        entry = {"n": k, "share": k / n, "point": None, "interval": None}
        if k:
            entry["point"] = point_metrics(y[mask], pt[mask]).to_dict()
            try:
                entry["interval"] = interval_metrics(y[mask], (lo[mask], hi[mask], pt[mask]), epsilon).to_dict()
            except AllExcluded:
                pass
        report[prof.label] = entry
    report["unassigned"] = {"n": int((labels == "unassigned").sum())}
    return report


def profile_labels(lower, upper, point, thresholds: ProfileThresholds,
                   epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    lo, hi, pt = (np.asarray(v, dtype=float) for v in (lower, upper, point))
    out = np.empty(len(pt), dtype=object)
    for i in range(len(pt)):
        if pt[i] > epsilon:
            out[i] = assign_profile((hi[i] - lo[i]) / pt[i], thresholds).label
        else:
            out[i] = "unassigned"
    return out


def write_assignments(instance_ids, rwidths, labels, sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["instance_id", "rwidth", "profile"])
    for i, r, lab in zip(instance_ids, rwidths, labels):
        writer.writerow([i, "" if not math.isfinite(r) else repr(float(r)), lab])
