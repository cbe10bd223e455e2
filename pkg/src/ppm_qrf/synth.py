"""Synthetic manufacturing event logs with known duration distributions.

Every event's processing time is log-normal with location and scale fixed by
its activity, its case attributes and its resource, so true conditional
quantiles are available in closed form for checking interval coverage.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from statistics import NormalDist
from typing import Mapping, TextIO

import numpy as np

from .event_log import CATEGORICAL, NUMERIC, AttributeSpec, Event, EventLog, Trace

ACTIVITY_NAMES = (
    "Laser_Cutting", "Plasma_Cutting", "Sawing", "Deburring", "Edge_Bead", "Rolling",
    "Dishing_Press_1", "Dishing_Press_2", "Flanging", "Spinning", "Deep_Drawing", "Bending",
    "Tack_Welding", "Plasma_Welding", "TIG_Welding", "Submerged_Arc_Welding", "Grinding",
    "Polishing", "Pickling", "Annealing", "Calibrating", "Drilling", "Milling", "Turning",
    "Leak_Testing", "X_Ray_Inspection", "Dimension_Check", "Marking", "Packing", "Shipping_Prep",
)

ATTRIBUTE_SCHEMA = {
    "Quantity": AttributeSpec(NUMERIC),
    "Weight": AttributeSpec(NUMERIC),
    "Sheet_Width": AttributeSpec(NUMERIC),
    "Bend_Radius_S": AttributeSpec(NUMERIC),
    "Diam_Base": AttributeSpec(NUMERIC),
    "article_group": AttributeSpec(CATEGORICAL),
    "material": AttributeSpec(CATEGORICAL),
    "resource": AttributeSpec(CATEGORICAL),
}

MATERIALS = ("stainless", "aluminum", "carbon")

# log-space effects; signs are fixed so attribution checks know what to expect
DEFAULT_COEFFICIENTS = {
    "log_quantity": 0.30,         # location per log(Quantity)
    "bend_radius": 0.0008,        # location per mm above 500
    "sheet_width": -0.03,         # location per mm above 10
    "diam_base": 0.0002,          # location per mm above 1500
    "weight": 0.0004,             # location per kg above 250
    "scale_bend_radius": 0.0006,  # log-scale per mm above 500
    "scale_sheet_width": -0.03,   # log-scale per mm above 10
}
MATERIAL_EFFECT = {"stainless": 0.15, "aluminum": -0.10, "carbon": 0.0}


class InvalidConfig(ValueError):
    pass


class UnknownEvent(KeyError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_cases: int = 500
    n_activities: int = 30
    seed: int = 7
    min_length: int = 2
    max_length: int = 8
    mean_trace_length: float = 4.6
    n_article_groups: int = 6
    resources_per_activity: int = 2
    quantity_range: tuple[int, int] = (1, 50)
    weight_range: tuple[float, float] = (5.0, 500.0)
    sheet_width_range: tuple[int, int] = (2, 20)
    bend_radius_range: tuple[int, int] = (100, 1000)
    diam_base_range: tuple[int, int] = (200, 3000)
    base_median_range: tuple[float, float] = (10.0, 110.0)  # minutes
    sigma_range: tuple[float, float] = (0.55, 0.95)
    coefficients: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    mean_interarrival_min: float = 90.0
    mean_wait_min: float = 45.0
    origin: str = "2022-01-03T06:00:00+00:00"

    def validate(self) -> None:
        if self.n_cases < 1:
            raise InvalidConfig("n_cases must be >= 1")
        if not 1 <= self.n_activities <= len(ACTIVITY_NAMES):
            raise InvalidConfig(f"n_activities must lie in [1, {len(ACTIVITY_NAMES)}]")
        if not 1 <= self.min_length <= self.max_length:
            raise InvalidConfig("need 1 <= min_length <= max_length")
        if self.max_length > self.n_activities:
            raise InvalidConfig("max_length cannot exceed n_activities (activities are distinct per case)")
        if not self.min_length <= self.mean_trace_length <= self.max_length:
            raise InvalidConfig("mean_trace_length must lie between min_length and max_length")
        if self.n_article_groups < 1 or self.resources_per_activity < 1:
            raise InvalidConfig("article groups and resources must be >= 1")
        if self.sigma_range[0] <= 0:
            raise InvalidConfig("sigma must be positive")
        missing = set(DEFAULT_COEFFICIENTS) - set(self.coefficients)
        if missing:
            raise InvalidConfig(f"missing coefficients: {sorted(missing)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coefficients"] = dict(self.coefficients)
        return d


@dataclass(frozen=True)
class GroundTruth:
    """Log-normal (mu, sigma) per generated event, keyed by (case_id, index)."""

    records: tuple[tuple[str, int, str, float, float, float], ...]  # case, idx, activity, t_start, mu, sigma

    def __post_init__(self):
        index = {}
        for rec in self.records:
            if rec[5] <= 0:
                raise ValueError("scale must be positive")
            index[(rec[0], rec[1])] = rec
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_by_start", {(r[0], r[3], r[2]): r for r in self.records})

    def __len__(self):
        return len(self.records)

    def params(self, case_id: str, event_index: int) -> tuple[float, float]:
        try:
            rec = self._index[(case_id, event_index)]
        except KeyError:
            raise UnknownEvent((case_id, event_index)) from None
        return rec[4], rec[5]

    def params_for_event(self, event: Event) -> tuple[float, float]:
        rec = self._by_start.get((event.case_id, event.t_start, event.activity))
        if rec is None:
            raise UnknownEvent((event.case_id, event.t_start, event.activity))
        return rec[4], rec[5]

    def to_dict(self) -> dict:
        return {"records": [
            {"case_id": c, "event_index": i, "activity": a, "t_start": t, "mu": mu, "sigma": s}
            for c, i, a, t, mu, s in self.records
        ]}

    @classmethod
    def from_dict(cls, doc) -> "GroundTruth":
        return cls(tuple((r["case_id"], int(r["event_index"]), r["activity"], float(r["t_start"]),
                          float(r["mu"]), float(r["sigma"])) for r in doc["records"]))

    def dump(self, sink: TextIO) -> None:
        json.dump(self.to_dict(), sink, separators=(",", ":"))


def true_quantile(truth: GroundTruth, event, alpha: float) -> float:
    """``exp(mu + sigma * Phi^-1(alpha))`` in minutes.

    ``event`` is an :class:`Event` or a ``(case_id, event_index)`` pair.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    mu, sigma = truth.params_for_event(event) if isinstance(event, Event) else truth.params(*event)
    return math.exp(mu + sigma * NormalDist().inv_cdf(alpha))


def _length_probability(cfg: GeneratorConfig) -> float:
    span = cfg.max_length - cfg.min_length
    return 0.0 if span == 0 else (cfg.mean_trace_length - cfg.min_length) / span


def generate_log(config: GeneratorConfig = GeneratorConfig()) -> tuple[EventLog, GroundTruth]:
    """Draw ``config.n_cases`` cases; deterministic given ``config.seed``."""
    cfg = config
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    coef = cfg.coefficients
    acts = ACTIVITY_NAMES[: cfg.n_activities]
    lo, hi = cfg.base_median_range
    base_mu = np.log(rng.uniform(lo, hi, size=len(acts)))
    base_sigma = rng.uniform(*cfg.sigma_range, size=len(acts))
    resource_effect = rng.normal(0.0, 0.1, size=(len(acts), cfg.resources_per_activity))
    routing = rng.dirichlet(np.full(len(acts), 0.8), size=cfg.n_article_groups)
    routing = 0.5 * routing + 0.5 / len(acts)  # every activity stays reachable
    groups = [f"AG{g + 1}" for g in range(cfg.n_article_groups)]
    p_len = _length_probability(cfg)
    span = cfg.max_length - cfg.min_length

    t = datetime.fromisoformat(cfg.origin).astimezone(timezone.utc).timestamp()
    traces, records = [], []
    width = max(6, len(str(cfg.n_cases)))
    for c in range(cfg.n_cases):
        case_id = f"C{c:0{width}d}"
        t += round(rng.exponential(cfg.mean_interarrival_min) * 60)
        length = cfg.min_length + (int(rng.binomial(span, p_len)) if span else 0)
        g = int(rng.integers(cfg.n_article_groups))
        chosen = np.sort(rng.choice(len(acts), size=length, replace=False, p=routing[g]))
        quantity = int(rng.integers(cfg.quantity_range[0], cfg.quantity_range[1] + 1))
        weight = round(float(rng.uniform(*cfg.weight_range)), 1)
        sheet = int(rng.integers(cfg.sheet_width_range[0], cfg.sheet_width_range[1] + 1))
        bend = int(rng.integers(cfg.bend_radius_range[0] // 50, cfg.bend_radius_range[1] // 50 + 1)) * 50
        diam = int(rng.integers(cfg.diam_base_range[0], cfg.diam_base_range[1] + 1))
        material = MATERIALS[int(rng.integers(len(MATERIALS)))]
        case_attrs = {
            "Quantity": float(quantity), "Weight": weight, "Sheet_Width": float(sheet),
            "Bend_Radius_S": float(bend), "Diam_Base": float(diam),
            "article_group": groups[g], "material": material,
        }
        shift = (coef["log_quantity"] * math.log(quantity)
                 + coef["bend_radius"] * (bend - 500)
                 + coef["sheet_width"] * (sheet - 10)
                 + coef["diam_base"] * (diam - 1500)
                 + coef["weight"] * (weight - 250)
                 + MATERIAL_EFFECT[material])
        scale = math.exp(coef["scale_bend_radius"] * (bend - 500) + coef["scale_sheet_width"] * (sheet - 10))
        clock = t
        events = []
        for i, a in enumerate(chosen):
            r = int(rng.integers(cfg.resources_per_activity))
            mu = float(base_mu[a] + shift + resource_effect[a, r] - 0.3 * math.log(25))
            sigma = float(base_sigma[a] * scale)
            minutes = math.exp(mu + sigma * rng.standard_normal())
            start = clock
            complete = start + round(minutes * 60)
            events.append(Event(acts[a], case_id, float(start), float(complete),
                                {**case_attrs, "resource": f"{acts[a]}_M{r + 1}"}))
            records.append((case_id, i, acts[a], float(start), mu, sigma))
            clock = complete + round(rng.exponential(cfg.mean_wait_min) * 60)
        traces.append(Trace(case_id, tuple(events)))
    return EventLog(tuple(traces), dict(ATTRIBUTE_SCHEMA)), GroundTruth(tuple(records))


def log_summary(log: EventLog) -> dict:
    """Case/event counts and processing-time statistics in minutes."""
    durations = np.array([(e.t_complete - e.t_start) / 60.0 for t in log.traces for e in t])
    return {
        "cases": len(log),
        "events": int(len(durations)),
        "activities": len({e.activity for t in log.traces for e in t}),
        "mean_processing_time": float(durations.mean()),
        "std_processing_time": float(durations.std()),
        "mean_trace_length": float(len(durations) / len(log)),
    }
