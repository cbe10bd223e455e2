"""Event-log ingestion and supervised dataset construction.

An event log is a CSV with one row per executed activity.  Rows are grouped
into traces by case id, each event is labeled with its processing time in
minutes, and every event is turned into a fixed-length numeric feature vector
made of the activity, case/event attributes and a few intra-case features.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

CORE_COLUMNS = ("case_id", "activity", "t_start", "t_complete")
NULL_ACTIVITY = "null"
MEAN_STAT_FEATURE = "MEAN_stat_Processing_Time"
DEFAULT_RATIOS = (0.85, 0.075, 0.075)


class EventLogError(ValueError):
    """Base class for event-log and dataset errors."""


class MissingColumn(EventLogError):
    pass


class BadTimestamp(EventLogError):
    pass


class EmptyLog(EventLogError):
    pass


class MalformedRow(EventLogError):
    pass


class SchemaMismatch(EventLogError):
    pass


class EmptyDataset(EventLogError):
    pass


class TooFewCases(EventLogError):
    pass


# ---------------------------------------------------------------------------
# Attribute schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributeSpec:
    kind: str
    optional: bool = False

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown attribute kind {self.kind!r}")


AttributeSchema = Mapping[str, AttributeSpec]


def attribute_schema_from_dict(doc: Mapping) -> dict[str, AttributeSpec]:
    """Build a schema from ``{"col": {"kind": ..., "optional": ...}}``."""
    schema = {}
    for name, spec in doc.items():
        if name in CORE_COLUMNS:
            raise ValueError(f"attribute name {name!r} collides with a core column")
        if isinstance(spec, str):
            spec = {"kind": spec}
        schema[name] = AttributeSpec(spec["kind"], bool(spec.get("optional", False)))
    return schema


def attribute_schema_to_dict(schema: AttributeSchema) -> dict:
    out = {}
    for name, spec in schema.items():
        entry = {"kind": spec.kind}
        if spec.optional:
            entry["optional"] = True
        out[name] = entry
    return out


def load_attribute_schema(path) -> dict[str, AttributeSpec]:
    with open(path, encoding="utf-8") as fh:
        return attribute_schema_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Events, traces, logs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    activity: str
    case_id: str
    t_start: float
    t_complete: float
    attributes: Mapping[str, float | str | None] = field(default_factory=dict)

    def __post_init__(self):
        if not self.activity:
            raise MalformedRow("event activity must be non-empty")
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_complete)):
            raise BadTimestamp("timestamps must be finite")
        if self.t_complete < self.t_start:
            raise BadTimestamp(
                f"case {self.case_id}: t_complete {self.t_complete} precedes t_start {self.t_start}"
            )
        object.__setattr__(self, "attributes", MappingProxyType(dict(self.attributes)))

    def __hash__(self):
        return hash((self.activity, self.case_id, self.t_start, self.t_complete,
                     tuple(self.attributes.items())))


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for ev in self.events:
            if ev.case_id != self.case_id:
                raise EventLogError(f"event of case {ev.case_id} placed in trace {self.case_id}")
        for a, b in zip(self.events, self.events[1:]):
            if b.t_start < a.t_start:
                raise EventLogError(f"trace {self.case_id} is not sorted by t_start")

    def __len__(self):
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    @property
    def first_start(self) -> float:
        return self.events[0].t_start


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]
    attribute_schema: Mapping[str, AttributeSpec]

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        ids = [t.case_id for t in self.traces]
        if len(set(ids)) != len(ids):
            raise EventLogError("case ids must be unique across traces")
        object.__setattr__(self, "attribute_schema", MappingProxyType(dict(self.attribute_schema)))

    def __len__(self):
        return len(self.traces)

    @property
    def n_events(self) -> int:
        return sum(len(t) for t in self.traces)

    def trace(self, case_id: str) -> Trace:
        for t in self.traces:
            if t.case_id == case_id:
                return t
        raise KeyError(case_id)


def parse_timestamp(text: str) -> float:
    """Epoch seconds from an integer/decimal string or an ISO-8601 string."""
    text = text.strip()
    if not text:
        raise BadTimestamp("empty timestamp")
    try:
        return float(int(text))
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        value = None
    if value is not None:
        if not math.isfinite(value):
            raise BadTimestamp(f"non-finite timestamp {text!r}")
        return value
    iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    try:
        dt = datetime.fromisoformat(iso)
    except ValueError as exc:
        raise BadTimestamp(f"unparseable timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _format_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(float(value))


def _parse_attribute(name: str, spec: AttributeSpec, raw: str, line: int):
    if raw == "":
        if spec.optional:
            return None
        raise SchemaMismatch(f"line {line}: required attribute {name!r} is empty")
    if spec.kind == NUMERIC:
        try:
            value = float(raw)
        except ValueError as exc:
            raise SchemaMismatch(f"line {line}: attribute {name!r} is not numeric: {raw!r}") from exc
        if not math.isfinite(value):
            raise SchemaMismatch(f"line {line}: attribute {name!r} is not finite")
        return value
    return raw


def parse_event_log(source: TextIO | str, schema: AttributeSchema) -> EventLog:
    """Parse the event-log CSV format into an :class:`EventLog`.

    ``source`` is a text stream or the CSV text itself.  Rows are grouped by
    case id and sorted by (t_start, t_complete, file order).  Malformed rows
    raise; nothing is skipped.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyLog("event log has no header row") from None
    header = [h.strip() for h in header]
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    for col in (*CORE_COLUMNS, *schema):
        if col not in header:
            raise MissingColumn(f"column {col!r} missing from event-log header")
    pos = {name: header.index(name) for name in (*CORE_COLUMNS, *schema)}

    grouped: dict[str, list[tuple[float, float, int, Event]]] = defaultdict(list)
    for order, row in enumerate(reader):
        line = order + 2
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise MalformedRow(f"line {line}: expected {len(header)} fields, got {len(row)}")
        case_id = row[pos["case_id"]]
        activity = row[pos["activity"]]
        if not case_id or not activity:
            raise MalformedRow(f"line {line}: empty case_id or activity")
        try:
            t_start = parse_timestamp(row[pos["t_start"]])
            t_complete = parse_timestamp(row[pos["t_complete"]])
        except BadTimestamp as exc:
            raise BadTimestamp(f"line {line}: {exc}") from None
        if t_complete < t_start:
            raise BadTimestamp(f"line {line}: t_complete precedes t_start")
        attrs = {name: _parse_attribute(name, spec, row[pos[name]], line) for name, spec in schema.items()}
        ev = Event(activity, case_id, t_start, t_complete, attrs)
        grouped[case_id].append((t_start, t_complete, order, ev))

    if not grouped:
        raise EmptyLog("event log contains no events")
    traces = []
    for case_id in sorted(grouped):
        rows = sorted(grouped[case_id], key=lambda r: r[:3])
        traces.append(Trace(case_id, tuple(r[3] for r in rows)))
    return EventLog(tuple(traces), dict(schema))


def read_event_log(path, schema: AttributeSchema) -> EventLog:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_event_log(fh, schema)


def write_event_log(log: EventLog, sink: TextIO) -> None:
    """Serialize ``log`` in the format accepted by :func:`parse_event_log`."""
    attrs = list(log.attribute_schema)
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow([*CORE_COLUMNS, *attrs])
    for trace in log.traces:
        for ev in trace:
            cells = [ev.case_id, ev.activity, _format_number(ev.t_start), _format_number(ev.t_complete)]
            for name in attrs:
                v = ev.attributes.get(name)
                if v is None:
                    cells.append("")
                elif log.attribute_schema[name].kind == NUMERIC:
                    cells.append(_format_number(v))
                else:
                    cells.append(str(v))
            writer.writerow(cells)


# ---------------------------------------------------------------------------
# Partial traces and labeling
# ---------------------------------------------------------------------------


def prefix_of(trace: Trace, i: int) -> Trace:
    """First ``min(i, len(trace))`` events."""
    if i < 1:
        raise ValueError("prefix length must be >= 1")
    if len(trace) == 0:
        raise ValueError("trace is empty")
    return Trace(trace.case_id, trace.events[: min(i, len(trace))])


def suffix_of(trace: Trace, i: int) -> Trace:
    """Events ``w..n`` with ``w = max(n - i + 1, 1)`` (1-based)."""
    if i < 1:
        raise ValueError("suffix length must be >= 1")
    n = len(trace)
    if n == 0:
        raise ValueError("trace is empty")
    w = max(n - i + 1, 1)
    return Trace(trace.case_id, trace.events[w - 1 :])


def event_processing_time(event: Event) -> float:
    """Processing time of ``event`` in minutes."""
    return (event.t_complete - event.t_start) / 60.0


# ---------------------------------------------------------------------------
# Activity statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActivityStats:
    """Per-activity processing-time aggregates (minutes, population std)."""

    mean: Mapping[str, float]
    std: Mapping[str, float]
    count: Mapping[str, int]
    global_mean: float

    def mean_for(self, activity: str) -> float:
        return self.mean.get(activity, self.global_mean)

    def to_dict(self) -> dict:
        return {
            "mean": dict(self.mean),
            "std": dict(self.std),
            "count": dict(self.count),
            "global_mean": self.global_mean,
            "std_kind": "population",
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ActivityStats":
        return cls(dict(doc["mean"]), dict(doc["std"]), {k: int(v) for k, v in doc["count"].items()},
                   float(doc["global_mean"]))


def activity_stats_from(activities: Sequence[str], targets: Sequence[float]) -> ActivityStats:
    if len(activities) == 0:
        raise EmptyDataset("cannot compute activity statistics of an empty dataset")
    buckets: dict[str, list[float]] = defaultdict(list)
    for a, y in zip(activities, targets):
        buckets[a].append(float(y))
    mean, std, count = {}, {}, {}
    for a in sorted(buckets):
        vals = np.asarray(buckets[a])
        mean[a] = float(vals.mean())
        std[a] = float(vals.std())
        count[a] = len(vals)
    return ActivityStats(mean, std, count, float(np.mean(np.asarray(targets, dtype=float))))


def compute_activity_stats(train: "Dataset") -> ActivityStats:
    """Aggregate training targets per activity."""
    return activity_stats_from(train.activities, train.y)


# ---------------------------------------------------------------------------
# Feature encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureGroup:
    """One original feature and the encoded columns that carry it."""

    name: str
    kind: str
    columns: tuple[int, ...]
    categories: tuple[str, ...] = ()


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    feature_names: tuple[str, ...]
    original_feature_groups: Mapping[str, tuple[int, ...]]

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class FeatureEncoder:
    """Encoding schema fitted on training traces.

    Columns, in order: activity one-hot, attributes in schema order (numeric
    pass-through, categorical one-hot), event position (1-based), trace
    length, previous-activity one-hot (with a ``null`` column for the first
    event) and the activity's mean training processing time.
    """

    activities: tuple[str, ...]
    attributes: tuple[tuple[str, str, bool], ...]  # (name, kind, optional)
    categories: Mapping[str, tuple[str, ...]]
    numeric_fill: Mapping[str, float]
    stats: ActivityStats

    @classmethod
    def fit(cls, traces: Iterable[Trace], schema: AttributeSchema, stats: ActivityStats) -> "FeatureEncoder":
        traces = list(traces)
        activities = sorted({ev.activity for t in traces for ev in t})
        if not activities:
            raise EmptyDataset("no training events to fit the encoder on")
        cats: dict[str, set] = {n: set() for n, s in schema.items() if s.kind == CATEGORICAL}
        sums: dict[str, list[float]] = {n: [] for n, s in schema.items() if s.kind == NUMERIC}
        for t in traces:
            for ev in t:
                for name in cats:
                    v = ev.attributes.get(name)
                    if v is not None:
                        cats[name].add(str(v))
                for name in sums:
                    v = ev.attributes.get(name)
                    if v is not None:
                        sums[name].append(float(v))
        fill = {n: (float(np.mean(v)) if v else 0.0) for n, v in sums.items()}
        return cls(
            activities=tuple(activities),
            attributes=tuple((n, s.kind, s.optional) for n, s in schema.items()),
            categories={n: tuple(sorted(v)) for n, v in cats.items()},
            numeric_fill=fill,
            stats=stats,
        )

    @cached_property
    def groups(self) -> tuple[FeatureGroup, ...]:
        out = []
        col = 0

        def add(name, kind, width, categories=()):
            nonlocal col
            out.append(FeatureGroup(name, kind, tuple(range(col, col + width)), tuple(categories)))
            col += width

        add("activity", CATEGORICAL, len(self.activities), self.activities)
        for name, kind, _ in self.attributes:
            if kind == NUMERIC:
                add(name, NUMERIC, 1)
            else:
                add(name, CATEGORICAL, len(self.categories[name]), self.categories[name])
        add("event_position", NUMERIC, 1)
        add("trace_length", NUMERIC, 1)
        prev = (NULL_ACTIVITY, *self.activities)
        add("prev_activity", CATEGORICAL, len(prev), prev)
        add(MEAN_STAT_FEATURE, NUMERIC, 1)
        return tuple(out)

    @cached_property
    def feature_names(self) -> tuple[str, ...]:
        names = []
        for g in self.groups:
            if g.kind == NUMERIC:
                names.append(g.name)
            else:
                names.extend(f"{g.name}={c}" for c in g.categories)
        return tuple(names)

    @cached_property
    def original_feature_groups(self) -> Mapping[str, tuple[int, ...]]:
        return MappingProxyType({g.name: g.columns for g in self.groups})

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.groups)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def group(self, name: str) -> FeatureGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def encode(self, trace: Trace, event_index: int) -> np.ndarray:
        return extract_features(trace, event_index, self.stats, self).values

    def decode(self, row: np.ndarray, name: str):
        """Original value of feature ``name`` in encoded ``row``.

        Categorical groups return their category label, or ``None`` when the
        group is all zeros (unseen category); numeric groups return a float.
        """
        g = self.group(name)
        if g.kind == NUMERIC:
            return float(row[g.columns[0]])
        hot = [c for c, col in zip(g.categories, g.columns) if row[col] == 1.0]
        return hot[0] if hot else None

    def to_dict(self) -> dict:
        return {
            "activities": list(self.activities),
            "attributes": [{"name": n, "kind": k, "optional": o} for n, k, o in self.attributes],
            "categories": {k: list(v) for k, v in self.categories.items()},
            "numeric_fill": dict(self.numeric_fill),
            "stats": self.stats.to_dict(),
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FeatureEncoder":
        enc = cls(
            activities=tuple(doc["activities"]),
            attributes=tuple((a["name"], a["kind"], bool(a["optional"])) for a in doc["attributes"]),
            categories={k: tuple(v) for k, v in doc["categories"].items()},
            numeric_fill={k: float(v) for k, v in doc["numeric_fill"].items()},
            stats=ActivityStats.from_dict(doc["stats"]),
        )
        if "feature_names" in doc and list(doc["feature_names"]) != list(enc.feature_names):
            raise SchemaMismatch("stored feature names do not match the reconstructed encoder")
        return enc

    def schema_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def attribute_schema(self) -> dict[str, AttributeSpec]:
        return {n: AttributeSpec(k, o) for n, k, o in self.attributes}


def extract_features(trace: Trace, event_index: int, stats: ActivityStats,
                     encoder: FeatureEncoder) -> FeatureVector:
    """Encode event ``event_index`` of ``trace`` (0-based) with ``encoder``."""
    if not 0 <= event_index < len(trace):
        raise IndexError(f"event index {event_index} outside trace of length {len(trace)}")
    ev = trace[event_index]
    x = np.zeros(encoder.n_features)
    groups = encoder.groups

    def one_hot(group: FeatureGroup, value):
        if value is None:
            return
        try:
            k = group.categories.index(str(value))
        except ValueError:
            return
        x[group.columns[k]] = 1.0

    one_hot(groups[0], ev.activity)
    for g, (name, kind, optional) in zip(groups[1:], encoder.attributes):
        if name not in ev.attributes:
            if not optional:
                raise SchemaMismatch(f"event of case {ev.case_id} lacks attribute {name!r}")
            value = None
        else:
            value = ev.attributes[name]
        if value is None and not optional:
            raise SchemaMismatch(f"event of case {ev.case_id} has empty attribute {name!r}")
        if kind == NUMERIC:
            x[g.columns[0]] = encoder.numeric_fill[name] if value is None else float(value)
        else:
            one_hot(g, value)
    tail = groups[1 + len(encoder.attributes):]
    x[tail[0].columns[0]] = event_index + 1
    x[tail[1].columns[0]] = len(trace)
    prev = trace[event_index - 1].activity if event_index > 0 else NULL_ACTIVITY
    one_hot(tail[2], prev)
    x[tail[3].columns[0]] = stats.mean_for(ev.activity)
    return FeatureVector(x, encoder.feature_names, encoder.original_feature_groups)


# ---------------------------------------------------------------------------
# Datasets and splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded instances: one row of ``X`` per labeled event."""

    X: np.ndarray
    y: np.ndarray
    case_ids: tuple[str, ...]
    activities: tuple[str, ...]
    event_index: np.ndarray
    encoder: FeatureEncoder

    def __post_init__(self):
        n = len(self.y)
        if self.X.shape != (n, self.encoder.n_features):
            raise SchemaMismatch(f"feature matrix shape {self.X.shape} does not match schema")
        if not (len(self.case_ids) == len(self.activities) == len(self.event_index) == n):
            raise ValueError("dataset columns have inconsistent lengths")
        if n and np.min(self.y) < 0:
            raise ValueError("targets must be non-negative")

    def __len__(self):
        return len(self.y)

    def feature_vector(self, i: int) -> FeatureVector:
        return FeatureVector(self.X[i], self.encoder.feature_names, self.encoder.original_feature_groups)

    @property
    def instances(self):
        return [
            (self.feature_vector(i), float(self.y[i]), self.case_ids[i], self.activities[i], int(self.event_index[i]))
            for i in range(len(self))
        ]

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return Dataset(
            self.X[index], self.y[index],
            tuple(self.case_ids[i] for i in index),
            tuple(self.activities[i] for i in index),
            self.event_index[index], self.encoder,
        )


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: Dataset
    validation: Dataset
    test: Dataset
    encoder: FeatureEncoder
    stats: ActivityStats
    case_order: tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]


def labeled_events(traces: Iterable[Trace]):
    """Yield ``(trace, index, target_minutes)`` for every event."""
    for t in traces:
        for i, ev in enumerate(t):
            yield t, i, event_processing_time(ev)


def suffix_traces(trace: Trace) -> list[Trace]:
    """All suffixes ``tl^i`` for ``i = 1..len(trace)``."""
    return [suffix_of(trace, i) for i in range(1, len(trace) + 1)]


def build_dataset(traces: Iterable[Trace], encoder: FeatureEncoder, use_suffixes: bool = False) -> Dataset:
    """Encode every event of ``traces``.

    With ``use_suffixes`` each trace is first expanded into its suffixes and
    every event of every suffix becomes an instance.  Default is full traces.
    """
    traces = list(traces)
    if use_suffixes:
        traces = [s for t in traces for s in suffix_traces(t)]
    rows, ys, cases, acts, idx = [], [], [], [], []
    for t, i, y in labeled_events(traces):
        rows.append(encoder.encode(t, i))
        ys.append(y)
        cases.append(t.case_id)
        acts.append(t[i].activity)
        idx.append(i)
    X = np.vstack(rows) if rows else np.zeros((0, encoder.n_features))
    return Dataset(X, np.asarray(ys, dtype=float), tuple(cases), tuple(acts), np.asarray(idx, dtype=int), encoder)


def split_sizes(n_cases: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    """Case counts per part: ceiling for train, rounded share for validation,
    remainder for test, with every part keeping at least one case."""
    r_train, r_val, _ = ratios
    n_train = math.ceil(r_train * n_cases - 1e-9)
    n_val = math.floor(r_val * n_cases + 0.5 + 1e-9)
    n_train = min(max(n_train, 1), n_cases - 2)
    n_val = min(max(n_val, 1), n_cases - n_train - 1)
    return n_train, n_val, n_cases - n_train - n_val


def chronological_split(log: EventLog, ratios: Sequence[float] = DEFAULT_RATIOS,
                        use_suffixes: bool = False) -> DatasetSplit:
    """Split cases chronologically and encode each part.

    Cases are ordered by their earliest ``t_start`` (ties by case id).  The
    encoder and activity statistics are fitted on the training cases only.
    ``use_suffixes`` expands training traces into their suffixes.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive fractions summing to 1, got {ratios}")
    if len(log) < 3:
        raise TooFewCases(f"need at least 3 cases to split, got {len(log)}")
    order = sorted(log.traces, key=lambda t: (t.first_start, t.case_id))
    n_train, n_val, _ = split_sizes(len(order), ratios)
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])

    targets = [(t[i].activity, y) for t, i, y in labeled_events(parts[0])]
    stats = activity_stats_from([a for a, _ in targets], [y for _, y in targets])
    encoder = FeatureEncoder.fit(parts[0], log.attribute_schema, stats)
    # only training instances are expanded; evaluation keeps each event once
    train = build_dataset(parts[0], encoder, use_suffixes)
    val, test = (build_dataset(p, encoder) for p in parts[1:])
    return DatasetSplit(train, val, test, encoder, stats,
                        tuple(tuple(t.case_id for t in p) for p in parts))


# ---------------------------------------------------------------------------
# Dataset export
# ---------------------------------------------------------------------------

_META = ("case_id", "activity", "event_index")


def write_dataset(ds: Dataset, sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow([*_META, *ds.encoder.feature_names, "target"])
    for i in range(len(ds)):
        writer.writerow([ds.case_ids[i], ds.activities[i], int(ds.event_index[i]),
                         *(_format_number(v) for v in ds.X[i]), _format_number(ds.y[i])])


def read_dataset(source: TextIO, encoder: FeatureEncoder) -> Dataset:
    reader = csv.reader(source)
    header = next(reader, None)
    expected = [*_META, *encoder.feature_names, "target"]
    if header != expected:
        raise SchemaMismatch("dataset columns do not match the encoder's feature names")
    cases, acts, idx, rows, ys = [], [], [], [], []
    for row in reader:
        if not row:
            continue
        cases.append(row[0])
        acts.append(row[1])
        idx.append(int(row[2]))
        rows.append([float(v) for v in row[3:-1]])
        ys.append(float(row[-1]))
    X = np.asarray(rows, dtype=float).reshape(len(rows), encoder.n_features)
    return Dataset(X, np.asarray(ys, dtype=float), tuple(cases), tuple(acts), np.asarray(idx, dtype=int), encoder)
