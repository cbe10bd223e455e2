"""End-to-end pipeline stages operating on one output directory.

Layout of the output directory::

    log.csv, truth.json, schema.json    generated log (``generate``)
    data/                               split datasets and fitted encoder
    tune/                               grid-search leaderboard and best setting
    model/model.json                    trained forest
    predictions/                        validation and test intervals
    profiles/                           thresholds and assignments
    metrics.json                        overall, per-activity and per-profile metrics
    explain/                            SHAP values and aggregates
    plots/                              SVG figures with CSV twins
    report.json                         headline numbers and artifact list
    MANIFEST.json                       stage status and checksums

Every file's bytes depend only on the input log, the configuration and the
seed.  JSON outputs embed ``{"config_hash", "seed"}``; CSV files are listed
in the manifest with the same stamp.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .event_log import (
    CORE_COLUMNS, DEFAULT_RATIOS, AttributeSpec, CATEGORICAL, NUMERIC, Dataset, FeatureEncoder,
    attribute_schema_to_dict, build_dataset, chronological_split,
    load_attribute_schema, read_dataset, read_event_log, write_dataset, write_event_log,
)
from .metrics import DEFAULT_EPSILON, evaluation_report
from .plots import importance_plot, interval_plot, profile_plot, summary_plot
from .profiles import calibrate_thresholds, per_profile_report, profile_labels, ProfileThresholds, write_assignments
from .qrf import (
    BOOTSTRAP, DEFAULT_GRID, FULL, GRID_AXES, Hyperparameters, default_mtry, fit_forest, grid_search,
    level_alphas, load_model, predict_batch, save_model, write_leaderboard,
)
from .shap import (
    ExplanationTarget, explain_many, global_importance, sample_background, write_explanations,
)
from .synth import GeneratorConfig, GroundTruth, generate_log, true_quantile

CONFIG_ENV = "PPM_QRF_CONFIG"
MANIFEST = "MANIFEST.json"
# fields that locate files or cap resources; they never change results
PATH_FIELDS = ("out", "log", "schema", "model", "truth")
RUNTIME_FIELDS = ("workers",)
STAGES = ("generate", "split", "tune", "train", "predict", "profile", "evaluate", "explain", "report")


class ConfigError(ValueError):
    """Invalid configuration or unresolvable path (exit code 2)."""


class StageFailed(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    out: str | None = None
    log: str | None = None
    schema: str | None = None
    model: str | None = None
    truth: str | None = None
    cases: int = 500
    activities: int = 30
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    level: float = 0.90
    tune: bool = False
    grid: dict | None = None
    mtry: int | None = None
    trees: int = 100
    min_n: int = 20
    weight_basis: str = FULL
    use_suffixes: bool = False
    p_low: float = 25.0
    p_high: float = 75.0
    epsilon: float = DEFAULT_EPSILON
    background: int = 20
    budget: int | None = None
    targets: tuple[str, ...] = tuple(t.value for t in ExplanationTarget)
    explain_sample: int = 25
    seed: int = 7
    workers: int = 1

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**dict(doc))
        cfg.normalize()
        return cfg

    def normalize(self) -> None:
        try:
            self.ratios = tuple(float(r) for r in self.ratios)
            if isinstance(self.targets, str):
                self.targets = tuple(t.strip() for t in self.targets.split(",") if t.strip())
            self.targets = tuple(self.targets)
            if self.grid is not None:
                self.grid = {a: [int(v) for v in self.grid.get(a, DEFAULT_GRID[a])] for a in GRID_AXES}
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from None

    def validate(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if len(self.ratios) != 3 or min(self.ratios) <= 0 or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"ratios must be three positive fractions summing to 1, got {self.ratios}")
        if not 0 < self.p_low < self.p_high < 100:
            raise ConfigError("profile percentiles must satisfy 0 < p_low < p_high < 100")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        for name in ("cases", "activities", "trees", "min_n", "background", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1")
        if self.explain_sample < 0:
            raise ConfigError("explain_sample must be >= 0")
        if self.budget is not None and self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.weight_basis not in (FULL, BOOTSTRAP):
            raise ConfigError(f"weight_basis must be {FULL!r} or {BOOTSTRAP!r}")
        valid = {t.value for t in ExplanationTarget}
        bad = [t for t in self.targets if t not in valid]
        if bad or not self.targets:
            raise ConfigError(f"targets must be a non-empty subset of {sorted(valid)}, got {list(self.targets)}")
        if self.grid is not None and any(len(v) == 0 for v in self.grid.values()):
            raise ConfigError("every grid axis needs at least one value")

    def result_fields(self) -> dict:
        d = dataclasses.asdict(self)
        for name in PATH_FIELDS + RUNTIME_FIELDS:
            d.pop(name)
        d["ratios"] = list(self.ratios)
        d["targets"] = list(self.targets)
        return d


def load_config(path: str | None) -> dict:
    """Config file contents; ``path`` falls back to ``$PPM_QRF_CONFIG``."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(cfg: PipelineConfig, log_sha256: str | None) -> str:
    blob = json.dumps({"config": cfg.result_fields(), "log_sha256": log_sha256}, sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _clean(obj):
    """Replace non-finite floats with None so JSON output stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def infer_attribute_schema(path) -> dict[str, AttributeSpec]:
    """Numeric when every non-empty value parses as a float, else categorical."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        cols = [h for h in header if h not in CORE_COLUMNS]
        numeric = {c: True for c in cols}
        optional = {c: False for c in cols}
        pos = {c: header.index(c) for c in cols}
        for row in reader:
            if len(row) != len(header):
                continue
            for c in cols:
                v = row[pos[c]].strip()
                if not v:
                    optional[c] = True
                elif numeric[c]:
                    try:
                        float(v)
                    except ValueError:
                        numeric[c] = False
    return {c: AttributeSpec(NUMERIC if numeric[c] else CATEGORICAL, optional[c]) for c in cols}


@dataclass
class Run:
    """One pipeline invocation against an output directory."""

    cfg: PipelineConfig
    input_log: str | None = None  # extra log to score in ``predict``
    manifest: dict = field(default_factory=dict)
    _log_sha: str | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.cfg.out:
            raise ConfigError("an output directory is required (--out)")
        if not os.path.isdir(self.cfg.out):
            raise ConfigError(f"output directory does not exist: {self.cfg.out}")
        if os.path.isfile(self.path(MANIFEST)):
            with open(self.path(MANIFEST), encoding="utf-8") as fh:
                self.manifest = json.load(fh)
        self.manifest.setdefault("stages", {})
        self.manifest.setdefault("files", {})

    def path(self, *parts) -> str:
        return os.path.join(self.cfg.out, *parts)

    def ensure_dir(self, name: str) -> str:
        d = self.path(name)
        os.makedirs(d, exist_ok=True)
        return d

    @property
    def log_sha256(self) -> str | None:
        if self._log_sha is not None:
            return self._log_sha
        split = self.path("data", "split.json")
        if os.path.isfile(split):
            with open(split, encoding="utf-8") as fh:
                self._log_sha = json.load(fh)["log_sha256"]
        elif self.cfg.log and os.path.isfile(self.cfg.log):
            self._log_sha = sha256_file(self.cfg.log)
        return self._log_sha

    @property
    def stamp(self) -> dict:
        return {"config_hash": config_hash(self.cfg, self.log_sha256), "seed": self.cfg.seed}

    @property
    def stamp_text(self) -> str:
        s = self.stamp
        return f"config_hash={s['config_hash']} seed={s['seed']}"

    def register(self, rel: str) -> None:
        self.manifest["files"][rel.replace(os.sep, "/")] = {"sha256": sha256_file(self.path(rel)), **self.stamp}

    def write_json(self, rel: str, doc: dict) -> None:
        text = json.dumps(_clean({**doc, "stamp": self.stamp}), indent=2, sort_keys=True)
        with open(self.path(rel), "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
        self.register(rel)

    def read_json(self, rel: str) -> dict:
        p = self.path(rel)
        if not os.path.isfile(p):
            raise FileNotFoundError(f"{p} not found; run the stage that produces it first")
        with open(p, encoding="utf-8") as fh:
            return json.load(fh)

    def save_manifest(self) -> None:
        self.manifest.update(self.stamp)
        stages = self.manifest["stages"]
        self.manifest["complete"] = bool(stages) and all(v == "complete" for v in stages.values())
        with open(self.path(MANIFEST), "w", encoding="utf-8") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    # -- loading earlier stage outputs ------------------------------------

    def encoder(self) -> FeatureEncoder:
        return FeatureEncoder.from_dict(self.read_json("data/encoder.json")["encoder"])

    def dataset(self, part: str, encoder: FeatureEncoder | None = None) -> Dataset:
        p = self.path("data", f"{part}.csv")
        if not os.path.isfile(p):
            raise FileNotFoundError(f"{p} not found; run split first")
        with open(p, encoding="utf-8", newline="") as fh:
            return read_dataset(fh, encoder or self.encoder())

    def model_path(self) -> str:
        return self.cfg.model or self.path("model", "model.json")

    def truth_path(self) -> str | None:
        p = self.cfg.truth or self.path("truth.json")
        return p if os.path.isfile(p) else None


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_generate(run: Run) -> None:
    cfg = run.cfg
    log, truth = generate_log(GeneratorConfig(n_cases=cfg.cases, n_activities=cfg.activities, seed=cfg.seed))
    with open(run.path("log.csv"), "w", encoding="utf-8", newline="") as fh:
        write_event_log(log, fh)
    with open(run.path("truth.json"), "w", encoding="utf-8") as fh:
        truth.dump(fh)
    with open(run.path("schema.json"), "w", encoding="utf-8") as fh:
        json.dump(attribute_schema_to_dict(log.attribute_schema), fh, indent=2)
        fh.write("\n")
    cfg.log, cfg.schema, cfg.truth = run.path("log.csv"), run.path("schema.json"), run.path("truth.json")
    run._log_sha = None
    for rel in ("log.csv", "truth.json", "schema.json"):
        run.register(rel)


def _write_dataset(run: Run, rel: str, ds: Dataset) -> None:
    with open(run.path(rel), "w", encoding="utf-8", newline="") as fh:
        write_dataset(ds, fh)
    run.register(rel)


def stage_split(run: Run) -> None:
    cfg = run.cfg
    if not cfg.log and os.path.isfile(run.path("log.csv")):
        # pick up a log written by ``generate`` into the same directory
        cfg.log = run.path("log.csv")
        if not cfg.schema and os.path.isfile(run.path("schema.json")):
            cfg.schema = run.path("schema.json")
    if not cfg.log:
        raise ConfigError("split needs an event log (--log)")
    schema = load_attribute_schema(cfg.schema) if cfg.schema else infer_attribute_schema(cfg.log)
    log = read_event_log(cfg.log, schema)
    split = chronological_split(log, cfg.ratios, cfg.use_suffixes)
    run.ensure_dir("data")
    for part in ("train", "validation", "test"):
        _write_dataset(run, f"data/{part}.csv", getattr(split, part))
    log_sha = sha256_file(cfg.log)
    run._log_sha = log_sha
    run.write_json("data/encoder.json", {"encoder": split.encoder.to_dict(),
                                         "schema": attribute_schema_to_dict(schema)})
    run.write_json("data/split.json", {
        "log_sha256": log_sha,
        "ratios": list(cfg.ratios),
        "use_suffixes": cfg.use_suffixes,
        "cases": {k: len(v) for k, v in zip(("train", "validation", "test"), split.case_order)},
        "instances": {k: len(getattr(split, k)) for k in ("train", "validation", "test")},
        "case_order": {k: list(v) for k, v in zip(("train", "validation", "test"), split.case_order)},
    })


def stage_tune(run: Run) -> None:
    cfg = run.cfg
    enc = run.encoder()
    train, val = run.dataset("train", enc), run.dataset("validation", enc)
    grid = cfg.grid or DEFAULT_GRID
    best, rows = grid_search(train, val, grid, cfg.level, cfg.seed, cfg.epsilon, cfg.workers)
    run.ensure_dir("tune")
    with open(run.path("tune", "leaderboard.csv"), "w", encoding="utf-8", newline="") as fh:
        write_leaderboard(rows, fh)
    run.register("tune/leaderboard.csv")
    run.write_json("tune/best.json", {"hyperparameters": best.to_dict(), "candidates": len(rows),
                                      "grid": {a: list(grid[a]) for a in GRID_AXES}})


def chosen_hyperparameters(run: Run, n_features: int) -> tuple[Hyperparameters, str]:
    cfg = run.cfg
    if cfg.tune:
        hp = run.read_json("tune/best.json")["hyperparameters"]
        return Hyperparameters(int(hp["mtry"]), int(hp["trees"]), int(hp["min_n"]), cfg.seed), "tuned"
    mtry = cfg.mtry if cfg.mtry is not None else default_mtry(n_features)
    return Hyperparameters(mtry, cfg.trees, cfg.min_n, cfg.seed), "configured"


def stage_train(run: Run) -> None:
    cfg = run.cfg
    enc = run.encoder()
    train = run.dataset("train", enc)
    hp, source = chosen_hyperparameters(run, enc.n_features)
    model = fit_forest(train.X, train.y, hp, enc, cfg.weight_basis, cfg.workers)
    path = run.model_path()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    save_model(model, path)
    if os.path.abspath(path).startswith(os.path.abspath(cfg.out) + os.sep):
        run.register(os.path.relpath(path, cfg.out))
    run.write_json("model/train.json", {"hyperparameters": hp.to_dict(), "source": source,
                                        "weight_basis": cfg.weight_basis, "n_train": len(train),
                                        "n_features": enc.n_features, "schema_hash": enc.schema_hash()})


PREDICTION_COLUMNS = ("instance_id", "case_id", "activity", "event_index", "actual", "point", "lower", "upper")


def write_predictions(path, ds: Dataset, pred) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for i in range(len(ds)):
            w.writerow([i, ds.case_ids[i], ds.activities[i], int(ds.event_index[i]), repr(float(ds.y[i])),
                        repr(float(pred.point[i])), repr(float(pred.lower[i])), repr(float(pred.upper[i]))])


def read_predictions(path) -> dict[str, np.ndarray]:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{path} not found; run predict first")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {c: np.array([r[c] for r in rows], dtype=object) for c in ("case_id", "activity")}
    out["event_index"] = np.array([int(r["event_index"]) for r in rows], dtype=int)
    for c in ("actual", "point", "lower", "upper"):
        out[c] = np.array([float(r[c]) for r in rows])
    return out


def stage_predict(run: Run) -> None:
    cfg = run.cfg
    input_log = run.input_log
    enc = run.encoder()
    model = load_model(run.model_path(), expected_schema_hash=enc.schema_hash())
    run.ensure_dir("predictions")
    parts = {"validation": run.dataset("validation", enc), "test": run.dataset("test", enc)}
    if input_log:
        log = read_event_log(input_log, enc.attribute_schema())
        parts["input"] = build_dataset(log.traces, enc)
    for name, ds in parts.items():
        pred = predict_batch(model, ds.X, cfg.level, cfg.workers)
        write_predictions(run.path("predictions", f"{name}.csv"), ds, pred)
        run.register(f"predictions/{name}.csv")


def _rwidth(p: Mapping[str, np.ndarray], epsilon: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p["point"] > epsilon, (p["upper"] - p["lower"]) / p["point"], np.nan)


def stage_profile(run: Run) -> None:
    cfg = run.cfg
    val = read_predictions(run.path("predictions", "validation.csv"))
    test = read_predictions(run.path("predictions", "test.csv"))
    rw_val = _rwidth(val, cfg.epsilon)
    th = calibrate_thresholds(rw_val[np.isfinite(rw_val)], cfg.p_low, cfg.p_high)
    run.ensure_dir("profiles")
    run.write_json("profiles/thresholds.json", th.to_dict())
    labels = profile_labels(test["lower"], test["upper"], test["point"], th, cfg.epsilon)
    with open(run.path("profiles", "assignments.csv"), "w", encoding="utf-8", newline="") as fh:
        write_assignments(range(len(labels)), _rwidth(test, cfg.epsilon), labels, fh)
    run.register("profiles/assignments.csv")


def truth_report(truth: GroundTruth, p: Mapping[str, np.ndarray], level: float) -> dict:
    """How the forest's bounds compare with the generator's true quantiles."""
    a_lo, a_hi = level_alphas(level)
    q_lo = np.array([true_quantile(truth, (c, int(i)), a_lo) for c, i in zip(p["case_id"], p["event_index"])])
    q_hi = np.array([true_quantile(truth, (c, int(i)), a_hi) for c, i in zip(p["case_id"], p["event_index"])])
    y = p["actual"]
    return {
        "true_interval_picp": float(np.mean((q_lo <= y) & (y <= q_hi))),
        "true_interval_mpiw": float(np.mean(q_hi - q_lo)),
        "lower_mae_vs_truth": float(np.mean(np.abs(p["lower"] - q_lo))),
        "upper_mae_vs_truth": float(np.mean(np.abs(p["upper"] - q_hi))),
    }


def stage_evaluate(run: Run) -> None:
    cfg = run.cfg
    test = read_predictions(run.path("predictions", "test.csv"))
    bounds = (test["lower"], test["upper"], test["point"])
    doc = {"level": cfg.level, "epsilon": cfg.epsilon, "n_test": len(test["actual"]),
           "overall": evaluation_report(test["actual"], bounds, cfg.epsilon), "per_activity": {}}
    for act in sorted(set(test["activity"])):
        m = test["activity"] == act
        doc["per_activity"][act] = evaluation_report(test["actual"][m], tuple(b[m] for b in bounds), cfg.epsilon)
    if os.path.isfile(run.path("profiles", "thresholds.json")):
        th = ProfileThresholds.from_dict(run.read_json("profiles/thresholds.json"))
        doc["thresholds"] = th.to_dict()
        doc["per_profile"] = per_profile_report(test["actual"], *bounds, th, cfg.epsilon)
    truth = run.truth_path()
    if truth:
        with open(truth, encoding="utf-8") as fh:
            gt = GroundTruth.from_dict(json.load(fh))
        try:
            doc["versus_truth"] = truth_report(gt, test, cfg.level)
        except KeyError:
            pass  # truth file belongs to a different log
    run.write_json("metrics.json", doc)


def explain_sample_ids(n: int, k: int, seed: int) -> np.ndarray:
    """Seeded sample of ``min(k, n)`` test instance ids, in ascending order."""
    k = min(k, n)
    return np.sort(np.random.default_rng([seed, 1]).choice(n, size=k, replace=False))


def stage_explain(run: Run) -> None:
    cfg = run.cfg
    enc = run.encoder()
    model = load_model(run.model_path(), expected_schema_hash=enc.schema_hash())
    train, test = run.dataset("train", enc), run.dataset("test", enc)
    ids = explain_sample_ids(len(test), cfg.explain_sample, cfg.seed)
    targets = [ExplanationTarget(t) for t in cfg.targets]
    background = sample_background(train.X, cfg.background, cfg.seed)
    results = explain_many(model, test.X[ids], ids, background, targets, cfg.budget, cfg.seed,
                           cfg.level, cfg.workers)
    values = [{g: enc.decode(test.X[i], g) for g in enc.group_names} for i in ids]
    run.ensure_dir("explain")
    with open(run.path("explain", "explanations.csv"), "w", encoding="utf-8", newline="") as fh:
        write_explanations([(int(i), r[t], v) for t in targets for i, r, v in zip(ids, results, values)], fh)
    run.register("explain/explanations.csv")
    importance = {t.value: global_importance([r[t] for r in results]) for t in targets} if len(ids) else {}
    doc = {"n_explained": len(ids), "instance_ids": [int(i) for i in ids], "background": len(background),
           "coalitions": results[0][targets[0]].coalitions_used if len(ids) else 0,
           "exact": bool(results[0][targets[0]].exact) if len(ids) else None,
           "importance": {t: [[n, v] for n, v in imp] for t, imp in importance.items()},
           "max_local_accuracy_gap": max((r[t].local_accuracy_gap for r in results for t in targets), default=0.0)}
    if ExplanationTarget.WIDTH in targets:
        doc["max_width_discrepancy"] = max((r.width_discrepancy for r in results), default=0.0)
    run.write_json("explain/summary.json", doc)


def _parse_value(text: str):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return text


def stage_report(run: Run) -> None:
    cfg = run.cfg
    stamp = run.stamp_text
    run.ensure_dir("plots")
    test = read_predictions(run.path("predictions", "test.csv"))
    interval_plot(run.path("plots", "intervals.svg"), test["actual"], test["point"], test["lower"],
                  test["upper"], stamp)
    written = ["plots/intervals.svg", "plots/intervals.csv"]
    counts = None
    if os.path.isfile(run.path("profiles", "assignments.csv")):
        th = ProfileThresholds.from_dict(run.read_json("profiles/thresholds.json"))
        with open(run.path("profiles", "assignments.csv"), encoding="utf-8", newline="") as fh:
            labels = [r["profile"] for r in csv.DictReader(fh)]
        counts = {lab: labels.count(lab) for lab in ("low", "medium", "high", "unassigned")}
        profile_plot(run.path("plots", "profiles.svg"), test["point"], _rwidth(test, cfg.epsilon), labels,
                     th.low_cut, th.high_cut, stamp)
        written += ["plots/profiles.svg", "plots/profiles.csv"]
    if os.path.isfile(run.path("explain", "summary.json")):
        summary = run.read_json("explain/summary.json")
        n = summary["n_explained"]
        with open(run.path("explain", "explanations.csv"), encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        for target, imp in summary["importance"].items():
            importance_plot(run.path("plots", f"importance_{target}.svg"), [tuple(x) for x in imp], n, target, stamp)
            top = [name for name, _ in imp[:10]]
            sub = [(r["feature"], _parse_value(r["feature_value"]), float(r["phi"]))
                   for r in rows if r["target"] == target]
            ordered = [row for name in top for row in sub if row[0] == name]
            summary_plot(run.path("plots", f"summary_{target}.svg"), ordered, target, n, stamp, cfg.seed)
            written += [f"plots/importance_{target}.svg", f"plots/importance_{target}.csv",
                        f"plots/summary_{target}.svg", f"plots/summary_{target}.csv"]
    for rel in written:
        run.register(rel)
    metrics = run.read_json("metrics.json") if os.path.isfile(run.path("metrics.json")) else {}
    run.write_json("report.json", {
        "overall": metrics.get("overall"),
        "profile_counts": counts,
        "plots": sorted(p for p in written if p.endswith(".svg")),
    })


STAGE_FUNCTIONS: dict[str, Callable[[Run], None]] = {
    "generate": stage_generate, "split": stage_split, "tune": stage_tune, "train": stage_train,
    "predict": stage_predict, "profile": stage_profile, "evaluate": stage_evaluate,
    "explain": stage_explain, "report": stage_report,
}


def run_stages(run: Run, stages: Sequence[str]) -> None:
    """Run ``stages`` in order, recording each one's status in the manifest.

    A failing stage is marked ``failed``, later stages ``pending``, and the
    manifest is written before :class:`StageFailed` propagates.
    """
    for name in stages:
        run.manifest["stages"][name] = "pending"
    for name in stages:
        try:
            STAGE_FUNCTIONS[name](run)
        except ConfigError:
            run.manifest["stages"][name] = "failed"
            run.save_manifest()
            raise
        except Exception as exc:
            run.manifest["stages"][name] = "failed"
            run.save_manifest()
            raise StageFailed(name, exc) from exc
        run.manifest["stages"][name] = "complete"
        run.save_manifest()


def pipeline_stages(cfg: PipelineConfig) -> list[str]:
    stages = [] if cfg.log else ["generate"]
    stages += ["split"] + (["tune"] if cfg.tune else []) + ["train", "predict", "profile", "evaluate"]
    if cfg.explain_sample > 0:
        stages.append("explain")
    return stages + ["report"]
