"""Config-driven experiment pipeline.

Stages: ingest -> snapshots -> labels -> train -> rank -> evaluate.  Labels
(the dominant cost) are cached on disk keyed by a hash of everything that
determines them; every other stage recomputes deterministically, so two runs
of the same config produce byte-identical reports.  Wall-clock timings live
only in the run manifest, never in report files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import __version__
from .baselines import ScoreVector, tdc, temporal_kshell
from .errors import ConfigError, StageError, UndefinedCorrelationError
from .metrics import RankingReport, evaluate_method
from .model import (
    ModelParams,
    TrainConfig,
    load_params,
    predict_batch,
    save_params,
    select_s,
    train,
)
from .sir import (
    InfluenceLabel,
    SirConfig,
    active_backend,
    generate_labels,
    read_labels_csv,
    write_labels_csv,
)
from .synthetic import generate_synthetic
from .temporal_graph import (
    TemporalEdgeList,
    WeightedSnapshot,
    build_snapshots,
    feature_sequences,
    read_edge_file,
    snapshot_count,
)

UNIT_FACTORS = {"seconds": 1.0, "minutes": 60.0, "hours": 3600.0, "days": 86400.0}

OUTPUT_ROOT_ENV = "TGINFLUENCE_OUTPUT_ROOT"


def _from_dict(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class DatasetSection:
    name: str = "dataset"
    kind: str = "file"                  # "file" or "synthetic"
    path: str | None = None
    directed: bool = True
    timestamp_unit: str = "seconds"
    delta: float = 1.0
    delta_unit: str = "hours"
    expected_nodes: int | None = None
    expected_edges: int | None = None
    expected_snapshots: int | None = None
    source_url: str | None = None
    # synthetic-only knobs
    nodes: int | None = None
    snapshots: int | None = None
    mean_degree: float | None = None
    seed: int = 1
    activity_sigma: float = 0.8

    def __post_init__(self):
        if self.kind not in ("file", "synthetic"):
            raise ConfigError(f"dataset.kind must be file|synthetic, got {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError("dataset.path required for kind=file")
        if self.kind == "synthetic" and not (self.nodes and self.snapshots
                                             and self.mean_degree):
            raise ConfigError(
                "synthetic dataset needs nodes, snapshots and mean_degree")
        for unit in (self.timestamp_unit, self.delta_unit):
            if unit not in UNIT_FACTORS:
                raise ConfigError(f"unknown time unit {unit!r}")

    @property
    def delta_seconds(self) -> float:
        return self.delta * UNIT_FACTORS[self.delta_unit]


@dataclass(frozen=True)
class ModelSection:
    k: int = 28
    s: int | None = None
    s_candidates: tuple[int, ...] | None = None
    log1p_features: bool = False
    init_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.s is None and not self.s_candidates:
            raise ConfigError("model needs either s or s_candidates")
        if isinstance(self.train, dict):
            object.__setattr__(self, "train",
                               _from_dict(TrainConfig, self.train, "model.train"))
        if self.s_candidates is not None:
            object.__setattr__(self, "s_candidates", tuple(self.s_candidates))


@dataclass(frozen=True)
class SirSection:
    beta_train: float = 0.05
    beta_eval: tuple[float, ...] = (0.05,)
    mu: float = 1.0
    horizon: int = 10
    runs: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta_eval", tuple(self.beta_eval))

    def config(self, beta: float) -> SirConfig:
        return SirConfig(beta=beta, horizon=self.horizon, mu=self.mu,
                         runs=self.runs, seed=self.seed)


@dataclass(frozen=True)
class ProtocolSection:
    train_label_t: int = 31
    test_label_t: int = 41


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSection
    model: ModelSection = field(default_factory=lambda: ModelSection(s=3))
    sir: SirSection = field(default_factory=SirSection)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    methods: tuple[str, ...] = ("dgcn", "tk", "tdc")
    baseline_window: object = "history"   # "history", "input" or [lo, hi]
    fractions: tuple[float, ...] = (0.01, 0.05, 0.10)
    output_dir: str = "runs/experiment"
    cache: bool = True

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "fractions", tuple(self.fractions))
        unknown = set(self.methods) - {"dgcn", "tk", "tdc"}
        if unknown:
            raise ConfigError(f"unknown methods: {sorted(unknown)}")
        if self.protocol.train_label_t + self.sir.horizon > self.protocol.test_label_t:
            raise ConfigError(
                f"train label t={self.protocol.train_label_t} + horizon "
                f"{self.sir.horizon} must be <= test label t="
                f"{self.protocol.test_label_t}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        if "dataset" not in data:
            raise ConfigError("config needs a dataset section")
        sections = {
            "dataset": DatasetSection,
            "model": ModelSection,
            "sir": SirSection,
            "protocol": ProtocolSection,
        }
        kwargs = {}
        for key, value in data.items():
            if key in sections and isinstance(value, dict):
                kwargs[key] = _from_dict(sections[key], value, key)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Read a YAML config; ``overrides`` are dotted key=value assignments
    (values parsed as YAML scalars) applied before validation."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return ExperimentConfig.from_dict(apply_overrides(data, overrides))


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like a.b=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        node = data
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override through scalar at {key!r}")
        node[keys[-1]] = yaml.safe_load(raw)
    return data


def config_hash(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


# ---------------------------------------------------------------------------

def ingest_dataset(ds: DatasetSection) -> tuple[TemporalEdgeList, dict]:
    """Parse or synthesize the dataset and report ingestion statistics."""
    if ds.kind == "synthetic":
        edges = generate_synthetic(ds.nodes, ds.snapshots, ds.mean_degree,
                                   ds.seed, activity_sigma=ds.activity_sigma,
                                   interval=ds.delta_seconds)
    else:
        edges = read_edge_file(ds.path, directed=ds.directed,
                               time_scale=UNIT_FACTORS[ds.timestamp_unit])
    n_snaps = snapshot_count(edges.span, ds.delta_seconds)
    if ds.kind == "synthetic":
        n_snaps = max(n_snaps, ds.snapshots)
    stats = {
        "name": ds.name,
        "nodes": edges.n_nodes,
        "contacts": edges.n_contacts,
        "self_loops": edges.n_self_loops,
        "span_seconds": edges.span,
        "delta_seconds": ds.delta_seconds,
        "snapshots": n_snaps,
        "directed": ds.directed,
    }
    warnings = []
    for key, expected in (("nodes", ds.expected_nodes),
                          ("contacts", ds.expected_edges),
                          ("snapshots", ds.expected_snapshots)):
        if expected is not None:
            stats[f"expected_{key}"] = expected
            if stats[key] != expected:
                warnings.append(
                    f"{key}: computed {stats[key]} != expected {expected}")
    stats["warnings"] = warnings
    return edges, stats


def snapshots_for(edges: TemporalEdgeList, ds: DatasetSection) -> list[WeightedSnapshot]:
    snaps = build_snapshots(edges, ds.delta_seconds)
    if ds.kind == "synthetic" and len(snaps) < ds.snapshots:
        # trailing intervals without contacts still exist in the declared span
        n = edges.n_nodes
        empty_ptr = np.zeros(n + 1, dtype=np.int64)
        for t in range(len(snaps), ds.snapshots):
            snaps.append(WeightedSnapshot(
                t + 1, n, edges.directed, empty_ptr.copy(),
                np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int64)))
    return snaps


class ExperimentRunner:
    """Executes the stage DAG for one config and writes run artifacts."""

    def __init__(self, cfg: ExperimentConfig, output_dir: Path | str | None = None,
                 cache_dir: Path | str | None = None):
        self.cfg = cfg
        root = output_root()
        self.out = Path(output_dir) if output_dir else root / cfg.output_dir
        self.cache_dir = (Path(cache_dir) if cache_dir
                          else root / "cache" / "labels")
        self.hash = config_hash(cfg.to_dict())
        self.timings: dict[str, float] = {}
        self._edges: TemporalEdgeList | None = None
        self._stats: dict | None = None
        self._snapshots: list[WeightedSnapshot] | None = None
        self._labels: dict[tuple[int, float], dict[int, InfluenceLabel]] = {}
        self._model: ModelParams | None = None
        self._selected_s: int | None = None
        self._selection_taus: dict[int, float] | None = None
        self._scores: dict[tuple[str, float | None], ScoreVector] = {}

    # -- stages ------------------------------------------------------------

    def ingest(self) -> dict:
        if self._stats is None:
            with self._stage("ingest"):
                self._edges, self._stats = ingest_dataset(self.cfg.dataset)
                self.out.mkdir(parents=True, exist_ok=True)
                _write_json(self.out / "ingest_stats.json", self._stats)
                self._write_node_map()
        return self._stats

    def snapshots(self) -> list[WeightedSnapshot]:
        if self._snapshots is None:
            self.ingest()
            with self._stage("snapshots"):
                self._snapshots = snapshots_for(self._edges, self.cfg.dataset)
        return self._snapshots

    def labels(self, label_t: int, beta: float) -> dict[int, InfluenceLabel]:
        key = (label_t, beta)
        if key not in self._labels:
            snaps = self.snapshots()
            sir_cfg = self.cfg.sir.config(beta)
            cache_path = self._label_cache_path(label_t, sir_cfg)
            with self._stage(f"labels[t={label_t},beta={beta}]"):
                if cache_path is not None and cache_path.exists():
                    self._labels[key] = read_labels_csv(cache_path)
                else:
                    self._labels[key] = generate_labels(snaps, label_t, sir_cfg)
                    if cache_path is not None:
                        cache_path.parent.mkdir(parents=True, exist_ok=True)
                        write_labels_csv(cache_path, self._labels[key], sir_cfg)
                labels_dir = self.out / "labels"
                labels_dir.mkdir(parents=True, exist_ok=True)
                write_labels_csv(
                    labels_dir / f"labels_t{label_t}_beta{beta!r}.csv",
                    self._labels[key], sir_cfg)
        return self._labels[key]

    def train_model(self) -> ModelParams:
        if self._model is None:
            cfg = self.cfg
            snaps = self.snapshots()
            train_labels = self.labels(cfg.protocol.train_label_t, cfg.sir.beta_train)
            with self._stage("train"):
                model_dir = self.out / "model"
                model_dir.mkdir(parents=True, exist_ok=True)
                if cfg.model.s_candidates:
                    val_t = self._validation_label_t()
                    val_labels = self._validation_labels(val_t)
                    selection = select_s(
                        snaps, cfg.model.s_candidates, k=cfg.model.k,
                        train_label_t=cfg.protocol.train_label_t,
                        train_labels=train_labels,
                        val_label_t=val_t, val_labels=val_labels,
                        train_cfg=cfg.model.train,
                        init_seed=cfg.model.init_seed,
                        log1p=cfg.model.log1p_features)
                    self._selected_s = selection.best_s
                    self._selection_taus = selection.taus
                    self._model = selection.params
                    _write_csv(model_dir / "s_selection.csv",
                               ["s", "validation_tau"],
                               [[s, repr(tau)] for s, tau in
                                sorted(selection.taus.items())])
                else:
                    s = cfg.model.s
                    self._selected_s = s
                    window = range(cfg.protocol.train_label_t - s,
                                   cfg.protocol.train_label_t)
                    if window[0] < 1:
                        raise ConfigError(
                            f"training window {window[0]}..{window[-1]} "
                            "starts before the first snapshot")
                    x = feature_sequences(snaps, window, cfg.model.k,
                                          log1p=cfg.model.log1p_features)
                    n = snaps[0].n_nodes
                    y = np.array([train_labels[u].value for u in range(n)])
                    result = train((x, y), cfg.model.train,
                                   init_seed=cfg.model.init_seed)
                    self._model = result.params
                    _write_csv(model_dir / "loss.csv", ["iteration", "loss"],
                               [[i, repr(float(v))] for i, v in
                                enumerate(result.losses)])
                save_params(model_dir / "checkpoint.npz", self._model)
        return self._model

    def rank(self) -> dict[tuple[str, float | None], ScoreVector]:
        if not self._scores:
            cfg = self.cfg
            snaps = self.snapshots()
            with self._stage("rank"):
                scores_dir = self.out / "scores"
                scores_dir.mkdir(parents=True, exist_ok=True)
                if "dgcn" in cfg.methods:
                    params = self.train_model()
                    s = params.s
                    window = range(cfg.protocol.test_label_t - s,
                                   cfg.protocol.test_label_t)
                    x = feature_sequences(snaps, window, cfg.model.k,
                                          log1p=cfg.model.log1p_features)
                    vec = ScoreVector("dgcn", predict_batch(x, params),
                                      {"s": s})
                    self._scores[("dgcn", None)] = vec
                    _write_scores(scores_dir / "scores_dgcn.csv", vec)
                baseline_snaps = self._baseline_snapshots(snaps)
                if "tk" in cfg.methods:
                    vec = temporal_kshell(baseline_snaps)
                    self._scores[("tk", None)] = vec
                    _write_scores(scores_dir / "scores_tk.csv", vec)
                if "tdc" in cfg.methods:
                    for beta in cfg.sir.beta_eval:
                        vec = tdc(baseline_snaps, beta, cfg.sir.mu)
                        self._scores[("tdc", beta)] = vec
                        _write_scores(
                            scores_dir / f"scores_tdc_beta{beta!r}.csv", vec)
        return self._scores

    def evaluate(self) -> list[RankingReport]:
        cfg = self.cfg
        scores = self.rank()
        reports: list[RankingReport] = []
        failures: list[dict] = []
        with self._stage("evaluate"):
            for beta in cfg.sir.beta_eval:
                truth = self.labels(cfg.protocol.test_label_t, beta)
                for method in cfg.methods:
                    vec = scores.get((method, None)) or scores.get((method, beta))
                    try:
                        reports.append(evaluate_method(
                            vec, truth, fractions=cfg.fractions,
                            method=method, beta=beta))
                    except UndefinedCorrelationError as exc:
                        failures.append({"method": method, "beta": beta,
                                         "error": str(exc)})
            self._write_reports(reports, failures)
        return reports

    def run(self) -> list[RankingReport]:
        started = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
        try:
            reports = self.evaluate()
        except Exception as exc:
            self.out.mkdir(parents=True, exist_ok=True)
            _write_json(self.out / "status.json",
                        {"complete": False, "error": str(exc)})
            raise
        self._write_manifest(started)
        _write_json(self.out / "status.json", {"complete": True})
        return reports

    # -- helpers -----------------------------------------------------------

    def _stage(self, name: str):
        return _StageTimer(self, name)

    def _validation_label_t(self) -> int:
        """Latest label snapshot fully before the test labels, excluding the
        training label snapshot."""
        t = self.cfg.protocol.test_label_t - self.cfg.sir.horizon
        if t == self.cfg.protocol.train_label_t:
            t -= 1
        if t < 1:
            raise ConfigError("no validation label snapshot available")
        return t

    def _validation_labels(self, val_t: int) -> dict[int, InfluenceLabel]:
        return self.labels(val_t, self.cfg.sir.beta_train)

    def _baseline_snapshots(self, snaps) -> list[WeightedSnapshot]:
        cfg = self.cfg
        spec = cfg.baseline_window
        if spec == "history":
            lo, hi = 1, cfg.protocol.test_label_t - 1
        elif spec == "input":
            s = self._selected_s or self.cfg.model.s or max(self.cfg.model.s_candidates)
            lo, hi = cfg.protocol.test_label_t - s, cfg.protocol.test_label_t - 1
        else:
            try:
                lo, hi = int(spec[0]), int(spec[1])
            except (TypeError, ValueError, IndexError):
                raise ConfigError(
                    f"baseline_window must be 'history', 'input' or [lo, hi], "
                    f"got {spec!r}") from None
        if lo < 1 or hi > len(snaps) or lo > hi:
            raise ConfigError(f"baseline window {lo}..{hi} outside 1..{len(snaps)}")
        return snaps[lo - 1:hi]

    def _label_cache_path(self, label_t: int, sir_cfg: SirConfig) -> Path | None:
        if not self.cfg.cache:
            return None
        ds = self.cfg.dataset
        key = {
            "dataset": asdict(ds),
            "delta_seconds": ds.delta_seconds,
            "t": label_t,
            "beta": sir_cfg.beta,
            "mu": sir_cfg.mu,
            "horizon": sir_cfg.horizon,
            "runs": sir_cfg.runs,
            "seed": sir_cfg.seed,
        }
        return self.cache_dir / f"{config_hash(key)}.csv"

    def _write_node_map(self):
        rows = [[i, lab] for i, lab in enumerate(self._edges.node_labels)]
        _write_csv(self.out / "node_map.csv", ["dense_id", "original_id"], rows)

    def _write_reports(self, reports: list[RankingReport], failures: list[dict]):
        self.out.mkdir(parents=True, exist_ok=True)
        rows = []
        for rep in reports:
            for frac in self.cfg.fractions:
                rows.append([rep.method, repr(rep.beta), repr(rep.tau),
                             repr(float(frac)), repr(rep.hit_rates[float(frac)])])
        _write_csv(self.out / "reports.csv",
                   ["method", "beta", "tau", "hr_fraction", "hr_value"], rows)
        payload = {
            "ranked_nodes": "full-universe",
            "reports": [rep.to_dict() for rep in reports],
            "undefined": failures,
            "selected_s": self._selected_s,
        }
        _write_json(self.out / "reports.json", payload)

    def _write_manifest(self, started: str):
        manifest = {
            "config": self.cfg.to_dict(),
            "config_hash": self.hash,
            "package_version": __version__,
            "numpy_version": np.__version__,
            "sir_backend": active_backend(),
            "seeds": {
                "sir": self.cfg.sir.seed,
                "train": self.cfg.model.train.seed,
                "model_init": self.cfg.model.init_seed,
                "dataset": self.cfg.dataset.seed,
            },
            "selected_s": self._selected_s,
            "selection_taus": self._selection_taus,
            "started": started,
            "stage_seconds": self.timings,
        }
        _write_json(self.out / "manifest.json", manifest)


class _StageTimer:
    def __init__(self, runner: ExperimentRunner, name: str):
        self.runner = runner
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.runner.timings[self.name] = round(time.perf_counter() - self.t0, 6)
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(f"{self.name}: {exc}") from exc
        return False


def _write_json(path: Path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_scores(path: Path, vec: ScoreVector):
    rows = [[u, vec.method, repr(float(x))] for u, x in enumerate(vec.scores)]
    _write_csv(path, ["node", "method", "score"], rows)
