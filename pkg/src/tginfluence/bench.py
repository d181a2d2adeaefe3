"""Benchmarks: training-cost scaling with network size, and compiled-vs-
pure-Python SIR kernel throughput."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .model import TrainConfig, train
from .sir import COMPILED_AVAILABLE, SirConfig, SirWindow, generate_labels
from .synthetic import generate_synthetic
from .temporal_graph import build_snapshots, feature_sequences


@dataclass(frozen=True)
class BenchTemplate:
    """Everything held fixed while the node count varies."""
    snapshots: int = 14
    mean_degree: float = 6.0
    k: int = 16
    s: int = 3
    beta: float = 0.05
    mu: float = 1.0
    horizon: int = 10
    runs: int = 50
    seed: int = 7
    iterations: int = 60
    learning_rate: float = 1e-3
    batch_size: int | None = None    # full batch: per-iteration cost scales with n
    activity_sigma: float = 0.8

    def __post_init__(self):
        if self.snapshots < self.s + self.horizon:
            raise ConfigError(
                f"need snapshots >= s + horizon = {self.s + self.horizon}")


def scaling_benchmark(sizes, template: BenchTemplate | None = None) -> list[dict]:
    """Train the full model at each node count; returns one row per size.

    The timed span covers everything training requires downstream of the
    snapshots: label generation, feature-matrix assembly and the optimizer
    loop.  Synthetic-data generation itself is excluded.
    """
    template = template or BenchTemplate()
    rows = []
    for n in sizes:
        label_t = template.snapshots - template.horizon + 1
        edges = generate_synthetic(n, template.snapshots, template.mean_degree,
                                   template.seed,
                                   activity_sigma=template.activity_sigma)
        snaps = build_snapshots(edges, 1.0)
        sir_cfg = SirConfig(beta=template.beta, horizon=template.horizon,
                            mu=template.mu, runs=template.runs,
                            seed=template.seed)

        t0 = time.perf_counter()
        labels = generate_labels(snaps, label_t, sir_cfg)
        t1 = time.perf_counter()
        window = range(label_t - template.s, label_t)
        x = feature_sequences(snaps, window, template.k)
        y = np.array([labels[u].value for u in range(n)])
        t2 = time.perf_counter()
        train_cfg = TrainConfig(learning_rate=template.learning_rate,
                                iterations=template.iterations,
                                batch_size=template.batch_size,
                                seed=template.seed)
        train((x, y), train_cfg)
        t3 = time.perf_counter()

        rows.append({
            "nodes": n,
            "seconds": t3 - t0,
            "labels_seconds": t1 - t0,
            "features_seconds": t2 - t1,
            "train_seconds": t3 - t2,
            "per_iteration_seconds": (t3 - t2) / template.iterations,
        })
    return rows


def loglog_slope(rows: list[dict]) -> float:
    """Least-squares slope of log(seconds) against log(nodes)."""
    xs = np.log([row["nodes"] for row in rows])
    ys = np.log([row["seconds"] for row in rows])
    return float(np.polyfit(xs, ys, 1)[0])


def kernel_benchmark(n: int = 500, mean_degree: float = 8.0,
                     horizon: int = 10, runs: int = 200,
                     seed: int = 3) -> list[dict]:
    """Compare the compiled SIR kernel against the pure-Python fallback on
    identical work; both produce identical counts by construction."""
    edges = generate_synthetic(n, horizon, mean_degree, seed)
    snaps = build_snapshots(edges, 1.0)
    cfg = SirConfig(beta=0.05, horizon=horizon, mu=1.0, runs=runs, seed=seed)
    # warm the window construction out of the timed region
    SirWindow(snaps[:horizon], cfg.beta)

    rows = []
    backends = ["python"] + (["compiled"] if COMPILED_AVAILABLE else [])
    baseline = None
    for backend in backends:
        t0 = time.perf_counter()
        labels = generate_labels(snaps, 1, cfg, backend=backend)
        seconds = time.perf_counter() - t0
        if baseline is None:
            baseline = seconds
        rows.append({
            "backend": backend,
            "nodes": n,
            "runs_per_node": runs,
            "seconds": seconds,
            "us_per_run": seconds / (n * runs) * 1e6,
            "speedup_vs_python": baseline / seconds,
            "mean_label": float(np.mean([l.value for l in labels.values()])),
        })
    return rows
