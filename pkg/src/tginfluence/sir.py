"""Monte-Carlo weighted SIR over snapshot windows.

Infection crosses an edge of weight w with probability ``1 - (1-beta)**w``
per interval; an infected node recovers with probability ``mu`` after its
infection attempts in that interval, and newly infected nodes start
transmitting in the next one.  The influence label of a node is the mean
infected+recovered count over independent runs seeded at that node.

Per-node RNG streams are derived from ``(seed, node)``, so label generation
is deterministic regardless of iteration order or parallel scheduling.  The
inner loop runs in a compiled kernel when available, with a pure-Python
fallback selected at import; both consume the identical uniform sequence.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientSnapshotsError, ValidationError
from .temporal_graph import WeightedSnapshot

try:
    from . import _sirkernel
except ImportError:                     # extension not built; use the twin
    _sirkernel = None
from . import _sirpure

COMPILED_AVAILABLE = _sirkernel is not None


def active_backend() -> str:
    """'compiled' or 'python', honouring TGINFLUENCE_PURE_PYTHON."""
    if COMPILED_AVAILABLE and not os.environ.get("TGINFLUENCE_PURE_PYTHON"):
        return "compiled"
    return "python"


def _kernel(backend: str | None):
    name = backend or active_backend()
    if name == "compiled":
        if _sirkernel is None:
            raise ValidationError("compiled kernel requested but not built")
        return _sirkernel.sir_counts
    if name == "python":
        return _sirpure.sir_counts
    raise ValidationError(f"unknown backend {name!r}")


@dataclass(frozen=True)
class SirConfig:
    beta: float
    horizon: int
    mu: float = 1.0
    runs: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValidationError(f"beta must be in [0, 1], got {self.beta}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValidationError(f"mu must be in [0, 1], got {self.mu}")
        if self.horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {self.horizon}")
        if self.runs < 1:
            raise ValidationError(f"runs must be >= 1, got {self.runs}")
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class InfluenceLabel:
    node: int
    start_snapshot: int
    value: float


class SirWindow:
    """Concatenated CSR of a snapshot window with per-edge infection
    probabilities, shared across all seed nodes and runs."""

    def __init__(self, snapshots: Sequence[WeightedSnapshot], beta: float):
        if not snapshots:
            raise InsufficientSnapshotsError("empty snapshot window")
        self.n_nodes = snapshots[0].n_nodes
        self.length = len(snapshots)
        self.start_index = snapshots[0].index
        self.indptr = np.ascontiguousarray(
            np.vstack([s.indptr for s in snapshots]), dtype=np.int64)
        nnz = np.array([len(s.indices) for s in snapshots], dtype=np.int64)
        self.offsets = np.concatenate(([0], np.cumsum(nnz)))
        self.indices = np.ascontiguousarray(
            np.concatenate([s.indices for s in snapshots] or
                           [np.empty(0, np.int32)]), dtype=np.int32)
        weights = np.concatenate([s.weights for s in snapshots] or
                                 [np.empty(0, np.int64)])
        self.probs = 1.0 - np.power(1.0 - beta, weights.astype(np.float64))


def node_rng(seed: int, node: int) -> np.random.Generator:
    """The node's private stream; stable across platforms and backends."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, node])))


def _window(snapshots: Sequence[WeightedSnapshot], cfg: SirConfig) -> SirWindow:
    if len(snapshots) < cfg.horizon:
        raise InsufficientSnapshotsError(
            f"need {cfg.horizon} snapshots, got {len(snapshots)}")
    return SirWindow(snapshots[:cfg.horizon], cfg.beta)


def sir_single_run(snapshots: Sequence[WeightedSnapshot], seed_node: int,
                   cfg: SirConfig, rng: np.random.Generator,
                   backend: str | None = None) -> int:
    """One epidemic from ``seed_node`` over ``cfg.horizon`` intervals.

    ``snapshots`` must start at the interval being simulated.  Draws come
    from ``rng`` (its state advances), so repeated calls continue the stream.
    """
    window = _window(snapshots, cfg)
    _check_node(window, seed_node)
    counts = _kernel(backend)(window.indptr, window.offsets, window.indices,
                              window.probs, window.n_nodes, seed_node,
                              cfg.mu, 1, rng.bit_generator)
    return int(counts[0])


def estimate_influence(snapshots: Sequence[WeightedSnapshot], seed_node: int,
                       cfg: SirConfig, window: SirWindow | None = None,
                       backend: str | None = None) -> InfluenceLabel:
    """Mean infected+recovered count over ``cfg.runs`` independent runs."""
    if window is None:
        window = _window(snapshots, cfg)
    _check_node(window, seed_node)
    rng = node_rng(cfg.seed, seed_node)
    counts = _kernel(backend)(window.indptr, window.offsets, window.indices,
                              window.probs, window.n_nodes, seed_node,
                              cfg.mu, cfg.runs, rng.bit_generator)
    value = float(counts.sum(dtype=np.float64) / cfg.runs)
    return InfluenceLabel(node=seed_node, start_snapshot=window.start_index,
                          value=value)


def generate_labels(snapshots: Sequence[WeightedSnapshot], start_t: int,
                    cfg: SirConfig,
                    backend: str | None = None) -> dict[int, InfluenceLabel]:
    """One influence label per node, epidemics started in snapshot ``start_t``.

    Each node draws from its own ``(cfg.seed, node)`` stream; the result does
    not depend on the order nodes are processed in.
    """
    if start_t < 1 or start_t + cfg.horizon - 1 > len(snapshots):
        raise InsufficientSnapshotsError(
            f"labels at t={start_t} need snapshots {start_t}..{start_t + cfg.horizon - 1}, "
            f"have 1..{len(snapshots)}")
    window = SirWindow(snapshots[start_t - 1:start_t - 1 + cfg.horizon], cfg.beta)
    kern = _kernel(backend)
    labels: dict[int, InfluenceLabel] = {}
    for node in range(window.n_nodes):
        rng = node_rng(cfg.seed, node)
        counts = kern(window.indptr, window.offsets, window.indices,
                      window.probs, window.n_nodes, node, cfg.mu,
                      cfg.runs, rng.bit_generator)
        labels[node] = InfluenceLabel(
            node=node, start_snapshot=start_t,
            value=float(counts.sum(dtype=np.float64) / cfg.runs))
    return labels


def _check_node(window: SirWindow, node: int):
    if not 0 <= node < window.n_nodes:
        raise ValidationError(
            f"seed node {node} outside universe of size {window.n_nodes}")


def write_labels_csv(path, labels: dict[int, InfluenceLabel], cfg: SirConfig):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "start_snapshot", "beta", "mu",
                         "horizon", "runs", "value"])
        for node in sorted(labels):
            lab = labels[node]
            writer.writerow([lab.node, lab.start_snapshot, repr(cfg.beta),
                             repr(cfg.mu), cfg.horizon, cfg.runs,
                             repr(lab.value)])


def read_labels_csv(path) -> dict[int, InfluenceLabel]:
    labels: dict[int, InfluenceLabel] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            node = int(row["node"])
            labels[node] = InfluenceLabel(
                node=node, start_snapshot=int(row["start_snapshot"]),
                value=float(row["value"]))
    return labels
