"""Timestamped edge lists, weighted snapshots, neighborhoods and feature matrices.

The raw input is a line-oriented stream of ``src dst timestamp`` contacts.
Ingestion remaps node ids to a dense ``0..N-1`` index (ascending original id,
so the mapping does not depend on line order) and drops self-loops: they carry
no spreading information and the feature-matrix diagonal is reserved for the
out-degree.  Snapshots collapse each interval to a weighted adjacency whose
weights count contact occurrences; every snapshot spans the full node
universe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    EdgeListParseError,
    NodeLookupError,
    ValidationError,
)


class TemporalEdge(NamedTuple):
    src: int
    dst: int
    time: float


@dataclass
class TemporalEdgeList:
    """Contacts over a dense node universe.

    ``edges`` holds the retained (non-self-loop) contacts with dense ids in
    input order.  ``n_contacts`` counts every accepted data line, self-loops
    included; dataset statistics report that number.  ``span`` is the maximum
    timestamp over all accepted lines.
    """

    edges: list[TemporalEdge]
    n_nodes: int
    span: float
    directed: bool
    node_labels: list[int]          # dense index -> original id
    n_contacts: int
    n_self_loops: int = 0

    @property
    def nodes(self) -> range:
        return range(self.n_nodes)

    def label_index(self) -> dict[int, int]:
        return {lab: i for i, lab in enumerate(self.node_labels)}


@dataclass(eq=False)
class WeightedSnapshot:
    """One interval of the temporal network over the full node universe.

    The weighted out-adjacency is stored in CSR form with ascending column
    ids per row.  For undirected networks every contact is recorded in both
    directions, so the weight map is symmetric.  All weights are >= 1.
    """

    index: int                      # 1-based position in the sequence
    n_nodes: int
    directed: bool
    indptr: np.ndarray              # int64, length n_nodes + 1
    indices: np.ndarray             # int32 out-neighbors
    weights: np.ndarray             # int64 occurrence counts

    _sym: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False)

    @property
    def out_degree(self) -> np.ndarray:
        """Distinct out-neighbors per node."""
        return np.diff(self.indptr)

    @property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n_nodes).astype(np.int64)

    @property
    def tie_degree(self) -> np.ndarray:
        """In+out degree, the neighbor-selection tie-break key."""
        return self.out_degree + self.in_degree

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    def neighbors_out(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def weight(self, u: int, v: int) -> int:
        """W(u, v); 0 when the edge is absent from this snapshot."""
        lo, hi = self.indptr[u], self.indptr[u + 1]
        pos = lo + np.searchsorted(self.indices[lo:hi], v)
        if pos < hi and self.indices[pos] == v:
            return int(self.weights[pos])
        return 0

    def symmetric_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Unweighted undirected view as (indptr, indices); cached."""
        if self._sym is None:
            if not self.directed:
                self._sym = (self.indptr.copy(), self.indices.copy())
            else:
                rows = np.repeat(
                    np.arange(self.n_nodes, dtype=np.int64),
                    np.diff(self.indptr))
                src = np.concatenate([rows, self.indices.astype(np.int64)])
                dst = np.concatenate([self.indices.astype(np.int64), rows])
                keys = np.unique(src * self.n_nodes + dst)
                s = keys // self.n_nodes
                d = (keys % self.n_nodes).astype(np.int32)
                indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
                np.add.at(indptr, s + 1, 1)
                np.cumsum(indptr, out=indptr)
                self._sym = (indptr, d)
        return self._sym

    def arrays_equal(self, other: "WeightedSnapshot") -> bool:
        return (self.index == other.index
                and self.n_nodes == other.n_nodes
                and self.directed == other.directed
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.weights, other.weights))


@dataclass(frozen=True)
class Neighborhood:
    """Up to ``k`` nodes around ``center``, ordered by the selection rule."""

    center: int
    members: tuple[int, ...]
    k: int


@dataclass(eq=False)
class FeatureMatrix:
    """k x k matrix: diagonal holds full-snapshot out-degrees of the members,
    off-diagonals the snapshot weights of edges inside the neighborhood."""

    values: np.ndarray
    center: int
    snapshot_index: int


def parse_edge_list(lines: Iterable[str], directed: bool = True,
                    time_scale: float = 1.0) -> TemporalEdgeList:
    """Parse a ``src dst timestamp`` stream (whitespace or comma separated).

    Lines starting with ``#`` and blank lines are skipped.  ``time_scale``
    converts raw timestamps into seconds.  Malformed lines raise
    :class:`EdgeListParseError` naming the 1-based line number; negative
    timestamps raise :class:`ValidationError`.
    """
    raw: list[tuple[int, int, float]] = []
    seen: set[int] = set()
    n_self = 0
    span = 0.0
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.replace(",", " ").split()
        if len(fields) != 3:
            raise EdgeListParseError(
                f"line {lineno}: expected 'src dst timestamp', got {len(fields)} fields")
        try:
            src = int(fields[0])
            dst = int(fields[1])
            ts = float(fields[2])
        except ValueError as exc:
            raise EdgeListParseError(f"line {lineno}: {exc}") from None
        if ts < 0:
            raise ValidationError(f"line {lineno}: negative timestamp {ts}")
        seen.add(src)
        seen.add(dst)
        # span covers every accepted contact, self-loops included
        span = max(span, ts * time_scale)
        if src == dst:
            n_self += 1
            continue
        raw.append((src, dst, ts * time_scale))

    node_labels = sorted(seen)
    index = {lab: i for i, lab in enumerate(node_labels)}
    edges = [TemporalEdge(index[s], index[d], t) for s, d, t in raw]
    n_contacts = len(raw) + n_self
    return TemporalEdgeList(
        edges=edges,
        n_nodes=len(node_labels),
        span=span,
        directed=directed,
        node_labels=node_labels,
        n_contacts=n_contacts,
        n_self_loops=n_self,
    )


def read_edge_file(path, directed: bool = True,
                   time_scale: float = 1.0) -> TemporalEdgeList:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh, directed=directed, time_scale=time_scale)


def snapshot_count(span: float, interval: float) -> int:
    """ceil(span / interval) with a floor of one snapshot."""
    if interval <= 0:
        raise ValidationError(f"snapshot interval must be positive, got {interval}")
    return max(1, math.ceil(span / interval))


def build_snapshots(edge_list: TemporalEdgeList,
                    interval: float) -> list[WeightedSnapshot]:
    """Slice contacts into ``L = ceil(span/interval)`` weighted snapshots.

    A contact at timestamp ``ts`` lands in snapshot ``floor(ts/interval)+1``;
    a timestamp equal to the span boundary is kept in the final snapshot so
    no contact is discarded.  Undirected contacts are stored in both
    directions so each snapshot's weight map is symmetric.
    """
    n_snaps = snapshot_count(edge_list.span, interval)
    n = edge_list.n_nodes
    if not edge_list.edges:
        empty_ptr = np.zeros(n + 1, dtype=np.int64)
        return [WeightedSnapshot(t + 1, n, edge_list.directed,
                                 empty_ptr.copy(),
                                 np.empty(0, dtype=np.int32),
                                 np.empty(0, dtype=np.int64))
                for t in range(n_snaps)]

    src = np.fromiter((e.src for e in edge_list.edges), np.int64,
                      len(edge_list.edges))
    dst = np.fromiter((e.dst for e in edge_list.edges), np.int64,
                      len(edge_list.edges))
    ts = np.fromiter((e.time for e in edge_list.edges), np.float64,
                     len(edge_list.edges))
    bins = np.minimum((ts // interval).astype(np.int64), n_snaps - 1)

    if not edge_list.directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        bins = np.concatenate([bins, bins])

    keys = (bins * n + src) * n + dst
    uniq, counts = np.unique(keys, return_counts=True)
    u_bins = uniq // (n * n)
    rem = uniq % (n * n)
    u_src = rem // n
    u_dst = (rem % n).astype(np.int32)

    snapshots = []
    starts = np.searchsorted(u_bins, np.arange(n_snaps + 1))
    for t in range(n_snaps):
        lo, hi = starts[t], starts[t + 1]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, u_src[lo:hi] + 1, 1)
        np.cumsum(indptr, out=indptr)
        snapshots.append(WeightedSnapshot(
            index=t + 1,
            n_nodes=n,
            directed=edge_list.directed,
            indptr=indptr,
            indices=u_dst[lo:hi].copy(),
            weights=counts[lo:hi].astype(np.int64),
        ))
    return snapshots


def select_neighborhood(snapshot: WeightedSnapshot, center: int,
                        k: int) -> Neighborhood:
    """Pick ``center`` plus up to ``k-1`` nodes by BFS distance along
    out-edges, breaking distance ties by descending in+out degree, then
    ascending node id.  Unreachable nodes are never selected.
    """
    if k < 1:
        raise ValidationError(f"neighborhood size must be >= 1, got {k}")
    if not 0 <= center < snapshot.n_nodes:
        raise NodeLookupError(
            f"node {center} outside universe of size {snapshot.n_nodes}")

    members = [center]
    need = k - 1
    if need == 0:
        return Neighborhood(center, tuple(members), k)

    tie = snapshot.tie_degree
    visited = np.zeros(snapshot.n_nodes, dtype=bool)
    visited[center] = True
    frontier = [center]
    while frontier and need > 0:
        level: list[int] = []
        for v in frontier:
            for u in snapshot.neighbors_out(v):
                if not visited[u]:
                    visited[u] = True
                    level.append(int(u))
        if not level:
            break
        level.sort(key=lambda u: (-tie[u], u))
        take = level[:need]
        members.extend(take)
        need -= len(take)
        frontier = level
    return Neighborhood(center, tuple(members), k)


def build_feature_matrix(snapshot: WeightedSnapshot,
                         nbhd: Neighborhood) -> FeatureMatrix:
    """Assemble the k x k node feature matrix for ``nbhd``.

    Entry (i, i) is the out-degree of member i in the full snapshot; entry
    (i, j) is the snapshot weight of the edge between members i and j when it
    exists.  Rows/columns beyond the member count stay zero (padding).
    """
    k = nbhd.k
    members = nbhd.members
    values = np.zeros((k, k), dtype=np.float64)
    out_deg = snapshot.out_degree
    pos = {u: i for i, u in enumerate(members)}
    for i, u in enumerate(members):
        values[i, i] = out_deg[u]
        lo, hi = snapshot.indptr[u], snapshot.indptr[u + 1]
        for v, w in zip(snapshot.indices[lo:hi], snapshot.weights[lo:hi]):
            j = pos.get(int(v))
            if j is not None and j != i:
                values[i, j] = w
    return FeatureMatrix(values=values, center=nbhd.center,
                         snapshot_index=snapshot.index)


def feature_sequences(snapshots: Sequence[WeightedSnapshot],
                      window: Sequence[int], k: int,
                      nodes: Iterable[int] | None = None,
                      log1p: bool = False) -> np.ndarray:
    """Stack feature matrices over a window of 1-based snapshot indices.

    Returns an array of shape ``(n_nodes, len(window), k, k)`` ordered by the
    window sequence; the optional log1p transform compresses counts.
    """
    n = snapshots[0].n_nodes
    node_list = list(nodes) if nodes is not None else list(range(n))
    out = np.zeros((len(node_list), len(window), k, k), dtype=np.float64)
    for j, t in enumerate(window):
        if not 1 <= t <= len(snapshots):
            raise ValidationError(f"snapshot index {t} outside 1..{len(snapshots)}")
        snap = snapshots[t - 1]
        for i, u in enumerate(node_list):
            nbhd = select_neighborhood(snap, u, k)
            out[i, j] = build_feature_matrix(snap, nbhd).values
    if log1p:
        np.log1p(out, out=out)
    return out
