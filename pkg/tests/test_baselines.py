import numpy as np
import pytest

from tginfluence.baselines import (
    kshell_decomposition,
    tdc,
    temporal_kshell,
)
from tginfluence.synthetic import generate_synthetic
from tginfluence.temporal_graph import (
    WeightedSnapshot,
    build_snapshots,
    parse_edge_list,
)

from oracles import tdc_direct


def snaps_from(lines, interval=10.0, directed=True):
    return build_snapshots(parse_edge_list(lines, directed=directed), interval)


def empty_snapshot(n, t=1):
    return WeightedSnapshot(t, n, True, np.zeros(n + 1, dtype=np.int64),
                            np.empty(0, dtype=np.int32),
                            np.empty(0, dtype=np.int64))


def dense_adj(snapshot):
    a = np.zeros((snapshot.n_nodes, snapshot.n_nodes))
    for u in range(snapshot.n_nodes):
        for v in snapshot.neighbors_out(u):
            a[u, v] = 1.0
    return a


class TestKshell:
    def test_single_edge(self):
        shells = kshell_decomposition(snaps_from(["0 1 0"])[0])
        assert list(shells) == [1, 1]

    def test_triangle(self):
        shells = kshell_decomposition(snaps_from(["0 1 0", "1 2 0", "2 0 0"])[0])
        assert list(shells) == [2, 2, 2]

    def test_star(self):
        lines = [f"0 {v} 0" for v in range(1, 6)]
        shells = kshell_decomposition(snaps_from(lines)[0])
        assert list(shells) == [1] * 6

    def test_isolated_zero(self):
        # node 2 appears only via node ids (edge 0-1 plus lone 2-2 self loop)
        snaps = snaps_from(["0 1 0", "2 2 0"])
        shells = kshell_decomposition(snaps[0])
        assert shells[2] == 0

    def test_directed_uses_symmetrized_view(self):
        # a 2-core appears only after symmetrizing the directed triangle
        shells = kshell_decomposition(snaps_from(["0 1 0", "1 2 0", "2 0 0"])[0])
        assert list(shells) == [2, 2, 2]

    def test_matches_networkx(self):
        nx = pytest.importorskip("networkx")
        edges = generate_synthetic(60, 1, 5.0, seed=9)
        snap = build_snapshots(edges, 1.0)[0]
        shells = kshell_decomposition(snap)
        g = nx.Graph()
        g.add_nodes_from(range(snap.n_nodes))
        for u in range(snap.n_nodes):
            for v in snap.neighbors_out(u):
                g.add_edge(u, int(v))
        expected = nx.core_number(g)
        assert {u: int(s) for u, s in enumerate(shells)} == expected

    def test_relabeling_invariance(self):
        lines = ["0 1 0", "1 2 0", "2 0 0", "2 3 0"]
        base = kshell_decomposition(snaps_from(lines)[0])
        # swap labels 0 <-> 3 via explicit renaming
        renamed = ["3 1 0", "1 2 0", "2 3 0", "2 0 0"]
        swapped = kshell_decomposition(snaps_from(renamed)[0])
        perm = [3, 1, 2, 0]
        assert [swapped[perm[u]] for u in range(4)] == list(base)


class TestTemporalKshell:
    def test_pair_present_in_all_snapshots(self):
        snaps = snaps_from(["0 1 5", "0 1 15", "0 1 25"])
        assert len(snaps) == 3
        tk = temporal_kshell(snaps)
        assert list(tk.scores) == [3.0, 3.0]

    def test_star_single_snapshot(self):
        lines = [f"0 {v} 0" for v in range(1, 6)]
        tk = temporal_kshell(snaps_from(lines))
        assert tk.scores[0] == 5.0
        assert all(tk.scores[v] == 1.0 for v in range(1, 6))

    def test_empty_snapshots_zero(self):
        tk = temporal_kshell([empty_snapshot(4, 1), empty_snapshot(4, 2)])
        assert np.array_equal(tk.scores, np.zeros(4))

    def test_zero_iff_isolated_everywhere(self):
        # node 3 isolated in both snapshots, node 2 active in one
        lines = ["0 1 5", "0 1 15", "2 0 15", "3 3 5"]
        snaps = snaps_from(lines)
        tk = temporal_kshell(snaps)
        assert tk.scores[3] == 0.0
        assert all(tk.scores[u] > 0 for u in range(3))


class TestTdc:
    def test_single_snapshot_is_beta_out_degree(self):
        snaps = snaps_from(["0 1 0", "0 2 0", "1 2 0"])
        vec = tdc(snaps, beta=0.2, mu=0.7)
        assert np.allclose(vec.scores, 0.2 * np.array([2.0, 1.0, 0.0]))

    def test_beta_zero_is_zero(self):
        snaps = snaps_from(["0 1 0", "1 2 0"])
        vec = tdc(snaps, beta=0.0, mu=0.5)
        assert np.array_equal(vec.scores, np.zeros(3))

    def test_matches_direct_dense_evaluation(self):
        rng = np.random.default_rng(5)
        for trial in range(6):
            n = int(rng.integers(2, 6))
            n_snaps = int(rng.integers(1, 4))
            snaps = []
            adjs = []
            for t in range(n_snaps):
                mat = (rng.random((n, n)) < 0.5).astype(float)
                np.fill_diagonal(mat, 0.0)
                lines = [f"{u} {v} {t * 10 + 1}"
                         for u in range(n) for v in range(n) if mat[u, v]]
                adjs.append(mat)
                snaps.append(lines)
            all_lines = [ln for chunk in snaps for ln in chunk]
            # make sure every node id appears so the universe has n nodes
            all_lines += [f"{u} {(u + 1) % n} {(n_snaps + 3) * 10}" for u in range(n)]
            built = build_snapshots(parse_edge_list(all_lines), 10.0)[:n_snaps]
            rebuilt_adjs = [dense_adj(s) for s in built]
            for a, b in zip(rebuilt_adjs, adjs):
                assert np.array_equal(a, b)
            beta, mu = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
            mine = tdc(built, beta, mu).scores
            direct = tdc_direct(adjs, beta, mu)
            assert np.allclose(mine, direct, atol=1e-12, rtol=0)

    def test_mu_one_single_snapshot_argsort_matches_out_degree(self):
        edges = generate_synthetic(25, 1, 4.0, seed=3)
        snap = build_snapshots(edges, 1.0)[0]
        vec = tdc([snap], beta=0.3, mu=1.0)
        out_deg = snap.out_degree
        assert np.array_equal(np.argsort(-vec.scores, kind="stable"),
                              np.argsort(-out_deg.astype(float), kind="stable"))

    def test_homogeneous_in_x(self):
        # doubling X doubles S; equivalent to scaling the returned scores
        snaps = snaps_from(["0 1 0", "1 2 0", "2 0 0", "0 2 11"], 10.0)
        base = tdc(snaps, 0.4, 0.6).scores
        n = snaps[0].n_nodes
        eye = np.eye(n)
        total = np.zeros(n)
        h = np.eye(n)
        for snap in snaps:
            a = dense_adj(snap)
            total += 0.4 * (h @ (a @ (2.0 * np.ones(n))))
            h = (0.4 * a + 0.4 * eye) @ h
        assert np.allclose(total, 2.0 * base, atol=1e-12)
