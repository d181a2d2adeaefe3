"""Ranking-quality metrics: tie-corrected Kendall tau and top-k hit rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, UndefinedCorrelationError


def _merge_count(values: list[float]) -> int:
    """Count strict inversions (i < j with values[i] > values[j]) while
    merge-sorting; equal elements are taken from the left and not counted."""
    n = len(values)
    src = list(values)
    buf = [0.0] * n
    swaps = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    buf[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    buf[k] = src[i]
                    i += 1
                k += 1
            buf[k:hi] = src[i:mid] if i < mid else src[j:hi]
        src, buf = buf, src
        width *= 2
    return swaps


def _tie_pairs(sorted_vals: np.ndarray) -> int:
    """Sum of g*(g-1)/2 over runs of equal values in a sorted array."""
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0)
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries + 1, [len(sorted_vals)]))
    runs = ends - starts
    return int(np.sum(runs * (runs - 1) // 2))


def kendall_tau(a, b) -> float:
    """Tie-corrected (tau-b) Kendall correlation via merge-sort pair counting.

    O(n log n).  Raises :class:`UndefinedCorrelationError` when either vector
    is constant, which leaves the correlation undefined.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"score vectors must be equal-length 1-d, "
                            f"got {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n < 2:
        raise ContractError("need at least two nodes to rank")

    order = np.lexsort((b, a))
    a_s, b_s = a[order], b[order]
    n0 = n * (n - 1) // 2
    tie_a = _tie_pairs(a_s)
    tie_b = _tie_pairs(np.sort(b))
    if tie_a == n0 or tie_b == n0:
        raise UndefinedCorrelationError("all values tied in one vector")
    pair_key = np.flatnonzero((np.diff(a_s) != 0) | (np.diff(b_s) != 0))
    joint_runs = np.diff(np.concatenate(([0], pair_key + 1, [n])))
    tie_ab = int(np.sum(joint_runs * (joint_runs - 1) // 2))

    swaps = _merge_count(b_s.tolist())
    concordant_minus_discordant = n0 - tie_a - tie_b + tie_ab - 2 * swaps
    return concordant_minus_discordant / math.sqrt(
        float(n0 - tie_a) * float(n0 - tie_b))


def top_fraction(scores, fraction: float) -> set[int]:
    """Indices of the top ceil(fraction*n) scores, descending score with
    ascending-index tie-break."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if n == 0:
        raise ContractError("empty score vector")
    if not 0.0 < fraction <= 1.0:
        raise ContractError(f"fraction must be in (0, 1], got {fraction}")
    k = math.ceil(fraction * n)
    order = np.lexsort((np.arange(n), -scores))
    return set(int(i) for i in order[:k])


def hit_rate(predicted, truth, fraction: float) -> float:
    """|P intersect R| / |R| for the top-``fraction`` sets of both rankings."""
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape:
        raise ContractError("predicted and truth must cover the same nodes")
    p = top_fraction(predicted, fraction)
    r = top_fraction(truth, fraction)
    return len(p & r) / len(r)


@dataclass
class RankingReport:
    method: str
    tau: float
    hit_rates: dict[float, float]
    n: int
    beta: float | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "beta": self.beta,
            "tau": self.tau,
            "hit_rates": {repr(f): v for f, v in self.hit_rates.items()},
            "n": self.n,
        }


DEFAULT_FRACTIONS = (0.01, 0.05, 0.10)


def evaluate_method(predicted, labels, fractions=DEFAULT_FRACTIONS,
                    method: str = "", beta: float | None = None) -> RankingReport:
    """Compare a score vector against influence labels.

    ``predicted`` is either a dense array over nodes 0..n-1 or an object with
    ``scores``/``method`` attributes; ``labels`` maps node -> InfluenceLabel.
    Missing label coverage raises :class:`ContractError` naming the nodes.
    """
    scores = np.asarray(getattr(predicted, "scores", predicted), dtype=np.float64)
    method = method or getattr(predicted, "method", "")
    n = scores.shape[0]
    missing = [u for u in range(n) if u not in labels]
    if missing:
        head = ", ".join(map(str, missing[:20]))
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        raise ContractError(f"labels missing for nodes: {head}{more}")
    truth = np.array([labels[u].value for u in range(n)], dtype=np.float64)
    tau = kendall_tau(scores, truth)
    rates = {float(f): hit_rate(scores, truth, float(f)) for f in fractions}
    return RankingReport(method=method, tau=tau, hit_rates=rates, n=n, beta=beta)
