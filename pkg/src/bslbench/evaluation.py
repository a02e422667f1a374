"""Edge-recovery scoring and nonparametric comparison statistics.

Learned graphs are scored against an undirected reference derived from the
true DAG in one of two modes:

* ``moral``: the reference is the moral graph of the true DAG, and the
  learned PDAG is moralized the same way (directed edges contribute
  parentage, undirected edges only adjacency).
* ``cpdag_skeleton``: the reference is the skeleton of the true DAG's
  CPDAG (identical to the DAG's own skeleton), compared against the
  learned PDAG's skeleton.  The spelling ``cpdag-skeleton`` is accepted
  everywhere a mode is taken.

Confusion counts are taken over all unordered node pairs.  Distribution
comparisons use the two-sided Wilcoxon rank-sum test, exact by subset-sum
enumeration for small tie-free samples and a tie-corrected normal
approximation with continuity correction otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .citests import normal_upper_tail
from .graphs import Dag, Pdag, UndirectedGraph, moralize, moralize_pdag, skeleton

__all__ = [
    "EVAL_MODES",
    "EXACT_WILCOXON_LIMIT",
    "ConfusionCounts",
    "WilcoxonResult",
    "BoxplotSummary",
    "normalize_eval_mode",
    "reference_graph",
    "learned_adjacency",
    "compare_edges",
    "evaluate_run",
    "sensitivity",
    "specificity",
    "wilcoxon_rank_sum",
    "boxplot_summary",
]

EVAL_MODES = ("moral", "cpdag_skeleton")

# Largest per-sample size for which the exact rank-sum distribution is
# enumerated (tie-free data only).
EXACT_WILCOXON_LIMIT = 12

_MIN_P = 2.2250738585072014e-308  # smallest normal double; keeps p in (0, 1]


@dataclass(frozen=True)
class ConfusionCounts:
    """Unordered-pair confusion counts of a learned adjacency structure."""

    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class WilcoxonResult:
    """Two-sided rank-sum test outcome.

    ``statistic`` is the rank sum of the first sample within the pooled
    ordering; ``method`` is ``"exact"`` or ``"normal_approx"``.
    """

    statistic: float
    p_value: float
    method: str


@dataclass(frozen=True)
class BoxplotSummary:
    """Five-number summary plus Tukey whiskers (1.5 IQR fences)."""

    n: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_low: float
    whisker_high: float
    outliers: tuple


def normalize_eval_mode(mode: str) -> str:
    """Canonicalize a scoring-mode name, accepting the hyphenated spelling."""
    canonical = str(mode).replace("-", "_")
    if canonical not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}, got {mode!r}")
    return canonical


def reference_graph(true_dag: Dag, mode: str) -> UndirectedGraph:
    """Return the undirected reference structure for a scoring mode.

    The CPDAG of a DAG has the same skeleton as the DAG itself, so the
    ``cpdag_skeleton`` reference is simply the true skeleton.
    """
    if normalize_eval_mode(mode) == "moral":
        return moralize(true_dag)
    return skeleton(true_dag)


def learned_adjacency(learned: Pdag, mode: str) -> UndirectedGraph:
    """Project a learned PDAG to the undirected structure a mode compares."""
    if normalize_eval_mode(mode) == "moral":
        return moralize_pdag(learned)
    return skeleton(learned)


def compare_edges(
    reference: UndirectedGraph, learned: Pdag | UndirectedGraph, mode: str
) -> ConfusionCounts:
    """Count tp/fp/fn/tn of a learned graph against an undirected reference.

    A learned PDAG is first projected with :func:`learned_adjacency`; an
    already-undirected graph is compared as is.  Counts are over all
    unordered node pairs, so ``tp + fp + fn + tn == n (n - 1) / 2``.
    """
    if isinstance(learned, Pdag):
        learned = learned_adjacency(learned, mode)
    else:
        normalize_eval_mode(mode)
    if reference.n_nodes != learned.n_nodes:
        raise ValueError(
            f"node counts differ: {reference.n_nodes} vs {learned.n_nodes}"
        )
    n = reference.n_nodes
    tp = len(reference.edges & learned.edges)
    fp = len(learned.edges - reference.edges)
    fn = len(reference.edges - learned.edges)
    tn = n * (n - 1) // 2 - tp - fp - fn
    return ConfusionCounts(tp, fp, fn, tn)


def evaluate_run(true_dag: Dag, learned: Pdag, mode: str) -> ConfusionCounts:
    """Score a learned PDAG against the true DAG under a scoring mode."""
    return compare_edges(reference_graph(true_dag, mode), learned, mode)


def sensitivity(counts: ConfusionCounts) -> float | None:
    """Recall over reference edges: tp / (tp + fn); None when undefined."""
    denom = counts.tp + counts.fn
    if denom == 0:
        return None
    return counts.tp / denom


def specificity(counts: ConfusionCounts) -> float | None:
    """True-negative rate over non-edges: tn / (tn + fp); None when undefined."""
    denom = counts.tn + counts.fp
    if denom == 0:
        return None
    return counts.tn / denom


# ---------------------------------------------------------------------------
# Wilcoxon rank-sum
# ---------------------------------------------------------------------------


def _midranks(pooled: Sequence[float]) -> list[float]:
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _exact_two_sided_p(rank_sum: int, n1: int, n_total: int) -> float:
    """Exact two-sided p by enumerating the rank-sum distribution.

    Counts n1-subsets of ranks {1..n_total} whose sum deviates from the
    null mean at least as much as the observed sum.  Deviations are
    doubled so everything stays in integer arithmetic.
    """
    max_sum = sum(range(n_total - n1 + 1, n_total + 1))
    counts = [[0] * (max_sum + 1) for _ in range(n1 + 1)]
    counts[0][0] = 1
    for item in range(1, n_total + 1):
        for k in range(min(item, n1), 0, -1):
            row, prev = counts[k], counts[k - 1]
            for s in range(max_sum, item - 1, -1):
                row[s] += prev[s - item]
    doubled_mean = n1 * (n_total + 1)
    observed_dev = abs(2 * rank_sum - doubled_mean)
    extreme = sum(
        c
        for s, c in enumerate(counts[n1])
        if abs(2 * s - doubled_mean) >= observed_dev
    )
    return extreme / math.comb(n_total, n1)


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Two-sided Wilcoxon rank-sum test for samples a and b.

    The exact null distribution is enumerated when both samples have at
    most ``EXACT_WILCOXON_LIMIT`` observations and the pooled values are
    tie-free; otherwise the tie-corrected normal approximation with a 0.5
    continuity correction is used.  The returned p-value lies in (0, 1].

    Raises
    ------
    ValueError
        If either sample is empty or contains a non-finite value.
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    if not a or not b:
        raise ValueError("both samples need at least one observation")
    pooled = a + b
    if not all(math.isfinite(v) for v in pooled):
        raise ValueError("samples must be finite")
    n1, n2 = len(a), len(b)
    n_total = n1 + n2
    tie_free = len(set(pooled)) == n_total
    ranks = _midranks(pooled)
    rank_sum = sum(ranks[:n1])

    if tie_free and n1 <= EXACT_WILCOXON_LIMIT and n2 <= EXACT_WILCOXON_LIMIT:
        p = _exact_two_sided_p(round(rank_sum), n1, n_total)
        return WilcoxonResult(rank_sum, max(min(p, 1.0), _MIN_P), "exact")

    mean = n1 * (n_total + 1) / 2.0
    # Tie-corrected variance: (n1 n2 / 12) [(N + 1) - sum(t^3 - t) / (N (N - 1))]
    tie_counts: dict[float, int] = {}
    for v in pooled:
        tie_counts[v] = tie_counts.get(v, 0) + 1
    tie_term = sum(t**3 - t for t in tie_counts.values())
    variance = (n1 * n2 / 12.0) * ((n_total + 1) - tie_term / (n_total * (n_total - 1)))
    if variance <= 0:
        return WilcoxonResult(rank_sum, 1.0, "normal_approx")
    deviation = rank_sum - mean
    if deviation == 0:
        z = 0.0
    else:
        z = (abs(deviation) - 0.5) / math.sqrt(variance)
        z = max(z, 0.0)
    p = 2.0 * normal_upper_tail(z)
    return WilcoxonResult(rank_sum, max(min(p, 1.0), _MIN_P), "normal_approx")


# ---------------------------------------------------------------------------
# Box-whisker summaries
# ---------------------------------------------------------------------------


def boxplot_summary(values: Sequence[float]) -> BoxplotSummary:
    """Five-number summary with Tukey whiskers.

    Quartiles use linear interpolation between order statistics; whiskers
    extend to the most extreme observations within 1.5 IQR of the box, and
    everything outside is reported as outliers (ascending).
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample must be finite")
    q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = np.sort(arr[(arr < lo_fence) | (arr > hi_fence)])
    return BoxplotSummary(
        n=int(arr.size),
        minimum=float(arr.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        maximum=float(arr.max()),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=tuple(float(v) for v in outliers),
    )
