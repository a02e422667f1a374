"""Constraint-based structure learners.

Three learners share one CI-test interface and one orientation pipeline:

* ``pc_stable``: level-wise skeleton search over conditioning sets drawn
  from a per-level adjacency snapshot, with deferred edge removal, so the
  output does not depend on variable order.
* ``grow_shrink`` / ``fast_iamb``: Markov-blanket discovery per node
  followed by AND-rule symmetry correction and neighbor identification
  within blankets.

All learners finish by orienting v-structures from recorded separating
sets and closing under Meek rules R1-R4.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable

from .citests import CiResult, CiTestKind, build_tester
from .graphs import Pdag, UndirectedGraph, meek_closure
from .sem import DataMatrix

__all__ = [
    "ALGORITHMS",
    "LearnParams",
    "OrientationCounters",
    "SepsetTable",
    "TraceFn",
    "pc_stable",
    "grow_shrink_mb",
    "fast_iamb_mb",
    "mb_based_learn",
    "learn_structure",
    "orient_v_structures",
    "meek_closure",
]

_LOGGER = logging.getLogger(__name__)

ALGORITHMS = ("pc_stable", "grow_shrink", "fast_iamb")

# Unordered pair -> separating set that removed the pair's edge.
SepsetTable = dict[tuple[int, int], tuple[int, ...]]

# Called once per issued CI test with (x, y, z, result).
TraceFn = Callable[[int, int, tuple[int, ...], CiResult], None]


@dataclass(frozen=True)
class LearnParams:
    """Learner configuration: algorithm, CI test, and search bounds.

    ``max_condset=None`` leaves conditioning-set sizes bounded only by the
    tests' own sample-size guard; an integer cap keeps every issued test at
    ``|z| <= max_condset``.

    ``pair_budget`` bounds the number of CI tests spent searching for a
    separating set of any one node pair (PC-stable's level-wise scan and
    the blanket learners' neighbor identification).  A pair whose budget
    is exhausted without a separator stays adjacent.  Separating sets are
    scanned in ascending size, so a budget only truncates the exhaustive
    confirmation of strongly connected pairs — on hub-dominated graphs
    that confirmation grows exponentially in blanket size while real
    separators are found at small sizes.  ``None`` (the default) means
    unbounded.  Blanket growth and shrinkage are never budgeted; their
    test counts are polynomial.
    """

    algorithm: str
    test: CiTestKind = CiTestKind("fisher_z")
    max_condset: int | None = None
    pair_budget: int | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}"
            )
        if self.max_condset is not None and self.max_condset < 0:
            raise ValueError(f"max_condset must be >= 0, got {self.max_condset!r}")
        if self.pair_budget is not None and self.pair_budget < 1:
            raise ValueError(f"pair_budget must be >= 1, got {self.pair_budget!r}")


@dataclass
class OrientationCounters:
    """Bookkeeping for v-structure orientation."""

    conflicts: int = 0


class _TracedTester:
    """Wrap a tester so every issued test is also reported to a sink."""

    def __init__(self, inner, sink: TraceFn):
        self._inner = inner
        self._sink = sink

    def __call__(self, x: int, y: int, z: Iterable[int] = ()) -> CiResult:
        z = tuple(z)
        res = self._inner(x, y, z)
        self._sink(x, y, z, res)
        return res

    def __getattr__(self, name: str):
        return getattr(self._inner, name)


def _resolve_tester(data: DataMatrix | None, params: LearnParams, tester, trace):
    """Build a tester from data unless one was supplied; optionally trace it."""
    if tester is None:
        if data is None:
            raise ValueError("either data or an explicit tester is required")
        tester = build_tester(data, params.test)
    if trace is not None:
        tester = _TracedTester(tester, trace)
    return tester


def _log_degenerate_tests(tester, algorithm: str) -> None:
    skipped = getattr(tester, "n_skipped", 0)
    singular = getattr(tester, "n_singular", 0)
    if skipped or singular:
        _LOGGER.debug(
            "%s: %d tests skipped for sample size, %d singular submatrices",
            algorithm,
            skipped,
            singular,
        )


# ---------------------------------------------------------------------------
# PC-stable
# ---------------------------------------------------------------------------


def _pc_stable_skeleton(
    tester, n_vars: int, max_condset: int | None, pair_budget: int | None = None
) -> tuple[UndirectedGraph, SepsetTable]:
    """Level-wise skeleton search with snapshotting and deferred removal.

    At level L, every still-adjacent pair (x, y) is tested against all
    size-L subsets of both snapshot adjacencies adj(x)\\{y} and
    adj(y)\\{x} (shared subsets tested once); among the subsets declared
    independent, the one with the largest p-value is recorded as the
    separating set, which makes the record independent of variable order.
    Removals are applied only after the whole level has been scanned.
    With a ``pair_budget``, a pair that has consumed its test allowance
    without separating is kept adjacent and scanned no further.
    """
    adjacency: list[set[int]] = [
        set(range(n_vars)) - {i} for i in range(n_vars)
    ]
    sepsets: SepsetTable = {}
    spent: dict[tuple[int, int], int] = {}
    level = 0
    while max_condset is None or level <= max_condset:
        snapshot = [frozenset(s) for s in adjacency]
        level_is_reachable = False
        removals: list[tuple[int, int, tuple[int, ...]]] = []
        for x in range(n_vars):
            for y in sorted(adjacency[x]):
                if y <= x:
                    continue
                remaining = (
                    None if pair_budget is None else pair_budget - spent.get((x, y), 0)
                )
                if remaining is not None and remaining <= 0:
                    continue
                side_x = snapshot[x] - {y}
                side_y = snapshot[y] - {x}
                if len(side_x) < level and len(side_y) < level:
                    continue
                level_is_reachable = True
                best: tuple[float, tuple[int, ...]] | None = None
                seen: set[tuple[int, ...]] = set()
                for side in (side_x, side_y):
                    if len(side) < level or (remaining is not None and remaining <= 0):
                        continue
                    for zs in combinations(sorted(side), level):
                        if zs in seen:
                            continue
                        seen.add(zs)
                        res = tester(x, y, zs)
                        if remaining is not None:
                            remaining -= 1
                        if res.independent and (best is None or res.p_value > best[0]):
                            best = (res.p_value, zs)
                        if remaining is not None and remaining <= 0:
                            break
                if remaining is not None:
                    spent[(x, y)] = pair_budget - remaining
                if best is not None:
                    removals.append((x, y, best[1]))
        for x, y, zs in removals:
            adjacency[x].discard(y)
            adjacency[y].discard(x)
            sepsets[(x, y)] = zs
        if not level_is_reachable:
            break
        level += 1
    edges = frozenset(
        (x, y) for x in range(n_vars) for y in adjacency[x] if x < y
    )
    return UndirectedGraph(n_vars, edges), sepsets


def pc_stable(
    data: DataMatrix | None,
    params: LearnParams,
    tester=None,
    trace: TraceFn | None = None,
    counters: OrientationCounters | None = None,
) -> tuple[Pdag, SepsetTable]:
    """Run the order-independent PC algorithm.

    Parameters
    ----------
    data : DataMatrix or None
        Sample matrix; may be None when ``tester`` is supplied (e.g. a
        d-separation oracle).
    params : LearnParams
        Test kind, level, and conditioning cap.  ``params.test`` is ignored
        when an explicit tester is given.
    tester : callable, optional
        A stateful CI tester; built from ``data`` and ``params`` otherwise.
        Its ``n_tests`` attribute tallies the tests issued.
    trace : callable, optional
        Sink receiving ``(x, y, z, CiResult)`` for every issued test.
    counters : OrientationCounters, optional
        Accumulates v-structure orientation conflicts when supplied.

    Returns
    -------
    (Pdag, SepsetTable)
        The maximally oriented PDAG and the separating sets recorded while
        removing edges.
    """
    tester = _resolve_tester(data, params, tester, trace)
    skel, sepsets = _pc_stable_skeleton(
        tester, tester.n_vars, params.max_condset, params.pair_budget
    )
    pdag = meek_closure(orient_v_structures(skel, sepsets, counters))
    _log_degenerate_tests(tester, params.algorithm)
    return pdag, sepsets


# ---------------------------------------------------------------------------
# Markov-blanket learners
# ---------------------------------------------------------------------------


def _shrink_blanket(tester, target: int, blanket: list[int], max_condset: int | None) -> None:
    """Remove blanket members independent of target given the rest, to a fixpoint.

    Candidates are scanned in ascending order; after each removal the scan
    restarts, so the outcome is deterministic.
    """
    while True:
        for v in sorted(blanket):
            rest = tuple(w for w in sorted(blanket) if w != v)
            if max_condset is not None and len(rest) > max_condset:
                continue
            if tester(target, v, rest).independent:
                blanket.remove(v)
                break
        else:
            return


def _grow_shrink_blanket(
    tester, n_vars: int, target: int, max_condset: int | None
) -> frozenset:
    """Grow-Shrink Markov-blanket discovery for one target node.

    The grow phase repeatedly admits the most strongly dependent candidate
    (smallest p-value, ties to the smallest index) given the current
    blanket until every remaining candidate tests independent; the shrink
    phase removes false positives to a fixpoint.
    """
    blanket: list[int] = []
    while True:
        if max_condset is not None and len(blanket) > max_condset:
            break
        base = tuple(sorted(blanket))
        best: tuple[float, int] | None = None
        for v in range(n_vars):
            if v == target or v in blanket:
                continue
            res = tester(target, v, base)
            if not res.independent and (best is None or (res.p_value, v) < best):
                best = (res.p_value, v)
        if best is None:
            break
        blanket.append(best[1])
    _shrink_blanket(tester, target, blanket, max_condset)
    return frozenset(blanket)


def _fast_iamb_blanket(
    tester, n_vars: int, target: int, max_condset: int | None
) -> frozenset:
    """Fast-IAMB Markov-blanket discovery for one target node.

    Each pass ranks the candidates that test dependent given the pass-start
    blanket by ascending p-value, then admits them speculatively in rank
    order: the first is admitted outright, each later one is re-tested
    against the grown blanket and the pass stops at the first independence.
    A shrink phase follows each pass; passes repeat until one admits
    nothing or the post-shrink blanket revisits an earlier state.
    """
    blanket: list[int] = []
    seen_states: set[frozenset] = set()
    while True:
        if max_condset is not None and len(blanket) > max_condset:
            break
        base = tuple(sorted(blanket))
        scored: list[tuple[float, int]] = []
        for v in range(n_vars):
            if v == target or v in blanket:
                continue
            res = tester(target, v, base)
            if not res.independent:
                scored.append((res.p_value, v))
        scored.sort()
        admitted = 0
        for p_first, v in scored:
            if admitted == 0:
                blanket.append(v)
                admitted += 1
                continue
            if max_condset is not None and len(blanket) > max_condset:
                break
            res = tester(target, v, tuple(sorted(blanket)))
            if res.independent:
                break
            blanket.append(v)
            admitted += 1
        if admitted == 0:
            break
        _shrink_blanket(tester, target, blanket, max_condset)
        state = frozenset(blanket)
        if state in seen_states:
            break
        seen_states.add(state)
    return frozenset(blanket)


_BLANKET_FUNCS = {
    "grow_shrink": _grow_shrink_blanket,
    "fast_iamb": _fast_iamb_blanket,
}


def grow_shrink_mb(
    data: DataMatrix | None,
    target: int,
    params: LearnParams | None = None,
    tester=None,
    trace: TraceFn | None = None,
) -> frozenset:
    """Estimate the Markov blanket of ``target`` with Grow-Shrink."""
    params = params or LearnParams("grow_shrink")
    tester = _resolve_tester(data, params, tester, trace)
    return _grow_shrink_blanket(tester, tester.n_vars, target, params.max_condset)


def fast_iamb_mb(
    data: DataMatrix | None,
    target: int,
    params: LearnParams | None = None,
    tester=None,
    trace: TraceFn | None = None,
) -> frozenset:
    """Estimate the Markov blanket of ``target`` with fast-IAMB."""
    params = params or LearnParams("fast_iamb")
    tester = _resolve_tester(data, params, tester, trace)
    return _fast_iamb_blanket(tester, tester.n_vars, target, params.max_condset)


def _identify_neighbors(
    tester,
    blankets: list[frozenset],
    max_condset: int | None,
    pair_budget: int | None = None,
) -> tuple[UndirectedGraph, SepsetTable]:
    """Reduce symmetrized Markov blankets to direct neighbors.

    Blankets are first symmetry-corrected with the AND rule: v stays in
    MB(x) only when x also sits in MB(v).  A pair (x, y) with y in MB(x) is
    then kept as an edge unless some subset of the smaller of
    ``MB(x)\\{y}`` and ``MB(y)\\{x}`` separates it; subsets are scanned in
    ascending size, lexicographically, and the first separating set found
    is recorded.  A pair whose ``pair_budget`` runs out without a
    separator is kept as an edge.
    """
    n_vars = len(blankets)
    corrected: list[frozenset] = [
        frozenset(v for v in blankets[x] if x in blankets[v]) for x in range(n_vars)
    ]
    sepsets: SepsetTable = {}
    edges: set[tuple[int, int]] = set()
    for x in range(n_vars):
        for y in sorted(corrected[x]):
            if y <= x:
                continue
            side_x = sorted(corrected[x] - {y})
            side_y = sorted(corrected[y] - {x})
            base = side_x if len(side_x) <= len(side_y) else side_y
            limit = len(base) if max_condset is None else min(len(base), max_condset)
            found: tuple[int, ...] | None = None
            remaining = pair_budget
            for size in range(limit + 1):
                if remaining is not None and remaining <= 0:
                    break
                for zs in combinations(base, size):
                    res = tester(x, y, zs)
                    if remaining is not None:
                        remaining -= 1
                    if res.independent:
                        found = zs
                        break
                    if remaining is not None and remaining <= 0:
                        break
                if found is not None:
                    break
            if found is not None:
                sepsets[(x, y)] = found
            else:
                edges.add((x, y))
    return UndirectedGraph(n_vars, frozenset(edges)), sepsets


def mb_based_learn(
    data: DataMatrix | None,
    params: LearnParams,
    tester=None,
    trace: TraceFn | None = None,
    counters: OrientationCounters | None = None,
) -> tuple[Pdag, SepsetTable]:
    """Learn a structure by Markov-blanket discovery plus neighbor identification.

    ``params.algorithm`` selects the blanket routine (``grow_shrink`` or
    ``fast_iamb``); orientation then follows the same v-structure plus Meek
    pipeline as PC, using the separating sets recorded during neighbor
    identification.  Returns the oriented PDAG and those separating sets.
    """
    if params.algorithm not in _BLANKET_FUNCS:
        raise ValueError(
            f"mb_based_learn requires a blanket algorithm, got {params.algorithm!r}"
        )
    tester = _resolve_tester(data, params, tester, trace)
    blanket_fn = _BLANKET_FUNCS[params.algorithm]
    blankets = [
        blanket_fn(tester, tester.n_vars, t, params.max_condset)
        for t in range(tester.n_vars)
    ]
    skel, sepsets = _identify_neighbors(
        tester, blankets, params.max_condset, params.pair_budget
    )
    pdag = meek_closure(orient_v_structures(skel, sepsets, counters))
    _log_degenerate_tests(tester, params.algorithm)
    return pdag, sepsets


def learn_structure(
    data: DataMatrix | None,
    params: LearnParams,
    tester=None,
    trace: TraceFn | None = None,
    counters: OrientationCounters | None = None,
) -> tuple[Pdag, SepsetTable]:
    """Dispatch to the learner selected by ``params.algorithm``."""
    if params.algorithm == "pc_stable":
        return pc_stable(data, params, tester, trace, counters)
    return mb_based_learn(data, params, tester, trace, counters)


# ---------------------------------------------------------------------------
# Orientation
# ---------------------------------------------------------------------------


def orient_v_structures(
    skel: UndirectedGraph,
    sepsets: SepsetTable,
    counters: OrientationCounters | None = None,
) -> Pdag:
    """Orient unshielded colliders x -> y <- w from recorded separating sets.

    A triple (x, y, w) with x - y - w and x, w non-adjacent becomes a
    collider at y exactly when the recorded separating set of (x, w) does
    not contain y; pairs without a recorded set are left alone.  Middles
    are scanned in ascending order.  When a later triple asks to reverse an
    already-directed edge, the existing orientation is kept and the
    conflict is counted on ``counters``.
    """
    directed: set[tuple[int, int]] = set()
    conflicts = 0
    for y in range(skel.n_nodes):
        for x, w in combinations(sorted(skel.neighbor_sets[y]), 2):
            if skel.has_edge(x, w):
                continue
            sep = sepsets.get((min(x, w), max(x, w)))
            if sep is None:
                _LOGGER.debug(
                    "no separating set recorded for (%d, %d); triple with middle"
                    " %d left unoriented",
                    x,
                    w,
                    y,
                )
                continue
            if y in sep:
                continue
            for u in (x, w):
                if (y, u) in directed:
                    conflicts += 1
                else:
                    directed.add((u, y))
    if conflicts:
        _LOGGER.debug("kept first orientation in %d v-structure conflicts", conflicts)
    if counters is not None:
        counters.conflicts += conflicts
    undirected = frozenset(
        e
        for e in skel.edges
        if e not in {(min(u, v), max(u, v)) for u, v in directed}
    )
    return Pdag(skel.n_nodes, frozenset(directed), undirected)
