"""Graph structures, moralization, CPDAG construction, d-separation."""

from __future__ import annotations

import itertools

import pytest

from bslbench.graphs import (
    CycleError,
    Dag,
    GraphError,
    Pdag,
    UndirectedGraph,
    cpdag_of_dag,
    d_separated,
    graph_from_text,
    graph_to_text,
    in_degree_histogram,
    meek_closure,
    moralize,
    moralize_pdag,
    read_graph,
    skeleton,
    to_dot,
    topological_order,
    write_graph,
)

from oracles import enumerate_dag_edge_sets, moral_ancestral_dsep, vstructures


# ---------------------------------------------------------------------------
# Construction and validation
# ---------------------------------------------------------------------------


def test_dag_rejects_cycle():
    with pytest.raises(CycleError):
        Dag(3, ((0, 1), (1, 2), (2, 0)))


def test_cycle_error_is_graph_error():
    assert issubclass(CycleError, GraphError)


def test_dag_rejects_self_loop():
    with pytest.raises(GraphError):
        Dag(2, ((1, 1),))


def test_dag_rejects_out_of_range_node():
    with pytest.raises(GraphError):
        Dag(2, ((0, 2),))


def test_dag_rejects_zero_nodes():
    with pytest.raises(GraphError):
        Dag(0)


def test_dag_parent_child_sets(diamond):
    assert diamond.parents(3) == {1, 2}
    assert diamond.children(0) == {1, 2}
    assert diamond.parents(0) == frozenset()
    assert diamond.n_edges == 4


def test_pdag_rejects_pair_in_both_edge_sets():
    with pytest.raises(GraphError):
        Pdag(3, directed_edges=((0, 1),), undirected_edges=((1, 0),))


def test_pdag_rejects_two_orientations_of_one_pair():
    with pytest.raises(GraphError):
        Pdag(3, directed_edges=((0, 1), (1, 0)))


def test_pdag_normalizes_undirected_order():
    p = Pdag(3, undirected_edges=((2, 1),))
    assert p.undirected_edges == {(1, 2)}
    assert p.adjacent(1, 2) and p.adjacent(2, 1)


def test_undirected_graph_normalizes_and_counts():
    u = UndirectedGraph(4, ((3, 0), (1, 2), (2, 1)))
    assert u.edges == {(0, 3), (1, 2)}
    assert u.n_edges == 2
    assert u.has_edge(3, 0)
    assert not u.has_edge(0, 1)
    assert u.neighbor_sets[2] == {1}


# ---------------------------------------------------------------------------
# Topological order
# ---------------------------------------------------------------------------


def test_topological_order_respects_edges():
    for edges in enumerate_dag_edge_sets(4):
        g = Dag(4, frozenset(edges))
        pos = {v: i for i, v in enumerate(topological_order(g))}
        assert all(pos[a] < pos[b] for a, b in edges)


def test_topological_order_breaks_ties_by_node_id():
    g = Dag(4, ((3, 1),))
    assert topological_order(g) == [0, 2, 3, 1]


# ---------------------------------------------------------------------------
# Skeleton and moralization
# ---------------------------------------------------------------------------


def test_skeleton_of_dag(diamond):
    assert skeleton(diamond).edges == {(0, 1), (0, 2), (1, 3), (2, 3)}


def test_skeleton_of_pdag_merges_both_edge_kinds():
    p = Pdag(4, directed_edges=((0, 1),), undirected_edges=((2, 3),))
    assert skeleton(p).edges == {(0, 1), (2, 3)}


def test_moralize_marries_coparents(collider):
    assert moralize(collider).edges == {(0, 2), (1, 2), (0, 1)}


def test_moralize_diamond_adds_one_marriage(diamond):
    assert moralize(diamond).edges == skeleton(diamond).edges | {(1, 2)}


def test_moralize_chain_is_skeleton(chain4):
    assert moralize(chain4).edges == skeleton(chain4).edges


def test_moralize_pdag_ignores_undirected_parentage():
    # 0 -> 2 <- 1 marries 0,1; the undirected 3 - 2 adds no marriage.
    p = Pdag(4, directed_edges=((0, 2), (1, 2)), undirected_edges=((2, 3),))
    assert moralize_pdag(p).edges == {(0, 2), (1, 2), (0, 1), (2, 3)}


# ---------------------------------------------------------------------------
# Meek rules and CPDAG
# ---------------------------------------------------------------------------


def test_meek_r1_orients_away_from_collider():
    p = Pdag(3, directed_edges=((0, 1),), undirected_edges=((1, 2),))
    closed = meek_closure(p)
    assert closed.directed_edges == {(0, 1), (1, 2)}
    assert closed.undirected_edges == frozenset()


def test_meek_r2_avoids_cycle():
    p = Pdag(3, directed_edges=((0, 1), (1, 2)), undirected_edges=((0, 2),))
    closed = meek_closure(p)
    assert (0, 2) in closed.directed_edges


def test_meek_r3():
    p = Pdag(
        4,
        directed_edges=((1, 3), (2, 3)),
        undirected_edges=((0, 1), (0, 2), (0, 3)),
    )
    closed = meek_closure(p)
    assert (0, 3) in closed.directed_edges
    assert closed.undirected_edges == {(0, 1), (0, 2)}


def test_meek_r4():
    p = Pdag(
        4,
        directed_edges=((2, 3), (3, 1)),
        undirected_edges=((0, 1), (0, 2), (0, 3)),
    )
    closed = meek_closure(p)
    assert closed.directed_edges == {(0, 1), (2, 3), (3, 1)}
    assert closed.undirected_edges == {(0, 2), (0, 3)}


def test_meek_noop_when_nothing_applies():
    p = Pdag(4, undirected_edges=((0, 1), (1, 2), (2, 3), (0, 3)))
    closed = meek_closure(p)  # a square of undirected edges stays undirected
    assert closed == p


def test_cpdag_chain_fully_undirected(chain4):
    c = cpdag_of_dag(chain4)
    assert c.directed_edges == frozenset()
    assert c.undirected_edges == {(0, 1), (1, 2), (2, 3)}


def test_cpdag_collider_stays_directed(collider):
    c = cpdag_of_dag(collider)
    assert c.directed_edges == {(0, 2), (1, 2)}
    assert c.undirected_edges == frozenset()


def test_cpdag_shielded_collider_not_a_vstructure():
    g = Dag(3, ((0, 2), (1, 2), (0, 1)))  # triangle: no unshielded collider
    c = cpdag_of_dag(g)
    assert c.directed_edges == frozenset()
    assert c.undirected_edges == {(0, 1), (0, 2), (1, 2)}


@pytest.mark.parametrize("n_nodes", [2, 3, 4])
def test_cpdag_matches_equivalence_class_union(n_nodes):
    """Compelled orientation = shared orientation across the whole class."""
    classes: dict = {}
    for edges in enumerate_dag_edge_sets(n_nodes):
        key = (
            frozenset(frozenset(e) for e in edges),
            vstructures(n_nodes, edges),
        )
        classes.setdefault(key, []).append(edges)
    for members in classes.values():
        shared = set(members[0])
        for m in members[1:]:
            shared &= m
        undirected = {
            tuple(sorted(e))
            for m in members
            for e in m
            if tuple(e) not in shared
        }
        want_directed = frozenset(shared)
        want_undirected = frozenset(undirected)
        for m in members:
            c = cpdag_of_dag(Dag(n_nodes, frozenset(m)))
            assert c.directed_edges == want_directed
            assert c.undirected_edges == want_undirected


def test_cpdag_members_share_skeleton_and_vstructures():
    g = Dag(4, ((0, 1), (2, 1), (1, 3)))
    c = cpdag_of_dag(g)
    assert skeleton(c).edges == skeleton(g).edges
    assert c.directed_edges >= {(0, 1), (2, 1)}


# ---------------------------------------------------------------------------
# d-separation
# ---------------------------------------------------------------------------


def test_dsep_chain_blocked_by_middle(chain4):
    assert not d_separated(chain4, 0, 2)
    assert d_separated(chain4, 0, 2, (1,))
    assert d_separated(chain4, 0, 3, (1,))
    assert d_separated(chain4, 0, 3, (2,))


def test_dsep_collider_opens_when_conditioned(collider):
    assert d_separated(collider, 0, 1)
    assert not d_separated(collider, 0, 1, (2,))


def test_dsep_descendant_of_collider_opens_path():
    g = Dag(4, ((0, 2), (1, 2), (2, 3)))
    assert d_separated(g, 0, 1)
    assert not d_separated(g, 0, 1, (3,))


def test_dsep_rejects_bad_queries(chain4):
    with pytest.raises(GraphError):
        d_separated(chain4, 1, 1)
    with pytest.raises(GraphError):
        d_separated(chain4, 0, 2, (0,))
    with pytest.raises(GraphError):
        d_separated(chain4, 0, 9)


def test_dsep_matches_moral_ancestral_oracle_exhaustively():
    n_nodes = 4
    nodes = set(range(n_nodes))
    for edges in enumerate_dag_edge_sets(n_nodes):
        g = Dag(n_nodes, frozenset(edges))
        for x, y in itertools.combinations(range(n_nodes), 2):
            rest = sorted(nodes - {x, y})
            for k in range(len(rest) + 1):
                for z in itertools.combinations(rest, k):
                    want = moral_ancestral_dsep(n_nodes, edges, x, y, z)
                    assert d_separated(g, x, y, z) == want


def test_dsep_matches_oracle_on_sampled_5_node_dags():
    import random

    sampler = random.Random(20260814)
    all_edge_sets = [e for e in enumerate_dag_edge_sets(5)]
    nodes = set(range(5))
    for edges in sampler.sample(all_edge_sets, 200):
        g = Dag(5, frozenset(edges))
        for x, y in itertools.combinations(range(5), 2):
            rest = sorted(nodes - {x, y})
            for k in range(len(rest) + 1):
                for z in itertools.combinations(rest, k):
                    assert d_separated(g, x, y, z) == moral_ancestral_dsep(
                        5, edges, x, y, z
                    )


# ---------------------------------------------------------------------------
# Degree histogram
# ---------------------------------------------------------------------------


def test_in_degree_histogram(star5):
    hist = in_degree_histogram(star5)
    assert hist.as_dict() == {0: 4, 4: 1}
    assert hist.max_in_degree == 4


def test_in_degree_histogram_empty_graph():
    hist = in_degree_histogram(Dag(3))
    assert hist.as_dict() == {0: 3}
    assert hist.max_in_degree == 0


# ---------------------------------------------------------------------------
# Text interchange and DOT
# ---------------------------------------------------------------------------


def test_graph_text_round_trip_dag(diamond):
    assert graph_from_text(graph_to_text(diamond)) == diamond


def test_graph_text_round_trip_pdag():
    p = Pdag(4, directed_edges=((0, 1),), undirected_edges=((2, 3),))
    assert graph_from_text(graph_to_text(p)) == p


def test_graph_text_ignores_comments_and_blanks():
    text = "# comment\n\ndag 3\nd 0 1\n  # another\nd 1 2\n"
    assert graph_from_text(text) == Dag(3, ((0, 1), (1, 2)))


@pytest.mark.parametrize(
    "text",
    ["", "graph 3\n", "dag x\n", "dag 3\nd 0\n", "dag 3\nu 0 1\n", "dag 3\nq 0 1\n"],
)
def test_graph_text_rejects_malformed(text):
    with pytest.raises(GraphError):
        graph_from_text(text)


def test_write_read_graph_file(tmp_path, chain4):
    path = tmp_path / "g.txt"
    write_graph(path, chain4)
    assert read_graph(path) == chain4


def test_to_dot_marks_undirected_edges():
    p = Pdag(3, directed_edges=((0, 1),), undirected_edges=((1, 2),))
    dot = to_dot(p)
    assert dot.startswith("digraph G {")
    assert "0 -> 1;" in dot
    assert "1 -> 2 [dir=none];" in dot


def test_to_dot_dag(chain4):
    dot = to_dot(chain4, name="chain")
    assert "digraph chain {" in dot
    assert dot.count("->") == 3
