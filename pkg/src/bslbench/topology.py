"""Preferential-attachment DAG generation with a tunable scaling exponent.

Networks are grown one node at a time.  Each arriving node attaches to a
single existing node chosen with probability proportional to total degree
raised to the exponent gamma, and the new edge is oriented from the
arriving node to its chosen target.  The result is a spanning tree on
``n_nodes`` nodes with ``n_nodes - 1`` edges whose in-degree concentration
grows with gamma: small exponents give chain-like graphs, large exponents
give star-like graphs with pronounced hubs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import Dag, GraphError
from .rng import make_generator

__all__ = ["TopologySpec", "attachment_weights", "generate_pa_dag"]


@dataclass(frozen=True)
class TopologySpec:
    """Generation parameters: node count, scaling exponent, and seed.

    ``gamma`` is the exponent of the attachment kernel ``pi(k) ~ k**gamma``;
    it must be finite and nonnegative.  ``seed`` keys the Philox stream
    that drives target selection.
    """

    n_nodes: int
    gamma: float
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.n_nodes) < 2:
            raise GraphError(f"n_nodes must be >= 2, got {self.n_nodes!r}")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise GraphError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        object.__setattr__(self, "gamma", float(self.gamma))


def attachment_weights(degrees: Sequence[int], gamma: float) -> np.ndarray:
    """Return attachment probabilities proportional to ``degree ** gamma``.

    Parameters
    ----------
    degrees : sequence of int
        Total (orientation-blind) degrees of the attachment candidates;
        all must be >= 1 and the sequence non-empty.
    gamma : float
        Finite nonnegative scaling exponent; gamma = 0 gives the uniform
        distribution.

    Returns
    -------
    ndarray
        Probability vector ``k_i**gamma / sum_j k_j**gamma``.
    """
    if not (np.isfinite(gamma) and gamma >= 0):
        raise GraphError(f"gamma must be finite and >= 0, got {gamma!r}")
    deg = np.asarray(degrees, dtype=float)
    if deg.size == 0:
        raise GraphError("degrees must be non-empty")
    if np.any(deg <= 0):
        raise GraphError("every attachment candidate needs degree >= 1")
    weights = deg**gamma
    return weights / weights.sum()


def generate_pa_dag(spec: TopologySpec, rng: np.random.Generator | None = None) -> Dag:
    """Grow a preferential-attachment DAG according to ``spec``.

    Node 0 seeds the network and node 1 attaches to it unconditionally.
    Each subsequent node t draws one attachment target among nodes
    ``0..t-1`` with the probabilities of :func:`attachment_weights` over
    current total degrees, by inverting the cumulative weight vector with
    a single uniform draw; the new edge is oriented ``t -> target``.
    Edges therefore always point from later to earlier nodes, so the graph
    is acyclic by construction, and the late nodes nobody attached to are
    the in-degree-0 roots of the downstream structural-equation model.

    Parameters
    ----------
    spec : TopologySpec
        Node count, exponent, and seed.
    rng : numpy.random.Generator, optional
        Random stream override; by default a Philox stream keyed by
        ``spec.seed``, so identical specs regenerate identical graphs.

    Returns
    -------
    Dag
        A tree-shaped DAG with ``spec.n_nodes - 1`` edges.
    """
    if rng is None:
        rng = make_generator(spec.seed)
    n_nodes = spec.n_nodes
    degrees = np.zeros(n_nodes, dtype=float)
    edges: list[tuple[int, int]] = []
    for t in range(1, n_nodes):
        if t == 1:
            target = 0
        else:
            probabilities = attachment_weights(degrees[:t], spec.gamma)
            cumulative = np.cumsum(probabilities)
            u = rng.random() * cumulative[-1]
            target = int(np.searchsorted(cumulative, u, side="right"))
            if target >= t:  # guard against u == total under fp rounding
                target = t - 1
        edges.append((t, target))
        degrees[t] += 1.0
        degrees[target] += 1.0
    return Dag(n_nodes, frozenset(edges))
