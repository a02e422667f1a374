"""Structural-equation data simulation on a DAG.

Root nodes (in-degree zero) are standard-normal sources.  Every other node
is a function of its parents plus scaled independent Gaussian noise:

* linear model:     ``x_i = sum_p w_pi * x_p + sigma * eta_i``
* nonlinear model:  ``x_i = sigmoid(sum_p w_pi * x_p) + sigma * eta_i``

with ``sigmoid(z) = 1 / (1 + exp(-z))`` and unit edge weights by default.
The full noise field is drawn once up front from a seeded Philox stream,
so two simulations with the same seed but different sigma scale the exact
same draws.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.special import expit

from .graphs import Dag, GraphError, topological_order
from .rng import make_generator

__all__ = [
    "MODELS",
    "SemSpec",
    "DataMatrix",
    "sigmoid",
    "apply_sem",
    "simulate_dataset",
    "write_data_csv",
    "read_data_csv",
]

MODELS = ("linear", "nonlinear")


@dataclass(frozen=True)
class SemSpec:
    """Structural-equation model parameters.

    Parameters
    ----------
    model : str
        Either ``"linear"`` or ``"nonlinear"`` (sigmoid link).
    sigma : float
        Noise standard deviation for non-root nodes; must be >= 0
        (zero makes non-root nodes deterministic functions of their
        parents).
    weights : float or mapping, optional
        Either one scalar weight shared by every edge (default 1.0), or a
        mapping ``(parent, child) -> weight`` that must cover exactly the
        edge set of the graph it is applied to.
    """

    model: str
    sigma: float
    weights: float | Mapping[tuple[int, int], float] = field(default=1.0)

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        if isinstance(self.weights, Mapping):
            frozen = {
                (int(p), int(c)): float(w) for (p, c), w in self.weights.items()
            }
            if not all(np.isfinite(w) for w in frozen.values()):
                raise ValueError("every edge weight must be finite")
            object.__setattr__(self, "weights", frozen)
        else:
            weight = float(self.weights)
            if not np.isfinite(weight):
                raise ValueError(f"weights must be finite, got {self.weights!r}")
            object.__setattr__(self, "weights", weight)

    def edge_weights(self, g: Dag) -> dict[tuple[int, int], float]:
        """Resolve the weight of every edge of ``g``, validating coverage.

        A scalar broadcasts to all edges; a mapping must assign a weight to
        each edge of ``g`` and to nothing else.
        """
        if not isinstance(self.weights, Mapping):
            return {edge: self.weights for edge in g.edges}
        extra = set(self.weights) - set(g.edges)
        missing = set(g.edges) - set(self.weights)
        if extra or missing:
            raise GraphError(
                "weights must cover exactly the edges of the graph"
                f" (missing {sorted(missing)}, extra {sorted(extra)})"
            )
        return dict(self.weights)


@dataclass(frozen=True)
class DataMatrix:
    """A dense sample matrix with shape ``(n_samples, n_vars)``."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"data must be 2-dimensional, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic link ``1 / (1 + exp(-z))``, numerically stable at both tails."""
    return expit(z)


def apply_sem(g: Dag, spec: SemSpec, noise: np.ndarray) -> np.ndarray:
    """Propagate a pre-drawn noise field through the structural equations.

    This is the deterministic core of the simulator: column i of ``noise``
    is node i's noise draw.  Roots copy their noise unscaled; children add
    ``spec.sigma`` times their noise to the (possibly squashed) parent sum.

    Parameters
    ----------
    g : Dag
        Causal structure; column count of ``noise`` must equal ``g.n_nodes``.
    spec : SemSpec
        Model family, noise scale, and edge weights.
    noise : ndarray
        Standard-normal field of shape ``(n_samples, g.n_nodes)``.

    Returns
    -------
    ndarray
        Simulated values, same shape as ``noise``.
    """
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 2 or noise.shape[1] != g.n_nodes:
        raise ValueError(
            f"noise must have shape (n_samples, {g.n_nodes}), got {noise.shape}"
        )
    weights = spec.edge_weights(g)
    values = np.empty_like(noise)
    for i in topological_order(g):
        parents = sorted(g.parent_sets[i])
        if not parents:
            values[:, i] = noise[:, i]
            continue
        weight_vec = np.array([weights[(p, i)] for p in parents])
        drive = values[:, parents] @ weight_vec
        if spec.model == "linear":
            values[:, i] = drive + spec.sigma * noise[:, i]
        else:
            values[:, i] = sigmoid(drive) + spec.sigma * noise[:, i]
    return values


def simulate_dataset(g: Dag, spec: SemSpec, n_samples: int, seed: int) -> DataMatrix:
    """Simulate ``n_samples`` joint observations of all nodes of g.

    The noise field is one ``standard_normal((n_samples, n_nodes))`` block
    from the Philox stream keyed by ``seed``; the same seed therefore pins
    the noise draws regardless of sigma or model.
    """
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if g.n_nodes < 1:
        raise GraphError("graph must have at least one node")
    noise = make_generator(seed).standard_normal((n_samples, g.n_nodes))
    return DataMatrix(apply_sem(g, spec, noise))


def write_data_csv(path: str | Path, data: DataMatrix) -> None:
    """Write a data matrix as CSV with header ``x0,x1,...`` and 17-digit floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(data.n_vars)])
        for row in data.values:
            writer.writerow([f"{v:.17g}" for v in row])


def read_data_csv(path: str | Path) -> DataMatrix:
    """Read a data matrix written by :func:`write_data_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty data file")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return DataMatrix(arr)
