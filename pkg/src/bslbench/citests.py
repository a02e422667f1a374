"""Conditional-independence tests for Gaussian and rank-style data.

Two frequentist tests over partial correlations are provided, sharing one
precomputed correlation matrix per dataset:

* Fisher-Z: ``z = atanh(r) * sqrt(n - |cond| - 3)`` referred to a standard
  normal two-sided tail.
* Gaussian mutual information: ``G = -n * ln(1 - r^2)`` referred to the
  upper tail of a chi-squared distribution with one degree of freedom.

Partial correlations come from the inverse of the correlation submatrix
over the tested variables.  Degenerate situations (constant columns,
singular submatrices, too few samples for the requested conditioning-set
size) never raise in the middle of a structure-learning run; they resolve
conservatively to independence and are flagged on the returned result.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg.lapack import dpotrf as _dpotrf
from scipy.linalg.lapack import dpotri as _dpotri
from scipy.special import gammaincc

from .graphs import Dag, d_separated
from .sem import DataMatrix

__all__ = [
    "TEST_KINDS",
    "DegenerateDataWarning",
    "CiTestKind",
    "CiResult",
    "normal_upper_tail",
    "chi2_upper_tail",
    "correlation_matrix",
    "partial_correlation",
    "fisher_z_test",
    "mi_gaussian_test",
    "FisherZTester",
    "MiGaussianTester",
    "DSeparationOracle",
    "build_tester",
]

TEST_KINDS = ("fisher_z", "mi_gaussian")

# Partial correlations are clamped to this magnitude before the Fisher
# transform (atanh diverges at +-1) and the MI log term (ln(0)).
_R_CLAMP = 1.0 - 1e-12


class DegenerateDataWarning(UserWarning):
    """Issued when zero-variance columns force correlations to zero."""


@dataclass(frozen=True)
class CiTestKind:
    """A test family paired with its rejection level."""

    kind: str
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in TEST_KINDS:
            raise ValueError(f"kind must be one of {TEST_KINDS}, got {self.kind!r}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha!r}")


@dataclass(frozen=True)
class CiResult:
    """Outcome of one conditional-independence test.

    ``dof_or_n_eff`` carries the normal-tail effective sample size
    ``n - |cond| - 3`` for Fisher-Z and the chi-squared degrees of freedom
    for the MI test.  ``note`` is None for a clean test, ``"skipped"`` when
    the sample was too small for the conditioning set, and ``"singular"``
    when the correlation submatrix could not be inverted; both flagged
    cases resolve to independence with a p-value of one.
    """

    statistic: float
    p_value: float
    dof_or_n_eff: float
    independent: bool
    note: str | None = None


def normal_upper_tail(t: float) -> float:
    """P(Z >= t) for a standard normal variable, via the complementary error function."""
    return 0.5 * math.erfc(t / math.sqrt(2.0))


def chi2_upper_tail(t: float, dof: float) -> float:
    """P(X >= t) for a chi-squared variable with ``dof`` degrees of freedom.

    Evaluated through the regularized upper incomplete gamma function
    ``Q(dof/2, t/2)``.
    """
    if dof <= 0:
        raise ValueError(f"dof must be > 0, got {dof!r}")
    if t < 0:
        return 1.0
    return float(gammaincc(dof / 2.0, t / 2.0))


def _as_values(data: DataMatrix | np.ndarray) -> np.ndarray:
    if isinstance(data, DataMatrix):
        return data.values
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"data must be 2-dimensional, got shape {arr.shape}")
    return arr


def correlation_matrix(
    data: DataMatrix | np.ndarray, cols: Sequence[int] | None = None
) -> np.ndarray:
    """Return the Pearson correlation matrix of the selected columns.

    Zero-variance columns cannot be standardized; their correlations are
    set to zero (diagonal stays one) and a :class:`DegenerateDataWarning`
    is issued, which keeps downstream tests conservative rather than
    propagating NaNs.
    """
    values = _as_values(data)
    if cols is not None:
        values = values[:, list(cols)]
    if values.shape[0] < 2:
        raise ValueError("need at least 2 samples to correlate")
    sd = values.std(axis=0)
    degenerate = np.flatnonzero(sd == 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(values, rowvar=False)
    corr = np.atleast_2d(corr)
    if degenerate.size:
        warnings.warn(
            f"zero-variance columns treated as uncorrelated: {degenerate.tolist()}",
            DegenerateDataWarning,
            stacklevel=2,
        )
        corr[degenerate, :] = 0.0
        corr[:, degenerate] = 0.0
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def _first_order_partial(rxy: float, rxw: float, ryw: float) -> float | None:
    """One step of the partial-correlation recursion; None when singular."""
    den = (1.0 - rxw * rxw) * (1.0 - ryw * ryw)
    if den <= 0.0:
        return None
    return (rxy - rxw * ryw) / math.sqrt(den)


def _partial_corr_from_matrix(
    corr: np.ndarray, x: int, y: int, z: tuple[int, ...]
) -> tuple[float, str | None]:
    """Partial correlation of x, y given z from a full correlation matrix.

    Returns ``(r, note)`` where note is ``"singular"`` when the submatrix
    over ``(x, y) + z`` is numerically singular; r is clamped to keep the
    Fisher transform finite.  Conditioning sets of size <= 2 use the
    closed-form recursion; larger sets invert the correlation submatrix
    through its Cholesky factor and read the precision off-diagonal.
    """
    if not z:
        r = float(corr[x, y])
    elif len(z) == 1:
        w = z[0]
        r = _first_order_partial(
            float(corr[x, y]), float(corr[x, w]), float(corr[y, w])
        )
        if r is None:
            return 0.0, "singular"
    elif len(z) == 2:
        w, v = z
        rxy_v = _first_order_partial(
            float(corr[x, y]), float(corr[x, v]), float(corr[y, v])
        )
        rxw_v = _first_order_partial(
            float(corr[x, w]), float(corr[x, v]), float(corr[w, v])
        )
        ryw_v = _first_order_partial(
            float(corr[y, w]), float(corr[y, v]), float(corr[w, v])
        )
        if rxy_v is None or rxw_v is None or ryw_v is None:
            return 0.0, "singular"
        r = _first_order_partial(rxy_v, rxw_v, ryw_v)
        if r is None:
            return 0.0, "singular"
    else:
        idx = np.array((x, y, *z), dtype=np.intp)
        sub = corr[idx[:, None], idx]
        cho, info = _dpotrf(sub, lower=1, clean=0, overwrite_a=1)
        if info != 0:
            return 0.0, "singular"
        precision, info = _dpotri(cho, lower=1, overwrite_c=1)
        if info != 0:
            return 0.0, "singular"
        den = float(precision[0, 0] * precision[1, 1])
        if not np.isfinite(den) or den <= 0.0:
            return 0.0, "singular"
        r = float(-precision[1, 0] / math.sqrt(den))
    if not math.isfinite(r):
        return 0.0, "singular"
    return max(-_R_CLAMP, min(_R_CLAMP, r)), None


def _check_query(x: int, y: int, z: tuple[int, ...]) -> None:
    if x == y:
        raise ValueError(f"x and y must differ, got x = y = {x}")
    if x in z or y in z or len(set(z)) != len(z):
        raise ValueError(f"conditioning set must exclude x and y, got z = {z}")


def partial_correlation(
    data: DataMatrix | np.ndarray, x: int, y: int, z: Iterable[int] = ()
) -> float:
    """Sample partial correlation of columns x and y given the columns in z.

    ``x``, ``y`` and the members of ``z`` must be distinct columns.  A
    numerically singular correlation submatrix yields 0.0 (conservative:
    no association measurable).
    """
    z = tuple(z)
    _check_query(x, y, z)
    corr = correlation_matrix(data, cols=(x, y, *z))
    local_z = tuple(range(2, 2 + len(z)))
    r, _ = _partial_corr_from_matrix(corr, 0, 1, local_z)
    return r


def _fisher_z_from_r(r: float, n_samples: int, n_cond: int) -> tuple[float, float, float]:
    n_eff = n_samples - n_cond - 3
    stat = math.atanh(r) * math.sqrt(n_eff)
    return stat, 2.0 * normal_upper_tail(abs(stat)), float(n_eff)


def _mi_gaussian_from_r(r: float, n_samples: int, n_cond: int) -> tuple[float, float, float]:
    stat = -n_samples * math.log1p(-(r * r))
    return stat, chi2_upper_tail(stat, 1.0), 1.0


_STAT_FUNCS = {"fisher_z": _fisher_z_from_r, "mi_gaussian": _mi_gaussian_from_r}


class _CorrelationTester:
    """Callable CI tester over one dataset with a precomputed correlation matrix.

    Instances count issued tests in ``n_tests`` (plus degenerate outcomes
    in ``n_skipped`` and ``n_singular``) so harness runs can report test
    budgets.  Calling with too few samples for the requested conditioning
    set (``n - |z| - 3 < 1``) skips the test, returning an independence
    verdict flagged ``"skipped"``.
    """

    kind: str = ""

    def __init__(self, data: DataMatrix | np.ndarray, alpha: float = 0.05):
        values = _as_values(data)
        if not (0.0 < alpha < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
        self.alpha = float(alpha)
        self.n_samples = values.shape[0]
        self.n_vars = values.shape[1]
        self._corr = correlation_matrix(values)
        self.n_tests = 0
        self.n_skipped = 0
        self.n_singular = 0

    def __call__(self, x: int, y: int, z: Iterable[int] = ()) -> CiResult:
        z = tuple(z)
        _check_query(x, y, z)
        self.n_tests += 1
        if self.n_samples - len(z) - 3 < 1:
            self.n_skipped += 1
            return CiResult(0.0, 1.0, 0.0, True, "skipped")
        r, note = _partial_corr_from_matrix(self._corr, x, y, z)
        if note is not None:
            self.n_singular += 1
            return CiResult(0.0, 1.0, 0.0, True, note)
        stat, p_value, dof = _STAT_FUNCS[self.kind](r, self.n_samples, len(z))
        return CiResult(stat, p_value, dof, p_value > self.alpha, None)


class FisherZTester(_CorrelationTester):
    """Fisher-Z partial-correlation tester (normal reference distribution)."""

    kind = "fisher_z"


class MiGaussianTester(_CorrelationTester):
    """Gaussian mutual-information tester (chi-squared reference, 1 dof)."""

    kind = "mi_gaussian"


class DSeparationOracle:
    """A perfect CI tester that consults d-separation in a known DAG.

    Verdicts are memoized per unordered query, and ``n_tests`` counts every
    call (cached or not) so learner test budgets stay comparable.
    """

    kind = "oracle"

    def __init__(self, dag: Dag, alpha: float = 0.05):
        self.dag = dag
        self.alpha = float(alpha)
        self.n_vars = dag.n_nodes
        self.n_tests = 0
        self._memo: dict[tuple[int, int, frozenset], bool] = {}

    def __call__(self, x: int, y: int, z: Iterable[int] = ()) -> CiResult:
        z = tuple(z)
        _check_query(x, y, z)
        self.n_tests += 1
        key = (min(x, y), max(x, y), frozenset(z))
        verdict = self._memo.get(key)
        if verdict is None:
            verdict = d_separated(self.dag, x, y, key[2])
            self._memo[key] = verdict
        p_value = 1.0 if verdict else 0.0
        return CiResult(0.0 if verdict else math.inf, p_value, 0.0, verdict, None)


def fisher_z_test(
    data: DataMatrix | np.ndarray,
    x: int,
    y: int,
    z: Iterable[int] = (),
    test: CiTestKind | None = None,
) -> CiResult:
    """One-shot Fisher-Z test; see :class:`FisherZTester` for batch use."""
    if test is not None and test.kind != "fisher_z":
        raise ValueError(f"expected a fisher_z test kind, got {test.kind!r}")
    alpha = 0.05 if test is None else test.alpha
    return FisherZTester(data, alpha=alpha)(x, y, z)


def mi_gaussian_test(
    data: DataMatrix | np.ndarray,
    x: int,
    y: int,
    z: Iterable[int] = (),
    test: CiTestKind | None = None,
) -> CiResult:
    """One-shot Gaussian-MI test; see :class:`MiGaussianTester` for batch use."""
    if test is not None and test.kind != "mi_gaussian":
        raise ValueError(f"expected a mi_gaussian test kind, got {test.kind!r}")
    alpha = 0.05 if test is None else test.alpha
    return MiGaussianTester(data, alpha=alpha)(x, y, z)


def build_tester(
    data: DataMatrix | np.ndarray, test: CiTestKind
) -> _CorrelationTester:
    """Construct the stateful tester matching a :class:`CiTestKind`."""
    cls = {"fisher_z": FisherZTester, "mi_gaussian": MiGaussianTester}[test.kind]
    return cls(data, alpha=test.alpha)
