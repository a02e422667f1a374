"""Conditional-independence tests: tails, partial correlation, testers."""

from __future__ import annotations

import itertools
import math

import numpy as np
import numpy.testing as npt
import pytest
import scipy.stats

from bslbench.citests import (
    CiResult,
    CiTestKind,
    DegenerateDataWarning,
    DSeparationOracle,
    FisherZTester,
    MiGaussianTester,
    build_tester,
    chi2_upper_tail,
    correlation_matrix,
    fisher_z_test,
    mi_gaussian_test,
    normal_upper_tail,
    partial_correlation,
)
from bslbench.graphs import Dag, d_separated
from bslbench.sem import SemSpec, simulate_dataset

from oracles import linear_sem_covariance, partial_corr_from_cov


def _correlated_pair(n: int, rho: float, seed: int = 0) -> np.ndarray:
    """Two columns whose sample correlation is exactly ``rho``.

    Columns are built from an orthonormal basis of the centered sample
    space, so the empirical correlation matches ``rho`` to rounding error.
    """
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, 2))
    raw -= raw.mean(axis=0)
    q, _ = np.linalg.qr(raw)
    u, v = q[:, 0], q[:, 1]
    u = u - u.mean()
    v = v - v.mean()
    u /= np.linalg.norm(u)
    v -= u * (u @ v)
    v /= np.linalg.norm(v)
    x = u
    y = rho * u + math.sqrt(1.0 - rho * rho) * v
    return np.column_stack([x, y])


# ---------------------------------------------------------------------------
# Tail functions
# ---------------------------------------------------------------------------


def test_normal_upper_tail_matches_scipy():
    ts = np.linspace(-5.0, 8.0, 40)
    got = [normal_upper_tail(t) for t in ts]
    npt.assert_allclose(got, scipy.stats.norm.sf(ts), rtol=1e-12)


def test_chi2_upper_tail_matches_scipy():
    for dof in (1.0, 2.0, 5.0):
        ts = np.linspace(0.0, 30.0, 25)
        got = [chi2_upper_tail(t, dof) for t in ts]
        npt.assert_allclose(got, scipy.stats.chi2.sf(ts, dof), rtol=1e-10)


def test_chi2_upper_tail_edge_cases():
    assert chi2_upper_tail(-1.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        chi2_upper_tail(1.0, 0.0)


# ---------------------------------------------------------------------------
# Correlation matrix
# ---------------------------------------------------------------------------


def test_correlation_matrix_matches_numpy():
    values = np.random.default_rng(1).standard_normal((200, 4))
    npt.assert_allclose(
        correlation_matrix(values), np.corrcoef(values, rowvar=False), rtol=1e-12
    )


def test_correlation_matrix_column_selection():
    values = np.random.default_rng(2).standard_normal((100, 5))
    sub = correlation_matrix(values, cols=(4, 1))
    npt.assert_allclose(sub, np.corrcoef(values[:, [4, 1]], rowvar=False), rtol=1e-12)


def test_correlation_matrix_zero_variance_column_warns():
    values = np.random.default_rng(3).standard_normal((50, 3))
    values[:, 1] = 2.5
    with pytest.warns(DegenerateDataWarning):
        corr = correlation_matrix(values)
    assert corr[0, 1] == corr[1, 0] == corr[1, 2] == 0.0
    assert corr[1, 1] == 1.0
    assert np.all(np.isfinite(corr))


def test_correlation_matrix_needs_two_samples():
    with pytest.raises(ValueError):
        correlation_matrix(np.zeros((1, 3)))


# ---------------------------------------------------------------------------
# Partial correlation
# ---------------------------------------------------------------------------


def _residual_corr(values: np.ndarray, x: int, y: int, z: tuple[int, ...]) -> float:
    """Reference partial correlation: correlate regression residuals."""
    if not z:
        return float(np.corrcoef(values[:, x], values[:, y])[0, 1])
    design = np.column_stack([np.ones(len(values)), values[:, list(z)]])
    rx = values[:, x] - design @ np.linalg.lstsq(design, values[:, x], rcond=None)[0]
    ry = values[:, y] - design @ np.linalg.lstsq(design, values[:, y], rcond=None)[0]
    return float(np.corrcoef(rx, ry)[0, 1])


@pytest.mark.parametrize("z", [(), (2,), (2, 3), (2, 3, 4), (2, 3, 4, 5, 6)])
def test_partial_correlation_matches_residual_method(z):
    rng = np.random.default_rng(42)
    values = rng.standard_normal((400, 8)) @ rng.standard_normal((8, 8))
    got = partial_correlation(values, 0, 1, z)
    npt.assert_allclose(got, _residual_corr(values, 0, 1, z), atol=1e-10)


def test_partial_correlation_rejects_bad_queries():
    values = np.random.default_rng(4).standard_normal((50, 4))
    with pytest.raises(ValueError):
        partial_correlation(values, 1, 1)
    with pytest.raises(ValueError):
        partial_correlation(values, 0, 1, (0,))
    with pytest.raises(ValueError):
        partial_correlation(values, 0, 1, (2, 2))


def test_partial_correlation_clamped_on_deterministic_pair():
    x = np.linspace(0.0, 1.0, 64)
    values = np.column_stack([x, 3.0 * x])
    r = partial_correlation(values, 0, 1)
    assert r == pytest.approx(1.0, abs=1e-9)
    assert r < 1.0  # clamp keeps atanh finite


# ---------------------------------------------------------------------------
# Fisher-Z
# ---------------------------------------------------------------------------


def test_fisher_z_uncorrelated_columns():
    res = fisher_z_test(_correlated_pair(100, 0.0), 0, 1)
    assert res.statistic == pytest.approx(0.0, abs=1e-10)
    assert res.p_value == pytest.approx(1.0, abs=1e-10)
    assert res.independent


def test_fisher_z_worked_example_half_correlation():
    # r = 0.5, n = 100: statistic = atanh(0.5) * sqrt(97) ~= 5.410043,
    # p = 2 * normal_sf(statistic) ~= 6.3e-8.
    res = fisher_z_test(_correlated_pair(100, 0.5), 0, 1)
    assert res.statistic == pytest.approx(math.atanh(0.5) * math.sqrt(97), rel=1e-9)
    assert res.statistic == pytest.approx(5.410043, abs=1e-5)
    assert res.p_value == pytest.approx(2 * scipy.stats.norm.sf(res.statistic), rel=1e-9)
    assert res.p_value == pytest.approx(6.3e-8, rel=0.02)
    assert not res.independent
    assert res.dof_or_n_eff == 97.0


def test_fisher_z_statistic_sign_follows_correlation():
    res = fisher_z_test(_correlated_pair(100, -0.5), 0, 1)
    assert res.statistic == pytest.approx(-math.atanh(0.5) * math.sqrt(97), rel=1e-9)
    assert not res.independent


def test_fisher_z_clamped_perfect_correlation():
    x = np.linspace(0.0, 1.0, 100)
    res = fisher_z_test(np.column_stack([x, 2 * x]), 0, 1)
    assert res.statistic > 100.0
    assert res.p_value == pytest.approx(0.0, abs=1e-30)
    assert not res.independent
    assert res.note is None


def test_fisher_z_conditioning_reduces_n_eff():
    values = np.random.default_rng(5).standard_normal((64, 4))
    res = fisher_z_test(values, 0, 1, (2, 3))
    assert res.dof_or_n_eff == 64 - 2 - 3


def test_fisher_z_rejects_wrong_kind():
    values = np.random.default_rng(6).standard_normal((32, 2))
    with pytest.raises(ValueError):
        fisher_z_test(values, 0, 1, test=CiTestKind("mi_gaussian"))


def test_fisher_z_alpha_from_test_kind():
    values = _correlated_pair(100, 0.17, seed=9)
    p = fisher_z_test(values, 0, 1).p_value
    assert 0.05 < p < 0.5  # moderate evidence: verdict depends on alpha
    assert fisher_z_test(values, 0, 1, test=CiTestKind("fisher_z", 0.01)).independent
    assert not fisher_z_test(
        values, 0, 1, test=CiTestKind("fisher_z", max(0.5, p + 0.1))
    ).independent


# ---------------------------------------------------------------------------
# Gaussian MI
# ---------------------------------------------------------------------------


def test_mi_gaussian_statistic_formula():
    values = _correlated_pair(256, 0.4, seed=7)
    res = mi_gaussian_test(values, 0, 1)
    want_stat = -256 * math.log1p(-(0.4**2))
    assert res.statistic == pytest.approx(want_stat, rel=1e-6)
    assert res.p_value == pytest.approx(scipy.stats.chi2.sf(res.statistic, 1), rel=1e-9)
    assert res.dof_or_n_eff == 1.0
    assert not res.independent


def test_mi_gaussian_uncorrelated_columns():
    res = mi_gaussian_test(_correlated_pair(128, 0.0, seed=8), 0, 1)
    assert res.statistic == pytest.approx(0.0, abs=1e-12)
    assert res.p_value == pytest.approx(1.0, abs=1e-9)
    assert res.independent


def test_mi_gaussian_rejects_wrong_kind():
    values = np.random.default_rng(9).standard_normal((32, 2))
    with pytest.raises(ValueError):
        mi_gaussian_test(values, 0, 1, test=CiTestKind("fisher_z"))


def test_mi_and_fisher_agree_on_clear_cases():
    for rho, independent in [(0.0, True), (0.6, False)]:
        values = _correlated_pair(512, rho, seed=11)
        assert fisher_z_test(values, 0, 1).independent is independent
        assert mi_gaussian_test(values, 0, 1).independent is independent


# ---------------------------------------------------------------------------
# Stateful testers
# ---------------------------------------------------------------------------


def test_tester_counts_tests():
    values = np.random.default_rng(10).standard_normal((128, 4))
    tester = FisherZTester(values)
    assert tester.n_tests == 0
    tester(0, 1)
    tester(0, 2, (1,))
    tester(0, 1)
    assert tester.n_tests == 3
    assert (tester.n_samples, tester.n_vars) == (128, 4)


def test_tester_skips_when_sample_too_small():
    values = np.random.default_rng(11).standard_normal((4, 3))
    tester = FisherZTester(values)
    res = tester(0, 1, (2,))  # 4 - 1 - 3 < 1
    assert res.note == "skipped"
    assert res.independent
    assert res.p_value == 1.0
    assert tester.n_skipped == 1
    assert tester(0, 1).note is None  # |z| = 0 still fits


def test_tester_flags_singular_submatrix():
    rng = np.random.default_rng(12)
    x = rng.standard_normal(64)
    y = rng.standard_normal(64)
    values = np.column_stack([x, y, x])  # column 2 duplicates column 0
    tester = FisherZTester(values)
    res = tester(0, 1, (2,))
    assert res.note == "singular"
    assert res.independent and res.p_value == 1.0
    assert tester.n_singular == 1


def test_tester_rejects_bad_alpha():
    values = np.random.default_rng(13).standard_normal((16, 2))
    with pytest.raises(ValueError):
        FisherZTester(values, alpha=0.0)
    with pytest.raises(ValueError):
        FisherZTester(values, alpha=1.0)


def test_tester_warns_on_constant_column():
    values = np.random.default_rng(14).standard_normal((32, 3))
    values[:, 2] = 7.0
    with pytest.warns(DegenerateDataWarning):
        MiGaussianTester(values)


def test_build_tester_dispatches_kind_and_alpha():
    values = np.random.default_rng(15).standard_normal((64, 3))
    fisher = build_tester(values, CiTestKind("fisher_z", 0.01))
    mi = build_tester(values, CiTestKind("mi_gaussian"))
    assert isinstance(fisher, FisherZTester) and fisher.alpha == 0.01
    assert isinstance(mi, MiGaussianTester) and mi.alpha == 0.05


def test_ci_test_kind_validation():
    with pytest.raises(ValueError):
        CiTestKind("bogus")
    with pytest.raises(ValueError):
        CiTestKind("fisher_z", alpha=1.5)


# ---------------------------------------------------------------------------
# d-separation oracle tester
# ---------------------------------------------------------------------------


def test_dsep_oracle_matches_graph_queries(diamond):
    oracle = DSeparationOracle(diamond)
    for x, y in itertools.combinations(range(4), 2):
        rest = [v for v in range(4) if v not in (x, y)]
        for k in range(len(rest) + 1):
            for z in itertools.combinations(rest, k):
                res = oracle(x, y, z)
                want = d_separated(diamond, x, y, z)
                assert res.independent is want
                assert res.p_value == (1.0 if want else 0.0)


def test_dsep_oracle_counts_memoized_calls(collider):
    oracle = DSeparationOracle(collider)
    first = oracle(0, 1, (2,))
    second = oracle(1, 0, (2,))  # symmetric query hits the memo
    assert oracle.n_tests == 2
    assert first == second
    assert not first.independent
    assert first.statistic == math.inf


def test_dsep_oracle_rejects_bad_query(collider):
    oracle = DSeparationOracle(collider)
    with pytest.raises(ValueError):
        oracle(0, 0)


# ---------------------------------------------------------------------------
# Ground truth from the analytic SEM covariance
# ---------------------------------------------------------------------------


def test_fisher_verdicts_match_population_partial_correlations():
    dag = Dag(5, ((0, 1), (0, 2), (1, 3), (2, 3), (3, 4)))
    weights = {e: w for e, w in zip(sorted(dag.edges), (0.8, -1.1, 0.9, 0.7, 1.3))}
    sigma = 1.5
    cov = linear_sem_covariance(5, weights, sigma)
    data = simulate_dataset(dag, SemSpec("linear", sigma, weights), 50_000, seed=21)
    tester = FisherZTester(data)
    for x, y in itertools.combinations(range(5), 2):
        rest = [v for v in range(5) if v not in (x, y)]
        for k in range(3):
            for z in itertools.combinations(rest, k):
                pop = partial_corr_from_cov(cov, x, y, z)
                sample = partial_correlation(data.values, x, y, z)
                assert sample == pytest.approx(pop, abs=0.02)
                if abs(pop) < 1e-12:
                    assert d_separated(dag, x, y, z)
                elif abs(pop) > 0.05:
                    # population dependence this strong is detected at n = 50k
                    assert not tester(x, y, z).independent
