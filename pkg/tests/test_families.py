"""Distribution layer: log PMFs, moments, samplers."""

import math

import numpy as np
import pytest
from scipy.stats import chi2

from countsel import DistParams, Family, ParameterError, log_pmf, moments, sample

from helpers import pmf_sum_and_bound

# independent high-precision evaluation of the NB2 mass at
# lam=1.6487, nu=2, y=2 (50-digit log-gamma arithmetic), frozen up front
NB2_LOGPMF_ORACLE = -1.692602912118969


class TestLogPmf:
    def test_poisson_unit_rate_at_zero_is_minus_one(self):
        assert log_pmf(Family.POISSON, DistParams(lam=1.0), 0) == -1.0

    def test_zip_without_inflation_equals_poisson_exactly(self):
        zip_params = DistParams(lam=2.0, omega=0.0)
        pois_params = DistParams(lam=2.0)
        ys = np.arange(0, 30)
        zip_ll = log_pmf(Family.ZIP, zip_params, ys)
        pois_ll = log_pmf(Family.POISSON, pois_params, ys)
        assert np.all(zip_ll == pois_ll)

    def test_nb2_against_high_precision_oracle(self):
        value = log_pmf(Family.NB2, DistParams(lam=1.6487, nu=2.0), 2)
        assert value == pytest.approx(NB2_LOGPMF_ORACLE, abs=1e-12)

    def test_nb2_huge_dispersion_approaches_poisson(self):
        ys = np.arange(0, 51)
        for lam in (0.5, 4.5, 20.0):
            nb = log_pmf(Family.NB2, DistParams(lam=lam, nu=1e8), ys)
            po = log_pmf(Family.POISSON, DistParams(lam=lam), ys)
            assert np.max(np.abs(nb - po)) < 1e-4

    def test_zinb_zero_branch_mixes_structural_and_count_zero(self):
        params = DistParams(lam=2.0, omega=0.3, nu=2.0)
        p0_count = (1.0 + 2.0 / 2.0) ** -2.0
        expected = math.log(0.3 + 0.7 * p0_count)
        assert log_pmf(Family.ZINB, params, 0) == pytest.approx(expected, abs=1e-14)

    def test_vectorized_shape_matches_input(self):
        out = log_pmf(Family.ZINB, DistParams(lam=1.5, omega=0.1, nu=3.0), np.arange(7))
        assert out.shape == (7,)

    @pytest.mark.parametrize(
        "family,params",
        [
            (Family.POISSON, DistParams(lam=-1.0)),
            (Family.POISSON, DistParams(lam=0.0)),
            (Family.ZIP, DistParams(lam=1.0, omega=1.0)),
            (Family.ZIP, DistParams(lam=1.0, omega=-0.1)),
            (Family.NB2, DistParams(lam=1.0, nu=-2.0)),
            (Family.POISSON, DistParams(lam=1.0, omega=0.2)),  # omega not allowed
            (Family.ZIP, DistParams(lam=1.0, omega=0.2, nu=3.0)),  # finite nu not allowed
            (Family.NB2, DistParams(lam=1.0, omega=0.2, nu=3.0)),  # omega not allowed
        ],
    )
    def test_parameter_domain_errors(self, family, params):
        with pytest.raises(ParameterError):
            log_pmf(family, params, 1)

    def test_negative_count_rejected(self):
        with pytest.raises(ParameterError):
            log_pmf(Family.POISSON, DistParams(lam=1.0), -1)


NORMALIZATION_GRID = [
    (Family.POISSON, DistParams(lam=0.5)),
    (Family.POISSON, DistParams(lam=12.2)),
    (Family.NB2, DistParams(lam=1.6487, nu=0.5)),
    (Family.NB2, DistParams(lam=4.5, nu=2.0)),
    (Family.NB2, DistParams(lam=2.0, nu=1e8)),
    (Family.ZIP, DistParams(lam=2.0, omega=0.05)),
    (Family.ZIP, DistParams(lam=7.4, omega=0.5)),
    (Family.ZINB, DistParams(lam=1.6487, omega=0.2, nu=0.55)),
    (Family.ZINB, DistParams(lam=12.2, omega=0.5, nu=6.0)),
]


@pytest.mark.parametrize("family,params", NORMALIZATION_GRID)
def test_pmf_normalizes(family, params):
    total, tail = pmf_sum_and_bound(family, params)
    assert tail < 1e-12
    assert total >= 1.0 - 1e-10
    assert total <= 1.0 + 1e-12  # float-summation slack only


class TestMoments:
    def test_poisson_equidispersed(self):
        m = moments(Family.POISSON, DistParams(lam=4.5))
        assert (m.mean, m.variance, m.dispersion_index) == (4.5, 4.5, 1.0)

    def test_nb2_dispersion_index(self):
        m = moments(Family.NB2, DistParams(lam=2.0, nu=1.0))
        assert m.dispersion_index == pytest.approx(3.0, abs=1e-14)

    def test_zip_dispersion_index(self):
        m = moments(Family.ZIP, DistParams(lam=3.0, omega=0.2))
        assert m.mean == pytest.approx(2.4)
        assert m.dispersion_index == pytest.approx(1.0 + 3.0 * 0.2)

    def test_zinb_closed_form(self):
        # direct substitution, cross-checked empirically in the sampler tests
        m = moments(Family.ZINB, DistParams(lam=2.0, omega=0.5, nu=2.0))
        assert m.mean == pytest.approx(1.0, abs=1e-14)
        assert m.variance == pytest.approx(3.0, abs=1e-14)
        assert m.dispersion_index == pytest.approx(3.0, abs=1e-14)

    @pytest.mark.parametrize("family,params", NORMALIZATION_GRID)
    def test_variance_at_least_mean(self, family, params):
        m = moments(family, params)
        assert m.variance >= m.mean - 1e-12
        assert m.dispersion_index == pytest.approx(m.variance / m.mean)


class TestSamplers:
    def test_zip_overwhelming_inflation_gives_zeros(self):
        rng = np.random.default_rng(5)
        draws = sample(Family.ZIP, DistParams(lam=5.0, omega=0.999999), 10, rng)
        assert np.all(draws == 0)

    def test_poisson_law_of_large_numbers(self):
        rng = np.random.default_rng(11)
        draws = sample(Family.POISSON, DistParams(lam=math.exp(0.5)), 1_000_000, rng)
        assert abs(draws.mean() - 1.6487) < 0.01

    def test_nb2_dispersion_ratio(self):
        rng = np.random.default_rng(12)
        draws = sample(Family.NB2, DistParams(lam=2.0, nu=1.0), 1_000_000, rng)
        assert abs(draws.var() / draws.mean() - 3.0) < 0.05

    @pytest.mark.parametrize(
        "family,params",
        [
            (Family.POISSON, DistParams(lam=4.5)),
            (Family.NB2, DistParams(lam=2.0, nu=1.5)),
            (Family.ZIP, DistParams(lam=3.0, omega=0.25)),
            (Family.ZINB, DistParams(lam=2.5, omega=0.2, nu=2.0)),
        ],
    )
    def test_moments_match_empirical(self, family, params):
        rng = np.random.default_rng(77)
        draws = sample(family, params, 1_000_000, rng).astype(float)
        m = moments(family, params)
        n = draws.size
        se_mean = draws.std() / math.sqrt(n)
        assert abs(draws.mean() - m.mean) < 5 * se_mean
        central4 = np.mean((draws - draws.mean()) ** 4)
        se_var = math.sqrt(max(central4 - draws.var() ** 2, 0.0) / n)
        assert abs(draws.var() - m.variance) < 5 * se_var

    @pytest.mark.parametrize(
        "family,params",
        [
            (Family.POISSON, DistParams(lam=2.2)),
            (Family.NB2, DistParams(lam=2.0, nu=1.5)),
            (Family.ZIP, DistParams(lam=3.0, omega=0.25)),
            (Family.ZINB, DistParams(lam=2.5, omega=0.2, nu=2.0)),
        ],
    )
    def test_sampler_agrees_with_pmf(self, family, params):
        rng = np.random.default_rng(99)
        draws = sample(family, params, 100_000, rng)
        top = int(draws.max()) + 1
        observed = np.bincount(draws, minlength=top + 1).astype(float)
        probs = np.exp(log_pmf(family, params, np.arange(top + 1)))
        expected = probs * draws.size
        expected[-1] += draws.size * max(1.0 - probs.sum(), 0.0)  # tail mass
        # merge cells with small expectation into the tail
        keep = expected >= 5.0
        obs = np.append(observed[keep], observed[~keep].sum())
        exp = np.append(expected[keep], expected[~keep].sum())
        if exp[-1] == 0:
            obs, exp = obs[:-1], exp[:-1]
        exp *= obs.sum() / exp.sum()
        statistic = float(((obs - exp) ** 2 / exp).sum())
        p_value = float(chi2.sf(statistic, len(exp) - 1))
        assert p_value > 0.001

    def test_sampling_is_deterministic_per_stream(self):
        a = sample(Family.ZINB, DistParams(lam=2.0, omega=0.3, nu=1.0), 50, np.random.default_rng(3))
        b = sample(Family.ZINB, DistParams(lam=2.0, omega=0.3, nu=1.0), 50, np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_bad_size_rejected(self):
        with pytest.raises(ParameterError):
            sample(Family.POISSON, DistParams(lam=1.0), 0, np.random.default_rng(1))
