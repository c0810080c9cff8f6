"""Model-selection policies: sequential tests and lowest AIC."""

import math

import numpy as np
import pytest

from countsel import (
    DistParams,
    Family,
    Policy,
    SelectionPolicy,
    expected_tree_counts,
    select,
    select_lowest_aic,
    select_seven_step,
    wald_test,
)
from countsel.selection import FAMILY_ORDER, FitCache

from helpers import dataset_from, mixed_null_datasets


class TestExpectedTreeCounts:
    def test_poisson_leaf_at_five_percent(self):
        counts = expected_tree_counts(0.05)
        assert counts["poisson"] == pytest.approx(90.25, abs=1e-12)
        assert counts["zip"] == pytest.approx(4.75, abs=1e-12)
        assert counts["nb2"] == pytest.approx(4.75, abs=1e-12)
        assert counts["zinb"] == pytest.approx(0.25, abs=1e-12)

    def test_leaves_sum_to_total(self):
        counts = expected_tree_counts(0.17, total=1.0)
        leaves = sum(counts[f.label] for f in FAMILY_ORDER)
        assert leaves == pytest.approx(1.0, abs=1e-12)


class TestSevenStep:
    def test_all_null_path_reports_poisson_wald(self):
        data = dataset_from(Family.POISSON, DistParams(lam=math.exp(1.0)), 300, seed=42)
        cache = FitCache(data)
        trace = select_seven_step(data, cache=cache)
        assert trace.chosen is Family.POISSON
        assert trace.dl_p is not None and trace.dl_p >= 0.05
        assert trace.vuong_poisson_zip_p is not None
        assert trace.vuong_nb2_zinb_p is None
        assert trace.final_p == wald_test(cache.get(Family.POISSON)).p_value
        assert trace.rejected_h0 == (trace.final_p < 0.05)

    def test_overdispersed_path_reports_nb2(self):
        data = dataset_from(Family.NB2, DistParams(lam=math.exp(1.5), nu=1.5), 500, seed=43)
        cache = FitCache(data)
        trace = select_seven_step(data, cache=cache)
        assert trace.dl_p < 0.05
        assert trace.chosen in (Family.NB2, Family.ZINB)
        assert trace.vuong_poisson_zip_p is None
        assert trace.vuong_nb2_zinb_p is not None

    def test_exactly_one_vuong_branch_recorded(self):
        for data in mixed_null_datasets(8, n=150, seed=77):
            trace = select_seven_step(data)
            recorded = [trace.vuong_poisson_zip_p is not None, trace.vuong_nb2_zinb_p is not None]
            assert sum(recorded) == 1

    def test_deterministic(self):
        data = dataset_from(Family.ZIP, DistParams(lam=2.0, omega=0.2), 200, seed=44)
        assert select_seven_step(data) == select_seven_step(data)

    def test_aics_attached_on_request(self):
        data = dataset_from(Family.POISSON, DistParams(lam=2.0), 120, seed=45)
        trace = select_seven_step(data, with_aics=True)
        assert trace.aic_by_family is not None and len(trace.aic_by_family) == 4
        assert select_seven_step(data).aic_by_family is None


class TestLowestAic:
    def test_chosen_matches_argmin(self):
        data = dataset_from(Family.ZINB, DistParams(lam=math.exp(1.0), omega=0.25, nu=1.0), 400, seed=46)
        cache = FitCache(data)
        trace = select_lowest_aic(data, cache=cache)
        aics = trace.aic_by_family
        assert aics is not None
        assert trace.chosen is FAMILY_ORDER[int(np.argmin(aics))]
        assert trace.final_p == wald_test(cache.get(trace.chosen)).p_value

    def test_single_converged_family_wins(self, monkeypatch):
        data = dataset_from(Family.POISSON, DistParams(lam=2.0), 100, seed=47)
        cache = FitCache(data)
        real = {f: cache.get(f) for f in FAMILY_ORDER}
        from dataclasses import replace

        fakes = {
            f: (real[f] if f is Family.NB2 else replace(real[f], converged=False, aic=math.inf))
            for f in FAMILY_ORDER
        }
        monkeypatch.setattr(cache, "get", lambda fam: fakes[fam])
        trace = select_lowest_aic(data, cache=cache)
        assert trace.chosen is Family.NB2
        assert not trace.fallback_used

    def test_all_failed_falls_back_to_poisson(self, monkeypatch):
        data = dataset_from(Family.POISSON, DistParams(lam=2.0), 100, seed=48)
        cache = FitCache(data)
        real = {f: cache.get(f) for f in FAMILY_ORDER}
        from dataclasses import replace

        fakes = {f: replace(real[f], converged=False, aic=math.inf) for f in FAMILY_ORDER}
        monkeypatch.setattr(cache, "get", lambda fam: fakes[fam])
        trace = select_lowest_aic(data, cache=cache)
        assert trace.chosen is Family.POISSON
        assert trace.final_p == 0.99
        assert trace.fallback_used

    def test_tie_breaks_toward_simpler_family(self, monkeypatch):
        data = dataset_from(Family.POISSON, DistParams(lam=2.0), 100, seed=49)
        cache = FitCache(data)
        real = {f: cache.get(f) for f in FAMILY_ORDER}
        from dataclasses import replace

        tied = 100.0
        fakes = {f: replace(real[f], aic=tied) for f in FAMILY_ORDER}
        monkeypatch.setattr(cache, "get", lambda fam: fakes[fam])
        trace = select_lowest_aic(data, cache=cache)
        assert trace.chosen is Family.POISSON

    def test_zinb_data_usually_has_lowest_aic(self):
        # strongly inflated, overdispersed data at a large sample size sits
        # deep in the region where the AIC finds the generating family
        params = DistParams(lam=math.exp(1.5), omega=0.2, nu=0.5 * math.exp(1.5))
        hits = 0
        for seed in range(50):
            data = dataset_from(Family.ZINB, params, 1000, seed=4200 + seed)
            if select_lowest_aic(data).chosen is Family.ZINB:
                hits += 1
        assert hits >= 30

    def test_covariate_shift_rarely_changes_choice(self):
        same = 0
        for i, data in enumerate(mixed_null_datasets(100, n=150, seed=900)):
            shifted_x = data.x + 5.0
            from countsel import CountDataset

            shifted = CountDataset(y=data.y, x=shifted_x)
            a = select_lowest_aic(data).chosen
            b = select_lowest_aic(shifted).chosen
            if a is b:
                same += 1
        assert same >= 99


class TestPolicyApi:
    def test_select_dispatch(self):
        data = dataset_from(Family.POISSON, DistParams(lam=2.0), 150, seed=50)
        seven = select(data, SelectionPolicy(Policy.SEVEN_STEP))
        lowest = select(data, SelectionPolicy(Policy.LOWEST_AIC))
        assert seven.policy is Policy.SEVEN_STEP
        assert lowest.policy is Policy.LOWEST_AIC

    def test_alpha_validated(self):
        with pytest.raises(ValueError):
            SelectionPolicy(Policy.SEVEN_STEP, alpha=1.5)
