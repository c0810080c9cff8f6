"""Scenario grid, deterministic replication, aggregation, CSV output."""

import math
from dataclasses import replace

import numpy as np
import pytest

from countsel import (
    ConfigError,
    Family,
    ScenarioConfig,
    aggregate,
    build_grid,
    mc_se,
    replication_dataset,
    replication_rng,
    run_replication,
    run_scenario,
    write_dataset_csv,
    write_manifest_csv,
    write_results_csv,
)
from countsel.simulate import DEFAULT_X_SD, RESULTS_COLUMNS, results_rows, run_grid


class TestGrid:
    def test_default_grid_has_750_scenarios(self):
        grid = build_grid()
        assert len(grid) == 750
        assert [sc.scenario_id for sc in grid] == list(range(1, 751))

    def test_single_level_lists(self):
        grid = build_grid(n_levels=[100], beta0_levels=[1.0], omega_levels=[0.0], phi_levels=[math.inf])
        assert len(grid) == 1
        assert grid[0].implied_family is Family.POISSON

    def test_classification_rule(self):
        grid = build_grid(
            n_levels=[50], beta0_levels=[0.5], omega_levels=[0.0, 0.5], phi_levels=[math.inf]
        )
        assert len(grid) == 2
        assert grid[0].implied_family is Family.POISSON
        assert grid[1].implied_family is Family.ZIP

    @pytest.mark.parametrize(
        "scenario_id,n,beta0,phi,omega",
        [
            (3, 250, 0.5, math.inf, 0.0),
            (6, 2000, 0.5, math.inf, 0.0),
            (36, 2000, 0.5, 2.0, 0.0),
            (43, 50, 1.5, 2.0, 0.0),
            (182, 100, 0.5, 2.0, 0.05),
            (302, 100, 0.5, math.inf, 0.1),
        ],
    )
    def test_frozen_id_ordering(self, scenario_id, n, beta0, phi, omega):
        # the id ordering is frozen (omega, phi, beta0 outer to inner, n
        # fastest) so these labels stay auditable via the manifest
        grid = build_grid()
        sc = grid[scenario_id - 1]
        assert (sc.n, sc.beta0, sc.phi, sc.omega) == (n, beta0, phi, omega)

    def test_nu_derivation(self):
        sc = ScenarioConfig(scenario_id=1, n=50, beta0=0.5, phi=2.0, omega=0.0)
        assert sc.nu == pytest.approx(2.0 * math.exp(0.5))
        assert sc.implied_family is Family.NB2

    def test_invalid_levels_rejected(self):
        with pytest.raises(ConfigError):
            build_grid(n_levels=[])
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario_id=1, n=1, beta0=0.5, phi=math.inf, omega=0.0)
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario_id=1, n=50, beta0=0.5, phi=-1.0, omega=0.0)
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario_id=1, n=50, beta0=0.5, phi=math.inf, omega=1.0)


class TestReplication:
    def test_streams_are_pure_functions_of_key(self):
        a = replication_rng(7, 3, 11).normal(size=5)
        b = replication_rng(7, 3, 11).normal(size=5)
        c = replication_rng(7, 3, 12).normal(size=5)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_bit_identical_records(self):
        sc = ScenarioConfig(scenario_id=3, n=120, beta0=0.5, phi=math.inf, omega=0.0, reps=5)
        first = run_replication(sc, 2)
        second = run_replication(sc, 2)
        assert first.seven_step == second.seven_step
        assert first.lowest_aic == second.lowest_aic
        assert first.wald_p == second.wald_p
        assert first.aics == second.aics

    def test_generator_moments(self):
        sc = ScenarioConfig(scenario_id=1, n=10_000, beta0=1.0, phi=math.inf, omega=0.0, reps=10)
        pooled = np.concatenate(
            [replication_dataset(sc, i).y for i in range(10)]
        )
        assert pooled.size == 100_000
        assert abs(pooled.mean() - math.exp(1.0)) < 0.05

    def test_covariate_scale(self):
        sc = ScenarioConfig(scenario_id=1, n=50_000, beta0=0.5, phi=math.inf, omega=0.0, reps=1)
        x = replication_dataset(sc, 0).x
        assert abs(x.std() - DEFAULT_X_SD) < 0.2


class TestAggregation:
    def test_single_record(self):
        sc = ScenarioConfig(scenario_id=1, n=100, beta0=1.0, phi=math.inf, omega=0.0, reps=1)
        record = run_replication(sc, 0)
        rates = aggregate([record], sc)
        chosen = record.seven_step.chosen
        assert rates.seven_step.selection_prob[chosen] == 1.0
        assert sum(rates.seven_step.selection_prob) == 1.0
        expected_t1 = 1.0 if record.seven_step.rejected_h0 else 0.0
        assert rates.seven_step.unconditional_type1 == expected_t1

    def test_weighted_sum_identity(self):
        sc = ScenarioConfig(scenario_id=1, n=80, beta0=1.0, phi=math.inf, omega=0.0, reps=40)
        rates = run_scenario(sc)
        for policy_rates in (rates.seven_step, rates.lowest_aic):
            total = sum(
                s * (c or 0.0)
                for s, c in zip(policy_rates.selection_prob, policy_rates.conditional_reject)
            )
            assert abs(total - policy_rates.unconditional_type1) <= 1e-10
            assert sum(policy_rates.selection_prob) == pytest.approx(1.0, abs=1e-12)

    def test_synthetic_mixture_reproduces_weighted_sum(self):
        # selection (0.5, 0.5, 0, 0) with conditional rejections (0.1, 0.02)
        # must reconstruct an unconditional rate of 0.06
        sc = ScenarioConfig(scenario_id=1, n=100, beta0=1.0, phi=math.inf, omega=0.0, reps=100)
        base = run_replication(sc, 0)
        records = []
        for i in range(100):
            chosen = Family.POISSON if i < 50 else Family.NB2
            reject = i < 5 or i == 50  # 5/50 Poisson, 1/50 NB2
            trace = replace(
                base.seven_step, chosen=chosen, final_p=0.01 if reject else 0.5, rejected_h0=reject
            )
            records.append(replace(base, seven_step=trace))
        rates = aggregate(records, sc)
        assert rates.seven_step.selection_prob == (0.5, 0.5, 0.0, 0.0)
        assert rates.seven_step.conditional_reject[0] == pytest.approx(0.1)
        assert rates.seven_step.conditional_reject[1] == pytest.approx(0.02)
        assert rates.seven_step.unconditional_type1 == pytest.approx(0.06)

    def test_empty_records_rejected(self):
        sc = ScenarioConfig(scenario_id=1, n=100, beta0=1.0, phi=math.inf, omega=0.0, reps=1)
        with pytest.raises(ValueError):
            aggregate([], sc)


class TestMcSe:
    def test_reference_value(self):
        assert mc_se(0.05, 15000) == pytest.approx(0.0017795130420052185, abs=1e-15)
        assert round(mc_se(0.05, 15000), 5) == 0.00178

    def test_edge_cases(self):
        assert mc_se(0.0, 123) == 0.0
        assert mc_se(0.5, 100) == 0.05

    def test_domain(self):
        with pytest.raises(ValueError):
            mc_se(1.2, 10)
        with pytest.raises(ValueError):
            mc_se(0.1, 0)


class TestParallelDeterminism:
    def test_parallel_equals_serial_byte_identical(self, tmp_path):
        grid = build_grid(
            n_levels=[60],
            beta0_levels=[0.5, 1.0],
            omega_levels=[0.0],
            phi_levels=[math.inf, 1.0],
            reps=30,
            base_seed=321,
        )
        serial = run_grid(grid, workers=1)
        parallel = run_grid(grid, workers=3)
        p_serial = tmp_path / "serial.csv"
        p_parallel = tmp_path / "parallel.csv"
        write_results_csv(serial, p_serial)
        write_results_csv(parallel, p_parallel)
        assert p_serial.read_bytes() == p_parallel.read_bytes()


class TestCsvOutput:
    def test_results_columns_and_empty_conditionals(self, tmp_path):
        sc = ScenarioConfig(scenario_id=1, n=60, beta0=2.5, phi=math.inf, omega=0.0, reps=3)
        rates = run_scenario(sc)
        rows = results_rows(rates)
        assert len(rows) == 2
        header_fields = RESULTS_COLUMNS.split(",")
        for row in rows:
            assert len(row.split(",")) == len(header_fields)
        # at 3 reps some families are never selected; their conditional
        # columns must be empty strings
        assert ",," in rows[0] or ",," in rows[1]
        path = tmp_path / "results.csv"
        write_results_csv([rates], path)
        text = path.read_text().splitlines()
        assert text[0] == RESULTS_COLUMNS

    def test_manifest_round_trip(self, tmp_path):
        grid = build_grid(
            n_levels=[50, 100], beta0_levels=[0.5], omega_levels=[0.0], phi_levels=[math.inf, 0.5]
        )
        path = tmp_path / "manifest.csv"
        write_manifest_csv(grid, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "scenario_id,n,beta0,phi,omega,family"
        assert len(lines) == 1 + len(grid)
        assert lines[1].startswith("1,50,0.5,inf,0.0,poisson")

    def test_dataset_dump_round_trips_exactly(self, tmp_path):
        sc = ScenarioConfig(scenario_id=5, n=40, beta0=1.0, phi=2.0, omega=0.1, reps=2)
        data = replication_dataset(sc, 1)
        path = tmp_path / "dataset.csv"
        write_dataset_csv(data, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "y,x"
        ys, xs = [], []
        for line in lines[1:]:
            y_text, x_text = line.split(",")
            ys.append(int(y_text))
            xs.append(float(x_text))
        assert np.array_equal(np.array(ys), data.y)
        assert np.array_equal(np.array(xs), data.x)

    def test_timestamp_header_is_optional(self, tmp_path):
        sc = ScenarioConfig(scenario_id=1, n=60, beta0=0.5, phi=math.inf, omega=0.0, reps=2)
        rates = run_scenario(sc)
        stamped = tmp_path / "stamped.csv"
        write_results_csv([rates], stamped, timestamp="2026-01-01T00:00:00")
        assert stamped.read_text().startswith("# generated 2026-01-01T00:00:00\n")
