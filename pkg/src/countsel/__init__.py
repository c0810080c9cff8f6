"""countsel: count-regression inference and model-selection simulation.

The library fits Poisson, NB2, ZIP, and ZINB regressions with a single
covariate, provides the overdispersion and zero-inflation diagnostics that
drive multi-stage model selection, and ships a deterministic Monte Carlo
harness that measures the unconditional type I error of two selection
policies (sequential tests and lowest AIC) over a scenario grid.
"""

from .diagnostics import VuongOutcome, dean_lawless_test, vuong_test
from .families import DistParams, Family, Moments, ParameterError, log_pmf, moments, sample
from .fitting import (
    FALLBACK_P_VALUE,
    CountDataset,
    FitResult,
    ModelParams,
    TestOutcome,
    aic,
    deviance_lrt,
    fit,
    fit_null,
    loglik,
    pointwise_loglik,
    wald_test,
)
from .reports import table1_rows, tree_report, write_panel_csvs, write_table1_csv
from .selection import (
    FAMILY_ORDER,
    FitCache,
    Policy,
    SelectionPolicy,
    SelectionTrace,
    expected_tree_counts,
    select,
    select_lowest_aic,
    select_seven_step,
)
from .simulate import (
    AggregateRates,
    ConfigError,
    PolicyRates,
    ReplicationRecord,
    ScenarioConfig,
    aggregate,
    build_grid,
    mc_se,
    replication_dataset,
    replication_rng,
    run_grid,
    run_replication,
    run_scenario,
    write_dataset_csv,
    write_manifest_csv,
    write_results_csv,
)

__version__ = "0.1.0"
