"""Monte Carlo harness: scenario grid, deterministic replication, aggregation.

Every replication owns a counter-based RNG stream keyed by
``(base_seed, scenario_id, rep_index)``, so results are independent of
execution order and of the worker count.  Aggregation folds integer
counts, which makes the parallel and serial paths bit-identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .families import DistParams, Family, sample
from .fitting import CountDataset, wald_test
from .selection import FAMILY_ORDER, FitCache, Policy, SelectionTrace, select_lowest_aic, select_seven_step

__all__ = [
    "ScenarioConfig",
    "PolicyRates",
    "AggregateRates",
    "ReplicationRecord",
    "ConfigError",
    "DEFAULT_N_LEVELS",
    "DEFAULT_BETA0_LEVELS",
    "DEFAULT_OMEGA_LEVELS",
    "DEFAULT_PHI_LEVELS",
    "DEFAULT_REPS",
    "DEFAULT_BASE_SEED",
    "DEFAULT_X_SD",
    "build_grid",
    "replication_rng",
    "replication_dataset",
    "run_replication",
    "aggregate",
    "mc_se",
    "run_scenario",
    "run_grid",
    "write_results_csv",
    "write_manifest_csv",
    "write_dataset_csv",
    "RESULTS_COLUMNS",
    "MANIFEST_COLUMNS",
]

# simulation grid defaults
DEFAULT_N_LEVELS = (50, 100, 250, 500, 1000, 2000)
DEFAULT_BETA0_LEVELS = (0.5, 1.0, 1.5, 2.0, 2.5)
DEFAULT_OMEGA_LEVELS = (0.0, 0.05, 0.1, 0.2, 0.5)
DEFAULT_PHI_LEVELS = (math.inf, 2.0, 1.0, 0.5, 1.0 / 3.0)
DEFAULT_REPS = 5000
DEFAULT_BASE_SEED = 20260808
DEFAULT_X_SD = 10.0  # covariate standard deviation (variance 100)

_MASK32 = (1 << 32) - 1
_MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid scenario-grid or run configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the simulation grid.

    ``phi`` is the dispersion ratio nu/lam (``inf`` means equidispersed);
    together with ``omega`` it implies the generating family.  All data are
    generated under the null: the covariate never enters the counts.
    """

    scenario_id: int
    n: int
    beta0: float
    phi: float
    omega: float
    reps: int = DEFAULT_REPS
    base_seed: int = DEFAULT_BASE_SEED

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be at least 2, got {self.n}")
        if not math.isfinite(self.beta0):
            raise ConfigError("beta0 must be finite")
        if not 0.0 <= self.omega < 1.0:
            raise ConfigError(f"omega must lie in [0, 1), got {self.omega}")
        if not self.phi > 0:
            raise ConfigError(f"phi must be positive or inf, got {self.phi}")
        if self.reps < 1:
            raise ConfigError("reps must be positive")

    @property
    def lam(self) -> float:
        return math.exp(self.beta0)

    @property
    def nu(self) -> float:
        return math.inf if math.isinf(self.phi) else self.phi * self.lam

    @property
    def implied_family(self) -> Family:
        if math.isinf(self.phi):
            return Family.POISSON if self.omega == 0.0 else Family.ZIP
        return Family.NB2 if self.omega == 0.0 else Family.ZINB

    @property
    def dist_params(self) -> DistParams:
        fam = self.implied_family
        return DistParams(
            lam=self.lam,
            omega=self.omega if fam.has_zero_inflation else 0.0,
            nu=self.nu if fam.has_dispersion else math.inf,
        )


def build_grid(
    n_levels: Sequence[int] = DEFAULT_N_LEVELS,
    beta0_levels: Sequence[float] = DEFAULT_BETA0_LEVELS,
    omega_levels: Sequence[float] = DEFAULT_OMEGA_LEVELS,
    phi_levels: Sequence[float] = DEFAULT_PHI_LEVELS,
    reps: int = DEFAULT_REPS,
    base_seed: int = DEFAULT_BASE_SEED,
) -> List[ScenarioConfig]:
    """Cartesian product of the level lists, ids assigned from 1.

    The frozen ordering is lexicographic with omega outermost, then phi,
    then beta0, with n fastest; the emitted manifest makes the id mapping
    auditable.  The default levels give 750 scenarios.
    """
    for name, levels in (
        ("n", n_levels),
        ("beta0", beta0_levels),
        ("omega", omega_levels),
        ("phi", phi_levels),
    ):
        if len(levels) == 0:
            raise ConfigError(f"empty level list for {name}")
    grid = []
    next_id = 1
    for omega in omega_levels:
        for phi in phi_levels:
            for beta0 in beta0_levels:
                for n in n_levels:
                    grid.append(
                        ScenarioConfig(
                            scenario_id=next_id,
                            n=int(n),
                            beta0=float(beta0),
                            phi=float(phi),
                            omega=float(omega),
                            reps=reps,
                            base_seed=base_seed,
                        )
                    )
                    next_id += 1
    return grid


def replication_rng(base_seed: int, scenario_id: int, rep_index: int) -> np.random.Generator:
    """Counter-based stream that is a pure function of its key triple."""
    key = np.array(
        [
            base_seed & _MASK64,
            ((scenario_id & _MASK32) << 32) | (rep_index & _MASK32),
        ],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def replication_dataset(
    sc: ScenarioConfig, rep_index: int, x_sd: float = DEFAULT_X_SD
) -> CountDataset:
    """Draw the covariate and counts for one replication.

    The covariate is drawn fresh every replication from Normal(0, x_sd**2);
    counts come from the scenario's implied family under the null.
    """
    rng = replication_rng(sc.base_seed, sc.scenario_id, rep_index)
    x = rng.normal(0.0, x_sd, sc.n)
    y = sample(sc.implied_family, sc.dist_params, sc.n, rng)
    return CountDataset(y=y, x=x)


@dataclass(frozen=True)
class ReplicationRecord:
    scenario_id: int
    rep_index: int
    seven_step: SelectionTrace
    lowest_aic: SelectionTrace
    wald_p: Tuple[float, float, float, float]
    aics: Tuple[float, float, float, float]
    converged: Tuple[bool, bool, bool, bool]


def run_replication(
    sc: ScenarioConfig, rep_index: int, alpha: float = 0.05, x_sd: float = DEFAULT_X_SD
) -> ReplicationRecord:
    """Generate one dataset and run both policies plus all four fits."""
    data = replication_dataset(sc, rep_index, x_sd=x_sd)
    cache = FitCache(data)
    seven = select_seven_step(data, alpha=alpha, cache=cache, with_aics=True)
    lowest = select_lowest_aic(data, alpha=alpha, cache=cache)
    fits = [cache.get(f) for f in FAMILY_ORDER]
    wald_p = tuple(wald_test(f, alpha=alpha).p_value for f in fits)
    return ReplicationRecord(
        scenario_id=sc.scenario_id,
        rep_index=rep_index,
        seven_step=seven,
        lowest_aic=lowest,
        wald_p=wald_p,
        aics=tuple(f.aic for f in fits),
        converged=tuple(f.converged for f in fits),
    )


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicyRates:
    """Selection and rejection summary for one policy in one scenario.

    ``conditional_reject`` entries are None for families the policy never
    selected; the weighted sum of selection and conditional rates
    reconstructs ``unconditional_type1`` exactly.
    """

    selection_prob: Tuple[float, float, float, float]
    conditional_reject: Tuple[Optional[float], ...]
    unconditional_type1: float
    mc_se: float
    fallback_rate: float


@dataclass(frozen=True)
class AggregateRates:
    scenario: ScenarioConfig
    reps: int
    seven_step: PolicyRates
    lowest_aic: PolicyRates
    model_reject: Tuple[float, float, float, float]


class _Counts:
    """Commutative fold state; merging in any order gives identical sums."""

    __slots__ = ("reps", "sel", "rej", "fallback", "model_rej")

    def __init__(self):
        self.reps = 0
        self.sel = {p: [0, 0, 0, 0] for p in Policy}
        self.rej = {p: [0, 0, 0, 0] for p in Policy}
        self.fallback = {p: 0 for p in Policy}
        self.model_rej = [0, 0, 0, 0]

    def add_record(self, record: ReplicationRecord, alpha: float):
        self.reps += 1
        for policy, trace in (
            (Policy.SEVEN_STEP, record.seven_step),
            (Policy.LOWEST_AIC, record.lowest_aic),
        ):
            fam = int(trace.chosen)
            self.sel[policy][fam] += 1
            if trace.rejected_h0:
                self.rej[policy][fam] += 1
            if trace.fallback_used:
                self.fallback[policy] += 1
        for i, p in enumerate(record.wald_p):
            if p < alpha:
                self.model_rej[i] += 1

    def merge(self, other: "_Counts") -> "_Counts":
        self.reps += other.reps
        for p in Policy:
            for i in range(4):
                self.sel[p][i] += other.sel[p][i]
                self.rej[p][i] += other.rej[p][i]
            self.fallback[p] += other.fallback[p]
        for i in range(4):
            self.model_rej[i] += other.model_rej[i]
        return self

    def policy_rates(self, policy: Policy) -> PolicyRates:
        reps = self.reps
        sel = self.sel[policy]
        rej = self.rej[policy]
        selection_prob = tuple(s / reps for s in sel)
        conditional = tuple((r / s) if s > 0 else None for r, s in zip(rej, sel))
        type1 = sum(rej) / reps
        return PolicyRates(
            selection_prob=selection_prob,
            conditional_reject=conditional,
            unconditional_type1=type1,
            mc_se=mc_se(type1, reps),
            fallback_rate=self.fallback[policy] / reps,
        )

    def to_rates(self, sc: ScenarioConfig) -> AggregateRates:
        return AggregateRates(
            scenario=sc,
            reps=self.reps,
            seven_step=self.policy_rates(Policy.SEVEN_STEP),
            lowest_aic=self.policy_rates(Policy.LOWEST_AIC),
            model_reject=tuple(r / self.reps for r in self.model_rej),
        )


def mc_se(p: float, reps: int) -> float:
    """Monte Carlo standard error of an estimated probability."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if reps < 1:
        raise ValueError("reps must be positive")
    return math.sqrt(p * (1.0 - p) / reps)


def aggregate(
    records: Iterable[ReplicationRecord], sc: ScenarioConfig, alpha: float = 0.05
) -> AggregateRates:
    """Fold replication records into per-scenario rates."""
    counts = _Counts()
    for record in records:
        counts.add_record(record, alpha)
    if counts.reps == 0:
        raise ValueError("need at least one record")
    return counts.to_rates(sc)


def _chunk_counts(args) -> _Counts:
    sc, start, stop, alpha, x_sd = args
    counts = _Counts()
    for rep_index in range(start, stop):
        counts.add_record(run_replication(sc, rep_index, alpha=alpha, x_sd=x_sd), alpha)
    return counts


def _chunk_bounds(reps: int, workers: int) -> List[Tuple[int, int]]:
    n_chunks = max(1, min(reps, workers * 4))
    size = math.ceil(reps / n_chunks)
    return [(lo, min(lo + size, reps)) for lo in range(0, reps, size)]


def run_scenario(
    sc: ScenarioConfig,
    alpha: float = 0.05,
    x_sd: float = DEFAULT_X_SD,
    workers: int = 1,
    executor: Optional[ProcessPoolExecutor] = None,
) -> AggregateRates:
    """Run all replications of one scenario, optionally across processes."""
    total = _Counts()
    if workers <= 1 and executor is None:
        total = _chunk_counts((sc, 0, sc.reps, alpha, x_sd))
        return total.to_rates(sc)
    bounds = _chunk_bounds(sc.reps, workers)
    args = [(sc, lo, hi, alpha, x_sd) for lo, hi in bounds]
    own_executor = executor is None
    pool = executor or ProcessPoolExecutor(max_workers=workers)
    try:
        for counts in pool.map(_chunk_counts, args):
            total.merge(counts)
    finally:
        if own_executor:
            pool.shutdown()
    return total.to_rates(sc)


def run_grid(
    configs: Sequence[ScenarioConfig],
    alpha: float = 0.05,
    x_sd: float = DEFAULT_X_SD,
    workers: int = 1,
    progress: Optional[Callable[[int, int, ScenarioConfig], None]] = None,
) -> List[AggregateRates]:
    """Run every scenario of a grid; scenarios sequential, reps parallel."""
    results = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for i, sc in enumerate(configs):
            if progress is not None:
                progress(i, len(configs), sc)
            results.append(
                run_scenario(sc, alpha=alpha, x_sd=x_sd, workers=workers, executor=pool)
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return results


# ---------------------------------------------------------------------------
# flat-file output
# ---------------------------------------------------------------------------

RESULTS_COLUMNS = (
    "scenario_id,n,beta0,phi,omega,family,policy,"
    "sel_pois,sel_nb,sel_zip,sel_zinb,rej_pois,rej_nb,rej_zip,rej_zinb,"
    "type1,mc_se,fallback_rate,reps,seed"
)
MANIFEST_COLUMNS = "scenario_id,n,beta0,phi,omega,family"


def _num(value: float) -> str:
    return repr(float(value))


def _rate(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def results_rows(rates: AggregateRates) -> List[str]:
    sc = rates.scenario
    rows = []
    for policy, pr in ((Policy.SEVEN_STEP, rates.seven_step), (Policy.LOWEST_AIC, rates.lowest_aic)):
        cells = [
            str(sc.scenario_id),
            str(sc.n),
            _num(sc.beta0),
            _num(sc.phi),
            _num(sc.omega),
            sc.implied_family.label,
            policy.value,
            *(_rate(v) for v in pr.selection_prob),
            *(_rate(v) for v in pr.conditional_reject),
            _rate(pr.unconditional_type1),
            _rate(pr.mc_se),
            _rate(pr.fallback_rate),
            str(rates.reps),
            str(sc.base_seed),
        ]
        rows.append(",".join(cells))
    return rows


def write_results_csv(all_rates: Sequence[AggregateRates], path, timestamp: Optional[str] = None):
    lines = []
    if timestamp is not None:
        lines.append(f"# generated {timestamp}")
    lines.append(RESULTS_COLUMNS)
    for rates in all_rates:
        lines.extend(results_rows(rates))
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def write_manifest_csv(configs: Sequence[ScenarioConfig], path):
    lines = [MANIFEST_COLUMNS]
    for sc in configs:
        lines.append(
            ",".join(
                [
                    str(sc.scenario_id),
                    str(sc.n),
                    _num(sc.beta0),
                    _num(sc.phi),
                    _num(sc.omega),
                    sc.implied_family.label,
                ]
            )
        )
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def write_dataset_csv(data: CountDataset, path):
    """Dump one dataset as a two-column CSV that round-trips exactly."""
    lines = ["y,x"]
    for yi, xi in zip(data.y, data.x):
        lines.append(f"{int(yi)},{float(xi)!r}")
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")
