"""Command-line entry points: single-dataset fitting and grid simulation.

Exit codes: 0 on success, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .diagnostics import dean_lawless_test, vuong_test
from .families import Family
from .fitting import CountDataset, FitResult, wald_test
from .reports import tree_report, write_panel_csvs, write_table1_csv
from .selection import FAMILY_ORDER, FitCache
from .simulate import (
    DEFAULT_BASE_SEED,
    DEFAULT_BETA0_LEVELS,
    DEFAULT_N_LEVELS,
    DEFAULT_OMEGA_LEVELS,
    DEFAULT_PHI_LEVELS,
    DEFAULT_REPS,
    DEFAULT_X_SD,
    ConfigError,
    build_grid,
    replication_dataset,
    run_grid,
    write_dataset_csv,
    write_manifest_csv,
    write_results_csv,
)

SEED_ENV_VAR = "COUNTSEL_SEED"


class CliInputError(Exception):
    """Bad input file or option value; reported with exit code 2."""


# ---------------------------------------------------------------------------
# fit subcommand
# ---------------------------------------------------------------------------


def _read_dataset(path: str) -> CountDataset:
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise CliInputError(f"cannot open {path}: {exc}") from exc
    ys, xs = [], []
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise CliInputError(f"{path}: empty file, expected a 'y,x' header")
        if [cell.strip().lower() for cell in header] != ["y", "x"]:
            raise CliInputError(f"{path}: line 1: header must be 'y,x', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise CliInputError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            y_text, x_text = row[0].strip(), row[1].strip()
            try:
                y_val = int(y_text)
            except ValueError:
                raise CliInputError(
                    f"{path}: line {lineno}: y must be a nonnegative integer, got {y_text!r}"
                ) from None
            if y_val < 0:
                raise CliInputError(f"{path}: line {lineno}: y must be nonnegative, got {y_val}")
            try:
                x_val = float(x_text)
            except ValueError:
                raise CliInputError(f"{path}: line {lineno}: x must be a real number, got {x_text!r}") from None
            if not math.isfinite(x_val):
                raise CliInputError(f"{path}: line {lineno}: x must be finite, got {x_text!r}")
            ys.append(y_val)
            xs.append(x_val)
    if len(ys) < 2:
        raise CliInputError(f"{path}: need at least 2 data rows, got {len(ys)}")
    return CountDataset(y=np.array(ys, dtype=np.int64), x=np.array(xs, dtype=np.float64))


def _print_fit(fit_result: FitResult, alpha: float, form: str, out) -> None:
    status = "yes" if fit_result.converged else "NO"
    print(
        f"family: {fit_result.family.label:8s} converged: {status:3s} "
        f"loglik: {fit_result.loglik:.4f}  aic: {fit_result.aic:.4f}",
        file=out,
    )
    diag = np.sqrt(np.maximum(np.diag(fit_result.cov), 0.0))
    values = {
        "beta0": fit_result.params.beta0,
        "betaX": fit_result.params.betaX,
        "gamma0": fit_result.params.gamma0,
        "gammaX": fit_result.params.gammaX,
        "log_nu": None if fit_result.params.nu is None else math.log(fit_result.params.nu),
    }
    for name, se in zip(fit_result.free_names, diag):
        print(f"  {name:7s} {values[name]:10.4f}  (se {se:.4f})", file=out)
    if fit_result.params.nu is not None:
        print(f"  nu      {fit_result.params.nu:10.4f}", file=out)
    wald = wald_test(fit_result, alpha=alpha, form=form)
    note = "  [fallback]" if wald.fallback else ""
    print(
        f"  wald ({form}): stat {wald.statistic:.4f}  df {wald.df}  p {wald.p_value:.4f}{note}",
        file=out,
    )


def cmd_fit(args, out=sys.stdout) -> int:
    data = _read_dataset(args.input)
    cache = FitCache(data)
    families = [Family.from_label(args.family)] if args.family else list(FAMILY_ORDER)
    for fam in families:
        _print_fit(cache.get(fam), args.alpha, args.wald_form, out)
        print(file=out)
    print("diagnostics:", file=out)
    dl = dean_lawless_test(data, cache.get(Family.POISSON), alpha=args.alpha)
    print(
        f"  overdispersion score test: T1 {dl.statistic:.4f}  p {dl.p_value:.4f}"
        + ("  [fallback]" if dl.fallback else ""),
        file=out,
    )
    if not args.family:
        for restricted, inflated in ((Family.POISSON, Family.ZIP), (Family.NB2, Family.ZINB)):
            vt = vuong_test(cache.get(restricted), cache.get(inflated), data, alpha=args.alpha)
            print(
                f"  vuong {restricted.label} vs {inflated.label}: "
                f"V {vt.statistic:.4f}  p {vt.p_value:.4f}  leaning {vt.direction}"
                + (f"  (dropped {vt.n_dropped})" if vt.n_dropped else ""),
                file=out,
            )
    return 0


# ---------------------------------------------------------------------------
# simulate subcommand
# ---------------------------------------------------------------------------

_CONFIG_KEYS = ("n", "beta0", "omega", "phi", "reps", "seed", "alpha", "x_sd")


def _parse_number(token: str) -> float:
    token = token.strip().lower()
    if token in ("inf", "+inf", "infinity"):
        return math.inf
    if "/" in token:
        num, _, den = token.partition("/")
        return float(num) / float(den)
    return float(token)


def parse_config(path: str) -> dict:
    """Flat key=value config; lists are comma separated, phi accepts 'inf'
    and fractions like 1/2."""
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliInputError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
        tokens = [t for t in value.split(",") if t.strip()]
        if not tokens:
            raise ConfigError(f"{path}: line {lineno}: empty value for {key!r}")
        try:
            if key == "n":
                values[key] = tuple(int(t) for t in tokens)
            elif key in ("beta0", "omega", "phi"):
                values[key] = tuple(_parse_number(t) for t in tokens)
            elif key in ("reps", "seed"):
                values[key] = int(tokens[0])
            else:
                values[key] = float(tokens[0])
        except ValueError as exc:
            raise ConfigError(f"{path}: line {lineno}: bad value for {key!r}: {exc}") from exc
    return values


def _parse_dump_spec(text: str):
    try:
        scenario_text, _, rep_text = text.partition(":")
        return int(scenario_text), int(rep_text)
    except ValueError:
        raise CliInputError(
            f"--dump-dataset expects SCENARIO_ID:REP_INDEX, got {text!r}"
        ) from None


def cmd_simulate(args, out=sys.stdout) -> int:
    config = parse_config(args.config) if args.config else {}
    reps = args.reps if args.reps is not None else config.get("reps", DEFAULT_REPS)
    seed = config.get("seed", DEFAULT_BASE_SEED)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise CliInputError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from None
    if args.seed is not None:
        seed = args.seed
    alpha = config.get("alpha", 0.05)
    x_sd = config.get("x_sd", DEFAULT_X_SD)

    grid = build_grid(
        n_levels=config.get("n", DEFAULT_N_LEVELS),
        beta0_levels=config.get("beta0", DEFAULT_BETA0_LEVELS),
        omega_levels=config.get("omega", DEFAULT_OMEGA_LEVELS),
        phi_levels=config.get("phi", DEFAULT_PHI_LEVELS),
        reps=reps,
        base_seed=seed,
    )
    by_id = {sc.scenario_id: sc for sc in grid}
    for scenario_id in args.scenario_tree or []:
        if scenario_id not in by_id:
            raise CliInputError(f"--scenario-tree {scenario_id}: no such scenario in this grid")
    dumps = [_parse_dump_spec(spec) for spec in args.dump_dataset or []]
    for scenario_id, rep_index in dumps:
        if scenario_id not in by_id:
            raise CliInputError(f"--dump-dataset {scenario_id}:{rep_index}: no such scenario")
        if not 0 <= rep_index < by_id[scenario_id].reps:
            raise CliInputError(f"--dump-dataset {scenario_id}:{rep_index}: rep index out of range")

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliInputError(f"output directory {out_dir} is not writable: {exc}") from exc

    write_manifest_csv(grid, out_dir / "manifest.csv")
    for scenario_id, rep_index in dumps:
        data = replication_dataset(by_id[scenario_id], rep_index, x_sd=x_sd)
        write_dataset_csv(data, out_dir / f"dataset_{scenario_id}_{rep_index}.csv")

    def progress(i, total, sc):
        print(f"scenario {i + 1}/{total} (id {sc.scenario_id}, n={sc.n})", file=sys.stderr, flush=True)

    results = run_grid(grid, alpha=alpha, x_sd=x_sd, workers=args.workers, progress=progress)

    stamp = datetime.now(timezone.utc).isoformat() if args.timestamp else None
    write_results_csv(results, out_dir / "results.csv", timestamp=stamp)
    write_table1_csv(results, out_dir / "table1.csv")
    write_panel_csvs(results, out_dir)
    by_id_rates = {rates.scenario.scenario_id: rates for rates in results}
    for scenario_id in args.scenario_tree or []:
        report = tree_report(by_id_rates[scenario_id], alpha=alpha)
        (out_dir / f"tree_{scenario_id}.txt").write_text(report)
    print(f"wrote {len(results)} scenario results to {out_dir}", file=out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="countsel",
        description="Count-regression fitting, diagnostics, and model-selection simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit_p = sub.add_parser("fit", help="fit count models to a two-column y,x CSV")
    fit_p.add_argument("--input", required=True, help="CSV file with header 'y,x'")
    fit_p.add_argument(
        "--family",
        choices=["pois", "nb", "zip", "zinb"],
        default=None,
        help="fit a single family (default: all four plus diagnostics)",
    )
    fit_p.add_argument("--alpha", type=float, default=0.05)
    fit_p.add_argument("--wald-form", choices=["chisq", "f"], default="chisq")

    sim_p = sub.add_parser("simulate", help="run the Monte Carlo scenario grid")
    sim_p.add_argument("--config", default=None, help="key=value config file with grid levels")
    sim_p.add_argument("--reps", type=int, default=None, help="replications per scenario")
    sim_p.add_argument(
        "--seed",
        type=int,
        default=None,
        help=f"base seed (overrides config and the {SEED_ENV_VAR} environment variable)",
    )
    sim_p.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1))
    sim_p.add_argument("--out", default="countsel-results", help="output directory")
    sim_p.add_argument(
        "--scenario-tree",
        type=int,
        action="append",
        metavar="ID",
        help="also write tree_<ID>.txt selection-tree report (repeatable)",
    )
    sim_p.add_argument(
        "--dump-dataset",
        action="append",
        metavar="ID:REP",
        help="write dataset_<ID>_<REP>.csv for one replication (repeatable)",
    )
    sim_p.add_argument(
        "--timestamp",
        action="store_true",
        help="prepend a timestamp comment to results.csv (off by default so runs are byte-identical)",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(args)
        return cmd_simulate(args)
    except (CliInputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
