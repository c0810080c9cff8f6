"""Report emission: selection-rate tables, tree summaries, panel data files.

Everything here is plain text or CSV; plotting is left to external tools.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .families import Family
from .selection import expected_tree_counts
from .simulate import AggregateRates

__all__ = [
    "TABLE1_COLUMNS",
    "table1_rows",
    "write_table1_csv",
    "tree_report",
    "panel_files",
    "write_panel_csvs",
]

TABLE1_COLUMNS = "scenario_id,n,beta0,phi,omega,family,metric,pois,nb,zip,zinb"

_METRICS = (
    "pr_reject",
    "pr_reject_given_selected",
    "pr_selected",
    "pr_reject_given_lowest_aic",
    "pr_lowest_aic",
)


def _cell(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def table1_rows(rates: AggregateRates) -> List[str]:
    """Five metric rows per scenario: unconditional per-model rejection,
    then selection and conditional rejection under each policy."""
    sc = rates.scenario
    prefix = [
        str(sc.scenario_id),
        str(sc.n),
        repr(float(sc.beta0)),
        repr(float(sc.phi)),
        repr(float(sc.omega)),
        sc.implied_family.label,
    ]
    values = {
        "pr_reject": rates.model_reject,
        "pr_reject_given_selected": rates.seven_step.conditional_reject,
        "pr_selected": rates.seven_step.selection_prob,
        "pr_reject_given_lowest_aic": rates.lowest_aic.conditional_reject,
        "pr_lowest_aic": rates.lowest_aic.selection_prob,
    }
    rows = []
    for metric in _METRICS:
        rows.append(",".join(prefix + [metric] + [_cell(v) for v in values[metric]]))
    return rows


def write_table1_csv(all_rates: Sequence[AggregateRates], path):
    lines = [TABLE1_COLUMNS]
    for rates in all_rates:
        lines.extend(table1_rows(rates))
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def _per100(value: float) -> str:
    return f"{100.0 * value:6.2f}"


def tree_report(rates: AggregateRates, alpha: float = 0.05) -> str:
    """Selection-tree summary for one scenario, per 100 datasets.

    Each leaf line shows the expected count under test independence (for
    Poisson data at level alpha), the sequential-policy count with its
    rejections in parentheses, and the lowest-AIC count with rejections in
    square brackets.
    """
    sc = rates.scenario
    expected = expected_tree_counts(alpha)
    seven = rates.seven_step
    lowest = rates.lowest_aic
    sel7 = seven.selection_prob
    selA = lowest.selection_prob
    rej7 = [s * (c or 0.0) for s, c in zip(sel7, seven.conditional_reject)]
    rejA = [s * (c or 0.0) for s, c in zip(selA, lowest.conditional_reject)]

    no_over = sel7[Family.POISSON] + sel7[Family.ZIP]
    over = sel7[Family.NB2] + sel7[Family.ZINB]

    lines = [
        f"scenario {sc.scenario_id}: n={sc.n} beta0={sc.beta0:g} phi={sc.phi:g} "
        f"omega={sc.omega:g} family={sc.implied_family.label} reps={rates.reps} alpha={alpha:g}",
        "counts per 100 datasets: expected-if-independent, (sequential-tests), [lowest-AIC]",
        "root: 100.00",
        f"  overdispersion test not rejected: {_per100(expected['no_overdispersion'] / 100)} "
        f"({_per100(no_over)})",
        f"    -> {Family.POISSON.label:8s} selected: {_per100(expected[Family.POISSON.label] / 100)} "
        f"({_per100(sel7[Family.POISSON])}) [{_per100(selA[Family.POISSON])}]"
        f"  rejections: ({_per100(rej7[Family.POISSON])}) [{_per100(rejA[Family.POISSON])}]",
        f"    -> {Family.ZIP.label:8s} selected: {_per100(expected[Family.ZIP.label] / 100)} "
        f"({_per100(sel7[Family.ZIP])}) [{_per100(selA[Family.ZIP])}]"
        f"  rejections: ({_per100(rej7[Family.ZIP])}) [{_per100(rejA[Family.ZIP])}]",
        f"  overdispersion test rejected: {_per100(expected['overdispersion'] / 100)} "
        f"({_per100(over)})",
        f"    -> {Family.NB2.label:8s} selected: {_per100(expected[Family.NB2.label] / 100)} "
        f"({_per100(sel7[Family.NB2])}) [{_per100(selA[Family.NB2])}]"
        f"  rejections: ({_per100(rej7[Family.NB2])}) [{_per100(rejA[Family.NB2])}]",
        f"    -> {Family.ZINB.label:8s} selected: {_per100(expected[Family.ZINB.label] / 100)} "
        f"({_per100(sel7[Family.ZINB])}) [{_per100(selA[Family.ZINB])}]"
        f"  rejections: ({_per100(rej7[Family.ZINB])}) [{_per100(rejA[Family.ZINB])}]",
        f"unconditional rejection per 100: sequential {100 * seven.unconditional_type1:.2f}, "
        f"lowest-AIC {100 * lowest.unconditional_type1:.2f}",
    ]
    return "\n".join(lines) + "\n"


def _level_label(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:g}"


_FIGURES = (
    # rate plotted against n for each beta0, one file per (phi, omega) panel
    "correct_model_type1",  # rejection rate of the generating family's own fit
    "seven_step_correct_selection",
    "seven_step_type1",
    "aic_correct_selection",
    "aic_type1",
)


def _figure_value(figure: str, rates: AggregateRates) -> float:
    implied = rates.scenario.implied_family
    if figure == "correct_model_type1":
        return rates.model_reject[implied]
    if figure == "seven_step_correct_selection":
        return rates.seven_step.selection_prob[implied]
    if figure == "seven_step_type1":
        return rates.seven_step.unconditional_type1
    if figure == "aic_correct_selection":
        return rates.lowest_aic.selection_prob[implied]
    if figure == "aic_type1":
        return rates.lowest_aic.unconditional_type1
    raise ValueError(f"unknown figure {figure!r}")


def panel_files(all_rates: Sequence[AggregateRates]) -> Dict[str, List[str]]:
    """Plot-ready panel data, one file per (figure, phi, omega).

    Each file holds ``n,beta0,rate`` rows sorted by beta0 then n, enough to
    redraw the rate-versus-sample-size panels externally.
    """
    panels: Dict[Tuple[str, float, float], List[Tuple[float, int, float]]] = defaultdict(list)
    for rates in all_rates:
        sc = rates.scenario
        for figure in _FIGURES:
            panels[(figure, sc.phi, sc.omega)].append(
                (sc.beta0, sc.n, _figure_value(figure, rates))
            )
    files = {}
    for (figure, phi, omega), rows in panels.items():
        name = f"panel_{figure}_{_level_label(phi)}_{_level_label(omega)}.csv"
        lines = ["n,beta0,rate"]
        for beta0, n, rate in sorted(rows):
            lines.append(f"{n},{beta0!r},{rate:.6f}")
        files[name] = lines
    return files


def write_panel_csvs(all_rates: Sequence[AggregateRates], out_dir) -> List[str]:
    out = Path(out_dir)
    written = []
    for name, lines in sorted(panel_files(all_rates).items()):
        with open(out / name, "w", newline="") as handle:
            handle.write("\n".join(lines) + "\n")
        written.append(name)
    return written
