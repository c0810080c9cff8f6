"""Preliminary tests that drive model selection.

Two tests are provided: the Dean-Lawless score test for overdispersion of
a fitted Poisson model (one-sided, upper tail), and the Vuong test
comparing a restricted count model against its zero-inflated counterpart
through per-observation log-likelihood differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as _norm

from .families import Family
from .fitting import (
    FALLBACK_P_VALUE,
    CountDataset,
    FitResult,
    TestOutcome,
    pointwise_loglik,
)

__all__ = ["VuongOutcome", "dean_lawless_test", "vuong_test"]

_VUONG_PAIRS = {
    (Family.POISSON, Family.ZIP),
    (Family.NB2, Family.ZINB),
}


@dataclass(frozen=True)
class VuongOutcome(TestOutcome):
    """Vuong test result with its corrected variants and degeneracy flags.

    ``statistic`` is the raw z-statistic and ``p_value`` its one-sided
    p-value in the direction the statistic leans.  Selection policies must
    combine ``p_value`` with ``direction``: only a significant result that
    favors the zero-inflated model sends the data down the ZI branch.
    """

    statistic_aic: float = math.nan
    statistic_bic: float = math.nan
    direction: str = "none"
    n_dropped: int = 0
    n_effective: int = 0
    degenerate: bool = False
    skipped: bool = False

    def favors_zero_inflation(self) -> bool:
        return self.direction == "zero-inflated" and self.p_value < self.alpha


def dean_lawless_test(
    data: CountDataset, poisson_fit: FitResult, alpha: float = 0.05
) -> TestOutcome:
    """Score test of no overdispersion based on Poisson residuals.

    The statistic sums ``(y - lam_hat)**2 - y`` over observations, scaled
    by ``sqrt(2 * sum(lam_hat**2))``; the p-value is the upper tail of the
    standard normal.  A non-converged Poisson fit yields the 0.99 policy
    fallback.
    """
    if poisson_fit.family is not Family.POISSON:
        raise ValueError("overdispersion test needs the Poisson fit")
    if not poisson_fit.converged:
        return TestOutcome(
            statistic=math.nan,
            p_value=FALLBACK_P_VALUE,
            df=None,
            alpha=alpha,
            method="dean-lawless",
            fallback=True,
        )
    lam = poisson_fit.params.rates(data.x)
    y = data.y.astype(np.float64)
    statistic = float(np.sum((y - lam) ** 2 - y) / math.sqrt(2.0 * float(np.sum(lam**2))))
    return TestOutcome(
        statistic=statistic,
        p_value=float(_norm.sf(statistic)),
        df=None,
        alpha=alpha,
        method="dean-lawless",
    )


def _vuong_skip(alpha: float, reason: str) -> VuongOutcome:
    return VuongOutcome(
        statistic=math.nan,
        p_value=1.0,
        df=None,
        alpha=alpha,
        method=f"vuong-{reason}",
        skipped=True,
    )


def vuong_test(
    fit_restricted: FitResult,
    fit_zi: FitResult,
    data: CountDataset,
    alpha: float = 0.05,
) -> VuongOutcome:
    """Vuong comparison of a restricted model with its zero-inflated version.

    Valid pairs are (Poisson, ZIP) and (NB2, ZINB).  Observations whose
    log-likelihood difference is non-finite are dropped from the sums (the
    count is reported); with fewer than two zeros in ``y``, a non-converged
    fit on either side, or a zero-variance difference the test is skipped
    with p-value 1.  AIC- and BIC-corrected statistics subtract the
    parameter-count penalty from each per-observation difference.
    """
    pair = (fit_restricted.family, fit_zi.family)
    if pair not in _VUONG_PAIRS:
        raise ValueError(f"unsupported model pair {pair[0].label} vs {pair[1].label}")
    if data.n_zero < 2:
        return _vuong_skip(alpha, "too-few-zeros")
    if not (fit_restricted.converged and fit_zi.converged):
        return _vuong_skip(alpha, "fit-failed")

    ll_zi = pointwise_loglik(fit_zi.family, fit_zi.params, data)
    ll_restricted = pointwise_loglik(fit_restricted.family, fit_restricted.params, data)
    diff = ll_zi - ll_restricted
    keep = np.isfinite(diff)
    n_dropped = int(diff.size - np.count_nonzero(keep))
    diff = diff[keep]
    n_eff = int(diff.size)
    if n_eff < 2:
        return _vuong_skip(alpha, "degenerate")

    k_diff = fit_zi.n_free_params - fit_restricted.n_free_params
    return _vuong_from_differences(diff, k_diff, alpha, n_dropped)


def _vuong_from_differences(
    diff: np.ndarray, k_diff: int, alpha: float, n_dropped: int = 0
) -> VuongOutcome:
    """Vuong statistic from per-observation log-likelihood differences.

    ``diff`` must already be restricted to the finite cases; positive
    values favor the zero-inflated model.
    """
    n_eff = int(diff.size)
    sd = float(np.std(diff, ddof=1))
    # differences indistinguishable from a constant at float precision
    # carry no comparative information
    degenerate_scale = 1e-12 * max(1.0, float(np.max(np.abs(diff))))
    if not (math.isfinite(sd) and sd > degenerate_scale):
        return VuongOutcome(
            statistic=math.nan,
            p_value=1.0,
            df=None,
            alpha=alpha,
            method="vuong",
            n_dropped=n_dropped,
            n_effective=n_eff,
            degenerate=True,
        )

    total = float(np.sum(diff))
    scale = sd * math.sqrt(n_eff)
    aic_shift = k_diff / n_eff
    bic_shift = k_diff * math.log(n_eff) / (2.0 * n_eff)
    v_raw = total / scale
    v_aic = (total - n_eff * aic_shift) / scale
    v_bic = (total - n_eff * bic_shift) / scale

    if v_raw > 0:
        p_value = float(_norm.sf(v_raw))
        direction = "zero-inflated"
    else:
        p_value = float(_norm.cdf(v_raw))
        direction = "restricted"
    return VuongOutcome(
        statistic=v_raw,
        p_value=p_value,
        df=None,
        alpha=alpha,
        method="vuong",
        statistic_aic=v_aic,
        statistic_bic=v_bic,
        direction=direction,
        n_dropped=n_dropped,
        n_effective=n_eff,
        degenerate=False,
    )
