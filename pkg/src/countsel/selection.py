"""Model-selection policies and their traces.

Two policies are implemented.  The sequential-test policy first runs the
overdispersion score test on the Poisson fit, then a Vuong zero-inflation
test on the branch it lands in, and finally a Wald test under the model
the tests selected.  The lowest-AIC policy fits all four families and
tests under the AIC winner.  Both report the full decision trace.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .diagnostics import dean_lawless_test, vuong_test
from .families import Family
from .fitting import FALLBACK_P_VALUE, CountDataset, FitResult, _fit_family, wald_test

__all__ = [
    "Policy",
    "SelectionPolicy",
    "SelectionTrace",
    "FitCache",
    "select_seven_step",
    "select_lowest_aic",
    "select",
    "expected_tree_counts",
]

FAMILY_ORDER = (Family.POISSON, Family.NB2, Family.ZIP, Family.ZINB)


class Policy(str, enum.Enum):
    SEVEN_STEP = "seven_step"
    LOWEST_AIC = "lowest_aic"


@dataclass(frozen=True)
class SelectionPolicy:
    kind: Policy
    alpha: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class SelectionTrace:
    """The decisions one policy made on one dataset.

    Under the sequential policy exactly one of the two Vuong p-values is
    set (the branch actually taken); ``aic_by_family`` is populated when
    the caller asked for AIC records or under the AIC policy.
    """

    policy: Policy
    alpha: float
    chosen: Family
    final_p: float
    rejected_h0: bool
    fallback_used: bool
    dl_p: Optional[float] = None
    vuong_poisson_zip_p: Optional[float] = None
    vuong_nb2_zinb_p: Optional[float] = None
    aic_by_family: Optional[Tuple[float, float, float, float]] = None


class FitCache:
    """Lazily fits families on one dataset, sharing warm starts."""

    def __init__(self, data: CountDataset):
        self.data = data
        self._fits: Dict[Family, FitResult] = {}

    def get(self, family: Family) -> FitResult:
        if family not in self._fits:
            if family is Family.POISSON:
                result = _fit_family(Family.POISSON, self.data)
            elif family is Family.NB2:
                result = _fit_family(Family.NB2, self.data, poisson_fit=self.get(Family.POISSON))
            elif family is Family.ZIP:
                result = _fit_family(Family.ZIP, self.data, poisson_fit=self.get(Family.POISSON))
            else:
                result = _fit_family(Family.ZINB, self.data, nb2_fit=self.get(Family.NB2))
            self._fits[family] = result
        return self._fits[family]

    def aics(self) -> Tuple[float, float, float, float]:
        return tuple(self.get(f).aic for f in FAMILY_ORDER)


def _final_wald(fit_result: FitResult, alpha: float) -> Tuple[float, bool]:
    outcome = wald_test(fit_result, alpha=alpha)
    return outcome.p_value, outcome.fallback


def select_seven_step(
    data: CountDataset,
    alpha: float = 0.05,
    cache: Optional[FitCache] = None,
    with_aics: bool = False,
) -> SelectionTrace:
    """Run the sequential-test selection policy on one dataset.

    Fits are computed lazily along the branch taken unless ``with_aics``
    forces all four (so one set of fits can also feed the AIC policy).
    Any required fit that fails to converge contributes the 0.99 policy
    p-value and sets ``fallback_used``.
    """
    cache = cache or FitCache(data)
    poisson = cache.get(Family.POISSON)
    dl = dean_lawless_test(data, poisson, alpha=alpha)
    fallback = dl.fallback

    vuong_pz: Optional[float] = None
    vuong_nz: Optional[float] = None
    if not dl.reject:
        vz = vuong_test(poisson, cache.get(Family.ZIP), data, alpha=alpha)
        vuong_pz = vz.p_value
        chosen = Family.ZIP if vz.favors_zero_inflation() else Family.POISSON
    else:
        vz = vuong_test(cache.get(Family.NB2), cache.get(Family.ZINB), data, alpha=alpha)
        vuong_nz = vz.p_value
        chosen = Family.ZINB if vz.favors_zero_inflation() else Family.NB2

    final_p, wald_fallback = _final_wald(cache.get(chosen), alpha)
    fallback = fallback or wald_fallback
    return SelectionTrace(
        policy=Policy.SEVEN_STEP,
        alpha=alpha,
        chosen=chosen,
        final_p=final_p,
        rejected_h0=final_p < alpha,
        fallback_used=fallback,
        dl_p=dl.p_value,
        vuong_poisson_zip_p=vuong_pz,
        vuong_nb2_zinb_p=vuong_nz,
        aic_by_family=cache.aics() if with_aics else None,
    )


def select_lowest_aic(
    data: CountDataset,
    alpha: float = 0.05,
    cache: Optional[FitCache] = None,
) -> SelectionTrace:
    """Fit all four families and test under the lowest-AIC model.

    Non-converged fits carry AIC +inf; exact ties break toward the simpler
    family in the fixed order Poisson < NB2 < ZIP < ZINB.  If every fit
    failed, the Poisson model is reported with the 0.99 fallback p-value.
    """
    cache = cache or FitCache(data)
    aics = cache.aics()
    best = min(aics)
    if math.isinf(best):
        chosen = Family.POISSON
        final_p, fallback = FALLBACK_P_VALUE, True
    else:
        chosen = FAMILY_ORDER[aics.index(best)]
        final_p, fallback = _final_wald(cache.get(chosen), alpha)
    return SelectionTrace(
        policy=Policy.LOWEST_AIC,
        alpha=alpha,
        chosen=chosen,
        final_p=final_p,
        rejected_h0=final_p < alpha,
        fallback_used=fallback,
        aic_by_family=aics,
    )


def select(data: CountDataset, policy: SelectionPolicy) -> SelectionTrace:
    if policy.kind is Policy.SEVEN_STEP:
        return select_seven_step(data, alpha=policy.alpha)
    return select_lowest_aic(data, alpha=policy.alpha)


def expected_tree_counts(alpha: float = 0.05, total: float = 100.0) -> Dict[str, float]:
    """Expected datasets at each node of the selection tree if the three
    preliminary tests were independent with level ``alpha``.

    Keys: ``root``, ``no_overdispersion``, ``overdispersion``, and one leaf
    per family label.
    """
    keep = 1.0 - alpha
    return {
        "root": total,
        "no_overdispersion": total * keep,
        "overdispersion": total * alpha,
        Family.POISSON.label: total * keep * keep,
        Family.ZIP.label: total * keep * alpha,
        Family.NB2.label: total * alpha * keep,
        Family.ZINB.label: total * alpha * alpha,
    }
