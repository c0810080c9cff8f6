"""Count distribution families: log PMFs, moments, and exact samplers.

Four families are supported, all parameterized the way the regression
models in :mod:`countsel.fitting` use them:

* ``lam``    -- mean of the count component (positive),
* ``omega``  -- probability of a structural zero, in [0, 1),
* ``nu``     -- dispersion of the count component; ``math.inf`` is the
  explicit equidispersed sentinel under which the count component is
  exactly Poisson (never approximated by a large float).

The NB2 parameterization has ``Var(Y) = lam + lam**2 / nu``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

__all__ = [
    "Family",
    "DistParams",
    "Moments",
    "ParameterError",
    "log_pmf",
    "moments",
    "sample",
]


class ParameterError(ValueError):
    """A distribution or regression parameter is outside its domain."""


class Family(enum.IntEnum):
    """The four count model families, in fixed reporting order."""

    POISSON = 0
    NB2 = 1
    ZIP = 2
    ZINB = 3

    @property
    def has_zero_inflation(self) -> bool:
        return self in (Family.ZIP, Family.ZINB)

    @property
    def has_dispersion(self) -> bool:
        return self in (Family.NB2, Family.ZINB)

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "Family":
        key = text.strip().lower()
        for fam, names in _ALIASES.items():
            if key in names:
                return fam
        raise ValueError(f"unknown family {text!r}")


_LABELS = {
    Family.POISSON: "poisson",
    Family.NB2: "nb2",
    Family.ZIP: "zip",
    Family.ZINB: "zinb",
}

_ALIASES = {
    Family.POISSON: {"poisson", "pois", "p"},
    Family.NB2: {"nb2", "nb", "negbin", "negative-binomial"},
    Family.ZIP: {"zip"},
    Family.ZINB: {"zinb"},
}


@dataclass(frozen=True)
class DistParams:
    """Parameters of one count distribution.

    ``omega`` defaults to 0 and ``nu`` to ``inf`` so that
    ``DistParams(lam)`` is a valid Poisson parameterization.
    """

    lam: float
    omega: float = 0.0
    nu: float = math.inf

    def validate(self, family: Family) -> "DistParams":
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ParameterError(f"lam must be positive and finite, got {self.lam}")
        if not (0.0 <= self.omega < 1.0):
            raise ParameterError(f"omega must lie in [0, 1), got {self.omega}")
        if not self.nu > 0:
            raise ParameterError(f"nu must be positive, got {self.nu}")
        if family is Family.POISSON and (self.omega != 0.0 or not math.isinf(self.nu)):
            raise ParameterError("Poisson requires omega = 0 and nu = inf")
        if family is Family.NB2 and self.omega != 0.0:
            raise ParameterError("NB2 requires omega = 0")
        if family is Family.ZIP and not math.isinf(self.nu):
            raise ParameterError("ZIP requires nu = inf")
        return self


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    dispersion_index: float


# ---------------------------------------------------------------------------
# log-PMF kernels.  These accept scalar or ndarray ``y``/``lam``/``omega``
# (broadcast together); ``nu`` is always scalar.  Everything is evaluated in
# log space; zero-probability inputs come back as -inf, never as an error.
# ---------------------------------------------------------------------------


def _poisson_logpmf(y, lam):
    return xlogy(y, lam) - lam - gammaln(np.asarray(y) + 1.0)


def _lgamma_ratio(y: np.ndarray, nu: float) -> np.ndarray:
    # lgamma(y + nu) - lgamma(nu) as a rising-factorial log sum; exact for
    # integer counts at any nu, where the direct difference cancels badly
    # once nu is large
    steps = np.log(nu + np.arange(int(y.max()) if y.size else 0, dtype=np.float64))
    prefix = np.concatenate(([0.0], np.cumsum(steps)))
    return prefix[y]


def _nb2_logpmf(y, lam, nu):
    if math.isinf(nu):
        return _poisson_logpmf(y, lam)
    y = np.asarray(y, dtype=np.int64)
    log_ratio = np.log1p(lam / nu)  # log((nu + lam) / nu)
    return (
        _lgamma_ratio(y, nu)
        - gammaln(y + 1.0)
        - nu * log_ratio
        + xlogy(y, lam)
        - y * (math.log(nu) + log_ratio)
    )


def _zip_logpmf(y, lam, omega):
    y = np.asarray(y)
    base = _poisson_logpmf(y, lam)
    with np.errstate(divide="ignore"):
        log_omega = np.log(omega)
    ll_zero = np.logaddexp(log_omega, np.log1p(-omega) - lam)
    return np.where(y == 0, ll_zero, np.log1p(-omega) + base)


def _zinb_logpmf(y, lam, omega, nu):
    if math.isinf(nu):
        return _zip_logpmf(y, lam, omega)
    y = np.asarray(y)
    base = _nb2_logpmf(y, lam, nu)
    with np.errstate(divide="ignore"):
        log_omega = np.log(omega)
    log_p0 = -nu * np.log1p(lam / nu)  # count-component mass at zero
    ll_zero = np.logaddexp(log_omega, np.log1p(-omega) + log_p0)
    return np.where(y == 0, ll_zero, np.log1p(-omega) + base)


def _validate_counts(y) -> np.ndarray:
    arr = np.asarray(y)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ParameterError("y must contain integers")
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ParameterError("y must be nonnegative")
    return arr


def log_pmf(family: Family, params: DistParams, y):
    """Natural-log probability mass of ``y`` under the given family.

    ``y`` may be a scalar or an array of nonnegative integers; the result
    matches its shape.  Structural-zero mixtures are combined with
    log-sum-exp so the zero branch is stable for any omega.
    """
    params.validate(family)
    arr = _validate_counts(y)
    if family is Family.POISSON:
        out = _poisson_logpmf(arr, params.lam)
    elif family is Family.NB2:
        out = _nb2_logpmf(arr, params.lam, params.nu)
    elif family is Family.ZIP:
        out = _zip_logpmf(arr, params.lam, params.omega)
    else:
        out = _zinb_logpmf(arr, params.lam, params.omega, params.nu)
    if np.isscalar(y) or np.ndim(y) == 0:
        return float(out)
    return out


def moments(family: Family, params: DistParams) -> Moments:
    """Closed-form mean, variance, and dispersion index (variance/mean)."""
    params.validate(family)
    lam, omega, nu = params.lam, params.omega, params.nu
    inv_nu = 0.0 if math.isinf(nu) else 1.0 / nu
    if family is Family.POISSON:
        return Moments(lam, lam, 1.0)
    if family is Family.NB2:
        d = 1.0 + lam * inv_nu
        return Moments(lam, lam * d, d)
    if family is Family.ZIP:
        mean = lam * (1.0 - omega)
        d = 1.0 + lam * omega
        return Moments(mean, mean * d, d)
    mean = lam * (1.0 - omega)
    variance = (1.0 - omega) * (lam + lam**2 * (omega + inv_nu))
    return Moments(mean, variance, 1.0 + lam * (omega + inv_nu))


def _count_component_sample(rng: np.random.Generator, lam: float, nu: float, size: int):
    if math.isinf(nu):
        return rng.poisson(lam, size)
    # gamma-Poisson mixture: shape nu, scale lam/nu gives the NB2 law exactly
    return rng.poisson(rng.gamma(nu, lam / nu, size))


def sample(family: Family, params: DistParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` independent counts.

    Zero-inflated families are drawn compositionally: a Bernoulli(omega)
    structural-zero indicator first, then the count component.  The rng is
    advanced deterministically, so equal generator states give equal draws.
    """
    params.validate(family)
    if size < 1:
        raise ParameterError("size must be a positive integer")
    if family.has_zero_inflation:
        structural = rng.random(size) < params.omega
        counts = _count_component_sample(rng, params.lam, params.nu, size)
        return np.where(structural, 0, counts)
    return _count_component_sample(rng, params.lam, params.nu, size)
