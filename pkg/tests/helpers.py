"""Shared generators and property checks used across the test modules."""

from __future__ import annotations

import math

import numpy as np

from countsel import CountDataset, DistParams, Family, fit, log_pmf, sample
from countsel.fitting import _FitProblem
from countsel.selection import FAMILY_ORDER, FitCache


def dataset_from(family: Family, params: DistParams, n: int, seed: int, x_sd: float = 10.0) -> CountDataset:
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, x_sd, n)
    y = sample(family, params, n, rng)
    return CountDataset(y=y, x=x)


def mixed_null_datasets(count: int, n: int, seed: int = 1234):
    """Seeded datasets cycling through the four generating families."""
    specs = [
        (Family.POISSON, DistParams(lam=math.exp(1.0))),
        (Family.NB2, DistParams(lam=math.exp(1.0), nu=2.0)),
        (Family.ZIP, DistParams(lam=math.exp(1.0), omega=0.2)),
        (Family.ZINB, DistParams(lam=math.exp(1.0), omega=0.2, nu=2.0)),
    ]
    out = []
    for i in range(count):
        family, params = specs[i % len(specs)]
        out.append(dataset_from(family, params, n, seed + i))
    return out


def finite_difference_grad(problem: _FitProblem, theta: np.ndarray) -> np.ndarray:
    """Central finite differences of the log-likelihood, step 1e-6*max(1,|t|)."""
    grad = np.empty_like(theta)
    for j in range(theta.size):
        h = 1e-6 * max(1.0, abs(theta[j]))
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        grad[j] = (problem.loglik(up) - problem.loglik(dn)) / (2.0 * h)
    return grad


def random_valid_theta(family: Family, rng: np.random.Generator) -> np.ndarray:
    parts = [rng.uniform(-0.5, 1.5), rng.uniform(-0.15, 0.15)]
    if family.has_zero_inflation:
        parts += [rng.uniform(-2.0, 1.0), rng.uniform(-0.2, 0.2)]
    if family.has_dispersion:
        parts += [rng.uniform(math.log(0.5), math.log(5.0))]
    return np.array(parts)


def max_grad_rel_error(family: Family, data: CountDataset, points: int, seed: int) -> float:
    problem = _FitProblem(family, data)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        theta = random_valid_theta(family, rng)
        analytic = problem.grad(theta)
        numeric = finite_difference_grad(problem, theta)
        scale = np.maximum(np.abs(numeric), 1.0)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    return worst


def pmf_sum_and_bound(family: Family, params: DistParams, tail_bound: float = 1e-12):
    """Sum exp(log_pmf) up to a K with an analytic geometric tail bound.

    The support is extended until the bounding ratio argument guarantees
    the remaining mass is below ``tail_bound``.
    """
    lam, nu = params.lam, params.nu
    k = max(64, int(8 * lam) + 16)
    while True:
        ys = np.arange(k + 1)
        masses = np.exp(log_pmf(family, params, ys))
        if math.isinf(nu):
            ratio = lam / (k + 1)
        else:
            ratio = (k + nu) / (k + 1) * lam / (nu + lam)
        if ratio < 1.0:
            tail = masses[-1] * ratio / (1.0 - ratio)
            if tail < tail_bound:
                return float(masses.sum()), tail
        k *= 2
        if k > 2_000_000:
            raise AssertionError("tail bound never satisfied")


def fit_all(data: CountDataset):
    cache = FitCache(data)
    return {family: cache.get(family) for family in FAMILY_ORDER}


def trace_is_nondecreasing(fit_result, slack: float = 1e-10) -> bool:
    trace = fit_result.loglik_trace
    return all(b >= a - slack for a, b in zip(trace, trace[1:]))
