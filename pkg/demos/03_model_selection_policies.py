"""The two model-selection policies and the selection tree.

Run with:  python demos/03_model_selection_policies.py
"""

import math

import numpy as np

from countsel import (
    CountDataset,
    DistParams,
    Family,
    expected_tree_counts,
    sample,
    select_lowest_aic,
    select_seven_step,
)

# If the three preliminary tests were independent with level 0.05, the
# selection tree would route this share of 100 Poisson datasets per leaf:
print("expected leaf counts per 100 Poisson datasets (independence, alpha=0.05)")
for name, count in expected_tree_counts(0.05).items():
    print(f"  {name:18s} {count:6.2f}")

rng = np.random.default_rng(123)


def make(family, params, n=300):
    x = rng.normal(0.0, 10.0, n)
    y = sample(family, params, n, rng)
    return CountDataset(y=y, x=x)


datasets = {
    "poisson data": make(Family.POISSON, DistParams(lam=math.exp(1.0))),
    "overdispersed data": make(Family.NB2, DistParams(lam=math.exp(1.0), nu=1.0)),
    "zero-heavy data": make(Family.ZIP, DistParams(lam=math.exp(1.0), omega=0.3)),
    "both": make(Family.ZINB, DistParams(lam=math.exp(1.0), omega=0.3, nu=1.0)),
}

for label, data in datasets.items():
    seven = select_seven_step(data, with_aics=True)
    lowest = select_lowest_aic(data)
    branch = (
        f"overdispersion p={seven.dl_p:.3f}; "
        + (
            f"zero-inflation p={seven.vuong_poisson_zip_p:.3f} (Poisson branch)"
            if seven.vuong_poisson_zip_p is not None
            else f"zero-inflation p={seven.vuong_nb2_zinb_p:.3f} (NB branch)"
        )
    )
    aics = ", ".join(f"{f.label} {a:.1f}" for f, a in zip(Family, seven.aic_by_family))
    print(f"\n{label}:")
    print(f"  sequential tests -> {seven.chosen.label:8s} final p = {seven.final_p:.4f}  [{branch}]")
    print(f"  lowest AIC       -> {lowest.chosen.label:8s} final p = {lowest.final_p:.4f}  [AIC: {aics}]")
