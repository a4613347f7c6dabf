"""Pick the age cap from the discount factor and a per-slot error tolerance.

Clipping the ages at A costs at most gamma^A/(1-gamma)^2 in total discounted
value; inverting that bound gives the smallest safe cap. The grid below shows
how quickly the required cap grows as the discount approaches one.
"""

from aoi_isac import truncation_error_bound, truncation_level

gammas = (0.50, 0.70, 0.85, 0.90, 0.95)
eps_hats = (1.0, 5e-1, 1e-1, 5e-2, 1e-2, 5e-3, 1e-3)

header = "eps_hat   " + "".join(f"g={g:<6}" for g in gammas)
print(header)
print("-" * len(header))
for e in eps_hats:
    cells = "".join(f"{truncation_level(g, e):<8}" for g in gammas)
    print(f"{e:<10}{cells}")

print("\nerror bound at the selected caps (should be <= eps_hat/(1-gamma)):")
for g in gammas:
    a = truncation_level(g, 0.1)
    print(
        f"  gamma={g}: A={a:3d}  bound={truncation_error_bound(g, a):.4g}"
        f"  budget={0.1 / (1 - g):.4g}"
    )
