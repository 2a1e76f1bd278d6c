"""Validating the exponents by simulation: decay curves with tilted sampling.

Error probabilities down to 1e-8 are far beyond plain Monte Carlo; the
exponentially tilted measure from the rate analysis makes them cheap.
This script estimates both error probabilities of the lognormal /
exponential test at its least favorable pair across a range of sample
sizes, fits the log-linear decay, and compares the fitted slope with
the computed exponent.
"""

import os
import warnings

import numpy as np

from glrtexp import chernoff, families, nonsep, simulate

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

lognormal = families.lognormal()
exponential = families.exponential()
test = simulate.TestSpec(lognormal, exponential)

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    saddle = chernoff.generalized_index(
        lognormal, exponential, config=chernoff.IndexConfig(grid_points=21))
print(f"exponent rho = {saddle.rho:.5f} at "
      f"({saddle.theta_star[0]:.3f}, {saddle.gamma_star[0]:.3f})\n")

# both error probabilities at one sample size, tilted vs direct
probe = simulate.max_error_probe(test, saddle, n=100, seed=0)
direct = simulate.direct_mc((lognormal, saddle.theta_star), test,
                            n=100, reps=200_000, seed=1)
print("n = 100, truth at the least favorable parameters:")
print(f"  type-I  tilted  {probe['type_I'].p_hat:.5f} "
      f"(rel err {probe['type_I'].rel_err:.3f})")
print(f"  type-I  direct  {direct.p_hat:.5f} "
      f"(rel err {direct.rel_err:.3f})")
print(f"  type-II tilted  {probe['type_II'].p_hat:.5f}\n")

# the full decay curves
ns = list(range(50, 371, 40))
tilt_fwd = nonsep.tilt_from_pairwise(
    lognormal, exponential, saddle.theta_star, saddle.gamma_star,
    saddle.z_star, saddle.rho)
tilt_rev = nonsep.tilt_from_pairwise(
    lognormal, exponential, saddle.theta_star, saddle.gamma_star,
    saddle.z_star, saddle.rho, swap=True)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    c1 = simulate.decay_curve(test, tilt_fwd, ns, seed=10)
    c2 = simulate.decay_curve(test, tilt_rev, ns, seed=11, side="type-II")

print("type-I error decay:")
for n, est in zip(c1.sample_sizes, c1.estimates):
    print(f"  n = {n:3d}: p = {est.p_hat:.3e} (rel err {est.rel_err:.3f})")
print(f"fitted slope {c1.slope:.5f}; computed exponent -rho = "
      f"{-saddle.rho:.5f}")
print(f"type-II fitted slope {c2.slope:.5f} "
      "(the two sides decay at the same rate)\n")

for name, curve in (("type1", c1), ("type2", c2)):
    path = os.path.join(OUT, f"decay_{name}.csv")
    with open(path, "w") as fh:
        fh.write(curve.to_csv())
    print(f"curve written to {path}")
