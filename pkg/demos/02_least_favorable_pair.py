"""The least favorable pair of a composite-vs-composite test.

For composite families the maximal error probabilities of the GLRT at
unit threshold decay like exp(-n rho), where rho is the minimum of the
pairwise index over both parameter boxes.  This script locates that
minimum for the lognormal / exponential problem, writes a contour grid
around it, and shows how truncation of the boxes is diagnosed.
"""

import os
import warnings

import numpy as np

from glrtexp import chernoff, families

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

lognormal = families.lognormal()
exponential = families.exponential()

print("separation check (minimum KL divergence over both boxes):")
rep = families.check_separation(lognormal, exponential, grid=9)
print(f"  min KL = {rep.min_kl:.4f} at theta={rep.theta_at_min[0]:.3f}, "
      f"gamma={rep.gamma_at_min[0]:.3f} -> separated: {rep.separated}")

print("\nminimizing the pairwise index over both boxes "
      "(coarse grid + simplex refinement)...")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    res = chernoff.generalized_index(
        lognormal, exponential,
        config=chernoff.IndexConfig(grid_points=21))
print(f"  rho = {res.rho:.6f} at (theta*, gamma*) = "
      f"({res.theta_star[0]:.4f}, {res.gamma_star[0]:.4f}), "
      f"z* = {res.z_star:.4f}")
print(f"  grid {res.diagnostics['grid_resolution']}, "
      f"{res.diagnostics['refinement_steps']} refinement evaluations, "
      f"on an artificial box face: {res.diagnostics['boundary_flag']}")

# a contour grid around the minimum, ready for plotting
theta_axis = np.exp(np.linspace(np.log(0.6), np.log(2.6), 13))
gamma_axis = np.exp(np.linspace(np.log(0.9), np.log(3.2), 13))
grid = chernoff.contour_grid(lognormal, exponential, theta_axis, gamma_axis)
path = os.path.join(OUT, "lognormal_exponential_contour.csv")
with open(path, "w") as fh:
    fh.write(grid.to_csv())
print(f"\ncontour grid written to {path}")
print(f"grid minimum {np.nanmin(grid.rho_values):.6f} "
      f">= refined minimum {res.rho:.6f}")

# model selection among more than two families: the decay rate of the
# misclassification probability is the worst pairwise exponent
gaussian = families.gaussian()
fams = [(gaussian, families.ParamBox.point(m)) for m in (0.0, 1.0, 3.0)]
multi = chernoff.multi_family_rate(fams)
print("\nthree Gaussian candidates at means 0, 1, 3:")
print(f"  selection error exponent {multi.rho:.4f}, "
      f"worst pair {multi.worst_pair} (the two closest means)")
