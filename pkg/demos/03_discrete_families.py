"""Poisson against geometric: lattice supports and a boundary optimum.

Without truncation the two families meet as both means shrink to zero
and the exponent collapses; truncating the boxes away from zero keeps
them separated.  On the truncated boxes the least favorable Poisson
mean sits exactly on the (real) lower bound, which the first-order
diagnostics report as an active constraint rather than a stationary
point.
"""

import warnings

from glrtexp import chernoff, families, nonsep

poisson = families.poisson(lower=1.0)      # theta in [1, 50]
geometric = families.geometric(lower=0.5)  # gamma in [0.5, 50]

print("truncated boxes: Theta = [1, 50], Gamma = [0.5, 50]")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    res = chernoff.generalized_index(poisson, geometric)
print(f"  rho = {res.rho:.6f} at ({res.theta_star[0]:.4f}, "
      f"{res.gamma_star[0]:.4f})")

print("\nwithout truncation the exponent drains away toward the corner:")
po0 = families.poisson(lower=0.05, upper=5.0)
ge0 = families.geometric(lower=0.05, upper=5.0)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    res0 = chernoff.generalized_index(
        po0, ge0, config=chernoff.IndexConfig(grid_points=11,
                                              check_separation=False))
print(f"  rho = {res0.rho:.6f} at ({res0.theta_star[0]:.4f}, "
      f"{res0.gamma_star[0]:.4f})  (both means near the lower corner)")

print("\nfirst-order conditions at the truncated saddle:")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    tilt = nonsep.solve_tilt(poisson, geometric, theta0=res.theta_star,
                             b=0.0)
rep = nonsep.euler_check(tilt)
print(f"  tilted measure: lambda = {tilt.lambda_dag:.4f}, "
      f"rate = {tilt.rate:.6f}")
print(f"  theta score {rep.theta_score[0]:+.5f} "
      "(negative: pushing the mean below 1 would help, but the box "
      "forbids it)")
print(f"  gamma score {rep.gamma_score[0]:+.2e} (interior stationary)")
print(f"  conditions satisfied: {rep.ok}")
