"""Error exponents for a fixed truth: the three-level tilt program.

When the families are not completely separated the minimax exponent is
zero, but the type-I error under a FIXED null member still decays, at a
rate given by an inf-sup-inf program over (theta, gamma, lambda).  The
optimizing triple defines an exponentially tilted law under which the
centered log ratio has mean zero; that law is also the natural
importance sampling distribution for the error event.
"""

import numpy as np

from glrtexp import families, nonsep

# coarser search settings keep this demo quick; defaults are stricter
CFG = nonsep.NonsepConfig(grid_points=9, multistart=2)

lognormal = families.lognormal()
exponential = families.exponential()
theta0 = 1.28

print(f"truth: lognormal(theta0={theta0}); alternative: exponentials\n")

rep = nonsep.feasibility_b(lognormal, theta0, exponential, b=0.0)
print("threshold feasibility at b = 0:")
print(f"  sup over gamma of the expected log ratio = {rep.sup_drift:.4f}")
print(f"  KL infimum to the alternative family     = {rep.kl_inf:.4f}")
print(f"  feasible: {rep.feasible}\n")

tilt = nonsep.solve_tilt(lognormal, exponential, theta0=theta0, b=0.0,
                         config=CFG)
print("solved tilt:")
print("  " + tilt.to_json())
print(f"  decay rate of P(log LR_n > 0) = {nonsep.rate_nonsep(tilt):.6f}\n")

print("stationarity under the tilted law (mean of the centered log ratio):")
draws = nonsep.tilted_sampler(tilt, 200_000, seed=1)
lr = tilt.log_ratio(draws)
print(f"  sample mean {lr.mean():+.5f} "
      f"(standard error {lr.std()/np.sqrt(lr.size):.5f})\n")

print("singleton boxes collapse the program to the pairwise index:")
point = nonsep.solve_tilt(
    lognormal, exponential,
    families.ParamBox.point(1.28), families.ParamBox.point(1.72),
    theta0=1.28, b=0.0)
print(f"  rate {point.rate:.6f} with lambda {point.lambda_dag:.4f} "
      "(= the pairwise optimizer z*)")

print("\na stricter threshold is a different rare event: raising b")
for b in (0.0, 0.1):
    t = nonsep.solve_tilt(lognormal, exponential, theta0=theta0, b=b,
                          config=CFG)
    print(f"  b = {b:4.2f}: rate {t.rate:.4f}, lambda {t.lambda_dag:.4f}")
