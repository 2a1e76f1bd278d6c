"""Pairwise Chernoff indices: where the curve -log M(z) peaks.

The error exponent of a simple-vs-simple likelihood ratio test is the
maximum of -log M(z) over z in (0, 1), where M is the moment generating
function of the per-observation log likelihood ratio under the null.
This script traces that curve for the lognormal / exponential pair,
checks two cases with closed-form answers, and writes the curve to CSV.
"""

import os

import numpy as np

from glrtexp import chernoff, families, mgf

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

lognormal = families.lognormal()
exponential = families.exponential()
gaussian = families.gaussian()

# --- trace -log M(z) for the lognormal / exponential pair ---------------
theta, gamma = 1.28, 1.72
spec = mgf.pairwise_spec(lognormal, theta, exponential, gamma)
zs = np.linspace(0.01, 0.99, 99)
curve = np.array([-mgf.log_mgf(spec, z) for z in zs])

res = chernoff.pairwise_index(lognormal, theta, exponential, gamma)
print(f"lognormal(theta={theta}) vs exponential(gamma={gamma}):")
print(f"  index rho = {res.rho:.6f} at z* = {res.z_star:.4f}")
print(f"  curve endpoints: {curve[0]:.2e}, {curve[-1]:.2e} (both ~ 0)")
print(f"  curve maximum:   {curve.max():.6f} at z = {zs[curve.argmax()]:.2f}")

path = os.path.join(OUT, "pairwise_curve.csv")
with open(path, "w") as fh:
    fh.write("z,neg_log_mgf\n")
    for z, v in zip(zs, curve):
        fh.write(f"{z:.4f},{v:.8f}\n")
print(f"  curve written to {path}")

# --- closed-form sanity: Gaussian location shifts ------------------------
print("\nGaussian shifts, exponent = delta^2/8:")
for delta in (0.5, 1.0, 2.0):
    r = chernoff.pairwise_index(gaussian, 0.0, gaussian, delta)
    print(f"  delta={delta}: computed {r.rho:.8f}, analytic {delta**2/8:.8f}")

# --- and symmetric Bernoulli pairs ---------------------------------------
bern = families.bernoulli()
print("\nSymmetric Bernoulli pairs, exponent = -log(2 sqrt(pq)):")
for p in (0.2, 0.3):
    r = chernoff.pairwise_index(bern, p, bern, 1 - p)
    print(f"  p={p}: computed {r.rho:.8f}, "
          f"analytic {-np.log(2*np.sqrt(p*(1-p))):.8f}")

# the exponent is symmetric in the two hypotheses: swapping the families
# moves the maximizer from z* to 1 - z* but leaves the value alone
fwd = chernoff.pairwise_index(lognormal, theta, exponential, gamma)
rev = chernoff.pairwise_index(exponential, gamma, lognormal, theta)
print(f"\nswap symmetry: {fwd.rho:.8f} vs {rev.rho:.8f}, "
      f"z* {fwd.z_star:.4f} vs 1-z* {1-rev.z_star:.4f}")
