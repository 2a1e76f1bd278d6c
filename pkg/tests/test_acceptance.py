"""Acceptance criteria for the whole package.

Each test prints one PASS/FAIL line.  Run with ``pytest
tests/test_acceptance.py -v -s`` to see the lines as they appear; the
suite reuses session fixtures so the expensive saddle computations run
once.
"""

import json
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from glrtexp import chernoff, families, glm, mgf, nonsep, simulate
from tests.conftest import EX1, EX2, EX3, EX3_SIGMA


def _report(criterion: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{criterion}: {detail}"


# ---------------------------------------------------------------------------
# 1-3: the three reference exponents
# ---------------------------------------------------------------------------

def test_criterion_1_example1_exponent(ex1_index):
    res, elapsed = ex1_index
    ok = (abs(res.rho - 0.020) <= 0.002
          and abs(res.theta_star[0] - 1.28) <= 0.05
          and abs(res.gamma_star[0] - 1.72) <= 0.05
          and elapsed <= 60.0)
    _report("1 (lognormal/exponential exponent)", ok,
            f"rho={res.rho:.6f}, argmin=({res.theta_star[0]:.4f}, "
            f"{res.gamma_star[0]:.4f}), {elapsed:.1f}s")


def test_criterion_2_example2_exponent(ex2_index):
    res, elapsed = ex2_index
    ok = (abs(res.rho - 0.023) <= 0.002
          and abs(res.theta_star[0] - 1.00) <= 0.05
          and abs(res.gamma_star[0] - 0.93) <= 0.05
          and elapsed <= 60.0)
    _report("2 (Poisson/geometric exponent)", ok,
            f"rho={res.rho:.6f}, argmin=({res.theta_star[0]:.4f}, "
            f"{res.gamma_star[0]:.4f}), {elapsed:.1f}s")


def test_criterion_3_example3_exponent():
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rate = glm.gaussian_joint_rate(EX3_SIGMA, EX3["beta0"], 0.0)
    elapsed = time.perf_counter() - t0
    ok = abs(rate - 0.45) <= 0.02 and elapsed <= 120.0
    _report("3 (joint Gaussian exponent)", ok,
            f"rate={rate:.5f}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 4-6: decay curves
# ---------------------------------------------------------------------------

def test_criterion_4_example1_decay(ex1_index, lognormal, exponential):
    res, _ = ex1_index
    test = simulate.TestSpec(lognormal, exponential)
    tilt = nonsep.tilt_from_pairwise(
        lognormal, exponential, res.theta_star, res.gamma_star,
        res.z_star, res.rho)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        curve = simulate.decay_curve(test, tilt, list(range(50, 371, 40)),
                                     seed=20240601)
    elapsed = time.perf_counter() - t0
    ps = [e.p_hat for e in curve.estimates]
    ok = (-0.027 <= curve.slope <= -0.017
          and 0.08 <= max(ps) <= 0.16
          and 2e-5 <= min(ps) <= 2.5e-4
          and all(e.rel_err <= 0.1 for e in curve.estimates)
          and elapsed <= 600.0)
    _report("4 (lognormal/exponential decay)", ok,
            f"slope={curve.slope:.5f}, p in [{min(ps):.3g}, {max(ps):.3g}], "
            f"{elapsed:.1f}s")


def test_criterion_5_example2_decay(ex2_index, poisson_ex2, geometric_ex2):
    res, _ = ex2_index
    test = simulate.TestSpec(poisson_ex2, geometric_ex2)
    tilt = nonsep.tilt_from_pairwise(
        poisson_ex2, geometric_ex2, res.theta_star, res.gamma_star,
        res.z_star, res.rho)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        curve = simulate.decay_curve(test, tilt, list(range(40, 401, 40)),
                                     seed=20240602)
    ok = -0.030 <= curve.slope <= -0.020
    _report("5 (Poisson/geometric decay)", ok, f"slope={curve.slope:.5f}")


def test_criterion_6_example3_decay(ex3_tilt):
    tilt, _ = ex3_tilt
    test = simulate.TestSpec(tilt.gfam, tilt.hfam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        small = simulate.decay_curve(test, tilt, list(range(3, 19, 3)),
                                     seed=20240603)
        large = simulate.decay_curve(test, tilt, list(range(24, 37, 4)),
                                     seed=20240604)
    drift_small = abs(small.slope + EX3["rho"])
    drift_large = abs(large.slope + EX3["rho"])
    ok = (-0.60 <= small.slope <= -0.44
          and -0.55 <= large.slope <= -0.40
          and drift_large <= drift_small + 0.03)
    _report("6 (joint Gaussian decay)", ok,
            f"small-n slope={small.slope:.4f}, large-n slope={large.slope:.4f}")


# ---------------------------------------------------------------------------
# 7: analytic oracles
# ---------------------------------------------------------------------------

def test_criterion_7_analytic_oracles(gaussian):
    be = families.bernoulli()
    errs = []
    for delta in (0.5, 1.0, 2.0):
        res = chernoff.pairwise_index(gaussian, 0.0, gaussian, delta)
        errs.append(abs(res.rho - delta * delta / 8))
    for p in (0.2, 0.3, 0.4):
        res = chernoff.pairwise_index(be, p, be, 1.0 - p)
        errs.append(abs(res.rho + np.log(2 * np.sqrt(p * (1 - p)))))
    ok = max(errs) < 1e-6
    _report("7 (analytic oracles)", ok, f"max error {max(errs):.2e}")


# ---------------------------------------------------------------------------
# 8: property suite
# ---------------------------------------------------------------------------

def test_criterion_8a_mgf_endpoints(lognormal, exponential, poisson_ex2,
                                    geometric_ex2):
    checks = []
    for spec in (mgf.pairwise_spec(lognormal, 1.28, exponential, 1.72),
                 mgf.pairwise_spec(poisson_ex2, 1.0, geometric_ex2, 0.93)):
        checks.append(abs(mgf.log_mgf(spec, 0.0)))
        checks.append(abs(mgf.log_mgf(spec, 1.0)))
    ok = max(checks) < 1e-6
    _report("8a (Lambda(0)=Lambda(1)=0)", ok, f"max |Lambda| {max(checks):.2e}")


def test_criterion_8b_swap_symmetry(lognormal, exponential):
    be = families.bernoulli()
    pairs = [
        (chernoff.pairwise_index(lognormal, 1.28, exponential, 1.72),
         chernoff.pairwise_index(exponential, 1.72, lognormal, 1.28)),
        (chernoff.pairwise_index(be, 0.25, be, 0.6),
         chernoff.pairwise_index(be, 0.6, be, 0.25)),
    ]
    err = max(abs(a.rho - b.rho) for a, b in pairs)
    ok = err < 1e-6
    _report("8b (swap symmetry)", ok, f"max |diff| {err:.2e}")


def test_criterion_8c_rate_at_mean(lognormal, exponential, gaussian):
    errs = []
    for spec in (mgf.pairwise_spec(lognormal, 1.28, exponential, 1.72),
                 mgf.pairwise_spec(gaussian, 0.0, gaussian, 1.0)):
        mean = mgf.log_mgf_deriv(spec, 0.0, 1)
        errs.append(abs(chernoff.rate_function(spec, mean)))
    ok = max(errs) < 1e-8
    _report("8c (rate vanishes at the mean)", ok, f"max {max(errs):.2e}")


def test_criterion_8d_rho_tilde_zero_identity():
    rng = np.random.default_rng(0)
    vals = []
    for k in range(10):
        cum = ["gaussian", "poisson", "bernoulli"][k % 3]
        d = glm.GlmDesign(X=rng.standard_normal((15, 2)),
                          Z=rng.standard_normal((15, 2)),
                          beta0=rng.uniform(-1, 1, 2), cumulant=cum)
        vals.append(glm.rho_tilde(d, rng.uniform(-1, 1, 2),
                                  rng.uniform(-1, 1, 2), 0.0))
    ok = all(v == 0.0 for v in vals)
    _report("8d (rho_tilde exactly zero at lambda=0)", ok,
            f"values {sorted(set(vals))}")


def test_criterion_8e_beta0_in_Bn():
    rng = np.random.default_rng(1)
    bad = 0
    for k in range(100):
        cum = ["gaussian", "poisson", "bernoulli"][k % 3]
        d = glm.GlmDesign(X=rng.standard_normal((30, 2)),
                          Z=rng.standard_normal((30, 2)),
                          beta0=rng.uniform(-1, 1, 2), cumulant=cum)
        if not glm.in_Bn(d, d.beta0):
            bad += 1
    _report("8e (beta0 feasible on 100 random designs)", bad == 0,
            f"{100 - bad}/100 feasible")


def test_criterion_8f_direct_vs_tilted(lognormal, exponential, poisson_ex2,
                                       geometric_ex2, ex3_tilt):
    """3-SE agreement on every configuration with p >= 1e-3."""
    results = []

    def check(label, d, t):
        gap = abs(d.p_hat - t.p_hat)
        lim = 3 * np.hypot(d.std_err, t.std_err)
        results.append((label, d.p_hat >= 1e-3, gap <= lim))

    test1 = simulate.TestSpec(lognormal, exponential)
    pair1 = chernoff.pairwise_index(lognormal, EX1["theta"],
                                    exponential, EX1["gamma"])
    fwd1 = nonsep.tilt_from_pairwise(lognormal, exponential, EX1["theta"],
                                     EX1["gamma"], pair1.z_star, pair1.rho)
    rev1 = nonsep.tilt_from_pairwise(lognormal, exponential, EX1["theta"],
                                     EX1["gamma"], pair1.z_star, pair1.rho,
                                     swap=True)
    check("ex1 type-I n=50",
          simulate.direct_mc((lognormal, [EX1["theta"]]), test1, 50,
                             reps=100_000, seed=31),
          simulate.is_mc(fwd1, test1, 50, reps=100_000, seed=32))
    check("ex1 type-II n=50",
          simulate.direct_mc((exponential, [EX1["gamma"]]), test1, 50,
                             reps=100_000, seed=33, side="type-II"),
          simulate.is_mc(rev1, test1.swap(), 50, reps=100_000, seed=34,
                         inclusive=True))

    test2 = simulate.TestSpec(poisson_ex2, geometric_ex2)
    pair2 = chernoff.pairwise_index(poisson_ex2, EX2["theta"],
                                    geometric_ex2, EX2["gamma"])
    fwd2 = nonsep.tilt_from_pairwise(poisson_ex2, geometric_ex2,
                                     EX2["theta"], EX2["gamma"],
                                     pair2.z_star, pair2.rho)
    check("ex2 type-I n=60",
          simulate.direct_mc((poisson_ex2, [EX2["theta"]]), test2, 60,
                             reps=100_000, seed=35),
          simulate.is_mc(fwd2, test2, 60, reps=100_000, seed=36))

    tilt3, _ = ex3_tilt
    test3 = simulate.TestSpec(tilt3.gfam, tilt3.hfam)
    check("ex3 type-I n=6",
          simulate.direct_mc((tilt3.gfam, EX3["beta0"]), test3, 6,
                             reps=100_000, seed=37),
          simulate.is_mc(tilt3, test3, 6, reps=100_000, seed=38))

    eligible = [r for r in results if r[1]]
    ok = len(eligible) == len(results) and all(r[2] for r in eligible)
    _report("8f (direct vs tilted 3-SE agreement)", ok,
            "; ".join(f"{r[0]}:{'ok' if r[2] else 'GAP'}" for r in results))


def test_criterion_8g_thread_determinism(tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({
        "g_family": "lognormal", "h_family": "exponential",
        "side": "type-I",
        "saddle": {"theta_star": [EX1["theta"]], "gamma_star": [EX1["gamma"]]},
        "n_list": [40, 80], "rel_err_target": 0.2, "seed": 99,
    }))
    outputs = []
    for threads in ("1", "4"):
        r = subprocess.run(
            [sys.executable, "-m", "glrtexp.cli", "simulate",
             "--config", str(cfg), "--threads", threads],
            capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outputs.append(r.stdout)
    ok = outputs[0] == outputs[1]
    _report("8g (determinism across --threads 1 and 4)", ok,
            "bit-identical output" if ok else "outputs differ")


# ---------------------------------------------------------------------------
# 9: Euler diagnostics at the three saddles
# ---------------------------------------------------------------------------

def test_criterion_9_euler_diagnostics(ex1_tilt, ex2_tilt, ex3_tilt,
                                       poisson_ex2, geometric_ex2):
    rep1 = nonsep.euler_check(ex1_tilt)
    rep2 = nonsep.euler_check(ex2_tilt, theta_box=poisson_ex2.space,
                              gamma_box=geometric_ex2.space)
    tilt3, _ = ex3_tilt
    rep3 = nonsep.euler_check(tilt3)

    interior_ok = (np.max(np.abs(rep1.theta_score)) < 1e-4
                   and np.max(np.abs(rep1.gamma_score)) < 1e-4
                   and np.max(np.abs(rep3.theta_score)) < 1e-4
                   and np.max(np.abs(rep3.gamma_score)) < 1e-4
                   and abs(rep2.gamma_score[0]) < 1e-4)
    # Example 2's theta sits on the lower box face: the inward
    # directional derivative must be nonpositive
    boundary_ok = (rep2.details["theta_faces"][0][0]
                   and rep2.theta_score[0] <= 1e-4)
    ok = interior_ok and boundary_ok and rep1.ok and rep2.ok and rep3.ok
    _report("9 (Euler diagnostics at the saddles)", ok,
            f"interior max |score| = "
            f"{max(np.max(np.abs(rep1.theta_score)), np.max(np.abs(rep3.theta_score))):.2e}, "
            f"boundary score = {rep2.theta_score[0]:.4f}")
