import json
import warnings

import numpy as np
import pytest

from glrtexp import chernoff, families, mgf, nonsep
from glrtexp._rng import stream
from glrtexp.errors import ParameterError
from tests.conftest import EX1, EX2, EX3, EX3_SIGMA


# ---------------------------------------------------------------------------
# feasibility
# ---------------------------------------------------------------------------

def test_feasibility_separated_pair(lognormal, exponential):
    rep = nonsep.feasibility_b(lognormal, EX1["theta"], exponential, b=0.0)
    assert rep.feasible
    assert rep.sup_drift < 0.0
    assert rep.closure_ok and rep.kl_inf > 0.0


def test_feasibility_rejects_small_b(lognormal, exponential):
    rep = nonsep.feasibility_b(lognormal, EX1["theta"], exponential,
                               b=-10.0)
    assert not rep.feasible


def test_feasibility_flags_zero_kl(gaussian):
    # the h-family contains the truth itself: KL infimum collapses
    rep = nonsep.feasibility_b(gaussian, 0.3, gaussian, b=0.1)
    assert not rep.closure_ok
    assert abs(rep.kl_inf) < 1e-6


# ---------------------------------------------------------------------------
# the tilt program
# ---------------------------------------------------------------------------

def test_singleton_boxes_reduce_to_pairwise(lognormal, exponential):
    tilt = nonsep.solve_tilt(
        lognormal, exponential,
        families.ParamBox.point(EX1["theta"]),
        families.ParamBox.point(EX1["gamma"]),
        theta0=EX1["theta"], b=0.0)
    pair = chernoff.pairwise_index(lognormal, EX1["theta"],
                                   exponential, EX1["gamma"])
    assert abs(tilt.rate - pair.rho) < 1e-6
    assert abs(tilt.lambda_dag - pair.z_star) < 1e-4
    assert nonsep.rate_nonsep(tilt) == tilt.rate


def test_example1_full_boxes(ex1_tilt, ex1_index):
    res, _ = ex1_index
    assert abs(ex1_tilt.rate - res.rho) < 1e-5
    assert ex1_tilt.lambda_dag > 0.0
    assert abs(ex1_tilt.diagnostics["stationarity"]) < 1e-6


def test_example2_boundary_saddle(ex2_tilt):
    assert ex2_tilt.rate == pytest.approx(EX2["rho"], abs=2e-4)
    assert ex2_tilt.theta_dag[0] == pytest.approx(1.0, abs=1e-6)


def test_example3_rate(ex3_tilt):
    tilt, _ = ex3_tilt
    assert tilt.rate == pytest.approx(EX3["rho"], abs=1e-4)
    assert tilt.lambda_dag == pytest.approx(0.6945, abs=1e-3)


def test_lambda_stationarity(ex1_tilt):
    spec = ex1_tilt.spec()
    assert abs(mgf.log_mgf_deriv(spec, ex1_tilt.lambda_dag, 1)) < 1e-6


def test_saddle_sandwich(ex3_tilt):
    """The rate cannot exceed the middle value at any probed theta."""
    tilt, _ = ex3_tilt
    from glrtexp.nonsep import _LambdaProfile
    gfam, hfam = tilt.gfam, tilt.hfam
    profile = _LambdaProfile(gfam, hfam, tilt.base_params, 0.0, 1e-9)
    rng = np.random.default_rng(17)
    for _ in range(20):
        th = rng.uniform(-3.0, 3.0, 2)
        # maximize over a gamma sample anchored at the saddle
        best = -np.inf
        for _ in range(40):
            ga = tilt.gamma_dag + rng.standard_normal(2)
            v, _, _ = profile(th, ga)
            best = max(best, v)
        assert -best <= tilt.rate + 1e-4


def test_theta0_required(lognormal, exponential):
    with pytest.raises(ParameterError):
        nonsep.solve_tilt(lognormal, exponential)


def test_tilted_measure_json(ex2_tilt):
    doc = json.loads(ex2_tilt.to_json())
    assert set(doc) == {"theta0", "b", "theta_dag", "gamma_dag",
                        "lambda_dag", "log_M_dag", "rate"}
    assert doc["rate"] == pytest.approx(-doc["log_M_dag"])


# ---------------------------------------------------------------------------
# Euler conditions
# ---------------------------------------------------------------------------

def test_euler_interior_scores_vanish(ex1_tilt):
    rep = nonsep.euler_check(ex1_tilt)
    assert rep.ok
    assert np.max(np.abs(rep.theta_score)) < 1e-4
    assert np.max(np.abs(rep.gamma_score)) < 1e-4


def test_euler_boundary_inequality(ex2_tilt, poisson_ex2, geometric_ex2):
    rep = nonsep.euler_check(ex2_tilt, theta_box=poisson_ex2.space,
                             gamma_box=geometric_ex2.space)
    assert rep.ok
    # theta sits on the lower face: inward (+) direction must not improve
    assert rep.details["theta_faces"][0][0]
    assert rep.theta_score[0] <= 1e-4
    assert rep.theta_score[0] < -1e-3  # genuinely active constraint here
    assert abs(rep.gamma_score[0]) < 1e-4


def test_euler_vacuous_on_point_boxes(lognormal, exponential):
    tilt = nonsep.solve_tilt(
        lognormal, exponential,
        families.ParamBox.point(EX1["theta"]),
        families.ParamBox.point(EX1["gamma"]),
        theta0=EX1["theta"], b=0.0)
    rep = nonsep.euler_check(tilt,
                             theta_box=families.ParamBox.point(EX1["theta"]),
                             gamma_box=families.ParamBox.point(EX1["gamma"]))
    assert rep.ok  # degenerate tangent cone passes vacuously


# ---------------------------------------------------------------------------
# tilted sampling
# ---------------------------------------------------------------------------

def test_zero_tilt_reproduces_base(lognormal, exponential):
    tilt = nonsep.TiltedMeasure(lognormal, exponential, [1.0], 0.0,
                                [1.0], [1.0], 0.0, 0.0)
    draws = nonsep.tilted_sampler(tilt, 50_000, seed=3)
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - np.exp(0.5)) < 4 * se


@pytest.mark.parametrize("which", ["continuous", "lattice", "gaussian"])
def test_sampler_centering(which, ex1_tilt, ex2_tilt, ex3_tilt):
    tilt = {"continuous": ex1_tilt, "lattice": ex2_tilt,
            "gaussian": ex3_tilt[0]}[which]
    draws = nonsep.tilted_sampler(tilt, 100_000, seed=11)
    lr = tilt.log_ratio(draws)
    se = lr.std(ddof=1) / np.sqrt(lr.shape[0])
    assert abs(lr.mean()) < 4 * se


def test_sampler_matches_numeric_cdf(ex1_tilt):
    from glrtexp.integrate import cdf_table
    tilt = ex1_tilt
    draws = np.sort(nonsep.tilted_sampler(tilt, 100_000, seed=13))

    def logq(x):
        return (tilt.gfam.log_density(tilt.base_params, x)
                + tilt.lambda_dag * tilt.log_ratio(x))

    xk, ck = cdf_table(logq, 0.0, np.inf)
    u = np.interp(draws, xk, ck)
    ks = np.max(np.abs(u - np.arange(1, draws.size + 1) / draws.size))
    assert ks < 0.01


def test_sampler_deterministic_given_seed(ex2_tilt):
    a = nonsep.tilted_sampler(ex2_tilt, 1000, seed=4)
    b = nonsep.tilted_sampler(ex2_tilt, 1000, seed=4)
    assert np.array_equal(a, b)
