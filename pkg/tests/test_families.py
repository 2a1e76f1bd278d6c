import numpy as np
import pytest

from glrtexp import families, integrate
from glrtexp._rng import stream
from glrtexp.errors import DomainError, ParameterError

ALL_SCALAR = ["lognormal", "exponential", "poisson", "geometric",
              "gaussian", "bernoulli"]


def _random_params(fam, rng, count=10):
    lo, hi = fam.space.lower[0], fam.space.upper[0]
    if lo > 0:
        return np.exp(rng.uniform(np.log(lo), np.log(hi), count))
    return rng.uniform(lo, hi, count)


# ---------------------------------------------------------------------------
# log density values
# ---------------------------------------------------------------------------

def test_exponential_at_zero():
    ex = families.exponential()
    assert families.log_density(ex, [1.0], 0.0) == 0.0


def test_lognormal_at_one():
    ln = families.lognormal()
    val = families.log_density(ln, [1.0], 1.0)
    assert abs(val + 0.5 * np.log(2 * np.pi)) < 1e-14


def test_poisson_value():
    po = families.poisson()
    val = families.log_density(po, [2.0], 3.0)
    assert abs(val - (-2.0 + 3.0 * np.log(2.0) - np.log(6.0))) < 1e-12


def test_param_and_domain_validation():
    ex = families.exponential()
    with pytest.raises(ParameterError):
        families.log_density(ex, [100.0], 1.0)
    with pytest.raises(DomainError):
        families.log_density(ex, [1.0], -1.0)
    po = families.poisson()
    with pytest.raises(DomainError):
        families.log_density(po, [1.0], 2.5)


# ---------------------------------------------------------------------------
# normalization invariant
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("fam_id", ALL_SCALAR)
def test_density_normalizes(fam_id):
    fam = families.make_family(fam_id)
    rng = np.random.default_rng(hash(fam_id) % 2**32)
    for p in _random_params(fam, rng, count=10):
        if fam.support.kind == "lattice":
            val = integrate.log_series(
                lambda x: fam.log_density(np.array([p]), x),
                lo=int(fam.support.lo), hi=fam.support.hi)
        else:
            val = integrate.log_integral(
                lambda x: fam.log_density(np.array([p]), x),
                fam.support.lo, fam.support.hi)
        assert abs(np.expm1(val)) < 1e-8, f"{fam_id} at {p}"


# ---------------------------------------------------------------------------
# sampler and MLE
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("fam_id,param", [
    ("lognormal", 1.3), ("exponential", 1.7), ("poisson", 2.0),
    ("geometric", 0.9), ("gaussian", -0.7), ("bernoulli", 0.3),
])
def test_sampler_mean(fam_id, param):
    fam = families.make_family(fam_id)
    rng = stream(99, 1)
    draws = fam.sampler(np.array([param]), 100_000, rng)
    assert fam.support.contains(draws)
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - fam.mean(param)) < 4 * se


def test_mle_exponential_is_mean():
    ex = families.exponential()
    data = np.array([0.5, 1.5, 4.0])
    assert families.mle(ex, data)[0] == pytest.approx(2.0)


def test_mle_projects_onto_box():
    ln = families.lognormal()
    assert families.mle(ln, np.array([1.0, 1.0, 1.0]))[0] == ln.space.lower[0]
    po = families.poisson(lower=1.0)
    data = np.array([0, 1, 1, 0, 0])  # mean 0.4 below the box
    assert families.mle(po, data.astype(float))[0] == 1.0


def test_mle_rejects_empty():
    with pytest.raises(DomainError):
        families.mle(families.exponential(), np.array([]))


@pytest.mark.parametrize("fam_id,param", [
    ("exponential", 1.7), ("poisson", 2.0), ("gaussian", 0.3),
])
def test_mle_consistency(fam_id, param):
    """Median estimation error shrinks as the sample grows."""
    fam = families.make_family(fam_id)
    med = []
    for size in (100, 1000, 10000):
        errs = []
        for seed in range(100):
            rng = stream(7, seed * 10 + int(np.log10(size)))
            est = families.mle(fam, fam.sampler(np.array([param]), size, rng))
            errs.append(abs(est[0] - param))
        med.append(np.median(errs))
    assert med[0] > med[1] > med[2]


# ---------------------------------------------------------------------------
# boxes
# ---------------------------------------------------------------------------

def test_box_validation():
    with pytest.raises(ParameterError):
        families.ParamBox(np.array([2.0]), np.array([1.0]))
    box = families.ParamBox.point(3.0)
    assert box.is_point and box.contains([3.0])


def test_box_artificial_faces_logscale():
    box = families.ParamBox(np.array([0.01]), np.array([50.0]),
                            artificial=((True, True),))
    # 1.28 is far from both bounds multiplicatively
    assert not box.near_artificial_face([1.28])
    assert box.near_artificial_face([0.012])
    assert box.near_artificial_face([45.0])


def test_gaussian_linear_mle_is_least_squares():
    fam = families.gaussian_linear(np.eye(3), active=(0, 1))
    rng = stream(5, 0)
    w = fam.sampler(np.array([1.0, 2.0]), 2000, rng)
    est = families.mle(fam, w)
    assert np.allclose(est, [1.0, 2.0], atol=0.1)
    # batched MLE matches per-row fits
    batch = w[:90].reshape(3, 30, 4)
    b_est = fam.mle_closed(batch)
    for r in range(3):
        assert np.allclose(b_est[r], fam.mle_closed(batch[r]))


# ---------------------------------------------------------------------------
# separation
# ---------------------------------------------------------------------------

def test_separation_lognormal_vs_exponential(lognormal, exponential):
    rep = families.check_separation(lognormal, exponential, grid=9)
    assert rep.separated and rep.min_kl > 0.01


def test_separation_poisson_vs_geometric(poisson_ex2, geometric_ex2):
    rep = families.check_separation(poisson_ex2, geometric_ex2, grid=9)
    assert rep.separated and rep.min_kl > 0.01


def test_family_against_itself_not_separated(gaussian):
    g2 = families.gaussian(lower=-2.0, upper=2.0)
    rep = families.check_separation(g2, g2, grid=7)
    assert not rep.separated
    assert rep.min_kl < 1e-6
    assert np.allclose(rep.theta_at_min, rep.gamma_at_min, atol=1e-3)
