"""Monte Carlo estimation of GLRT error probabilities.

Two estimators of the same rare-event probability: plain simulation
under the truth (``direct_mc``) and importance sampling under a tilted
measure (``is_mc``).  The tilt weight of a replication of n
observations is ``exp(n log M_dag - lambda_dag sum_i (log h - log g -
b)(X_i))`` on the acceptance event and zero off it; by default the
sampler is a defensive half-and-half mixture of the tilt and the base
law, which caps the mixture weights at 2 while keeping the estimator
unbiased.  All weights accumulate in log space.

Replications are drawn in fixed batches of 8192, each from its own
counter-based stream keyed by (seed, purpose, batch index), so a result
depends only on (config, seed), never on how batches are scheduled.
"""

from __future__ import annotations

import dataclasses
import io
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from ._rng import batch_subkey, stream
from .errors import FitError, ParameterError
from .families import FamilyModel, ParamBox
from .glm import GlmDesign, GlmTilt
from .nonsep import TiltedMeasure, prepare_tilted_sampler, tilt_from_pairwise

__all__ = [
    "TestSpec",
    "ISEstimate",
    "DecayCurve",
    "glrt_statistic",
    "direct_mc",
    "is_mc",
    "glm_error_mc",
    "decay_curve",
    "max_error_probe",
]

_BATCH = 8192
_PURPOSE_DIRECT = 1
_PURPOSE_TILTED = 2


@dataclass(frozen=True)
class TestSpec:
    """The composite-versus-composite test: two families with their boxes."""

    gfam: FamilyModel
    hfam: FamilyModel
    theta_box: Optional[ParamBox] = None
    gamma_box: Optional[ParamBox] = None

    def __post_init__(self):
        if self.theta_box is None:
            object.__setattr__(self, "theta_box", self.gfam.space)
        if self.gamma_box is None:
            object.__setattr__(self, "gamma_box", self.hfam.space)

    def swap(self) -> "TestSpec":
        return TestSpec(self.hfam, self.gfam, self.gamma_box, self.theta_box)


def _batched_mle(fam: FamilyModel, box: ParamBox, data: np.ndarray):
    """Row-wise closed-form MLE clipped to the box; shape (R, dim)."""
    raw = fam.mle_closed(data)
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None] if raw.shape[0] == data.shape[0] else raw[None, :]
    return np.clip(raw, box.lower, box.upper)


def _loglik_rows(fam: FamilyModel, params: np.ndarray, data: np.ndarray):
    """Sum of log densities per replication for per-row parameters."""
    if fam.obs_dim == 1:
        ld = fam.log_density(params[:, :1], data)  # (R,1) against (R,n)
    else:
        ld = fam.log_density(params[:, None, :], data)
    return ld.sum(axis=-1)


def _glrt_stats(test: TestSpec, data: np.ndarray) -> np.ndarray:
    """Vectorized log GLRT statistic per replication.

    ``data`` has shape (R, n) for scalar observations or (R, n, d) for
    vector ones.  The statistic is the maximized h-family log likelihood
    minus the maximized g-family log likelihood, both over their boxes.
    """
    th = _batched_mle(test.gfam, test.theta_box, data)
    ga = _batched_mle(test.hfam, test.gamma_box, data)
    return (_loglik_rows(test.hfam, ga, data)
            - _loglik_rows(test.gfam, th, data))


def glrt_statistic(data, gfam: FamilyModel, theta_box: ParamBox,
                   hfam: FamilyModel, gamma_box: ParamBox) -> float:
    """Log GLRT statistic of one dataset (box-constrained MLEs)."""
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise ParameterError("glrt_statistic requires nonempty data")
    test = TestSpec(gfam, hfam, theta_box, gamma_box)
    return float(_glrt_stats(test, data[None, ...])[0])


@dataclass(frozen=True)
class ISEstimate:
    """A rare-event probability estimate with its sampling diagnostics."""

    p_hat: float
    std_err: float
    rel_err: float
    ess: float
    reps: int
    method: str  # "direct" | "tilted"
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat, "std_err": self.std_err,
            "rel_err": self.rel_err, "ess": self.ess,
            "reps": self.reps, "method": self.method,
            "flags": list(self.flags),
        }


def _finalize(log_w_sums, log_w2_sums, reps, method, ess_floor):
    """Combine per-batch log sums into an estimate."""
    s1_log = logsumexp(log_w_sums) if log_w_sums else -np.inf
    s2_log = logsumexp(log_w2_sums) if log_w2_sums else -np.inf
    p = float(np.exp(s1_log - math.log(reps)))
    m2 = float(np.exp(s2_log - math.log(reps)))
    flags = []
    if p > 1.0:
        flags.append("p_hat_clipped")
        p = 1.0
    if reps > 1:
        var = max(m2 - p * p, 0.0) * reps / (reps - 1)
        se = math.sqrt(var / reps)
    else:
        se = 0.0
    ess = float(np.exp(2.0 * s1_log - s2_log)) if np.isfinite(s2_log) else 0.0
    if 0.0 < ess < ess_floor:
        flags.append("ess_below_floor")
        warnings.warn(
            f"importance sampling ESS {ess:.1f} below floor {ess_floor}",
            stacklevel=3,
        )
    rel = se / p if p > 0 else np.inf
    return p, se, rel, ess, tuple(flags)


def direct_mc(truth, test: TestSpec, n: int, b: float = 0.0,
              reps: int = 10_000, seed: int = 0,
              side: str = "type-I") -> ISEstimate:
    """Plain Monte Carlo under the truth.

    ``truth`` is ``(family, params)``.  The type-I event is
    ``log LR > n b``; the type-II event is its complement
    ``log LR <= n b``.  Standard error is binomial.
    """
    fam, params = truth
    params = np.atleast_1d(np.asarray(params, dtype=float))
    if side not in ("type-I", "type-II"):
        raise ParameterError("side must be 'type-I' or 'type-II'")
    hits = 0
    done = 0
    batch = 0
    while done < reps:
        take = min(_BATCH, reps - done)
        rng = stream(seed, batch_subkey(_PURPOSE_DIRECT, batch))
        flat = fam.sampler(params, take * n, rng)
        data = flat.reshape((take, n) if fam.obs_dim == 1
                            else (take, n, fam.obs_dim))
        stat = _glrt_stats(test, data)
        if side == "type-I":
            hits += int(np.count_nonzero(stat > n * b))
        else:
            hits += int(np.count_nonzero(stat <= n * b))
        done += take
        batch += 1
    p = hits / reps
    se = math.sqrt(p * (1.0 - p) / reps)
    return ISEstimate(p_hat=p, std_err=se, rel_err=se / p if p > 0 else np.inf,
                      ess=float(hits), reps=reps, method="direct")


def is_mc(tilt, test: Optional[TestSpec] = None, n: Optional[int] = None,
          reps: Optional[int] = None, seed: int = 0, *,
          inclusive: bool = False, defensive: float = 0.5,
          rel_err_target: float = 0.1, max_reps: int = 10_000_000,
          ess_floor: float = 50.0) -> ISEstimate:
    """Importance sampling under the tilted measure.

    The test spec must be oriented like the tilt (the tilt's base family
    is the spec's null family); the event is ``log LR > n b`` with the
    tilt's own threshold, or ``>=`` when ``inclusive`` is set (used for
    the complement side on lattice supports).  With ``reps=None``,
    batches accumulate until the relative error target is met or
    ``max_reps`` is hit, which sets a truncation flag.

    ``defensive`` is the fraction of replications drawn from the base
    law itself, stratified per batch.  The mixture keeps every weight
    below ``1/(1-defensive)``: the pure tilt (``defensive=0``) is
    efficient deep in the tail but its weights are unbounded where the
    event occurs against the drift, which at small n inflates the
    variance beyond what the sample standard error can see.

    A fixed-design :class:`~glrtexp.glm.GlmTilt` may be passed instead
    of a tilted measure; the design then fixes the test and the sample
    size, and the call delegates to :func:`glm_error_mc`.
    """
    if isinstance(tilt, GlmTilt):
        return glm_error_mc(tilt.design, tilt, method="tilted", reps=reps,
                            seed=seed, defensive=defensive,
                            rel_err_target=rel_err_target,
                            max_reps=max_reps, ess_floor=ess_floor)
    if test is None or n is None:
        raise ParameterError("a family-pair tilt needs a test spec and n")
    if tilt.gfam.id != test.gfam.id or tilt.hfam.id != test.hfam.id:
        raise ParameterError(
            "tilt orientation does not match the test spec "
            f"({tilt.gfam.id}->{tilt.hfam.id} vs {test.gfam.id}->{test.hfam.id})"
        )
    if not 0.0 <= defensive < 1.0:
        raise ParameterError("defensive fraction must lie in [0, 1)")
    draw = prepare_tilted_sampler(tilt)
    b = tilt.offset_b
    obs_dim = tilt.gfam.obs_dim
    adaptive = reps is None
    target_reps = max_reps if adaptive else min(reps, max_reps)

    log_w_sums: list = []
    log_w2_sums: list = []
    done = 0
    batch = 0
    capped = False
    while True:
        take = min(_BATCH, target_reps - done)
        if take <= 0:
            break
        rng = stream(seed, batch_subkey(_PURPOSE_TILTED, batch))
        n_base = int(round(take * defensive))
        n_tilt = take - n_base
        parts = []
        if n_tilt:
            parts.append(draw(n_tilt * n, rng))
        if n_base:
            parts.append(tilt.gfam.sampler(tilt.base_params, n_base * n, rng))
        flat = np.concatenate(parts)
        data = flat.reshape((take, n) if obs_dim == 1
                            else (take, n, obs_dim))
        stat = _glrt_stats(test, data)
        hit = stat >= n * b if inclusive else stat > n * b
        if np.any(hit):
            logw = tilt.log_weight(data[hit]).sum(axis=-1)
            alpha = n_base / take
            if alpha > 0.0:
                # stratified mixture weight: 1/((1-a) e^{-logw} + a)
                logw = -np.logaddexp(np.log1p(-alpha) - logw,
                                     np.log(alpha))
            log_w_sums.append(logsumexp(logw))
            log_w2_sums.append(logsumexp(2.0 * logw))
        done += take
        batch += 1
        if adaptive and done >= 4 * _BATCH:
            p, se, rel, _, _ = _finalize(log_w_sums, log_w2_sums, done,
                                         "tilted", ess_floor=0.0)
            if p > 0.0 and rel <= rel_err_target:
                break
        if done >= target_reps:
            capped = adaptive
            break
    p, se, rel, ess, flags = _finalize(log_w_sums, log_w2_sums, done,
                                       "tilted", ess_floor)
    if capped and (p == 0.0 or rel > rel_err_target):
        flags = flags + ("reps_capped",)
        warnings.warn(
            f"replication cap {max_reps} reached before the relative error "
            f"target {rel_err_target}", stacklevel=2,
        )
    return ISEstimate(p_hat=p, std_err=se, rel_err=rel, ess=ess,
                      reps=done, method="tilted", flags=flags)


# ---------------------------------------------------------------------------
# Fixed-design GLM error probabilities
# ---------------------------------------------------------------------------

def _glm_mle_loglik(M: np.ndarray, y: np.ndarray, cumulant,
                    iters: int = 30) -> np.ndarray:
    """Maximized log likelihood (up to c(y)) per replication row.

    ``M`` is the (n, k) design block, ``y`` the (R, n) responses.  The
    gaussian cumulant admits the least squares solution; the others run
    batched Newton steps on the concave likelihood.
    """
    gram = M.T @ M
    rhs = y @ M  # (R, k)
    k = M.shape[1]
    if cumulant.name == "gaussian":
        coef = np.linalg.solve(gram, rhs.T).T
    else:
        coef = np.zeros_like(rhs)
        for _ in range(iters):
            eta = np.clip(coef @ M.T, -30.0, 30.0)  # (R, n)
            mu = cumulant.bp(eta)
            grad = rhs - mu @ M
            w = cumulant.bpp(eta)
            hess = np.einsum("rn,ni,nj->rij", w, M, M)
            # degenerate rows (responses pinning the MLE at infinity)
            # flatten the curvature; a relative ridge keeps them solvable
            ridge = 1e-9 * (1.0 + np.einsum("rii->r", hess) / k)
            hess[:, np.arange(k), np.arange(k)] += ridge[:, None]
            step = np.linalg.solve(hess, grad[..., None])[..., 0]
            np.clip(step, -5.0, 5.0, out=step)
            coef = coef + step
            if np.max(np.abs(step)) < 1e-10:
                break
    eta = coef @ M.T
    return np.einsum("rn,rn->r", y, eta) - cumulant.b(eta).sum(axis=1)


def _glm_stats(design: GlmDesign, y: np.ndarray) -> np.ndarray:
    """Log GLRT statistic per response row for a fixed design."""
    return (_glm_mle_loglik(design.Z, y, design.cumulant)
            - _glm_mle_loglik(design.X, y, design.cumulant))


def glm_error_mc(design: GlmDesign, tilt: Optional[GlmTilt] = None, *,
                 method: str = "tilted", reps: Optional[int] = None,
                 seed: int = 0, defensive: float = 0.5,
                 rel_err_target: float = 0.1, max_reps: int = 10_000_000,
                 ess_floor: float = 50.0) -> ISEstimate:
    """P(log LR >= 0) for a fixed design, by direct or tilted sampling.

    The event is the inclusive unit-threshold comparison of the two
    maximized likelihoods over unconstrained coefficients.  ``tilt``
    defaults to the design's own saddle (solved on demand); the direct
    method ignores the tilt parameters and samples the true model.
    """
    from .glm import glm_tilt

    if method not in ("direct", "tilted"):
        raise ParameterError("method must be 'direct' or 'tilted'")
    if tilt is None and method == "tilted":
        tilt = glm_tilt(design)
    elif tilt is not None and tilt.design is not design:
        if (tilt.design.X.shape != design.X.shape
                or not np.allclose(tilt.design.X, design.X)
                or not np.allclose(tilt.design.Z, design.Z)):
            raise ParameterError("tilt was solved for a different design")
    if not 0.0 <= defensive < 1.0:
        raise ParameterError("defensive fraction must lie in [0, 1)")

    n = design.n
    eta0 = design.X @ design.beta0
    eta_tilt = tilt.natural_params() if tilt is not None else eta0
    cum = design.cumulant
    purpose = _PURPOSE_DIRECT if method == "direct" else _PURPOSE_TILTED
    adaptive = reps is None
    target_reps = max_reps if adaptive else min(reps, max_reps)

    log_w_sums: list = []
    log_w2_sums: list = []
    hits_direct = 0
    done = 0
    batch = 0
    capped = False
    while True:
        take = min(_BATCH, target_reps - done)
        if take <= 0:
            break
        rng = stream(seed, batch_subkey(purpose, batch))
        if method == "direct":
            y = cum.sample(np.broadcast_to(eta0, (take, n)), rng)
            hits_direct += int(np.count_nonzero(_glm_stats(design, y) >= 0))
        else:
            n_base = int(round(take * defensive))
            n_tilt = take - n_base
            parts = []
            if n_tilt:
                parts.append(cum.sample(
                    np.broadcast_to(eta_tilt, (n_tilt, n)).copy(), rng))
            if n_base:
                parts.append(cum.sample(
                    np.broadcast_to(eta0, (n_base, n)).copy(), rng))
            y = np.concatenate(parts)
            hit = _glm_stats(design, y) >= 0
            if np.any(hit):
                logw = tilt.log_weight(y[hit])
                alpha = n_base / take
                if alpha > 0.0:
                    logw = -np.logaddexp(np.log1p(-alpha) - logw,
                                         np.log(alpha))
                log_w_sums.append(logsumexp(logw))
                log_w2_sums.append(logsumexp(2.0 * logw))
        done += take
        batch += 1
        if adaptive and done >= 4 * _BATCH:
            if method == "direct":
                p = hits_direct / done
                rel = (np.sqrt(p * (1 - p) / done) / p) if p > 0 else np.inf
            else:
                p, _, rel, _, _ = _finalize(log_w_sums, log_w2_sums, done,
                                            method, ess_floor=0.0)
            if p > 0.0 and rel <= rel_err_target:
                break
        if done >= target_reps:
            capped = adaptive
            break
    if method == "direct":
        p = hits_direct / done
        se = np.sqrt(p * (1 - p) / done)
        est = ISEstimate(p_hat=p, std_err=se,
                         rel_err=se / p if p > 0 else np.inf,
                         ess=float(hits_direct), reps=done, method="direct")
    else:
        p, se, rel, ess, flags = _finalize(log_w_sums, log_w2_sums, done,
                                           method, ess_floor)
        est = ISEstimate(p_hat=p, std_err=se, rel_err=rel, ess=ess,
                         reps=done, method="tilted", flags=flags)
    if capped and (est.p_hat == 0.0 or est.rel_err > rel_err_target):
        warnings.warn(
            f"replication cap {max_reps} reached before the relative error "
            f"target {rel_err_target}", stacklevel=2,
        )
        est = dataclasses.replace(est, flags=est.flags + ("reps_capped",))
    return est


# ---------------------------------------------------------------------------
# Decay curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayCurve:
    """Error probability estimates against sample size, with the LS fit."""

    sample_sizes: np.ndarray
    estimates: tuple
    slope: float
    intercept: float
    side: str
    points_used: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,p_hat,std_err,ess,method\n")
        for n, est in zip(self.sample_sizes, self.estimates):
            buf.write(f"{int(n)},{est.p_hat:.6g},{est.std_err:.6g},"
                      f"{est.ess:.6g},{est.method}\n")
        return buf.getvalue()

    def fit_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "points_used": self.points_used, "side": self.side}


def _fit_decay(ns, estimates, side):
    ns = np.asarray(ns, dtype=float)
    ps = np.array([e.p_hat for e in estimates])
    keep = ps > 0.0
    if np.count_nonzero(~keep):
        warnings.warn(
            f"{int(np.count_nonzero(~keep))} zero estimates excluded from "
            "the decay fit", stacklevel=3,
        )
    if np.count_nonzero(keep) < 2:
        raise FitError("decay fit needs at least two positive estimates")
    slope, intercept = np.polyfit(ns[keep], np.log(ps[keep]), 1)
    return DecayCurve(
        sample_sizes=np.asarray(ns, dtype=int),
        estimates=tuple(estimates),
        slope=float(slope), intercept=float(intercept),
        side=side, points_used=int(np.count_nonzero(keep)),
    )


def decay_curve(test: TestSpec, tilt: TiltedMeasure, n_list: Sequence[int],
                seed: int = 0, side: str = "type-I", *,
                rel_err_target: float = 0.1,
                max_reps: int = 10_000_000) -> DecayCurve:
    """Importance-sampled error probabilities over ascending sample sizes.

    For the type-II side pass the swapped test spec's tilt; the event is
    then the inclusive complement in the swapped orientation.  Each
    sample size gets an independent seed stream.
    """
    n_list = list(n_list)
    if any(b > a for a, b in zip(n_list[1:], n_list)):
        raise ParameterError("n_list must be ascending")
    if side == "type-II":
        test = test.swap()
    estimates = []
    for i, n in enumerate(n_list):
        est = is_mc(tilt, test, int(n), reps=None, seed=seed + 7919 * i,
                    inclusive=(side == "type-II"),
                    rel_err_target=rel_err_target, max_reps=max_reps)
        estimates.append(est)
    return _fit_decay(n_list, estimates, side)


def max_error_probe(test: TestSpec, saddle, n: int, seed: int = 0, *,
                    reps: Optional[int] = None,
                    rel_err_target: float = 0.1) -> dict:
    """Both error probabilities at the least favorable pair.

    ``saddle`` is the ChernoffResult of the generalized index; the truth
    is pinned at ``theta_star`` for the type-I side and ``gamma_star``
    for the type-II side, with the unit likelihood-ratio threshold.
    These proxy the maximal errors of the composite test.
    """
    fwd = tilt_from_pairwise(test.gfam, test.hfam,
                             saddle.theta_star, saddle.gamma_star,
                             saddle.z_star, saddle.rho)
    rev = tilt_from_pairwise(test.gfam, test.hfam,
                             saddle.theta_star, saddle.gamma_star,
                             saddle.z_star, saddle.rho, swap=True)
    est1 = is_mc(fwd, test, n, reps=reps, seed=seed,
                 rel_err_target=rel_err_target)
    est2 = is_mc(rev, test.swap(), n, reps=reps, seed=seed + 1,
                 inclusive=True, rel_err_target=rel_err_target)
    return {"type_I": est1, "type_II": est2}
