"""Chernoff indices for likelihood ratio tests.

The pairwise index between two fixed distributions is the maximum of
``-Lambda(z)`` over ``z in (0, 1)``, where ``Lambda`` is the log-MGF of
the per-observation log-likelihood ratio under the null member.  It is
the common exponential decay rate of both error probabilities when the
test rejects at likelihood ratio one.  The generalized index of a
composite-versus-composite test is the minimum of the pairwise index
over the two parameter boxes; the minimizing pair is the least
favorable one, where the maximal errors concentrate.

Minimization over the boxes is grid-then-refine: a coarse scan
(log-spaced on positive-scale axes) followed by Nelder-Mead polish from
the best cells.  Derivative-free refinement is deliberate: the index's
parameter gradients would require differentiation under the integral.
"""

from __future__ import annotations

import io
import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .errors import (ConvergenceError, DivergenceError, ParameterError,
                     RangeError)
from .families import FamilyModel, ParamBox, check_separation
from .mgf import LogMgfSpec, make_mgf, pairwise_spec

__all__ = [
    "ChernoffResult",
    "RateGrid",
    "IndexConfig",
    "rate_function",
    "pairwise_index",
    "generalized_index",
    "contour_grid",
    "multi_family_rate",
    "MultiFamilyRate",
]

_Z_EDGE = 1e-6


@dataclass(frozen=True)
class ChernoffResult:
    """An exponent with its optimizer and numerical diagnostics."""

    rho: float
    z_star: float
    theta_star: np.ndarray
    gamma_star: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "z_star": self.z_star,
            "theta_star": list(np.atleast_1d(self.theta_star)),
            "gamma_star": list(np.atleast_1d(self.gamma_star)),
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True)
class IndexConfig:
    """Tuning knobs for the box minimization."""

    grid_points: int = 41
    refine_starts: int = 5
    z_tol: float = 1e-8
    grid_z_tol: float = 1e-6
    quad_rel_tol: float = 1e-9
    grid_quad_rel_tol: float = 1e-6
    nm_maxiter: int = 400
    check_separation: bool = True
    separation_threshold: float = 1e-4


def _min_log_mgf_z(evaluator, z_tol: float, z0: float = 0.5,
                   max_iter: int = 60):
    """Minimize Lambda(z) over (0, 1); returns (z_star, Lambda(z_star)).

    Safeguarded Newton on the convex Lambda: brackets the stationary
    point by the sign of Lambda' and takes Newton steps from a warm
    start, falling back to bisection when a step leaves the bracket.
    """
    lo, hi = _Z_EDGE, 1.0 - _Z_EDGE
    z = min(max(z0, lo), hi)
    best = (np.inf, z)
    for _ in range(max_iter):
        val, d1, d2 = evaluator.value_deriv12(z)
        if val < best[0]:
            best = (val, z)
        if abs(d1) < 1e-9 and d2 >= 0.0:
            return z, val
        if d1 > 0.0:
            hi = z
        else:
            lo = z
        if hi - lo < z_tol:
            break
        if d2 > 0.0:
            step = z - d1 / d2
        else:
            step = 0.5 * (lo + hi)  # flat log-MGF: identical laws
            if d2 == 0.0 and d1 == 0.0:
                return z, val
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        z = step
    val, z = best
    if not np.isfinite(val):
        val = float(evaluator.value(z))
    return z, val


def pairwise_index(gfam: FamilyModel, theta, hfam: FamilyModel, gamma, *,
                   z_tol: float = 1e-8,
                   quad_rel_tol: float = 1e-9,
                   z0: float = 0.5) -> ChernoffResult:
    """Chernoff index of the simple test g_theta versus h_gamma.

    Maximizes ``-Lambda(z)`` over the open unit interval.  The endpoints
    carry ``Lambda = 0`` so the interior maximum is safe; divergence
    inside (0, 1) violates mutual absolute continuity and propagates as
    an error.
    """
    evaluator = make_mgf(pairwise_spec(gfam, theta, hfam, gamma),
                         rel_tol=quad_rel_tol)
    z_star, val = _min_log_mgf_z(evaluator, z_tol, z0=z0)
    return ChernoffResult(
        rho=max(-val, 0.0),
        z_star=z_star,
        theta_star=np.atleast_1d(np.asarray(theta, float)),
        gamma_star=np.atleast_1d(np.asarray(gamma, float)),
        diagnostics={"quadrature_tol": quad_rel_tol, "z_tol": z_tol},
    )


def rate_function(spec: LogMgfSpec, t: float, *,
                  z_tol: float = 1e-10,
                  quad_rel_tol: float = 1e-9) -> float:
    """Legendre transform ``max_z [z t - Lambda(z)]`` of a pairwise log-MGF.

    Requires a pairwise spec (base = g parameters, zero offset).  Solved
    through the stationarity condition ``Lambda'(z) = t`` with bracket
    expansion; the transform is finite exactly when ``t`` lies in the
    closure of the range of ``Lambda'`` over the finiteness domain.
    """
    if spec.offset_b != 0.0 or not np.allclose(spec.base_params, spec.g_params):
        raise ParameterError("rate_function requires a pairwise spec "
                             "(base = g params, offset 0)")
    ev = make_mgf(spec, rel_tol=quad_rel_tol)

    def dphi(z):
        return ev.deriv(z, 1) - t

    lo, hi = 0.0, 1.0
    dlo, dhi = dphi(lo), dphi(hi)
    # expand left
    width = 1.0
    while dlo > 0.0:
        cand = lo - width
        try:
            dcand = dphi(cand)
        except DivergenceError:
            break
        lo, dlo = cand, dcand
        width *= 2.0
        if width > 1e6:
            break
    width = 1.0
    while dhi < 0.0:
        cand = hi + width
        try:
            dcand = dphi(cand)
        except DivergenceError:
            break
        hi, dhi = cand, dcand
        width *= 2.0
        if width > 1e6:
            break
    if dlo > 0.0 or dhi < 0.0:
        attainable = (ev.deriv(lo, 1), ev.deriv(hi, 1))
        raise RangeError(
            f"target t={t:.6g} outside the attainable derivative range "
            f"[{attainable[0]:.6g}, {attainable[1]:.6g}]",
            interval=attainable,
        )
    if dlo == 0.0:
        z_star = lo
    elif dhi == 0.0:
        z_star = hi
    else:
        z_star = brentq(dphi, lo, hi, xtol=z_tol)
    return max(float(z_star * t - ev.value(z_star)), 0.0)


# ---------------------------------------------------------------------------
# Box minimization
# ---------------------------------------------------------------------------

def _grid_axis(box: ParamBox, i: int, count: int) -> np.ndarray:
    lo, hi = box.lower[i], box.upper[i]
    if lo == hi:
        return np.array([lo])
    if lo > 0:
        return np.exp(np.linspace(np.log(lo), np.log(hi), count))
    return np.linspace(lo, hi, count)


def _grid_points_per_axis(box: ParamBox, requested: int) -> int:
    # keep the total scan budget roughly constant as dimension grows
    if box.dim == 1:
        return requested
    return max(5, int(round(requested ** (1.0 / box.dim))))


class _BoxTransform:
    """Log-transform positive-scale coordinates for simplex refinement."""

    def __init__(self, box: ParamBox):
        self.box = box
        self.log_mask = box.lower > 0

    def fwd(self, p):
        p = np.asarray(p, float)
        out = p.copy()
        out[self.log_mask] = np.log(p[self.log_mask])
        return out

    def inv(self, q):
        q = np.asarray(q, float)
        out = q.copy()
        out[self.log_mask] = np.exp(q[self.log_mask])
        return self.box.clip(out)

    def bounds(self):
        lo = self.fwd(np.where(self.log_mask, self.box.lower,
                               self.box.lower))
        hi = self.fwd(self.box.upper)
        return list(zip(lo, hi))


def generalized_index(gfam: FamilyModel, hfam: FamilyModel,
                      theta_box: Optional[ParamBox] = None,
                      gamma_box: Optional[ParamBox] = None,
                      config: Optional[IndexConfig] = None) -> ChernoffResult:
    """Minimum of the pairwise index over the two boxes.

    Coarse grid scan, then Nelder-Mead refinement from the best
    ``refine_starts`` distinct cells at full tolerance.  Ties within the
    refinement tolerance break to the lexicographically smallest
    ``(theta, gamma)``.  The result records whether the optimizer landed
    on an artificially truncated box face.
    """
    cfg = config or IndexConfig()
    tb = theta_box or gfam.space
    gb = gamma_box or hfam.space

    if tb.is_point and gb.is_point:
        res = pairwise_index(gfam, tb.lower, hfam, gb.lower,
                             z_tol=cfg.z_tol, quad_rel_tol=cfg.quad_rel_tol)
        diag = dict(res.diagnostics)
        diag.update({"grid_resolution": (1, 1), "refinement_steps": 0,
                     "boundary_flag": False, "separated": True})
        return ChernoffResult(res.rho, res.z_star, res.theta_star,
                              res.gamma_star, diag)

    separated = True
    if cfg.check_separation:
        rep = check_separation(gfam, hfam, grid=9,
                               threshold=cfg.separation_threshold,
                               theta_box=tb, gamma_box=gb)
        separated = rep.separated

    npt_t = _grid_points_per_axis(tb, cfg.grid_points)
    npt_g = _grid_points_per_axis(gb, cfg.grid_points)
    th_axes = [_grid_axis(tb, i, npt_t) for i in range(tb.dim)]
    ga_axes = [_grid_axis(gb, i, npt_g) for i in range(gb.dim)]
    th_pts = np.stack([a.ravel() for a in np.meshgrid(*th_axes)], axis=-1)
    ga_pts = np.stack([a.ravel() for a in np.meshgrid(*ga_axes)], axis=-1)

    warm = {"z": 0.5}

    def rho_at(th, ga, z_tol, rel_tol):
        ev = make_mgf(pairwise_spec(gfam, th, hfam, ga), rel_tol=rel_tol)
        z, val = _min_log_mgf_z(ev, z_tol, z0=warm["z"])
        warm["z"] = z
        return -val, z

    cells = []
    for th in th_pts:
        for ga in ga_pts:
            try:
                r, _ = rho_at(th, ga, cfg.grid_z_tol, cfg.grid_quad_rel_tol)
            except DivergenceError:
                continue
            cells.append((r, tuple(th), tuple(ga)))
    if not cells:
        raise ConvergenceError("no grid cell evaluated successfully")
    cells.sort(key=lambda c: (c[0], c[1], c[2]))
    starts = cells[: cfg.refine_starts]

    t_tr, g_tr = _BoxTransform(tb), _BoxTransform(gb)
    dim_t = tb.dim

    def objective(q):
        th = t_tr.inv(q[:dim_t])
        ga = g_tr.inv(q[dim_t:])
        try:
            r, _ = rho_at(th, ga, cfg.z_tol, cfg.quad_rel_tol)
        except DivergenceError:
            return np.inf
        return r

    incumbents = []
    refinement_steps = 0
    for r0, th0, ga0 in starts:
        q0 = np.concatenate([t_tr.fwd(np.asarray(th0)),
                             g_tr.fwd(np.asarray(ga0))])
        res = minimize(
            objective, q0, method="Nelder-Mead",
            bounds=t_tr.bounds() + g_tr.bounds(),
            options={"xatol": 1e-7, "fatol": 1e-11, "maxiter": cfg.nm_maxiter},
        )
        refinement_steps += int(res.nfev)
        th = t_tr.inv(res.x[:dim_t])
        ga = g_tr.inv(res.x[dim_t:])
        try:
            r, z = rho_at(th, ga, cfg.z_tol, cfg.quad_rel_tol)
        except DivergenceError:
            continue
        incumbents.append((r, tuple(th), tuple(ga), z))
    if not incumbents:
        best = starts[0]
        raise ConvergenceError("all simplex refinements failed",
                               incumbent={"rho": best[0], "theta": best[1],
                                          "gamma": best[2]})

    best_rho = min(i[0] for i in incumbents)
    tied = [i for i in incumbents if i[0] <= best_rho + 1e-9]
    tied.sort(key=lambda i: (i[1], i[2]))
    rho, th_s, ga_s, z_s = tied[0]
    th_s, ga_s = np.asarray(th_s), np.asarray(ga_s)

    faces_t = tb.on_faces(th_s)
    faces_g = gb.on_faces(ga_s)
    boundary = any(
        (on_lo and art[0]) or (on_up and art[1])
        for (on_lo, on_up), art in zip(faces_t, tb.artificial)
    ) or any(
        (on_lo and art[0]) or (on_up and art[1])
        for (on_lo, on_up), art in zip(faces_g, gb.artificial)
    )
    tb.warn_if_near_artificial(th_s, "theta optimum")
    gb.warn_if_near_artificial(ga_s, "gamma optimum")

    return ChernoffResult(
        rho=max(rho, 0.0),
        z_star=z_s,
        theta_star=th_s,
        gamma_star=ga_s,
        diagnostics={
            "grid_resolution": (npt_t, npt_g),
            "refinement_steps": refinement_steps,
            "quadrature_tol": cfg.quad_rel_tol,
            "boundary_flag": boundary,
            "separated": separated,
            "grid_best_rho": starts[0][0],
        },
    )


# ---------------------------------------------------------------------------
# Contour grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateGrid:
    """Pairwise index on a product grid; rows follow theta, columns gamma."""

    theta_axis: np.ndarray
    gamma_axis: np.ndarray
    rho_values: np.ndarray

    def __post_init__(self):
        if self.rho_values.shape != (len(self.theta_axis),
                                     len(self.gamma_axis)):
            raise ValueError("rho_values shape must match the axes")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("theta\\gamma," +
                  ",".join(f"{g:.6g}" for g in self.gamma_axis) + "\n")
        for i, th in enumerate(self.theta_axis):
            row = [
                "" if np.isnan(v) else f"{v:.6g}" for v in self.rho_values[i]
            ]
            buf.write(f"{th:.6g}," + ",".join(row) + "\n")
        return buf.getvalue()


def contour_grid(gfam: FamilyModel, hfam: FamilyModel,
                 theta_axis: Sequence[float], gamma_axis: Sequence[float], *,
                 z_tol: float = 1e-8,
                 quad_rel_tol: float = 1e-8) -> RateGrid:
    """Pairwise index at every node; per-cell failures become NaN cells."""
    th_ax = np.asarray(theta_axis, dtype=float)
    ga_ax = np.asarray(gamma_axis, dtype=float)
    vals = np.full((th_ax.size, ga_ax.size), np.nan)
    for i, th in enumerate(th_ax):
        for j, ga in enumerate(ga_ax):
            try:
                vals[i, j] = pairwise_index(
                    gfam, th, hfam, ga,
                    z_tol=z_tol, quad_rel_tol=quad_rel_tol).rho
            except Exception as err:  # record, do not abort the sweep
                warnings.warn(
                    f"contour cell (theta={th:.6g}, gamma={ga:.6g}) failed: "
                    f"{err}", stacklevel=2)
    return RateGrid(th_ax, ga_ax, vals)


# ---------------------------------------------------------------------------
# Multi-family rate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiFamilyRate:
    rho: float
    worst_pair: tuple
    pair_results: dict


def multi_family_rate(families: Sequence, config: Optional[IndexConfig] = None,
                      ) -> MultiFamilyRate:
    """Smallest generalized index among all unordered family pairs.

    ``families`` is a sequence of ``(FamilyModel, ParamBox)`` entries (a
    bare family uses its own box).  The misclassification exponent of
    highest-likelihood selection among K families is the worst pairwise
    exponent over the K(K-1)/2 pairs.
    """
    fams = []
    for entry in families:
        if isinstance(entry, FamilyModel):
            fams.append((entry, entry.space))
        else:
            fam, box = entry
            fams.append((fam, box or fam.space))
    if len(fams) < 2:
        raise ConvergenceError("multi_family_rate needs at least two families")

    results = {}
    best = None
    for i, j in itertools.combinations(range(len(fams)), 2):
        (fi, bi), (fj, bj) = fams[i], fams[j]
        try:
            res = generalized_index(fi, fj, bi, bj, config=config)
        except Exception as err:
            raise type(err)(
                f"pair ({i}, {j}) [{fi.id} vs {fj.id}] failed: {err}"
            ) from err
        results[(i, j)] = res
        if best is None or res.rho < best[0]:
            best = (res.rho, (i, j))
    return MultiFamilyRate(rho=best[0], worst_pair=best[1],
                           pair_results=results)
