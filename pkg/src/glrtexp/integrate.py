"""Log-space adaptive quadrature and lattice summation.

Every expectation in this package reduces to integrals of the form
``int exp(logw(x)) f(x) dx`` (or the corresponding lattice sum), where
``logw`` can span hundreds of orders of magnitude.  Accumulation is
therefore done entirely in log space: each quadrature panel is scored by
a streaming log-sum-exp over Gauss-Legendre nodes, and panels are
subdivided until the estimated relative error of the total falls below
the requested tolerance.

Unbounded domains are mapped to (0, 1):

* ``(a, +inf)``: affine onto ``(a, a+1]`` for t in (0, 1/2], then
  ``x = a + exp(u)`` with ``u = (2t-1)/(2(1-t))`` for t in [1/2, 1).
* ``(-inf, b)``: the mirror image.
* ``(-inf, +inf)``: ``x = s/(1-s^2)`` with ``s = 2t-1``.

The log substitution on the far part of a half-line serves two needs at
once: exponential-decay integrands stay smooth on unit scale in u (the
cliff of ``exp(-x/c)`` has width O(1) in ``u = log x``), and slowly
decaying but integrable tails (lognormal-type, with mass out to
``exp(theta)``) remain inside the representable part of (0, 1).
Divergence at an infinite endpoint (an integrand that is not dominated
near the truncation boundary) is detected by probing the transformed
integrand as t approaches the boundary and raises DivergenceError
instead of silently truncating.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp, roots_legendre

from .errors import DivergenceError, NumericError

__all__ = [
    "log_integral",
    "log_weighted_moments",
    "lattice_terms",
    "log_series",
    "lattice_weighted_moments",
    "transform_to_unit",
    "cdf_table",
]

_ORDER_LO = 15
_ORDER_HI = 31
_MAX_PANELS = 512
_NEG_INF = -np.inf
# log integrand values beyond this are numerically meaningless for a
# density-weighted integral: treat as divergence, never as a huge value
_LOG_HUGE = 600.0


def _unit_rule(order: int):
    # Gauss-Legendre nodes/weights rescaled from [-1, 1] to [0, 1].
    x, w = roots_legendre(order)
    return 0.5 * (x + 1.0), 0.5 * w


_NODES_LO, _W_LO = _unit_rule(_ORDER_LO)
_NODES_HI, _W_HI = _unit_rule(_ORDER_HI)
_LOGW_LO = np.log(_W_LO)
_LOGW_HI = np.log(_W_HI)


def transform_to_unit(lo: float, hi: float):
    """Return ``(x_of_t, log_jacobian_of_t)`` mapping t in (0,1) onto (lo, hi)."""
    lo_inf = math.isinf(lo)
    hi_inf = math.isinf(hi)
    if not lo_inf and not hi_inf:
        width = hi - lo
        logw = math.log(width)

        def x_of_t(t):
            return lo + width * t

        def log_jac(t):
            return np.full_like(t, logw)

    elif not lo_inf and hi_inf:

        def x_of_t(t):
            t = np.asarray(t, dtype=float)
            near = t <= 0.5
            u = np.where(near, 0.0, (2.0 * t - 1.0) / (2.0 * (1.0 - t)))
            return np.where(near, lo + 2.0 * t, lo + np.exp(u))

        def log_jac(t):
            t = np.asarray(t, dtype=float)
            near = t <= 0.5
            u = np.where(near, 0.0, (2.0 * t - 1.0) / (2.0 * (1.0 - t)))
            far = u + np.log(2.0) - 2.0 * np.log(2.0 * (1.0 - t))
            return np.where(near, np.log(2.0), far)

    elif lo_inf and not hi_inf:

        def x_of_t(t):
            t = np.asarray(t, dtype=float)
            near = t >= 0.5
            u = np.where(near, 0.0, (1.0 - 2.0 * t) / (2.0 * t))
            return np.where(near, hi - 2.0 * (1.0 - t), hi - np.exp(u))

        def log_jac(t):
            t = np.asarray(t, dtype=float)
            near = t >= 0.5
            u = np.where(near, 0.0, (1.0 - 2.0 * t) / (2.0 * t))
            far = u + np.log(2.0) - 2.0 * np.log(2.0 * t)
            return np.where(near, np.log(2.0), far)

    else:

        def x_of_t(t):
            s = 2.0 * t - 1.0
            return s / (1.0 - s * s)

        def log_jac(t):
            s = 2.0 * t - 1.0
            return np.log(2.0 * (1.0 + s * s)) - 2.0 * np.log1p(-s * s)

    return x_of_t, log_jac


def _lse_rows(vals):
    m = np.max(vals, axis=1)
    finite = m > _NEG_INF
    out = np.full(m.shape, _NEG_INF)
    if np.any(finite):
        v = vals[finite]
        mm = m[finite]
        out[finite] = mm + np.log(np.exp(v - mm[:, None]).sum(axis=1))
    return out


def _score_panels(logf_t, lo_edges, hi_edges):
    """Low/high order log estimates for a batch of panels in one call."""
    lo_edges = np.asarray(lo_edges, dtype=float)
    hi_edges = np.asarray(hi_edges, dtype=float)
    width = hi_edges - lo_edges
    p = lo_edges.size
    t_hi = lo_edges[:, None] + width[:, None] * _NODES_HI
    t_lo = lo_edges[:, None] + width[:, None] * _NODES_LO
    t_all = np.concatenate([t_hi.ravel(), t_lo.ravel()])
    v = logf_t(t_all)
    if np.any(v > _LOG_HUGE):
        t_bad = float(t_all[int(np.argmax(v))])
        tail = ("upper (x -> +inf)" if t_bad > 0.5 else "lower (x -> -inf)")
        raise DivergenceError(
            "log integrand exceeds the overflow-safe range "
            f"(> {_LOG_HUGE:g}) near the {tail} tail; treated as divergent",
            tail=tail,
        )
    logw = np.log(width)
    v_hi = v[: p * _ORDER_HI].reshape(p, _ORDER_HI) + _LOGW_HI
    v_lo = v[p * _ORDER_HI:].reshape(p, _ORDER_LO) + _LOGW_LO
    i_hi = _lse_rows(v_hi) + logw
    i_lo = _lse_rows(v_lo) + logw
    return i_hi, i_lo


def _check_tail(logf_t, side: str, ref: float):
    # Probe the transformed integrand (jacobian included) approaching the
    # boundary; a growing tail means the integral diverges there.
    if side == "upper":
        probes = np.array([1 - 1e-4, 1 - 1e-6, 1 - 1e-9, 1 - 1e-12])
        tail_name = "upper (x -> +inf)"
    else:
        probes = np.array([1e-4, 1e-6, 1e-9, 1e-12])
        tail_name = "lower (x -> -inf)"
    vals = logf_t(probes)
    vals = np.where(np.isnan(vals), _NEG_INF, vals)
    if np.any(vals > _LOG_HUGE):
        raise DivergenceError(
            f"integrand overflows at the {tail_name} tail", tail=tail_name
        )
    increasing = bool(vals[-1] > vals[0] + 1.0)
    if increasing and vals[-1] > ref - 60.0:
        raise DivergenceError(
            f"integrand not dominated at the {tail_name} tail "
            f"(log integrand rises to {vals[-1]:.3g} at the boundary)",
            tail=tail_name,
        )


def _adaptive_panels(logf_t, rel_tol: float, max_panels: int, init_panels: int,
                     check_lower: bool, check_upper: bool):
    """Adaptively subdivide (0,1); return (edge arrays, logI array, log total)."""
    # coarse bulk level used as the reference for tail probes
    coarse = logf_t(np.linspace(1.0 / 64, 63.0 / 64, 63))
    coarse = coarse[np.isfinite(coarse)]
    ref = float(coarse.max()) if coarse.size else _NEG_INF
    if check_upper:
        _check_tail(logf_t, "upper", ref)
    if check_lower:
        _check_tail(logf_t, "lower", ref)

    edges = np.linspace(0.0, 1.0, init_panels + 1)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    i_hi, i_lo = _score_panels(logf_t, a, b)

    def total_and_errors(ih, il):
        if np.all(ih == _NEG_INF):
            return _NEG_INF, np.zeros(ih.size)
        tot = logsumexp(ih[ih > _NEG_INF])
        with np.errstate(invalid="ignore"):
            disc = np.abs(np.expm1(il - ih))
        disc = np.where(il == _NEG_INF, 1.0, disc)
        errs = np.where(ih == _NEG_INF, 0.0, disc * np.exp(ih - tot))
        return tot, errs

    total, errs = total_and_errors(i_hi, i_lo)
    while errs.sum() > rel_tol:
        if a.size >= max_panels:
            raise NumericError(
                f"adaptive quadrature exceeded {max_panels} panels "
                f"(relative error estimate {errs.sum():.3g} > {rel_tol:.3g})"
            )
        # split every panel whose error matters, not just the worst one
        room = max_panels - a.size
        order = np.argsort(errs)[::-1]
        cum = np.cumsum(errs[order])
        k = int(np.searchsorted(cum, 0.9 * errs.sum()) + 1)
        split = order[: max(1, min(k, room))]
        keep = np.setdiff1d(np.arange(a.size), split)
        mid = 0.5 * (a[split] + b[split])
        new_a = np.concatenate([a[split], mid])
        new_b = np.concatenate([mid, b[split]])
        nh, nl = _score_panels(logf_t, new_a, new_b)
        a = np.concatenate([a[keep], new_a])
        b = np.concatenate([b[keep], new_b])
        i_hi = np.concatenate([i_hi[keep], nh])
        i_lo = np.concatenate([i_lo[keep], nl])
        total, errs = total_and_errors(i_hi, i_lo)
    return a, b, i_hi, total


def log_integral(logf: Callable, lo: float, hi: float, *,
                 rel_tol: float = 1e-9, max_panels: int = _MAX_PANELS,
                 init_panels: int = 8) -> float:
    """``log int_lo^hi exp(logf(x)) dx`` to relative tolerance ``rel_tol``.

    ``logf`` must accept ndarray input.  Raises DivergenceError when the
    integrand grows toward an infinite endpoint and NumericError when the
    panel budget is exhausted.
    """
    x_of_t, log_jac = transform_to_unit(lo, hi)

    def logf_t(t):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = logf(x_of_t(t)) + log_jac(t)
        return np.where(np.isnan(v), _NEG_INF, v)

    _, _, _, total = _adaptive_panels(
        logf_t, rel_tol, max_panels, init_panels,
        check_lower=math.isinf(lo), check_upper=math.isinf(hi),
    )
    return float(total)


def log_weighted_moments(logf: Callable, fs: Sequence[Callable],
                         lo: float, hi: float, *,
                         rel_tol: float = 1e-9, max_panels: int = _MAX_PANELS,
                         init_panels: int = 8):
    """Log-normalizer and moments of functions under an unnormalized weight.

    Returns ``(logZ, m)`` with ``logZ = log int exp(logf)`` and
    ``m[k] = int exp(logf) fs[k] / exp(logZ)``.  The moment pass reuses the
    panel set selected adaptively for the weight, with all values shifted
    by the running maximum so signed integrands stay in range.
    """
    x_of_t, log_jac = transform_to_unit(lo, hi)

    def logf_t(t):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = logf(x_of_t(t)) + log_jac(t)
        return np.where(np.isnan(v), _NEG_INF, v)

    pa, pb, p_hi, total = _adaptive_panels(
        logf_t, rel_tol, max_panels, init_panels,
        check_lower=math.isinf(lo), check_upper=math.isinf(hi),
    )
    if total == _NEG_INF:
        raise NumericError("weight integrates to zero; moments undefined")

    width = pb - pa
    t = (pa[:, None] + width[:, None] * _NODES_HI).ravel()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x = x_of_t(t)
        lw = logf(x) + log_jac(t)
    lw = np.where(np.isnan(lw), _NEG_INF, lw)
    w_nodes = (np.broadcast_to(_W_HI, (pa.size, _ORDER_HI))
               * width[:, None]).ravel()
    scale = np.exp(lw - total) * w_nodes
    live = scale > 0.0  # nodes with zero mass may sit at overflowed x
    if not live.any():
        raise NumericError("weight integrates to zero; moments undefined")
    xs, sc = x[live], scale[live]
    den = sc.sum()
    return float(total), [float((sc * f(xs)).sum() / den) for f in fs]


def cdf_table(logf: Callable, lo: float, hi: float, *,
              rel_tol: float = 1e-10, sub: int = 16,
              max_panels: int = _MAX_PANELS):
    """Tabulated CDF of an unnormalized density for inverse-CDF sampling.

    Returns ``(x_knots, cdf)`` with ``cdf`` strictly increasing from 0
    to 1.  Panels come from the adaptive pass on the weight; each is cut
    into ``sub`` sub-intervals scored by Gauss quadrature, so knots
    concentrate where the mass lives.
    """
    x_of_t, log_jac = transform_to_unit(lo, hi)

    def logf_t(t):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = logf(x_of_t(t)) + log_jac(t)
        return np.where(np.isnan(v), _NEG_INF, v)

    pa, pb, _, total = _adaptive_panels(
        logf_t, rel_tol, max_panels, 8,
        check_lower=math.isinf(lo), check_upper=math.isinf(hi),
    )
    if not np.isfinite(total):
        raise NumericError("density integrates to zero; no CDF")
    order = np.argsort(pa)
    pa, pb = pa[order], pb[order]
    # sub-edges per panel -> global increasing edge grid
    frac = np.linspace(0.0, 1.0, sub + 1)
    edges = (pa[:, None] + (pb - pa)[:, None] * frac[None, :])
    sub_lo = edges[:, :-1].ravel()
    sub_hi = edges[:, 1:].ravel()
    width = sub_hi - sub_lo
    t_nodes = sub_lo[:, None] + width[:, None] * _NODES_LO
    v = logf_t(t_nodes.ravel()).reshape(-1, _ORDER_LO)
    with np.errstate(over="ignore"):
        incr = (np.exp(v - total) * _W_LO).sum(axis=1) * width
    cdf = np.concatenate([[0.0], np.cumsum(incr)])
    cdf /= cdf[-1]
    t_knots = np.concatenate([[sub_lo[0]], sub_hi])
    # keep strictly increasing knots only
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    cdf = cdf[keep]
    t_knots = t_knots[keep]
    cdf[0], cdf[-1] = 0.0, 1.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x_knots = x_of_t(t_knots)
    good = np.isfinite(x_knots)
    x_knots, cdf = x_knots[good], cdf[good]
    # knots dropped at infinite endpoints carry negligible mass; re-pin
    cdf[0], cdf[-1] = 0.0, 1.0
    return x_knots, cdf


# ---------------------------------------------------------------------------
# Lattice support
# ---------------------------------------------------------------------------

_BLOCK = 64
_MAX_TERMS = 500_000
_GROW_BLOCKS = 4  # consecutive non-decaying blocks that signal divergence


def lattice_terms(logterm: Callable, lo: int = 0, hi: float = np.inf, *,
                  tail_tol: float = 1e-12, max_terms: int = _MAX_TERMS):
    """Materialize series terms until a geometric tail bound is negligible.

    Returns ``(x, logvals)`` where ``x`` runs from ``lo`` to the truncation
    point.  Streaming stops once the running geometric-ratio majorant shows
    the remaining tail is below ``tail_tol`` of the accumulated sum.  A
    series whose terms are still growing at ``max_terms`` raises
    DivergenceError.
    """
    if math.isfinite(hi):
        x = np.arange(lo, int(hi) + 1, dtype=float)
        return x, np.asarray(logterm(x), dtype=float)

    chunks_x = []
    chunks_v = []
    log_sum = _NEG_INF
    start = lo
    last_val = None
    grow_streak = 0
    while True:
        x = np.arange(start, start + _BLOCK, dtype=float)
        v = np.asarray(logterm(x), dtype=float)
        v = np.where(np.isnan(v), _NEG_INF, v)
        chunks_x.append(x)
        chunks_v.append(v)
        log_sum = np.logaddexp(log_sum, logsumexp(v))
        # consecutive-term log ratios, including across the block boundary
        seq = v if last_val is None else np.concatenate(([last_val], v))
        finite = seq[seq > _NEG_INF]
        if finite.size >= 2:
            ratios = np.diff(finite)
            r_max = ratios.max()
            grow_streak = grow_streak + 1 if r_max >= 0 else 0
            if grow_streak >= _GROW_BLOCKS:
                raise DivergenceError(
                    "lattice series terms are not decaying "
                    f"(still growing at x ~ {start + _BLOCK})",
                    tail="upper (x -> +inf)",
                )
            if r_max < -1e-9:
                # decreasing block: geometric majorant for the tail
                r = math.exp(r_max)
                log_tail = finite[-1] + math.log(r / (1.0 - r))
                if log_tail < log_sum + math.log(tail_tol):
                    break
        elif finite.size == 0 and log_sum > _NEG_INF:
            break  # terms vanished entirely
        last_val = v[-1]
        start += _BLOCK
        if start - lo > max_terms:
            raise NumericError(
                f"lattice series did not meet the tail bound within "
                f"{max_terms} terms"
            )
    return np.concatenate(chunks_x), np.concatenate(chunks_v)


def log_series(logterm: Callable, lo: int = 0, hi: float = np.inf, *,
               tail_tol: float = 1e-12) -> float:
    """``log sum_{x>=lo} exp(logterm(x))`` with certified truncation."""
    _, v = lattice_terms(logterm, lo, hi, tail_tol=tail_tol)
    return float(logsumexp(v))


def lattice_weighted_moments(logterm: Callable, fs: Sequence[Callable],
                             lo: int = 0, hi: float = np.inf, *,
                             tail_tol: float = 1e-12):
    """Series analogue of :func:`log_weighted_moments`."""
    x, v = lattice_terms(logterm, lo, hi, tail_tol=tail_tol)
    total = logsumexp(v)
    if not np.isfinite(total):
        raise NumericError("series sums to zero; moments undefined")
    scale = np.exp(v - total)
    live = scale > 0.0
    xs, sc = x[live], scale[live]
    den = sc.sum()
    return float(total), [float((sc * f(xs)).sum() / den) for f in fs]
