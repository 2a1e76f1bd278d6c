"""Log moment generating functions of log-likelihood ratios.

For a base distribution ``g_theta0`` and candidate parameters
``(theta, gamma)`` with threshold drift ``b`` (nats per observation),
this module evaluates

    Lambda(lam) = log E_theta0[ exp{ lam (log h_gamma(X) - log g_theta(X) - b) } ]

together with its first two lambda-derivatives.  Continuous supports go
through the log-space adaptive quadrature in :mod:`glrtexp.integrate`;
lattice supports through certified truncated series.  Pairs of
``gaussian-linear`` families admit a closed form: the log ratio is a
quadratic form in the jointly Gaussian observation, so the MGF is a
rank-two determinant expression, finite exactly while the tilted
precision matrix stays positive definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import integrate
from .errors import DivergenceError, ParameterError
from .families import FamilyModel

__all__ = [
    "LogMgfSpec",
    "pairwise_spec",
    "log_mgf",
    "log_mgf_deriv",
    "PairMgf",
    "make_mgf",
]

_DEFAULT_REL_TOL = 1e-9


@dataclass(frozen=True)
class LogMgfSpec:
    """Inputs of the log-MGF: who samples, who is compared, and the drift."""

    gfam: FamilyModel
    hfam: FamilyModel
    base_params: np.ndarray   # theta0, the sampling distribution
    g_params: np.ndarray      # theta
    h_params: np.ndarray      # gamma
    offset_b: float = 0.0

    def __post_init__(self):
        for name in ("base_params", "g_params", "h_params"):
            object.__setattr__(
                self, name, np.atleast_1d(np.asarray(getattr(self, name), float))
            )
        if self.gfam.support.kind != self.hfam.support.kind:
            raise ParameterError(
                "the two families must share a support type; got "
                f"{self.gfam.support.kind} vs {self.hfam.support.kind}"
            )

    def log_ratio(self, x):
        """log h_gamma(x) - log g_theta(x) - b, vectorized over x."""
        return (self.hfam.log_density(self.h_params, x)
                - self.gfam.log_density(self.g_params, x)
                - self.offset_b)


def pairwise_spec(gfam: FamilyModel, theta, hfam: FamilyModel,
                  gamma) -> LogMgfSpec:
    """Spec for the classical pairwise index: base theta0 = theta, b = 0."""
    return LogMgfSpec(gfam, hfam, theta, theta, gamma, 0.0)


class PairMgf:
    """Callable log-MGF with derivatives for one (theta0, theta, gamma, b)."""

    def __init__(self, spec: LogMgfSpec, rel_tol: float = _DEFAULT_REL_TOL,
                 max_panels: int = 512):
        self.spec = spec
        self.rel_tol = rel_tol
        self.max_panels = max_panels

    def value(self, lam: float) -> float:
        if lam == 0.0:
            return 0.0
        return self._moments(lam, orders=0)[0]

    def deriv(self, lam: float, order: int = 1) -> float:
        if order not in (1, 2):
            raise ParameterError("derivative order must be 1 or 2")
        _, m1, m2 = self._moments(lam, orders=2)
        if order == 1:
            return m1
        return max(m2 - m1 * m1, 0.0)

    def value_and_deriv(self, lam: float):
        val, m1, _ = self._moments(lam, orders=2)
        return val, m1

    def value_deriv12(self, lam: float):
        """(Lambda, Lambda', Lambda'') from a single adaptive pass."""
        val, m1, m2 = self._moments(lam, orders=2)
        return val, m1, max(m2 - m1 * m1, 0.0)

    def argmin_lambda(self) -> Optional[float]:
        """Exact inner minimizer when one is available in closed form."""
        return None

    def _moments(self, lam: float, orders: int):
        spec = self.spec
        base = spec.base_params

        def logw(x):
            lw = spec.gfam.log_density(base, x)
            if lam != 0.0:
                lw = lw + lam * spec.log_ratio(x)
            return lw

        fs = [spec.log_ratio, lambda x: spec.log_ratio(x) ** 2][:orders]
        sup = spec.gfam.support
        try:
            if sup.kind == "lattice":
                logz, ms = integrate.lattice_weighted_moments(
                    logw, fs, lo=int(sup.lo), hi=sup.hi)
            elif sup.kind == "continuous":
                logz, ms = integrate.log_weighted_moments(
                    logw, fs, sup.lo, sup.hi, rel_tol=self.rel_tol,
                    max_panels=self.max_panels)
            else:
                raise ParameterError(
                    f"no generic MGF evaluator for support {sup.kind!r}"
                )
        except DivergenceError as err:
            raise DivergenceError(
                f"log-MGF diverges at lambda={lam:.6g}: {err}", tail=err.tail
            ) from err
        val = 0.0 if lam == 0.0 else float(logz)
        out = [val, 0.0, 0.0]
        for i, m in enumerate(ms):
            out[i + 1] = m
        return out


class GaussianLinearMgf(PairMgf):
    """Closed-form MGF for a pair of gaussian-linear models.

    With observation W = (covariates, y) jointly Gaussian under the base
    model, the per-observation log ratio is

        l(W) = (y - theta.x_g)^2 / 2 - (y - gamma.x_h)^2 / 2 - b
             = (u.W)^2 / 2 - (v.W)^2 / 2 - b

    and  Lambda(lam) = -lam b - log D(lam) / 2  with
    D(lam) = (1 - lam s_uu)(1 + lam s_vv) + lam^2 s_uv^2, a concave
    quadratic through D(0) = 1 whose positivity interval is exactly the
    finiteness domain of the MGF.
    """

    def __init__(self, spec: LogMgfSpec, rel_tol: float = _DEFAULT_REL_TOL,
                 max_panels: int = 512):
        super().__init__(spec, rel_tol, max_panels)
        gfam, hfam = spec.gfam, spec.hfam
        sig_g = gfam.extra["sigma"]
        sig_h = hfam.extra["sigma"]
        if not np.allclose(sig_g, sig_h):
            raise ParameterError(
                "gaussian-linear pair must share the covariate covariance"
            )
        d = sig_g.shape[0]
        cw = np.zeros((d + 1, d + 1))
        cw[:d, :d] = sig_g
        c = np.zeros(d)
        c[list(gfam.extra["active"])] = spec.base_params
        cw[:d, d] = sig_g @ c
        cw[d, :d] = sig_g @ c
        cw[d, d] = c @ sig_g @ c + 1.0
        u = np.zeros(d + 1)
        u[list(gfam.extra["active"])] = -spec.g_params
        u[d] = 1.0
        v = np.zeros(d + 1)
        v[list(hfam.extra["active"])] = -spec.h_params
        v[d] = 1.0
        self.cov_w = cw
        self.s_uu = float(u @ cw @ u)
        self.s_vv = float(v @ cw @ v)
        self.s_uv = float(u @ cw @ v)
        self.u = u
        self.v = v
        # D(lam) = 1 + B lam + A lam^2
        self._B = self.s_vv - self.s_uu
        self._A = self.s_uv ** 2 - self.s_uu * self.s_vv

    def _D(self, lam: float) -> float:
        return 1.0 + self._B * lam + self._A * lam * lam

    def value(self, lam: float) -> float:
        if lam == 0.0:
            return 0.0
        d = self._D(lam)
        if d <= 0.0:
            raise DivergenceError(
                f"tilted precision not positive definite at lambda={lam:.6g}",
                tail="gaussian quadratic form",
            )
        return -lam * self.spec.offset_b - 0.5 * math.log(d)

    def deriv(self, lam: float, order: int = 1) -> float:
        d = self._D(lam)
        if d <= 0.0:
            raise DivergenceError(
                f"tilted precision not positive definite at lambda={lam:.6g}",
                tail="gaussian quadratic form",
            )
        dp = self._B + 2.0 * self._A * lam
        if order == 1:
            return -self.spec.offset_b - 0.5 * dp / d
        if order == 2:
            return -0.5 * (2.0 * self._A * d - dp * dp) / (d * d)
        raise ParameterError("derivative order must be 1 or 2")

    def value_and_deriv(self, lam: float):
        return self.value(lam), self.deriv(lam, 1)

    def value_deriv12(self, lam: float):
        return self.value(lam), self.deriv(lam, 1), self.deriv(lam, 2)

    def argmin_lambda(self) -> Optional[float]:
        """Stationary point of Lambda inside the positivity interval.

        Solves -b - D'/(2D) = 0.  Returns None when no stationary point
        exists in the finiteness domain.
        """
        b = self.spec.offset_b
        A, B = self._A, self._B
        if A >= 0.0:
            # u, v collinear up to covariance: D linear (or constant)
            if b == 0.0 or B == 0.0:
                return None
            lam = (-2.0 * b - B) / (2.0 * b * B)
            return lam if self._D(lam) > 0 else None
        if b == 0.0:
            lam = -B / (2.0 * A)
            return lam if self._D(lam) > 0 else None
        # 2 b A lam^2 + (2 A + 2 b B) lam + (B + 2 b) = 0
        qa, qb, qc = 2 * b * A, 2 * A + 2 * b * B, B + 2 * b
        if qa == 0.0:
            if qb == 0.0:
                return None
            lam = -qc / qb
            return lam if self._D(lam) > 0 else None
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            return None
        roots = [(-qb + s * math.sqrt(disc)) / (2 * qa) for s in (1.0, -1.0)]
        feasible = [r for r in roots if self._D(r) > 0]
        if not feasible:
            return None
        # the stationary point with Lambda'' > 0 is the minimum
        for r in feasible:
            if self.deriv(r, 2) > 0:
                return r
        return feasible[0]

    def tilted_covariance(self, lam: float) -> np.ndarray:
        """Covariance of W under the exponentially tilted Gaussian law."""
        a4 = lam * (np.outer(self.u, self.u) - np.outer(self.v, self.v))
        prec = np.linalg.inv(self.cov_w) - a4
        vals = np.linalg.eigvalsh(prec)
        if np.min(vals) <= 0:
            raise DivergenceError(
                f"unnormalizable tilt: precision has eigenvalue "
                f"{np.min(vals):.3g} at lambda={lam:.6g}",
                tail="gaussian quadratic form",
            )
        return np.linalg.inv(prec)


def make_mgf(spec: LogMgfSpec, rel_tol: float = _DEFAULT_REL_TOL,
             max_panels: int = 512) -> PairMgf:
    """Pick the evaluator for a spec: closed form when available."""
    if (spec.gfam.support.kind == "vector"
            and "sigma" in spec.gfam.extra and "sigma" in spec.hfam.extra):
        return GaussianLinearMgf(spec, rel_tol, max_panels)
    return PairMgf(spec, rel_tol, max_panels)


def log_mgf(spec: LogMgfSpec, lam: float,
            rel_tol: float = _DEFAULT_REL_TOL) -> float:
    """Lambda(lam); exactly 0 at lam = 0."""
    return make_mgf(spec, rel_tol).value(lam)


def log_mgf_deriv(spec: LogMgfSpec, lam: float, order: int = 1,
                  rel_tol: float = _DEFAULT_REL_TOL) -> float:
    """First or second lambda-derivative of the log-MGF."""
    return make_mgf(spec, rel_tol).deriv(lam, order)
