"""Parametric family abstraction and the built-in families.

A :class:`FamilyModel` bundles a log density, a sampler and (when one
exists) a closed-form maximum likelihood estimator over a box-shaped
parameter space.  Unbounded natural parameter spaces are truncated to
finite boxes; faces introduced by truncation are marked ``artificial``
so downstream optimizers can flag saddle points that land on them.

Built-in IDs: ``lognormal``, ``exponential``, ``poisson``, ``geometric``,
``gaussian``, ``bernoulli``, and the joint ``gaussian-linear`` regression
model (vector observations ``(covariates..., y)``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import integrate
from .errors import DomainError, ParameterError

__all__ = [
    "ParamBox",
    "Support",
    "FamilyModel",
    "SeparationReport",
    "log_density",
    "mle",
    "check_separation",
    "make_family",
    "lognormal",
    "exponential",
    "poisson",
    "geometric",
    "gaussian",
    "bernoulli",
    "gaussian_linear",
    "TRUNCATION_DEFAULT",
]

# Default truncation of an unbounded positive parameter axis.
TRUNCATION_DEFAULT = (0.01, 50.0)
_BOUNDARY_WARN_FRACTION = 0.05


@dataclass(frozen=True)
class ParamBox:
    """Axis-aligned box of admissible parameters.

    ``artificial`` marks, per coordinate, whether the (lower, upper) face
    is a configured truncation of an unbounded natural space rather than
    part of the model itself.  A coordinate may be pinned
    (``lower == upper``) to represent a point constraint; its tangent
    cone is degenerate.
    """

    lower: np.ndarray
    upper: np.ndarray
    artificial: tuple = ()

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if lo.shape != up.shape or lo.ndim != 1:
            raise ParameterError("box bounds must be 1-D vectors of equal length")
        if np.any(lo > up):
            raise ParameterError("box lower bounds must not exceed upper bounds")
        if not self.artificial:
            object.__setattr__(
                self, "artificial", tuple((False, False) for _ in lo)
            )
        elif len(self.artificial) != lo.size:
            raise ParameterError("artificial flags must match box dimension")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_point(self) -> bool:
        return bool(np.all(self.lower == self.upper))

    def contains(self, params, atol: float = 1e-12) -> bool:
        p = np.atleast_1d(np.asarray(params, dtype=float))
        if p.size != self.dim:
            return False
        return bool(
            np.all(p >= self.lower - atol) and np.all(p <= self.upper + atol)
        )

    def clip(self, params) -> np.ndarray:
        p = np.atleast_1d(np.asarray(params, dtype=float))
        return np.clip(p, self.lower, self.upper)

    def _relative_position(self, params) -> np.ndarray:
        """Per-coordinate position in [0, 1], log-scaled on positive axes."""
        p = np.atleast_1d(np.asarray(params, dtype=float))
        out = np.zeros(self.dim)
        for i in range(self.dim):
            lo, hi = self.lower[i], self.upper[i]
            if lo == hi:
                out[i] = 0.5
            elif lo > 0:
                out[i] = np.log(p[i] / lo) / np.log(hi / lo)
            else:
                out[i] = (p[i] - lo) / (hi - lo)
        return out

    def on_faces(self, params, rel_tol: float = 1e-6):
        """Per-coordinate (on_lower, on_upper) flags for a point in the box."""
        pos = self._relative_position(params)
        return [(bool(pos[i] <= rel_tol), bool(pos[i] >= 1.0 - rel_tol))
                for i in range(self.dim)]

    def near_artificial_face(self, params,
                             fraction: float = _BOUNDARY_WARN_FRACTION) -> bool:
        pos = self._relative_position(params)
        for i, (art_lo, art_up) in enumerate(self.artificial):
            if art_lo and pos[i] < fraction:
                return True
            if art_up and pos[i] > 1.0 - fraction:
                return True
        return False

    def warn_if_near_artificial(self, params, label: str = "optimum"):
        if self.near_artificial_face(params):
            warnings.warn(
                f"{label} {np.atleast_1d(params)} lies within "
                f"{_BOUNDARY_WARN_FRACTION:.0%} of an artificial truncation "
                "bound; consider widening the box",
                stacklevel=2,
            )

    @staticmethod
    def point(value) -> "ParamBox":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return ParamBox(v, v)


def _truncated_positive_box(lower=None, upper=None) -> ParamBox:
    lo_default, up_default = TRUNCATION_DEFAULT
    art_lo = lower is None
    art_up = upper is None
    lo = lo_default if lower is None else float(lower)
    up = up_default if upper is None else float(upper)
    return ParamBox(np.array([lo]), np.array([up]),
                    artificial=((art_lo, art_up),))


@dataclass(frozen=True)
class Support:
    """Observation support: a continuous interval or an integer lattice."""

    kind: str  # "continuous" | "lattice" | "vector"
    lo: float = -np.inf
    hi: float = np.inf

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "lattice":
            return bool(
                np.all(x >= self.lo) and np.all(x <= self.hi)
                and np.all(x == np.round(x))
            )
        if self.kind == "continuous":
            return bool(np.all(x >= self.lo) and np.all(x <= self.hi))
        return True


@dataclass(frozen=True)
class FamilyModel:
    """A parametric density family over a common support.

    ``log_density(params, x)`` must broadcast over ``x`` (and over leading
    batch axes of ``params``).  ``sampler(params, count, rng)`` draws iid
    observations.  ``mle_closed``, when present, is the unprojected
    analytic maximizer; :func:`mle` projects it onto the box.
    ``score(params, x)``, when present, returns the parameter gradient of
    the log density with shape ``(dim,) + x.shape``.
    """

    id: str
    space: ParamBox
    support: Support
    log_density: Callable
    sampler: Callable
    mle_closed: Optional[Callable] = None
    score: Optional[Callable] = None
    mean: Optional[Callable] = None
    obs_dim: int = 1
    extra: dict = field(default_factory=dict, repr=False)

    def with_space(self, space: ParamBox) -> "FamilyModel":
        return replace(self, space=space)


# ---------------------------------------------------------------------------
# Module-level operations (validated surface)
# ---------------------------------------------------------------------------

def log_density(family: FamilyModel, params, x):
    """Validated log density; see ``FamilyModel.log_density`` for the raw call."""
    params = np.atleast_1d(np.asarray(params, dtype=float))
    if not family.space.contains(params):
        raise ParameterError(
            f"params {params} outside the {family.id} box "
            f"[{family.space.lower}, {family.space.upper}]"
        )
    if not family.support.contains(x):
        raise DomainError(f"observation outside the {family.id} support")
    return family.log_density(params, np.asarray(x, dtype=float))


def mle(family: FamilyModel, data, box: Optional[ParamBox] = None):
    """Maximum likelihood estimate projected onto the box.

    Closed-form estimators are clipped coordinate-wise; families without
    one fall back to multistart Nelder-Mead over the box.
    """
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise DomainError("mle requires nonempty data")
    box = box or family.space
    if family.mle_closed is not None:
        return box.clip(family.mle_closed(data))
    return _numeric_mle(family, data, box)


def _numeric_mle(family: FamilyModel, data, box: ParamBox):
    from scipy.optimize import minimize

    from .errors import ConvergenceError

    def negll(p):
        p = box.clip(p)
        return -float(np.sum(family.log_density(p, data)))

    starts = [0.5 * (box.lower + box.upper)]
    rng = np.random.default_rng(0)
    for _ in range(4):
        starts.append(box.lower + (box.upper - box.lower) * rng.random(box.dim))
    best = None
    for s in starts:
        res = minimize(negll, s, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 2000})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.all(np.isfinite(best.x)):
        raise ConvergenceError("numerical MLE failed to converge",
                               incumbent=best)
    return box.clip(best.x)


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------

def lognormal(lower=None, upper=None) -> FamilyModel:
    """Lognormal with log X ~ N(0, theta); theta is the log-scale variance."""

    def ld(theta, x):
        theta = np.asarray(theta, dtype=float)
        lx = np.log(x)
        return -lx - 0.5 * np.log(2 * np.pi * theta) - lx * lx / (2 * theta)

    def sample(theta, count, rng):
        return np.exp(np.sqrt(float(np.ravel(theta)[0]))
                      * rng.standard_normal(count))

    def mle_closed(x):
        lx = np.log(x)
        return np.atleast_1d((lx * lx).mean(axis=-1))

    def score(theta, x):
        th = float(np.ravel(theta)[0])
        lx = np.log(x)
        return np.asarray([-0.5 / th + lx * lx / (2 * th * th)])

    return FamilyModel(
        id="lognormal",
        space=_truncated_positive_box(lower, upper),
        support=Support("continuous", 0.0, np.inf),
        log_density=ld,
        sampler=sample,
        mle_closed=mle_closed,
        score=score,
        mean=lambda th: float(np.exp(np.ravel(th)[0] / 2)),
    )


def exponential(lower=None, upper=None) -> FamilyModel:
    """Exponential with scale gamma (mean gamma)."""

    def ld(gamma, x):
        gamma = np.asarray(gamma, dtype=float)
        return -np.log(gamma) - x / gamma

    def sample(gamma, count, rng):
        return float(np.ravel(gamma)[0]) * rng.standard_exponential(count)

    def score(gamma, x):
        g = float(np.ravel(gamma)[0])
        return np.asarray([-1.0 / g + x / (g * g)])

    return FamilyModel(
        id="exponential",
        space=_truncated_positive_box(lower, upper),
        support=Support("continuous", 0.0, np.inf),
        log_density=ld,
        sampler=sample,
        mle_closed=lambda x: np.atleast_1d(x.mean(axis=-1)),
        score=score,
        mean=lambda g: float(np.ravel(g)[0]),
    )


def poisson(lower=None, upper=None) -> FamilyModel:
    def ld(theta, x):
        theta = np.asarray(theta, dtype=float)
        return -theta + x * np.log(theta) - gammaln(x + 1.0)

    def sample(theta, count, rng):
        return rng.poisson(float(np.ravel(theta)[0]), count).astype(float)

    def score(theta, x):
        th = float(np.ravel(theta)[0])
        return np.asarray([-1.0 + x / th])

    return FamilyModel(
        id="poisson",
        space=_truncated_positive_box(lower, upper),
        support=Support("lattice", 0, np.inf),
        log_density=ld,
        sampler=sample,
        mle_closed=lambda x: np.atleast_1d(x.mean(axis=-1)),
        score=score,
        mean=lambda th: float(np.ravel(th)[0]),
    )


def geometric(lower=None, upper=None) -> FamilyModel:
    """Geometric on {0, 1, ...} parameterized by the failure-to-success odds.

    ``p(x) = gamma^x / (1 + gamma)^(x + 1)``; the mean is gamma.
    """

    def ld(gamma, x):
        gamma = np.asarray(gamma, dtype=float)
        return x * np.log(gamma) - (x + 1.0) * np.log1p(gamma)

    def sample(gamma, count, rng):
        p = 1.0 / (1.0 + float(np.ravel(gamma)[0]))
        return (rng.geometric(p, count) - 1).astype(float)

    def score(gamma, x):
        g = float(np.ravel(gamma)[0])
        return np.asarray([x / g - (x + 1.0) / (1.0 + g)])

    return FamilyModel(
        id="geometric",
        space=_truncated_positive_box(lower, upper),
        support=Support("lattice", 0, np.inf),
        log_density=ld,
        sampler=sample,
        mle_closed=lambda x: np.atleast_1d(x.mean(axis=-1)),
        score=score,
        mean=lambda g: float(np.ravel(g)[0]),
    )


def gaussian(lower=-50.0, upper=50.0) -> FamilyModel:
    """Gaussian location family N(m, 1)."""

    def ld(m, x):
        m = np.asarray(m, dtype=float)
        d = x - m
        return -0.5 * np.log(2 * np.pi) - 0.5 * d * d

    def sample(m, count, rng):
        return float(np.ravel(m)[0]) + rng.standard_normal(count)

    def score(m, x):
        return np.asarray([x - float(np.ravel(m)[0])])

    return FamilyModel(
        id="gaussian",
        space=ParamBox(np.array([float(lower)]), np.array([float(upper)]),
                       artificial=((True, True),)),
        support=Support("continuous", -np.inf, np.inf),
        log_density=ld,
        sampler=sample,
        mle_closed=lambda x: np.atleast_1d(x.mean(axis=-1)),
        score=score,
        mean=lambda m: float(np.ravel(m)[0]),
    )


def bernoulli(lower=0.01, upper=0.99) -> FamilyModel:
    def ld(p, x):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            return x * np.log(p) + (1.0 - x) * np.log1p(-p)

    def sample(p, count, rng):
        return (rng.random(count) < float(np.ravel(p)[0])).astype(float)

    def score(p, x):
        pv = float(np.ravel(p)[0])
        return np.asarray([x / pv - (1.0 - x) / (1.0 - pv)])

    return FamilyModel(
        id="bernoulli",
        space=ParamBox(np.array([float(lower)]), np.array([float(upper)]),
                       artificial=((True, True),)),
        support=Support("lattice", 0, 1),
        log_density=ld,
        sampler=sample,
        mle_closed=lambda x: np.atleast_1d(x.mean(axis=-1)),
        score=score,
        mean=lambda p: float(np.ravel(p)[0]),
    )


def gaussian_linear(sigma, active, *, coef_bound: float = 50.0,
                    id: str = "gaussian-linear") -> FamilyModel:
    """Joint Gaussian regression model over observations ``(covariates, y)``.

    Covariates follow N(0, sigma); conditionally ``y ~ N(params . w[active], 1)``.
    Observations are vectors of length ``d + 1`` with the response last.
    Both hypotheses of a model-selection pair share the covariate law, so
    its contribution cancels from every likelihood ratio.
    """
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[0]
    active = tuple(int(i) for i in active)
    k = len(active)
    sigma_chol = np.linalg.cholesky(sigma)
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise ParameterError("covariate covariance must be positive definite")
    prec = np.linalg.inv(sigma)
    const = -0.5 * (d * np.log(2 * np.pi) + logdet) - 0.5 * np.log(2 * np.pi)

    def ld(params, w):
        # params broadcast against the trailing axis of w[..., active]
        params = np.asarray(params, dtype=float)
        w = np.asarray(w, dtype=float)
        cov = w[..., :d]
        y = w[..., d]
        quad = 0.5 * np.einsum("...i,ij,...j->...", cov, prec, cov)
        xa = cov[..., list(active)]
        eta = (xa * params).sum(axis=-1)
        r = y - eta
        return const - quad - 0.5 * r * r

    def sample(params, count, rng):
        params = np.ravel(np.asarray(params, dtype=float))
        cov = rng.standard_normal((count, d)) @ sigma_chol.T
        y = cov[:, list(active)] @ params + rng.standard_normal(count)
        return np.concatenate([cov, y[:, None]], axis=1)

    def mle_closed(w):
        w = np.asarray(w, dtype=float)
        xa = w[..., list(active)]
        y = w[..., d]
        gram = np.einsum("...ni,...nj->...ij", xa, xa)
        rhs = np.einsum("...ni,...n->...i", xa, y)
        return np.linalg.solve(gram, rhs[..., None])[..., 0]

    def score(params, w):
        params = np.ravel(np.asarray(params, dtype=float))
        w = np.asarray(w, dtype=float)
        xa = w[..., list(active)]
        r = w[..., d] - xa @ params
        return np.moveaxis(r[..., None] * xa, -1, 0)

    lo = np.full(k, -float(coef_bound))
    up = np.full(k, float(coef_bound))
    return FamilyModel(
        id=id,
        space=ParamBox(lo, up, artificial=((True, True),) * k),
        support=Support("vector"),
        log_density=ld,
        sampler=sample,
        mle_closed=mle_closed,
        score=score,
        obs_dim=d + 1,
        extra={"sigma": sigma, "active": active},
    )


_BUILTINS = {
    "lognormal": lognormal,
    "exponential": exponential,
    "poisson": poisson,
    "geometric": geometric,
    "gaussian": gaussian,
    "bernoulli": bernoulli,
}


def make_family(spec) -> FamilyModel:
    """Build a family from a string id or a config mapping.

    Mappings carry ``{"id": ..., "lower": ..., "upper": ...}``; the
    ``gaussian-linear`` id additionally needs ``sigma`` and ``active``.
    """
    if isinstance(spec, str):
        name, kwargs = spec, {}
    else:
        spec = dict(spec)
        name = spec.pop("id")
        kwargs = spec
    if name == "gaussian-linear":
        return gaussian_linear(**kwargs)
    if name not in _BUILTINS:
        raise ParameterError(
            f"unknown family id {name!r}; choose from "
            f"{sorted(_BUILTINS) + ['gaussian-linear']}"
        )
    return _BUILTINS[name](**kwargs)


# ---------------------------------------------------------------------------
# Separation diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparationReport:
    min_kl: float
    theta_at_min: np.ndarray
    gamma_at_min: np.ndarray
    separated: bool
    threshold: float


def _kl_divergence(gfam: FamilyModel, theta, hfam: FamilyModel, gamma,
                   rel_tol: float = 1e-8) -> float:
    """KL(g_theta || h_gamma) by quadrature or summation."""
    theta = np.atleast_1d(theta)
    gamma = np.atleast_1d(gamma)

    def logg(x):
        return gfam.log_density(theta, x)

    def ratio(x):
        return gfam.log_density(theta, x) - hfam.log_density(gamma, x)

    sup = gfam.support
    if sup.kind == "lattice":
        _, m = integrate.lattice_weighted_moments(logg, [ratio],
                                                  lo=int(sup.lo), hi=sup.hi)
    else:
        _, m = integrate.log_weighted_moments(logg, [ratio], sup.lo, sup.hi,
                                              rel_tol=rel_tol)
    return m[0]


def _axis(box: ParamBox, i: int, count: int) -> np.ndarray:
    lo, hi = box.lower[i], box.upper[i]
    if lo == hi:
        return np.array([lo])
    if lo > 0:
        return np.exp(np.linspace(np.log(lo), np.log(hi), count))
    return np.linspace(lo, hi, count)


def check_separation(gfam: FamilyModel, hfam: FamilyModel,
                     grid: int = 15, threshold: float = 1e-4,
                     theta_box: Optional[ParamBox] = None,
                     gamma_box: Optional[ParamBox] = None) -> SeparationReport:
    """Minimum KL(g_theta || h_gamma) over a grid with local refinement.

    Flags the pair separated when the minimum exceeds ``threshold``.
    Only 1-D parameter spaces are scanned exhaustively; refinement uses
    Nelder-Mead from the best grid cell.
    """
    from scipy.optimize import minimize

    tb = theta_box or gfam.space
    gb = gamma_box or hfam.space
    th_ax = [_axis(tb, i, grid) for i in range(tb.dim)]
    ga_ax = [_axis(gb, i, grid) for i in range(gb.dim)]
    th_pts = np.stack([g.ravel() for g in np.meshgrid(*th_ax)], axis=-1)
    ga_pts = np.stack([g.ravel() for g in np.meshgrid(*ga_ax)], axis=-1)

    best = (np.inf, None, None)
    for th in th_pts:
        for ga in ga_pts:
            kl = _kl_divergence(gfam, th, hfam, ga)
            if kl < best[0]:
                best = (kl, th, ga)

    def objective(p):
        th = tb.clip(p[: tb.dim])
        ga = gb.clip(p[tb.dim:])
        return _kl_divergence(gfam, th, hfam, ga)

    x0 = np.concatenate([best[1], best[2]])
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 500})
    if res.fun < best[0]:
        best = (res.fun, tb.clip(res.x[: tb.dim]), gb.clip(res.x[tb.dim:]))
    kl_min = max(float(best[0]), 0.0)
    return SeparationReport(
        min_kl=kl_min,
        theta_at_min=best[1],
        gamma_at_min=best[2],
        separated=bool(kl_min > threshold),
        threshold=threshold,
    )
