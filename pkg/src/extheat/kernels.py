"""Closed-form kernels, decay-rate tables and the auxiliary integral bounds.

Everything here is a pure function.  The method-of-images solutions are the
ground-truth oracles for the finite-difference solver; the integral bounds
reproduce the two elementary lemmas on ∫(1+s)^r (1+log(1+s))^m ds with
calibrated constants.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.integrate import quad

from .geometry import sphere_surface_area

if TYPE_CHECKING:  # pragma: no cover
    from .solver import Field

_SNAP = 1e-9  # snap-to-boundary tolerance for regime selection


def gaussian(n: int, t: float, r):
    """Whole-space heat kernel (4 pi t)^{-n/2} exp(-r^2 / 4t) at radius r."""
    if t <= 0.0:
        raise ValueError(f"time must be > 0, got {t}")
    r_arr = np.asarray(r, dtype=np.float64)
    with np.errstate(under="ignore"):
        out = (4.0 * math.pi * t) ** (-n / 2.0) * np.exp(-(r_arr**2) / (4.0 * t))
    return out if out.ndim else float(out)


def _g1(t: float, z: np.ndarray) -> np.ndarray:
    """1D heat kernel evaluated in log space; underflow maps to exact zero."""
    arg = -(z * z) / (4.0 * t) - 0.5 * math.log(4.0 * math.pi * t)
    with np.errstate(under="ignore"):
        return np.exp(arg)


def _line_weights(num_nodes: int, spacing: float) -> np.ndarray:
    w = np.full(num_nodes, spacing)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _halfline_quad(t: float, x: np.ndarray, nodes: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Trapezoid evaluation of ∫ [G1(t, x-y) - G1(t, x+y)] data(y) dy."""
    kern = _g1(t, x[:, None] - nodes[None, :]) - _g1(t, x[:, None] + nodes[None, :])
    return kern @ data


def halfline_image_solution(t: float, x, u0: "Field"):
    """Exact Dirichlet half-line evolution of grid-sampled data by images.

    Integrates the odd-reflected Gaussian kernel against u0 with the grid's
    trapezoid weights.  Vanishes identically at x = 0.  Warns when the data
    support touches the truncation boundary (quadrature tail is then lossy).
    """
    if t <= 0.0:
        raise ValueError(f"time must be > 0, got {t}")
    grid = u0.grid
    if grid.domain.dimension != 1:
        raise ValueError("halfline oracle needs a dimension-1 grid")
    vals = np.asarray(u0.values, dtype=np.float64)
    peak = float(np.max(np.abs(vals))) if vals.size else 0.0
    if peak > 0.0 and np.any(np.abs(vals[-4:]) > 1e-13 * peak):
        warnings.warn("initial data support touches the truncation boundary", stacklevel=2)
    weights = _line_weights(grid.num_nodes, grid.spacing)
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = _halfline_quad(t, x_arr, grid.nodes, weights * vals)
    return out if np.ndim(x) else float(out[0])


def exterior_ball_image_solution_3d(t: float, r, r0: float, u0: "Field"):
    """Exact radial solution outside the ball of radius r0 in dimension 3.

    Reduction: w(t, s) = (s + r0) u(t, s + r0) solves the Dirichlet half-line
    problem in s = r - r0, so u(t, r) = w(t, r - r0) / r exactly.
    """
    if t <= 0.0:
        raise ValueError(f"time must be > 0, got {t}")
    grid = u0.grid
    dom = grid.domain
    if dom.dimension != 3:
        raise ValueError("exterior-ball oracle needs a dimension-3 grid")
    if abs(dom.inner_radius - r0) > 1e-12 * max(r0, 1.0):
        raise ValueError(f"grid inner radius {dom.inner_radius} != r0 {r0}")
    r_arr = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if np.any(r_arr < r0 - 1e-12 * max(r0, 1.0)):
        raise ValueError("radius below the obstacle boundary")
    s_nodes = grid.nodes - r0
    line_data = grid.nodes * np.asarray(u0.values, dtype=np.float64)
    peak = float(np.max(np.abs(line_data))) if line_data.size else 0.0
    if peak > 0.0 and np.any(np.abs(line_data[-4:]) > 1e-13 * peak):
        warnings.warn("initial data support touches the truncation boundary", stacklevel=2)
    weights = _line_weights(grid.num_nodes, grid.spacing)
    w_vals = _halfline_quad(t, r_arr - r0, s_nodes, weights * line_data)
    out = w_vals / r_arr
    return out if np.ndim(r) else float(out[0])


@dataclass(frozen=True)
class RatePair:
    """Exponents (a, b) of the scalar (1+t)^a (1+log(1+t))^b."""

    power_exponent: float
    log_exponent: float

    def evaluate(self, t):
        t_arr = np.asarray(t, dtype=np.float64)
        out = (1.0 + t_arr) ** self.power_exponent
        if self.log_exponent != 0.0:
            out = out * (1.0 + np.log1p(t_arr)) ** self.log_exponent
        return out if out.ndim else float(out)


def extra_decay_rate(n: int) -> RatePair:
    """Extra decay of the exterior Dirichlet flow over the whole-space flow.

    (1+t)^{1/2} for n=1, 1+log(1+t) for n=2, 1 for n>=3.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if n == 1:
        return RatePair(0.5, 0.0)
    if n == 2:
        return RatePair(0.0, 1.0)
    return RatePair(0.0, 0.0)


def absorption_tail_rate(n: int, p: float) -> RatePair:
    """Decay rate of the tail absorption integral ∫_t^inf u^p ds in L^1_phi.

    (1+t)^{2-p} for n=1, (1+t)^{2-p}(1+log(1+t))^{1-p} for n=2,
    (1+t)^{1-n(p-1)/2} for n>=3.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if p <= 1.0:
        raise ValueError(f"exponent must be > 1, got {p}")
    if n == 1:
        return RatePair(2.0 - p, 0.0)
    if n == 2:
        return RatePair(2.0 - p, 1.0 - p)
    return RatePair(1.0 - n * (p - 1.0) / 2.0, 0.0)


def linear_decay_exponents(n: int) -> RatePair:
    """Exponents of (1+t)^{n/2} * extra_decay_rate(n), the sup-norm decay scale."""
    e = extra_decay_rate(n)
    return RatePair(n / 2.0 + e.power_exponent, e.log_exponent)


def linear_norm_decay_rate(n: int, q: float) -> RatePair:
    """Decay exponents of the L^q norm of the linear flow from weighted-L^1 data.

    (1+t)^{-n/2 (1-1/q)} / extra_decay_rate(n); q may be inf.
    """
    if q < 1.0:
        raise ValueError(f"q must be >= 1, got {q}")
    frac = 1.0 if math.isinf(q) else 1.0 - 1.0 / q
    e = extra_decay_rate(n)
    return RatePair(-n / 2.0 * frac - e.power_exponent, -e.log_exponent)


@dataclass(frozen=True)
class IntegralEstimate:
    """Quadrature value, calibrated bound and regime tag for one integral."""

    value: float
    bound: float
    tag: str
    divergent: bool


def _integrand(r: float, m: float):
    def f(s: float) -> float:
        return (1.0 + s) ** r * (1.0 + math.log1p(s)) ** m

    return f


def _quad_head(r: float, m: float, t: float) -> float:
    val, _ = quad(_integrand(r, m), 0.0, t, epsabs=1e-12, epsrel=1e-11, limit=300)
    return val


def _quad_tail(r: float, m: float, t: float) -> float:
    # lambda = log(1+s) turns the tail into an exponentially decaying integral
    lam0 = math.log1p(t)

    def g(lam: float) -> float:
        return math.exp((r + 1.0) * lam) * (1.0 + lam) ** m

    val, _ = quad(g, lam0, np.inf, epsabs=1e-12, epsrel=1e-11, limit=300)
    return val


_HEAD_FORMS = {
    "r>-1": lambda r, m, t: (1.0 + t) ** (r + 1.0) * (1.0 + math.log1p(t)) ** m,
    "r=-1,m>-1": lambda r, m, t: (1.0 + math.log1p(t)) ** (m + 1.0),
    "r=-1,m=-1": lambda r, m, t: math.log(1.0 + math.log1p(t)),
    "otherwise": lambda r, m, t: 1.0,
}

_TAIL_FORM = lambda r, m, t: (1.0 + t) ** (r + 1.0) * (1.0 + math.log1p(t)) ** m  # noqa: E731

# Probe lattice for constant calibration; disjoint from the validation lattice
# (r, m) in {-3, -1, 0, 1}^2, t in {1, 10, 100} used by the tests.
_PROBE_R = (-3.4, -2.2, -1.6, -1.25, -0.6, -0.3, 0.4, 1.3, 1.9)
_PROBE_M = (-3.3, -2.2, -1.4, -0.5, 0.7, 1.6)
_PROBE_T = (0.5, 5.0, 50.0, 300.0)
_HEADROOM = 1.1

_constants: dict[tuple[str, str], float] = {}


def _head_tag(r: float, m: float) -> str:
    if r > -1.0 + _SNAP:
        return "r>-1"
    if abs(r + 1.0) <= _SNAP:
        if m > -1.0 + _SNAP:
            return "r=-1,m>-1"
        if abs(m + 1.0) <= _SNAP:
            return "r=-1,m=-1"
    return "otherwise"


def _calibrated(lemma: str, tag: str) -> float:
    key = (lemma, tag)
    if key in _constants:
        return _constants[key]
    ratios = [0.0]
    if lemma == "head":
        form = _HEAD_FORMS[tag]
        if tag == "r>-1":
            cells = [(r, m) for r in _PROBE_R if r > -1.0 for m in _PROBE_M]
        elif tag == "r=-1,m>-1":
            cells = [(-1.0, m) for m in _PROBE_M if m > -1.0]
        else:  # "otherwise"
            cells = [(r, m) for r in _PROBE_R if r < -1.0 for m in _PROBE_M]
            cells += [(-1.0, m) for m in _PROBE_M if m < -1.0]
        for r, m in cells:
            for t in _PROBE_T:
                ratios.append(_quad_head(r, m, t) / form(r, m, t))
    else:  # tail, tag "r<-1"
        cells = [(r, m) for r in _PROBE_R if r < -1.0 for m in _PROBE_M]
        for r, m in cells:
            for t in _PROBE_T:
                ratios.append(_quad_tail(r, m, t) / _TAIL_FORM(r, m, t))
    c = _HEADROOM * max(ratios)
    _constants[key] = c
    return c


def integral_head_bound(r: float, m: float, t: float) -> IntegralEstimate:
    """∫_0^t (1+s)^r (1+log(1+s))^m ds with the four-regime bound.

    Regimes: r > -1 (growth bound), r = -1 with m > -1 (log-power bound),
    r = -1 = m (exact value log(1+log(1+t))), otherwise (uniformly bounded).
    The head integral is always finite for t > 0.
    """
    if t <= 0.0:
        raise ValueError(f"time must be > 0, got {t}")
    tag = _head_tag(r, m)
    value = _quad_head(r, m, t)
    if tag == "r=-1,m=-1":
        bound = _HEAD_FORMS[tag](r, m, t)  # equality case, constant is 1
    else:
        bound = _calibrated("head", tag) * _HEAD_FORMS[tag](r, m, t)
    return IntegralEstimate(value=value, bound=bound, tag=tag, divergent=False)


def integral_tail_bound(r: float, m: float, t: float) -> IntegralEstimate:
    """∫_t^inf (1+s)^r (1+log(1+s))^m ds with the finite/divergent trichotomy.

    Finite only when r < -1, or r = -1 with m < -1 (then equal to
    (1+log(1+t))^{m+1} / |m+1| exactly).  Divergence is a tagged result,
    never an exception.
    """
    if t < 0.0:
        raise ValueError(f"time must be >= 0, got {t}")
    if r < -1.0 - _SNAP:
        value = _quad_tail(r, m, t)
        bound = _calibrated("tail", "r<-1") * _TAIL_FORM(r, m, t)
        return IntegralEstimate(value=value, bound=bound, tag="r<-1", divergent=False)
    if abs(r + 1.0) <= _SNAP and m < -1.0 - _SNAP:
        value = (1.0 + math.log1p(t)) ** (m + 1.0) / abs(m + 1.0)
        return IntegralEstimate(value=value, bound=value, tag="r=-1,m<-1", divergent=False)
    return IntegralEstimate(value=math.inf, bound=math.inf, tag="divergent", divergent=True)


def sup_norm_tail_is_divergent(n: int, p: float) -> bool:
    """Whether ∫^inf ((1+t)^{n/2} E_n(t))^{1-p} dt diverges.

    This is the integrability border behind the vanishing/non-vanishing
    dichotomy; divergence holds exactly when p <= min(2, 1 + 2/n).
    """
    scale = linear_decay_exponents(n)
    r = (1.0 - p) * scale.power_exponent
    m = (1.0 - p) * scale.log_exponent
    return integral_tail_bound(r, m, 1.0).divergent
