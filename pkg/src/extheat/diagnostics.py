"""Measurements on trajectories: weighted mass, norms, identities, profiles.

All functions are pure over immutable trajectories and embarrassingly
parallel across parameter-sweep cells.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .geometry import HarmonicWeight
from .kernels import absorption_tail_rate, extra_decay_rate, gaussian
from .solver import Field, Trajectory, evolve


def _check_grids(a, b) -> None:
    if a is b:
        return
    if a.nodes.shape != b.nodes.shape or not np.array_equal(a.nodes, b.nodes):
        raise ValueError("grid mismatch")


def mass_phi(u: Field, weight: HarmonicWeight) -> float:
    """Weighted mass: sum of quad_weights * phi * u."""
    _check_grids(u.grid, weight.grid)
    return float(np.dot(u.grid.quad_weights * weight.values, u.values))


def lq_norm(u: Field, q: float, weight: Optional[HarmonicWeight] = None) -> float:
    """L^q norm by radial quadrature; max norm for q = inf.

    With a weight, computes the phi-weighted norm (phi^{1/q} inside),
    defined for finite q only.
    """
    if q < 1.0:
        raise ValueError(f"q must be >= 1, got {q}")
    if math.isinf(q):
        if weight is not None:
            raise ValueError("weighted norm is defined for finite q only")
        return float(np.max(np.abs(u.values)))
    w = u.grid.quad_weights.copy()
    if weight is not None:
        _check_grids(u.grid, weight.grid)
        w = w * weight.values
    return float(np.dot(w, np.abs(u.values) ** q) ** (1.0 / q))


def _snapshot_mass(traj: Trajectory, weight: HarmonicWeight) -> np.ndarray:
    psi = traj.grid.quad_weights * weight.values
    return np.array([float(psi @ f) for f in traj.fields])


def _snapshot_absorbed(traj: Trajectory, weight: HarmonicWeight) -> np.ndarray:
    psi = traj.grid.quad_weights * weight.values
    return np.array([float(psi @ a) for a in traj.accumulators])


def energy_identity_residual(traj: Trajectory, weight: HarmonicWeight):
    """Relative residual of mass(t) + absorbed(t) = mass(0) at snapshots."""
    _check_grids(traj.grid, weight.grid)
    m = _snapshot_mass(traj, weight)
    a = _snapshot_absorbed(traj, weight)
    if m[0] == 0.0:
        return traj.times.copy(), np.zeros_like(m)
    res = np.abs(m + a - m[0]) / abs(m[0])
    return traj.times.copy(), res


@dataclass
class RateFit:
    """Fit of value(t) ~ c (1+t)^a (1+log(1+t))^b in log space."""

    power: float
    log_power: float
    amplitude: float
    residual_rms: float
    t_lo: float
    t_hi: float


def fit_rate(times, values, with_log_factor: bool = False) -> RateFit:
    """Least-squares exponent fit in log-log coordinates.

    Needs at least 8 positive samples spanning a factor >= 10 in t (windows
    narrower than a factor 4 are rejected as ill conditioned).
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    keep = (v > 0.0) & (t > 0.0)
    t, v = t[keep], v[keep]
    if t.size < 8:
        raise ValueError(f"need >= 8 positive samples, got {t.size}")
    t_lo, t_hi = float(t.min()), float(t.max())
    if t_hi < 4.0 * t_lo:
        raise ValueError(f"fit window [{t_lo:.3g}, {t_hi:.3g}] too narrow")
    cols = [np.ones_like(t), np.log1p(t)]
    if with_log_factor:
        cols.append(np.log(1.0 + np.log1p(t)))
    design = np.column_stack(cols)
    target = np.log(v)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    b = float(coef[2]) if with_log_factor else 0.0
    return RateFit(
        power=float(coef[1]),
        log_power=b,
        amplitude=float(math.exp(coef[0])),
        residual_rms=rms,
        t_lo=t_lo,
        t_hi=t_hi,
    )


@dataclass
class LimitState:
    """Initial data minus total absorption, with a tail-extrapolation estimate."""

    field: Field
    mass: float
    tail: float
    uncertainty: float
    flagged: bool


def _absorption_rate_series(traj: Trajectory, weight: HarmonicWeight):
    psi = traj.grid.quad_weights * weight.values
    p = traj.cfg.exponent
    rate = np.array([float(psi @ np.power(f, p)) for f in traj.fields])
    return traj.times.copy(), rate


def compute_limit_state(traj: Trajectory, weight: HarmonicWeight) -> LimitState:
    """u0 minus the absorbed integral, extrapolated beyond the simulated window.

    Tail beyond t_end is estimated from a last-decade power fit of the
    weighted absorption rate, cross-checked against the theoretical envelope
    exponent; agreement spread plus fit scatter forms the uncertainty.
    Subcritical (non-integrable) fitted tails clamp the limit mass at zero.
    """
    if traj.cfg.scheme != "semilinear":
        final = Field(traj.grid, traj.fields[0] - traj.accumulators[-1])
        return LimitState(field=final, mass=mass_phi(final, weight), tail=0.0,
                          uncertainty=0.0, flagged=False)
    n = traj.grid.domain.dimension
    p = traj.cfg.exponent
    t, rate = _absorption_rate_series(traj, weight)
    t_end = float(t[-1])
    window = t >= t_end / 10.0
    masses = _snapshot_mass(traj, weight)
    m_end = float(masses[-1])
    g_end = float(rate[-1])

    tail_fit = math.inf
    rms = 0.0
    if g_end > 0.0 and np.count_nonzero(window & (rate > 0.0)) >= 4:
        tw = t[window & (rate > 0.0)]
        gw = rate[window & (rate > 0.0)]
        design = np.column_stack([np.ones_like(tw), np.log1p(tw)])
        coef, *_ = np.linalg.lstsq(design, np.log(gw), rcond=None)
        gamma = -float(coef[1])
        rms = float(np.sqrt(np.mean((np.log(gw) - design @ coef) ** 2)))
        if gamma > 1.05:
            tail_fit = g_end * (1.0 + t_end) / (gamma - 1.0)
    elif g_end == 0.0:
        tail_fit = 0.0

    # theoretical exponent of the rate from the tail envelope: rate ~ envelope / (1+t)
    env = absorption_tail_rate(n, p)
    gamma_theory = 1.0 - env.power_exponent
    tail_theory = g_end * (1.0 + t_end) / (gamma_theory - 1.0) if gamma_theory > 1.0 else math.inf

    if math.isinf(tail_fit):
        mass = max(m_end - (0.0 if math.isinf(tail_theory) else tail_theory), 0.0)
        uncertainty = m_end
        tail = m_end - mass
        flagged = True
    else:
        tail = tail_fit
        spread = abs(tail_fit - tail_theory) if math.isfinite(tail_theory) else tail_fit
        uncertainty = spread + 2.0 * rms * tail_fit
        # the limit is a decreasing limit of nonnegative masses
        mass = max(m_end - tail, 0.0)
        uncertainty += max(tail - m_end, 0.0)
        flagged = uncertainty > 0.2 * max(abs(mass), 1e-300)

    tail_field = np.zeros_like(traj.fields[-1])
    if g_end > 0.0 and math.isfinite(tail):
        tail_field = np.power(traj.fields[-1], p) * (tail / g_end)
    final = Field(traj.grid, traj.fields[0] - traj.accumulators[-1] - tail_field)
    return LimitState(field=final, mass=mass, tail=tail, uncertainty=uncertainty, flagged=flagged)


def subsolution_factor(traj_linear: Trajectory, p: float):
    """Damping factor h(t) = (1 + (p-1) ∫_0^t sup|S(tau)u0|^{p-1} dtau)^{-1/(p-1)}.

    Uses the dense per-step sup-norm series with trapezoid integration and
    returns h at the trajectory's snapshot times; h(0) = 1 and h is
    nonincreasing.
    """
    if p <= 1.0:
        raise ValueError("p must be > 1")
    ts = traj_linear.step_times
    sup = traj_linear.step_sup ** (p - 1.0)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(ts) * (sup[1:] + sup[:-1]))))
    idx = np.searchsorted(ts, traj_linear.times)
    idx = np.clip(idx, 0, ts.size - 1)
    h = (1.0 + (p - 1.0) * cum[idx]) ** (-1.0 / (p - 1.0))
    return traj_linear.times.copy(), h


def comparison_violation(traj_semilinear: Trajectory, traj_linear: Trajectory, h: np.ndarray) -> float:
    """Max over snapshots and nodes of (h(t) S(t)u0 - u(t)) clipped at zero."""
    _check_grids(traj_semilinear.grid, traj_linear.grid)
    if traj_semilinear.times.shape != traj_linear.times.shape or not np.allclose(
        traj_semilinear.times, traj_linear.times, rtol=0.0, atol=1e-12
    ):
        raise ValueError("trajectories must share snapshot times")
    worst = 0.0
    for j in range(len(traj_semilinear.fields)):
        gap = h[j] * traj_linear.fields[j] - traj_semilinear.fields[j]
        worst = max(worst, float(np.max(gap)))
    return max(worst, 0.0)


def tail_envelope(n: int, p: float, t) -> np.ndarray:
    """Envelope rate(t) + (1/t) ∫_0^t rate(s) ds with rate = absorption_tail_rate."""
    env = absorption_tail_rate(n, p)
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.empty_like(t_arr)
    for j, tj in enumerate(t_arr):
        integral, _ = quad(lambda s: float(env.evaluate(s)), 0.0, tj, limit=200)
        out[j] = float(env.evaluate(tj)) + integral / tj
    return out if np.ndim(t) else float(out[0])


def _distance_weight(n: int, q: float, t: np.ndarray, use_one_plus: bool) -> np.ndarray:
    base = (1.0 + t) if use_one_plus else t
    exponent = 0.5 * n if math.isinf(q) else 0.5 * n * (1.0 - 1.0 / q)
    return base**exponent


def linear_profile_distance(traj: Trajectory, limit_field: Field, q: float, p: Optional[float] = None):
    """Weighted distance (1+t)^{n/2(1-1/q)} E_n(t) |u(t) - S(t)u_inf|_q per snapshot.

    S(t) of the (possibly sign-changing) limit state is computed by a fresh
    linear evolve on the same grid and snapshot times.  Returns the positive
    snapshot times, the weighted distance series, and the matching envelope
    values (unscaled).  p defaults to the trajectory's absorption exponent
    and must be passed explicitly for linear trajectories.
    """
    _check_grids(traj.grid, limit_field.grid)
    n = traj.grid.domain.dimension
    if p is None:
        p = traj.cfg.exponent
    if p is None:
        raise ValueError("envelope exponent p required for linear trajectories")
    # the flux monitor's relative reference is meaningless for the possibly
    # sign-changing limit state; the primal run already vetted the support
    lin_cfg = replace(traj.cfg, scheme="linear", exponent=None,
                      enforce_flux_error=False, flux_warn=math.inf)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lin = evolve(limit_field, lin_cfg)
    e_n = extra_decay_rate(n)
    mask = traj.times > 0.0
    t_pos = traj.times[mask]
    weights = _distance_weight(n, q, t_pos, use_one_plus=True) * e_n.evaluate(t_pos)
    series = np.empty(t_pos.size)
    k = 0
    for j, tj in enumerate(traj.times):
        if tj <= 0.0:
            continue
        diff = Field(traj.grid, traj.fields[j] - lin.fields[j])
        series[k] = weights[k] * lq_norm(diff, q)
        k += 1
    envelope = tail_envelope(n, p, t_pos)
    return t_pos, series, envelope


def gaussian_profile_distance(traj: Trajectory, limit_mass: float, weight: HarmonicWeight, q: float):
    """Weighted distance t^{n/2(1-1/q)} |u(t) - M phi G(t,.)|_q per snapshot."""
    _check_grids(traj.grid, weight.grid)
    n = traj.grid.domain.dimension
    r = traj.grid.nodes
    mask = traj.times > 0.0
    t_pos = traj.times[mask]
    weights = _distance_weight(n, q, t_pos, use_one_plus=False)
    series = np.empty(t_pos.size)
    k = 0
    for j, tj in enumerate(traj.times):
        if tj <= 0.0:
            continue
        profile = limit_mass * weight.values * gaussian(n, tj, r)
        profile[0] = 0.0
        profile[-1] = 0.0
        diff = Field(traj.grid, traj.fields[j] - profile)
        series[k] = weights[k] * lq_norm(diff, q)
        k += 1
    return t_pos, series


@dataclass
class MassReport:
    """Weighted-mass bookkeeping of one semilinear trajectory."""

    times: np.ndarray
    mass: np.ndarray
    absorbed: np.ndarray
    residual: np.ndarray
    limit_mass: float
    limit_uncertainty: float
    limit_flagged: bool


def mass_report(traj: Trajectory, weight: HarmonicWeight) -> MassReport:
    times, residual = energy_identity_residual(traj, weight)
    m = _snapshot_mass(traj, weight)
    a = _snapshot_absorbed(traj, weight)
    state = compute_limit_state(traj, weight)
    return MassReport(
        times=times,
        mass=m,
        absorbed=a,
        residual=residual,
        limit_mass=state.mass,
        limit_uncertainty=state.uncertainty,
        limit_flagged=state.flagged,
    )
