"""Radial exterior-domain geometry: domains, grids, measures, harmonic weights.

The computational domains are the half line (0, R_max) for dimension 1 and the
radial annulus (r0, R_max) outside a ball obstacle for dimension >= 2.  All
objects here are immutable after construction and safe to share across
concurrent simulation jobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


def sphere_surface_area(n: int) -> float:
    """Surface area of the unit sphere in R^n, 2 pi^{n/2} / Gamma(n/2)."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class DomainSpec:
    """Exterior domain description.

    dimension 1 means the half line (0, inf); the inner radius is then forced
    to zero.  For dimension >= 2 the obstacle is the closed ball of radius
    inner_radius and the domain is its complement, truncated computationally
    at truncation_radius.
    """

    dimension: int
    inner_radius: float
    truncation_radius: float

    def __post_init__(self) -> None:
        n = self.dimension
        if not isinstance(n, int) or n < 1:
            raise ValueError(f"dimension must be an integer >= 1, got {n!r}")
        r0 = float(self.inner_radius)
        rmax = float(self.truncation_radius)
        if not (math.isfinite(r0) and math.isfinite(rmax)):
            raise ValueError("non-finite geometry")
        if n == 1:
            r0 = 0.0
        elif r0 <= 0.0:
            raise ValueError(f"inner_radius must be > 0 for dimension {n}")
        if rmax <= r0:
            raise ValueError(
                f"truncation_radius must exceed inner_radius ({rmax} <= {r0})"
            )
        object.__setattr__(self, "inner_radius", r0)
        object.__setattr__(self, "truncation_radius", rmax)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid with volume-measure quadrature weights."""

    domain: DomainSpec
    nodes: np.ndarray
    spacing: float
    quad_weights: np.ndarray

    def __post_init__(self) -> None:
        self.nodes.setflags(write=False)
        self.quad_weights.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return self.nodes.size


def annulus_volume(domain: DomainSpec) -> float:
    """Closed-form volume of {r0 < |x| < R_max} (length of the window for N=1)."""
    n = domain.dimension
    r0, rmax = domain.inner_radius, domain.truncation_radius
    if n == 1:
        return rmax - r0
    return sphere_surface_area(n) * (rmax**n - r0**n) / n


def make_grid(domain: DomainSpec, num_cells: int) -> RadialGrid:
    """Build a uniform grid with num_cells cells on [r0, R_max].

    Quadrature weights are trapezoid weights for the volume element
    omega_N r^{N-1} dr (plain dr for N=1), with the trapezoid volume deficit
    folded into the two end nodes so the weights sum exactly to the annulus
    volume.  Interior weights are exactly omega_N r_i^{N-1} h.
    """
    if num_cells < 8:
        raise ValueError(f"num_cells must be >= 8, got {num_cells}")
    n = domain.dimension
    r0, rmax = domain.inner_radius, domain.truncation_radius
    h = (rmax - r0) / num_cells
    nodes = r0 + h * np.arange(num_cells + 1, dtype=np.float64)
    nodes[-1] = rmax

    if n == 1:
        density = np.ones_like(nodes)
    else:
        density = sphere_surface_area(n) * nodes ** (n - 1)
    weights = h * density
    weights[0] *= 0.5
    weights[-1] *= 0.5
    # fold the trapezoid volume deficit into the end nodes, proportionally so
    # a tiny inner weight can never be driven negative on coarse grids
    deficit = annulus_volume(domain) - float(weights.sum())
    end_sum = weights[0] + weights[-1]
    weights[0] += deficit * weights[0] / end_sum
    weights[-1] += deficit * weights[-1] / end_sum
    return RadialGrid(domain=domain, nodes=nodes, spacing=h, quad_weights=weights)


def phi_weight(domain: DomainSpec, r):
    """Positive harmonic weight vanishing on the obstacle boundary.

    r (N=1), log(r/r0) (N=2), 1 - (r0/r)^{N-2} (N>=3).  Accepts scalars or
    arrays; rejects radii inside the obstacle.
    """
    n = domain.dimension
    r0 = domain.inner_radius
    r_arr = np.asarray(r, dtype=np.float64)
    if np.any(r_arr < r0 - 1e-12 * max(r0, 1.0)):
        raise ValueError(f"radius below inner boundary {r0}")
    if n == 1:
        out = r_arr.copy()
    elif n == 2:
        out = np.log(np.maximum(r_arr, r0) / r0)
    else:
        out = 1.0 - (r0 / np.maximum(r_arr, r0)) ** (n - 2)
    return out if out.ndim else float(out)


def phi_gradient(domain: DomainSpec, r):
    """Radial derivative of phi_weight."""
    n = domain.dimension
    r0 = domain.inner_radius
    r_arr = np.asarray(r, dtype=np.float64)
    if n == 1:
        out = np.ones_like(r_arr)
    elif n == 2:
        out = 1.0 / r_arr
    else:
        out = (n - 2) * r0 ** (n - 2) * r_arr ** (1 - n)
    return out if out.ndim else float(out)


def reference_profile(domain: DomainSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Closure for the explicit profile phi0 that phi approaches at infinity.

    phi0(x) = x (N=1), log|x| (N=2), 1 - |x|^{2-N} (N>=3); phi0 vanishes on
    the unit sphere for N>=2 and at 0 for N=1.
    """
    n = domain.dimension
    if n == 1:
        return lambda x: np.asarray(x, dtype=np.float64)
    if n == 2:
        return lambda x: np.log(np.asarray(x, dtype=np.float64))
    return lambda x: 1.0 - np.asarray(x, dtype=np.float64) ** (2 - n)


@dataclass(frozen=True)
class HarmonicWeight:
    """phi sampled on a grid plus the reference profile phi0."""

    grid: RadialGrid
    values: np.ndarray
    profile: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        self.values.setflags(write=False)


def harmonic_weight(grid: RadialGrid) -> HarmonicWeight:
    """Sample phi_weight on the grid nodes."""
    values = phi_weight(grid.domain, grid.nodes)
    return HarmonicWeight(grid=grid, values=values, profile=reference_profile(grid.domain))


def radial_laplacian_residual(grid: RadialGrid, values: np.ndarray) -> float:
    """Max residual of the central radial Laplacian stencil at interior nodes.

    Stencil: second central difference plus (N-1)/r times the first central
    difference.  Used to measure discrete harmonicity of sampled profiles.
    """
    r = grid.nodes
    h = grid.spacing
    n = grid.domain.dimension
    v = np.asarray(values, dtype=np.float64)
    d2 = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    res = d2
    if n > 1:
        d1 = (v[2:] - v[:-2]) / (2.0 * h)
        res = d2 + (n - 1) / r[1:-1] * d1
    return float(np.max(np.abs(res))) if res.size else 0.0


def phi_sandwich_check(domain: DomainSpec, grid: RadialGrid) -> float:
    """Max violation of phi0(r/R0) <= phi(r) <= phi0(r/r0) over the grid.

    Only defined for N >= 2.  For a ball obstacle R0 = r0 and both bounds
    coincide with phi, so the violation is roundoff-level.
    """
    if domain.dimension < 2:
        raise ValueError("sandwich bounds require dimension >= 2")
    r0 = domain.inner_radius
    phi0 = reference_profile(domain)
    r = grid.nodes
    phi = phi_weight(domain, r)
    lower = phi0(r / r0)  # R0 = r0 for the ball obstacle
    upper = phi0(r / r0)
    viol_low = np.max(lower - phi)
    viol_high = np.max(phi - upper)
    return float(max(viol_low, viol_high, 0.0))


def default_truncation(r0: float, t_end: float, support_radius: float) -> float:
    """Default R_max = r0 + support + 8 sqrt(t_end); keeps Gaussian tails tiny."""
    return r0 + support_radius + 8.0 * math.sqrt(max(t_end, 1e-12))
