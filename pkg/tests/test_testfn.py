import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extheat import (
    CutoffFamily,
    DomainSpec,
    SolverConfig,
    bump_field,
    classify_dichotomy,
    cutoff_bound_ratio,
    cutoff_mass_average,
    eta,
    eta_with_derivatives,
    evolve,
    harmonic_weight,
    layered_absorption_series,
    make_grid,
    theta_factor,
)


def test_eta_plateau_values_and_midpoint():
    assert eta(0.4) == 1.0
    assert eta(1.2) == 0.0
    assert eta(0.75) == pytest.approx(0.5)
    v, d1, d2 = eta_with_derivatives(0.5)
    assert (v, d1, d2) == (1.0, 0.0, 0.0)
    v, d1, d2 = eta_with_derivatives(1.0)
    assert (v, d1, d2) == (0.0, 0.0, 0.0)


@given(s=st.floats(min_value=0.52, max_value=0.98))
@settings(max_examples=40, deadline=None)
def test_eta_derivatives_match_finite_differences(s):
    h = 1e-5
    v, d1, d2 = eta_with_derivatives(s)
    vp = eta(s + h)
    vm = eta(s - h)
    assert d1 == pytest.approx((vp - vm) / (2.0 * h), abs=5e-6)
    assert d2 == pytest.approx((vp - 2.0 * v + vm) / h**2, abs=5e-4)


@given(s1=st.floats(min_value=-1.0, max_value=2.0), s2=st.floats(min_value=-1.0, max_value=2.0))
@settings(max_examples=60, deadline=None)
def test_eta_is_nonincreasing_between_plateaus(s1, s2):
    lo, hi = min(s1, s2), max(s1, s2)
    assert eta(lo) >= eta(hi)


def test_cutoff_family_weights():
    fam = CutoffFamily(domain=DomainSpec(3, 1.0, 10.0), exponent=2.0, scale=10.0)
    # deep inside the parabolic region the bulk weight is one
    assert fam.bulk_weight(0.1, 1.5) == pytest.approx(1.0)
    # far outside it vanishes and so does the shell weight
    assert fam.bulk_weight(100.0, 1.5) == 0.0
    assert fam.shell_weight(0.1, 1.5) == 0.0
    assert fam.shell_weight(100.0, 1.5) == 0.0
    xi_mid = 0.75
    t_mid = xi_mid * fam.scale
    assert fam.shell_weight(t_mid, 1.0) == pytest.approx(eta(xi_mid) ** (2.0 * fam.conjugate))
    with pytest.raises(ValueError):
        CutoffFamily(domain=DomainSpec(1, 0.0, 5.0), exponent=1.0, scale=1.0)


@pytest.mark.parametrize("n,p", [(1, 2.0), (2, 2.0), (3, 5.0 / 3.0)])
def test_cutoff_bound_ratio_uniform_over_scales(n, p):
    dom = DomainSpec(n, 0.5 if n == 1 else 1.0, 10.0)
    vals = [cutoff_bound_ratio(dom, p, s) for s in (10.0, 1e2, 1e3, 1e4)]
    assert all(math.isfinite(v) and v > 0.0 for v in vals)
    assert (max(vals) - min(vals)) / min(vals) <= 0.10


def test_theta_closed_form_on_halfline():
    dom = DomainSpec(1, 0.0, 10.0)
    # phi-volume of the parabolic region is R^2/4, averaged gives R/4
    assert cutoff_mass_average(dom, 100.0) == pytest.approx(25.0, rel=1e-9)
    assert theta_factor(dom, 2.0, 100.0) == pytest.approx(25.0, rel=1e-9)
    assert theta_factor(dom, 3.0, 100.0) == pytest.approx(625.0, rel=1e-8)


@pytest.mark.parametrize(
    "n,p,expected",
    [(1, 2.0, -1.0), (1, 1.5, -0.5), (3, 2.0, -1.5), (3, 5.0 / 3.0, -1.0), (5, 1.5, -1.25)],
)
def test_inverse_theta_exponents(n, p, expected):
    dom = DomainSpec(n, 0.5 if n == 1 else 1.0, 10.0)
    scales = np.geomspace(1e3, 1e5, 7)
    inv = np.array([1.0 / theta_factor(dom, p, s) for s in scales])
    slope = np.polyfit(np.log(scales), np.log(inv), 1)[0]
    assert abs(slope - expected) <= 0.1


def test_theta_n2_carries_log_correction():
    dom = DomainSpec(2, 1.0, 10.0)
    # (R log R)-type growth: pure power fit overshoots 1, log-aware fit does not
    scales = np.geomspace(1e3, 1e5, 7)
    g = np.array([cutoff_mass_average(dom, s) for s in scales])
    slope = np.polyfit(np.log(scales), np.log(g), 1)[0]
    assert slope > 1.02


def test_classification_examples_and_threshold():
    assert classify_dichotomy(1, 2.0).label == "vanishing"
    assert classify_dichotomy(2, 2.0).label == "vanishing"
    assert classify_dichotomy(3, 1.6).label == "vanishing"
    assert classify_dichotomy(3, 1.7).label == "non-vanishing"
    assert classify_dichotomy(4, 1.5).label == "vanishing"  # inclusive border
    assert classify_dichotomy(1, 2.5).threshold == 2.0
    assert classify_dichotomy(5, 1.2).threshold == pytest.approx(1.4)
    with pytest.raises(ValueError):
        classify_dichotomy(0, 2.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_classification_mechanisms_agree_on_lattice(n):
    for p in np.arange(1.1, 4.0, 0.2):
        call = classify_dichotomy(n, float(p))
        assert call.mechanisms_agree, (n, p, call)


@pytest.fixture(scope="module")
def short_semilinear_run():
    grid = make_grid(DomainSpec(1, 0.0, 45.0), 900)
    u0 = bump_field(grid, 2.5, 1.0, 1.0)
    cfg = SolverConfig(
        scheme="semilinear", exponent=2.0, t_end=20.0,
        output_times=tuple(np.geomspace(0.02, 20.0, 80)),
        dt_initial=1e-3, dt_growth=1.05, dt_cap_coeff=0.03,
    )
    return evolve(u0, cfg), harmonic_weight(grid)


def test_layered_absorption_inequality_and_monotonicity(short_semilinear_run):
    traj, hw = short_semilinear_run
    la = layered_absorption_series(traj, hw, scales=np.geomspace(0.5, 10.0, 7))
    assert np.all(la.layered >= 0.0)
    assert np.all(np.diff(la.layered) >= -1e-15)
    assert np.all(la.layered <= la.bulk_bound)
    assert not la.truncated


def test_layered_absorption_flags_truncation(short_semilinear_run):
    traj, hw = short_semilinear_run
    la = layered_absorption_series(traj, hw, scales=(1.0, 50.0))
    assert la.truncated


def test_layered_absorption_rejects_linear_runs():
    grid = make_grid(DomainSpec(1, 0.0, 30.0), 300)
    u0 = bump_field(grid, 2.5, 1.0, 1.0)
    cfg = SolverConfig(scheme="linear", t_end=1.0, output_times=(1.0,))
    traj = evolve(u0, cfg)
    with pytest.raises(ValueError):
        layered_absorption_series(traj, harmonic_weight(grid))
