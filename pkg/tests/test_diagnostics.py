import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from extheat import (
    DomainSpec,
    Field,
    SolverConfig,
    Trajectory,
    bump_field,
    comparison_violation,
    compute_limit_state,
    energy_identity_residual,
    evolve,
    fit_rate,
    gaussian,
    gaussian_profile_distance,
    harmonic_weight,
    indicator_field,
    linear_profile_distance,
    lq_norm,
    make_grid,
    mass_phi,
    mass_report,
    subsolution_factor,
    tail_envelope,
)


@pytest.fixture(scope="module")
def grid1():
    return make_grid(DomainSpec(1, 0.0, 42.0), 1500)


@pytest.fixture(scope="module")
def grid3():
    return make_grid(DomainSpec(3, 1.0, 42.0), 1500)


def _cfg(scheme, t_end, outs, p=None, cap=0.03):
    return SolverConfig(scheme=scheme, exponent=p, t_end=t_end, output_times=outs,
                        dt_initial=1e-3, dt_growth=1.05, dt_cap_coeff=cap)


def test_mass_of_zero_field_is_zero(grid1):
    hw = harmonic_weight(grid1)
    assert mass_phi(Field(grid1, np.zeros(grid1.num_nodes)), hw) == 0.0


def test_mass_of_indicator_matches_closed_forms(grid1, grid3):
    hw1 = harmonic_weight(grid1)
    u = indicator_field(grid1, 1.0, 2.0)
    # integral of x over [1, 2]; sampled jump costs O(h) * phi at the edges
    tol = 4.0 * grid1.spacing
    assert abs(mass_phi(u, hw1) - 1.5) <= tol
    hw3 = harmonic_weight(grid3)
    u3 = indicator_field(grid3, 1.0, 2.0)
    expect = 4.0 * math.pi * (7.0 / 3.0 - 3.0 / 2.0)
    assert abs(mass_phi(u3, hw3) - expect) <= 4.0 * math.pi * 3.0 * 4.0 * grid3.spacing


def test_mass_rejects_grid_mismatch(grid1, grid3):
    with pytest.raises(ValueError):
        mass_phi(Field(grid1, np.zeros(grid1.num_nodes)), harmonic_weight(grid3))


def test_lq_norm_basics(grid3):
    zero = Field(grid3, np.zeros(grid3.num_nodes))
    assert lq_norm(zero, 2.0) == 0.0
    c = 0.7
    v = np.full(grid3.num_nodes, c)
    v[0] = v[-1] = 0.0
    const = Field(grid3, v)
    vol = grid3.quad_weights.sum()
    # boundary zeros only perturb by the two end weights
    assert lq_norm(const, 1.0) == pytest.approx(c * vol, rel=1e-3)
    with pytest.raises(ValueError):
        lq_norm(const, 0.5)
    with pytest.raises(ValueError):
        lq_norm(const, math.inf, weight=harmonic_weight(grid3))


def test_lq_norm_of_sampled_gaussian_against_quadrature(grid3):
    t = 0.3
    vals = gaussian(3, t, grid3.nodes - 4.0)
    vals[0] = vals[-1] = 0.0
    u = Field(grid3, vals)
    oracle, _ = quad(
        lambda r: 4.0 * math.pi * r * r * gaussian(3, t, r - 4.0) ** 2,
        grid3.domain.inner_radius,
        grid3.domain.truncation_radius,
        limit=200,
    )
    assert lq_norm(u, 2.0) == pytest.approx(math.sqrt(oracle), rel=1e-5)


def test_energy_identity_linear_and_semilinear(grid3):
    u0 = bump_field(grid3, 3.0, 1.0, 1.0)
    hw = harmonic_weight(grid3)
    lin = evolve(u0, _cfg("linear", 10.0, (1.0, 10.0)))
    _, res = energy_identity_residual(lin, hw)
    assert res[0] == 0.0  # t = 0 snapshot
    assert res.max() <= 1e-6
    semi = evolve(u0, _cfg("semilinear", 10.0, (1.0, 10.0), p=2.0))
    _, res = energy_identity_residual(semi, hw)
    assert res.max() <= 1e-3


def test_limit_state_trivial_cases(grid3):
    hw = harmonic_weight(grid3)
    zero = Field(grid3, np.zeros(grid3.num_nodes))
    traj = evolve(zero, _cfg("semilinear", 1.0, (1.0,), p=2.0))
    state = compute_limit_state(traj, hw)
    assert state.mass == 0.0
    assert np.all(state.field.values == 0.0)
    u0 = bump_field(grid3, 3.0, 1.0, 1.0)
    lin = evolve(u0, _cfg("linear", 1.0, (1.0,)))
    state = compute_limit_state(lin, hw)  # no absorption accumulates
    assert np.array_equal(state.field.values, u0.values)
    assert state.tail == 0.0


def test_limit_mass_dichotomy_witness():
    # subcritical: the extrapolated limit collapses; supercritical: it stays
    # above the damped initial mass
    grid = make_grid(DomainSpec(1, 0.0, 85.0), 1400)
    hw = harmonic_weight(grid)
    u0 = bump_field(grid, 2.5, 1.0, 1.0)
    outs = tuple(np.geomspace(0.5, 100.0, 16))
    sub = evolve(u0, _cfg("semilinear", 100.0, outs, p=1.5, cap=0.025))
    state = compute_limit_state(sub, hw)
    m0 = mass_phi(u0, hw)
    assert state.mass <= 0.05 * m0
    sup = evolve(u0, _cfg("semilinear", 100.0, outs, p=2.5, cap=0.025))
    lin = evolve(u0, _cfg("linear", 100.0, outs, cap=0.025))
    _, h = subsolution_factor(lin, 2.5)
    assert compute_limit_state(sup, hw).mass >= h[-1] * m0 > 0.0


def test_limit_state_positive_for_supercritical_small_data():
    grid = make_grid(DomainSpec(3, 1.0, 56.0), 1500)
    hw = harmonic_weight(grid)
    u0 = bump_field(grid, 3.0, 1.0, 0.3)
    traj = evolve(u0, _cfg("semilinear", 40.0, tuple(np.geomspace(0.5, 40.0, 16)), p=3.0))
    state = compute_limit_state(traj, hw)
    assert state.mass > 0.0


def test_subsolution_factor_properties(grid3):
    u0 = bump_field(grid3, 3.0, 1.0, 1.0)
    lin = evolve(u0, _cfg("linear", 20.0, tuple(np.geomspace(0.5, 20.0, 10))))
    _, h = subsolution_factor(lin, 2.0)
    assert h[0] == 1.0
    assert np.all(np.diff(h) <= 0.0)
    assert 0.0 < h[-1] < 1.0
    # large p with data below one: the damping integral is tiny
    _, h6 = subsolution_factor(lin, 6.0)
    assert h6[-1] >= 0.9


def test_subsolution_factor_stabilizes():
    # small data keeps the damping integral tail tiny; three digits by t = 100
    grid = make_grid(DomainSpec(3, 1.0, 86.0), 1700)
    u0 = bump_field(grid, 3.0, 1.0, 0.05)
    outs = (50.0, 70.0, 100.0)
    lin = evolve(u0, _cfg("linear", 100.0, outs, cap=0.05))
    _, h = subsolution_factor(lin, 2.0)
    assert 0.0 < h[-1] < 1.0
    assert abs(h[-1] - h[-2]) <= 5e-3 * h[-1]


def test_comparison_violation_zero_for_identical_flows(grid3):
    u0 = bump_field(grid3, 3.0, 1.0, 1.0)
    outs = (0.5, 2.0, 8.0)
    lin1 = evolve(u0, _cfg("linear", 8.0, outs))
    lin2 = evolve(u0, _cfg("linear", 8.0, outs))
    h = np.ones(len(lin1.times))
    assert comparison_violation(lin1, lin2, h) == 0.0


def test_fit_rate_exact_model_recovery():
    t = np.geomspace(1.0, 1e3, 40)
    v = 2.7 * (1.0 + t) ** -1.5
    fit = fit_rate(t, v)
    assert fit.power == pytest.approx(-1.5, abs=1e-6)
    fit2 = fit_rate(t, v * (1.0 + np.log1p(t)) ** -0.5, with_log_factor=True)
    assert fit2.power == pytest.approx(-1.5, abs=1e-6)
    assert fit2.log_power == pytest.approx(-0.5, abs=1e-6)


@given(scale=st.floats(min_value=1e-6, max_value=1e6))
@settings(max_examples=40, deadline=None)
def test_fit_rate_scaling_invariance(scale):
    t = np.geomspace(1.0, 500.0, 24)
    v = (1.0 + t) ** -0.8 * (1.0 + np.log1p(t)) ** -0.3
    base = fit_rate(t, v, with_log_factor=True)
    scaled = fit_rate(t, scale * v, with_log_factor=True)
    assert abs(base.power - scaled.power) <= 1e-12
    assert abs(base.log_power - scaled.log_power) <= 1e-12


def test_fit_rate_rejects_bad_windows():
    t = np.linspace(10.0, 20.0, 12)
    with pytest.raises(ValueError):
        fit_rate(t, 1.0 / t)
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0, 40.0], [1.0, 0.5, 0.1])


def test_tail_envelope_closed_form_value():
    # rate (1+s)^(-1/2): value 0.5 at t=3 plus mean integral 2/3
    assert tail_envelope(3, 2.0, 3.0) == pytest.approx(0.5 + 2.0 / 3.0, abs=1e-9)


def test_linear_profile_distance_trivial_for_linear_flow(grid1):
    u0 = bump_field(grid1, 3.0, 1.0, 1.0)
    outs = (0.5, 2.0, 8.0)
    lin = evolve(u0, _cfg("linear", 8.0, outs))
    hw = harmonic_weight(grid1)
    state = compute_limit_state(lin, hw)
    ts, series, env = linear_profile_distance(lin, state.field, math.inf, p=2.0)
    assert np.max(series) == 0.0
    assert np.all(env > 0.0)
    with pytest.raises(ValueError):
        linear_profile_distance(lin, state.field, math.inf)


def test_gaussian_profile_distance_zero_for_exact_profile(grid3):
    hw = harmonic_weight(grid3)
    times = np.array([0.0, 1.0, 4.0])
    m_inf = 0.7
    fields = []
    for t in times:
        if t == 0.0:
            fields.append(bump_field(grid3, 3.0, 1.0, 1.0).values)
            continue
        prof = m_inf * hw.values * gaussian(3, t, grid3.nodes)
        prof[0] = prof[-1] = 0.0
        fields.append(prof)
    cfg = _cfg("semilinear", 4.0, (1.0, 4.0), p=2.0)
    synth = Trajectory(
        grid=grid3, cfg=cfg, times=times, fields=fields,
        accumulators=[np.zeros_like(f) for f in fields],
        step_times=times, step_sup=np.array([float(np.max(f)) for f in fields]),
        step_mass=np.zeros_like(times), flux_lost=0.0, clamp_total=0.0, notes=(),
    )
    ts, series = gaussian_profile_distance(synth, m_inf, hw, math.inf)
    assert np.max(series) == 0.0


def test_mass_report_shape(grid3):
    u0 = bump_field(grid3, 3.0, 1.0, 1.0)
    traj = evolve(u0, _cfg("semilinear", 20.0, tuple(np.geomspace(0.5, 20.0, 10)), p=2.0))
    hw = harmonic_weight(grid3)
    rep = mass_report(traj, hw)
    assert np.all(np.diff(rep.mass) <= 0.0)
    assert np.all(rep.absorbed >= 0.0)
    assert rep.residual.max() <= 1e-3
