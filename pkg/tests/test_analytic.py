"""Closed-form references: boundary conditions, exactness, conversions."""

import math

import numpy as np
import pytest

from minpulse import analytic, dynamics


SQRT3 = math.sqrt(3.0)


def test_two_control_continuous_time_and_endpoint():
    sol = analytic.two_control_continuous()
    assert sol.t_f == pytest.approx(0.5 * math.pi * SQRT3, abs=1e-15)
    assert sol.endpoint_error() < 1e-9
    assert np.allclose(sol.x_initial, [1.0, 0.0, 0.0])
    assert np.allclose(sol.x_target, [0.0, 1.0, 0.0])


def test_two_control_state_endpoints_and_sphere():
    t_f = analytic.TWO_CONTROL_TIME
    assert np.allclose(analytic.two_control_state(0.0), [1.0, 0.0, 0.0],
                       atol=1e-12)
    assert np.allclose(analytic.two_control_state(t_f), [0.0, 1.0, 0.0],
                       atol=1e-12)
    for t in np.linspace(0.0, t_f, 101):
        x = analytic.two_control_state(t)
        assert abs(np.linalg.norm(x) - 1.0) < 1e-12


def test_two_control_state_solves_control_law():
    # The closed-form state must satisfy dx/dt = gen(control(t)) x.
    sol = analytic.two_control_continuous()
    h = 1e-6
    for t in np.linspace(0.05, sol.t_f - 0.05, 25):
        dx = (analytic.two_control_state(t + h)
              - analytic.two_control_state(t - h)) / (2.0 * h)
        phi = sol.control(t)
        gen = math.cos(phi) * dynamics.M_X + math.sin(phi) * dynamics.M_Y
        assert np.allclose(dx, gen @ analytic.two_control_state(t),
                           atol=1e-6)


def test_two_control_mirror_flips_hemisphere():
    t_f = analytic.TWO_CONTROL_TIME
    for t in np.linspace(0.0, t_f, 41):
        a = analytic.two_control_state(t)
        b = analytic.two_control_state(t, mirror=True)
        assert np.allclose(b, a * np.array([1.0, 1.0, -1.0]), atol=1e-12)
    theta = analytic.two_control_polar_angle(0.5 * t_f)
    assert theta > 0.5 * math.pi  # southern hemisphere by default


def test_two_control_adjoint_family():
    p = analytic.two_control_adjoint()
    assert np.allclose(p, [0.0, 1.0 / SQRT3, -1.0])
    assert np.allclose(analytic.two_control_adjoint(p_x=2.5),
                       [2.5, 1.0 / SQRT3, -1.0])
    assert np.allclose(analytic.two_control_adjoint(mirror=True),
                       [0.0, 1.0 / SQRT3, 1.0])


def test_one_control_continuous_times_and_endpoints():
    for delta in (0.1, 0.5, 0.9):
        sol = analytic.one_control_continuous(delta)
        assert sol.t_f == pytest.approx(2.0 * math.pi
                                        / math.sqrt(1.0 + delta * delta))
        assert sol.endpoint_error() < 1e-9
        late = analytic.one_control_continuous(delta, late_switch=True)
        assert late.t_f == sol.t_f
        assert late.endpoint_error() < 1e-9
        assert late.segments[0][1] != pytest.approx(sol.segments[0][1])


def test_one_control_continuous_bang_structure():
    sol = analytic.one_control_continuous(0.5)
    values = [value for value, _ in sol.segments]
    assert values in ([-1.0, 1.0], [1.0, -1.0])
    durations = [d for _, d in sol.segments]
    assert sum(durations) == pytest.approx(sol.t_f)
    assert sol.control(0.0) == values[0]
    assert sol.control(sol.t_f - 1e-9) == values[1]


def test_one_control_validation():
    with pytest.raises(ValueError):
        analytic.one_control_continuous(1.5)
    with pytest.raises(ValueError):
        analytic.one_control_adjoint(-1.2)


def test_lz_boundary_states_are_ground_eigenstates():
    for omega in (0.25, 0.5, 1.0):
        x_i, x_t = analytic.lz_boundary_states(omega)
        for x, delta in ((x_i, -1.0), (x_t, 1.0)):
            assert abs(np.linalg.norm(x) - 1.0) < 1e-12
            field = np.array([omega, 0.0, delta])
            # ground state: Bloch vector anti-parallel to the field
            assert np.allclose(x, -field / np.linalg.norm(field), atol=1e-12)
        assert x_i[2] > 0.0  # initial state in the northern hemisphere


def test_lz_continuous_reference():
    sol = analytic.lz_continuous_reference(0.5, 2.0)
    assert sol.t_f == pytest.approx(4.8322430867870825, abs=1e-10)
    assert sol.endpoint_error() < 1e-9
    values = [value for value, _ in sol.segments]
    assert len(values) == 3
    assert values[1] == 0.0  # singular arc at zero sweep
    assert {abs(values[0]), abs(values[2])} == {2.0}  # saturated bangs
    assert sol.control(0.5 * sol.t_f) == 0.0


def test_lz_adjoint_matches_transversality():
    # The stored adjoint must generate the bang-singular-bang solution:
    # L = X x P starts perpendicular to X and lands on the singular-arc
    # invariant L = (1/omega, 0, 0) at the first switch.
    omega, bound = 0.5, 2.0
    sol = analytic.lz_continuous_reference(omega, bound)
    p0 = np.asarray(sol.adjoint)
    x0 = np.asarray(sol.x_initial)
    l0 = np.cross(x0, p0)
    value1, tau1 = sol.segments[0]
    r = dynamics.rotation_axis(value1, omega, tau1)
    l_switch = r @ l0
    assert np.allclose(l_switch, [1.0 / omega, 0.0, 0.0], atol=1e-6)
    # H_P at t = 0 with the bang control applied
    h0 = l0 @ np.array([omega, 0.0, value1])
    assert h0 == pytest.approx(1.0, abs=1e-6)


def test_linear_discrete_exact_for_all_counts():
    for omega in (0.1, 0.5, 1.0):
        for n in (1, 4, 100, 10_000):
            d = analytic.linear_discrete(omega, n)
            z = analytic.linear_propagate(omega, d.period, d.phases)
            assert abs(z - 1.0) <= 1e-12
            assert d.t_f == pytest.approx(
                (2.0 * n / omega) * math.asin(omega / (2.0 * n)))


def test_linear_discrete_frozen_value():
    d = analytic.linear_discrete(0.5, 4)
    assert d.t_f == pytest.approx(1.0006521887438622, abs=1e-15)


def test_linear_continuous_reference():
    sol = analytic.linear_continuous(0.5)
    assert sol.t_f == pytest.approx(1.0)
    assert sol.endpoint_error(200_000) < 1e-9


def test_linear_asymptotic_gap():
    omega = 0.5
    t_c = analytic.linear_continuous(omega).t_f
    gap = analytic.linear_discrete(omega, 100).t_f / t_c - 1.0
    assert abs(gap * 24.0 * 100 ** 2 / omega ** 2 - 1.0) <= 0.01


def test_linear_gap_slope_is_minus_two():
    omega = 0.5
    ns = np.unique(np.round(np.logspace(1.0, 3.0, 12)).astype(int))
    t_c = analytic.linear_continuous(omega).t_f
    gaps = [analytic.linear_discrete(omega, int(n)).t_f / t_c - 1.0
            for n in ns]
    slope = np.polyfit(np.log(ns), np.log(gaps), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.01)


def test_linear_state_closed_form():
    assert analytic.linear_state(0.5, 0.0) == pytest.approx(0.0)
    # |Z(t)| = t for the optimal law
    for t in (0.2, 0.7, 1.0):
        assert abs(analytic.linear_state(0.5, t)) == pytest.approx(t)


def test_linear_validation():
    with pytest.raises(ValueError):
        analytic.linear_discrete(0.0, 4)
    with pytest.raises(ValueError):
        analytic.linear_discrete(0.5, 0)
    with pytest.raises(ValueError):
        analytic.linear_propagate(0.0, 0.1, np.zeros(3))


def test_sphere_radius_keeps_invariant():
    rng = np.random.default_rng(30)
    for _ in range(50):
        theta = rng.uniform(0.01, math.pi - 0.01)
        phi = rng.uniform(-0.49 * math.pi, 0.49 * math.pi)
        r = analytic.sphere_radius(theta, phi)
        p = r * np.array([math.sin(theta) * math.cos(phi),
                          math.sin(theta) * math.sin(phi),
                          math.cos(theta)])
        assert p[1] ** 2 + p[2] ** 2 == pytest.approx(4.0 / 3.0, abs=1e-12)


def test_sphere_curve_matches_adjoint_family():
    p_x = np.linspace(-4.0, 4.0, 41)
    theta, phi = analytic.sphere_curve(p_x)
    for px, th, ph in zip(p_x, theta, phi):
        p = analytic.two_control_adjoint(p_x=px)
        r = np.linalg.norm(p)
        assert math.cos(th) == pytest.approx(p[2] / r, abs=1e-12)
        if px != 0.0:
            assert math.tan(ph) == pytest.approx(p[1] / px, abs=1e-9)
        assert analytic.sphere_curve_theta(float(ph)) == pytest.approx(
            th, abs=1e-12)


def test_adjoint_sphere_map_zero_set_is_gauge_line():
    from minpulse import shooting
    res = shooting.multistart(
        shooting.two_control_problem(shooting.LockedGrid(3)))
    m = analytic.adjoint_sphere_map(3, res.period, grid_size=200)
    assert m.distance.shape == (200, 200)
    assert np.nanmin(m.distance) < 1e-4
    pts = m.level_set(1e-4)
    assert pts
    # every near-zero adjoint direction lies within one cell of the
    # gauge line through the solved adjoint (on either hemisphere)
    cell = math.pi / 200
    py, pz = res.adjoint[1], res.adjoint[2]
    alphas = py / np.tan(np.linspace(0.002, math.pi - 0.002, 8001))
    norms = np.sqrt(alphas ** 2 + py ** 2 + pz ** 2)
    th = np.arccos(pz / norms)
    ph = np.arctan2(py, alphas)
    cth = np.concatenate([th, math.pi - th])
    cph = np.concatenate([ph, ph])
    for p in pts:
        d = np.maximum(np.abs(cth - p.theta), np.abs(cph - p.phi)).min()
        assert d <= cell
    assert len(m.curve_theta) == len(m.curve_phi)
    assert np.all(np.isfinite(m.curve_theta))


def test_nmr_time_conversion():
    # 2 pi nu t_exp = t with nu = 100 kHz; quarter-turn continuous time
    micro = analytic.nmr_time(analytic.TWO_CONTROL_TIME, 1e5)
    assert micro == pytest.approx(4.330127018922194, abs=1e-9)
    with pytest.raises(ValueError):
        analytic.nmr_time(1.0, 0.0)
