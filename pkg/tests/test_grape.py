"""Gradient ascent: exact gradients, route agreement, scan behavior."""

import numpy as np
import pytest

from minpulse import dynamics, grape


def quarter_turn_phases(rng, n):
    return rng.uniform(-np.pi, np.pi, n)


def test_quarter_turn_states_sit_on_the_equator():
    problem = grape.quarter_turn_problem(4, 2.8)
    assert np.allclose(dynamics.bloch_vector(problem.psi_initial),
                       [1.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(dynamics.bloch_vector(problem.psi_target),
                       [0.0, 1.0, 0.0], atol=1e-12)
    assert np.isclose(problem.period, 0.7)


def test_fidelity_overlap_is_constant_along_the_pair():
    problem = grape.quarter_turn_problem(6, 2.75)
    rng = np.random.default_rng(3)
    phases = quarter_turn_phases(rng, 6)
    j, forward, backward = grape.fidelity(problem, phases)
    overlaps = np.array([np.vdot(backward[k], forward[k])
                         for k in range(7)])
    assert np.allclose(overlaps, overlaps[0], atol=1e-12)
    assert np.isclose(j, abs(overlaps[0]) ** 2, atol=1e-12)
    norms = np.linalg.norm(forward, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_exact_gradient_routes_agree():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = rng.integers(2, 9)
        t_f = rng.uniform(0.5, 6.0)
        phases = quarter_turn_phases(rng, n)
        problem = grape.quarter_turn_problem(int(n), t_f)
        g_pmp = grape.gradient_pmp(problem, phases).values
        g_aux = grape.gradient_aux(problem, phases).values
        g_quad = grape.gradient_pmp(problem, phases, quadrature=True).values
        assert np.allclose(g_pmp, g_aux, atol=1e-10)
        assert np.allclose(g_pmp, g_quad, atol=1e-10)


def test_exact_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    problem = grape.quarter_turn_problem(5, 2.9)
    phases = quarter_turn_phases(rng, 5)
    grad = grape.gradient_pmp(problem, phases).values
    h = 1e-5
    for k in range(5):
        plus = phases.copy()
        plus[k] += h
        minus = phases.copy()
        minus[k] -= h
        fd = (grape.fidelity(problem, plus)[0]
              - grape.fidelity(problem, minus)[0]) / (2 * h)
        assert np.isclose(grad[k], fd, atol=1e-6)


def test_split_gradient_error_halves_with_the_step():
    rng = np.random.default_rng(13)
    phases = quarter_turn_phases(rng, 5)
    problem = grape.quarter_turn_problem(5, 2.8)
    exact = grape.gradient_pmp(problem, phases).values
    coarse = np.max(np.abs(grape.gradient_split(problem, phases).values
                           - exact))
    doubled = grape.quarter_turn_problem(10, 2.8)
    repeated = np.repeat(phases, 2)
    exact2 = grape.gradient_pmp(doubled, repeated).values
    split2 = grape.gradient_split(doubled, repeated).values
    fine = np.max(np.abs((split2 - exact2).reshape(5, 2).sum(axis=1)))
    assert 1.5 <= coarse / fine <= 2.5


def test_gradient_dispatch_follows_problem_method():
    rng = np.random.default_rng(14)
    phases = quarter_turn_phases(rng, 4)
    base = grape.quarter_turn_problem(4, 2.8)
    for method in grape.METHODS:
        problem = grape.GrapeProblem(base.psi_initial, base.psi_target,
                                     4, 2.8, method)
        report = grape.gradient(problem, phases)
        assert report.method == method
        reference = getattr(grape, f"gradient_{method}")(problem, phases)
        assert np.array_equal(report.values, reference.values)


def test_ascent_increases_fidelity_monotonically():
    problem = grape.quarter_turn_problem(5, 2.8)
    rng = np.random.default_rng(1)
    result = grape.optimize(problem, quarter_turn_phases(rng, 5))
    values = [step.fidelity_value for step in result.steps]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert result.fidelity_value >= 1.0 - 1e-12
    assert result.distance <= 1e-6


def test_optimize_statuses():
    problem = grape.quarter_turn_problem(5, 2.8)
    rng = np.random.default_rng(1)
    phases = quarter_turn_phases(rng, 5)
    assert grape.optimize(problem, phases,
                          gradient_tolerance=1e-6).status == "converged"
    assert grape.optimize(problem, phases,
                          max_iterations=1).status == "exhausted"
    stalled = grape.optimize(problem, phases, armijo=1e6)
    assert stalled.status == "stalled"
    assert np.array_equal(stalled.phases, phases)


def test_fast_ascent_matches_recorded_loop_exactly():
    problem = grape.quarter_turn_problem(5, 2.8)
    rng = np.random.default_rng(1)
    phases = quarter_turn_phases(rng, 5)
    result = grape.optimize(problem, phases)
    distance, final = grape._ascent_fast(problem, phases.copy(),
                                         1e-10, 10_000, 1e-4)
    assert distance == result.distance
    assert np.array_equal(final, result.phases)


def test_exact_routes_produce_identical_iterate_sequences():
    base = grape.quarter_turn_problem(5, 2.8)
    aux = grape.GrapeProblem(base.psi_initial, base.psi_target, 5, 2.8,
                             "aux")
    rng = np.random.default_rng(2)
    phases = quarter_turn_phases(rng, 5)
    run_pmp = grape.optimize(base, phases, max_iterations=2000)
    run_aux = grape.optimize(aux, phases, max_iterations=2000)
    divergence = max(abs(a.fidelity_value - b.fidelity_value)
                     for a, b in zip(run_pmp.steps, run_aux.steps))
    assert divergence <= 1e-9
    for a, b in zip(run_pmp.steps, run_aux.steps):
        if a.gradient_norm < 1e-6:
            break
        assert np.allclose(a.phases, b.phases, atol=1e-9)


def test_time_scan_finds_the_threshold_crossing():
    problem = grape.quarter_turn_problem(5, 2.8)
    times = [2.70, 2.76, 2.80]
    scan = grape.time_scan(problem, times, starts=6, rng_seed=7)
    assert [row.t_f for row in scan.rows] == pytest.approx(times)
    assert scan.rows[0].distance > 1e-6
    assert scan.rows[1].distance <= 1e-6
    assert scan.minimum_time == pytest.approx(2.76)


def test_time_scan_is_deterministic_and_worker_invariant():
    problem = grape.quarter_turn_problem(4, 2.8)
    times = [2.74, 2.78]
    first = grape.time_scan(problem, times, starts=4, rng_seed=9)
    second = grape.time_scan(problem, times, starts=4, rng_seed=9)
    threaded = grape.time_scan(problem, times, starts=4, rng_seed=9,
                               workers=2)
    for a, b in zip(first.rows, second.rows):
        assert a.distance == b.distance
        assert np.array_equal(a.phases, b.phases)
    for a, b in zip(first.rows, threaded.rows):
        assert a.distance == b.distance
        assert np.array_equal(a.phases, b.phases)


def test_problem_validation():
    base = grape.quarter_turn_problem(4, 2.8)
    with pytest.raises(ValueError):
        grape.GrapeProblem(base.psi_initial, base.psi_target, 0, 2.8, "pmp")
    with pytest.raises(ValueError):
        grape.GrapeProblem(base.psi_initial, base.psi_target, 4, -1.0, "pmp")
    with pytest.raises(ValueError):
        grape.GrapeProblem(base.psi_initial, base.psi_target, 4, 2.8,
                           "newton")
    with pytest.raises(ValueError):
        grape.GrapeProblem(np.array([1.0, 1.0]), base.psi_target, 4, 2.8,
                           "pmp")
    with pytest.raises(ValueError):
        grape.optimize(base, np.zeros(3))
