"""Newton shooting for discrete-time extremals.

The boundary-value problem couples the initial adjoint state with the
grid geometry: for a locked grid the interval duration is the fourth
unknown, for a free tail it is the total time and the last interval
absorbs the remainder.  The residual stacks the final-state error with
the normalization of the last interval-averaged Hamiltonian.  A damped
Newton iteration with a finite-difference Jacobian solves the system;
the component of the adjoint update along the initial state is projected
out because it never affects the controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import analytic
from ._kernels import GL_NODES, GL_WEIGHTS, OK, shoot_final
from .errors import (
    AllSeedsFailedError,
    InvalidTailError,
    MinpulseError,
)
from .pmp import (
    ExtremalTrajectory,
    LandauZenerFamily,
    OneControlFamily,
    PiecewiseControl,
    TwoControlFamily,
    _raise_for_status,
    family_code,
    propagate_extremal,
)


@dataclass(frozen=True)
class LockedGrid:
    """Uniform grid with a fixed interval count; the duration is solved."""

    n: int


@dataclass(frozen=True)
class FreeTail:
    """Grid with a fixed interval duration and a shorter final interval.

    The interval count follows from the total time, ``n = ceil(t_f /
    period)``, and the tail ``t_f - (n - 1) period`` is solved jointly
    with the adjoint.
    """

    period: float


@dataclass(frozen=True)
class ShootingProblem:
    """Two-point boundary-value problem for a discrete extremal.

    Parameters
    ----------
    family : TwoControlFamily or OneControlFamily or LandauZenerFamily
        Control family defining the interval maximization rule.
    x_initial, x_target : ndarray
        Unit Bloch vectors at the endpoints.
    mode : LockedGrid or FreeTail
        Grid geometry; selects the fourth unknown.
    tolerance : float
        Residual norm below which the solve counts as converged.
    max_iterations : int
        Newton iteration budget.
    """

    family: TwoControlFamily | OneControlFamily | LandauZenerFamily
    x_initial: np.ndarray
    x_target: np.ndarray
    mode: LockedGrid | FreeTail
    tolerance: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        for name in ("x_initial", "x_target"):
            value = np.ascontiguousarray(getattr(self, name), dtype=float)
            if value.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if abs(np.linalg.norm(value) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a unit vector")
            object.__setattr__(self, name, value)
        if isinstance(self.mode, LockedGrid):
            minimum = 2 if isinstance(self.family, TwoControlFamily) else 1
            if self.mode.n < minimum:
                raise ValueError(
                    f"locked grid needs at least {minimum} intervals")
        elif isinstance(self.mode, FreeTail):
            if self.mode.period <= 0.0:
                raise ValueError("free-tail period must be positive")
        else:
            raise TypeError("mode must be LockedGrid or FreeTail")


@dataclass(frozen=True)
class ShootingResult:
    """Outcome of a shooting solve.

    ``adjoint`` is the initial adjoint state, ``period`` and ``tail``
    the interval durations, ``t_f`` the total time.  ``converged``
    reports whether the residual norm fell below the tolerance; a
    non-converged result still carries the best iterate found.
    """

    adjoint: np.ndarray
    period: float
    tail: float
    n: int
    t_f: float
    residual_norm: float
    trajectory: ExtremalTrajectory
    converged: bool
    iterations: int
    seed_id: int | None = None

    @property
    def controls(self) -> PiecewiseControl:
        """Control schedule of the solved trajectory."""
        return self.trajectory.piecewise_control()


def _grid_layout(problem: ShootingProblem, time: float):
    """Interval count, duration and tail for the time unknown."""
    if isinstance(problem.mode, LockedGrid):
        if time <= 0.0:
            raise InvalidTailError(f"interval duration {time} must be positive")
        return problem.mode.n, time, time
    t_f = time
    period = problem.mode.period
    if t_f <= 0.0:
        raise InvalidTailError(f"total time {t_f} must be positive")
    ratio = t_f / period
    n = int(math.ceil(ratio - 1e-9 * max(ratio, 1.0)))
    n = max(n, 1)
    tail = t_f - (n - 1) * period
    if not 0.0 < tail <= period * (1.0 + 1e-9):
        raise InvalidTailError(
            f"tail {tail} outside (0, {period}] for total time {t_f}")
    return n, period, tail


def residual(problem: ShootingProblem, unknowns: np.ndarray) -> np.ndarray:
    """Boundary residual of the extremal generated by ``unknowns``.

    ``unknowns`` stacks the initial adjoint with the time unknown of the
    grid mode.  Returns the final-state error and the deviation of the
    last interval-averaged Hamiltonian from one.

    Raises
    ------
    InvalidTailError
        If the time unknown produces an invalid grid.
    MinpulseError
        If an interval maximization fails along the trajectory.
    """
    u = np.asarray(unknowns, dtype=float)
    if u.shape != (4,):
        raise ValueError("unknowns must stack the adjoint and the time")
    n, period, tail = _grid_layout(problem, u[3])
    code, par1, par2, mirror = family_code(problem.family)
    status, x, y, z, h_last = shoot_final(
        problem.x_initial, np.ascontiguousarray(u[:3]), code, par1, par2,
        mirror, n, period, tail, GL_NODES, GL_WEIGHTS)
    if status != OK:
        _raise_for_status(status, -1)
    target = problem.x_target
    return np.array([x - target[0], y - target[1], z - target[2],
                     h_last - 1.0])


def solve(problem: ShootingProblem, seed: Sequence[float],
          seed_id: int | None = None) -> ShootingResult:
    """Damped Newton solve from a single seed.

    The Jacobian is built by forward differences with step ``1e-7 (|u| +
    1)`` per unknown (falling back to backward differences when the
    forward point is infeasible) and solved in the least-squares sense.
    The adjoint component of the step along the initial state is removed
    before backtracking, which halves the step up to thirty times until
    the residual norm decreases.  A non-converged return carries the
    best iterate.

    Raises
    ------
    MinpulseError
        If the seed itself cannot be evaluated.
    """
    u = np.array(seed, dtype=float)
    if u.shape != (4,):
        raise ValueError("seed must stack the adjoint and the time")
    gauge = problem.x_initial

    def evaluate(point):
        try:
            return residual(problem, point)
        except MinpulseError:
            return None

    res = residual(problem, u)
    norm = float(np.linalg.norm(res))
    iterations = 0
    converged = norm < problem.tolerance
    while not converged and iterations < problem.max_iterations:
        iterations += 1
        jac = np.empty((4, 4))
        singular = False
        for i in range(4):
            step = 1e-7 * (abs(u[i]) + 1.0)
            forward = u.copy()
            forward[i] += step
            probe = evaluate(forward)
            if probe is not None:
                jac[:, i] = (probe - res) / step
                continue
            backward = u.copy()
            backward[i] -= step
            probe = evaluate(backward)
            if probe is None:
                singular = True
                break
            jac[:, i] = (res - probe) / step
        if singular:
            break
        dx = np.linalg.lstsq(jac, -res, rcond=1e-8)[0]
        dx[:3] -= (dx[:3] @ gauge) * gauge
        alpha = 1.0
        accepted = False
        for _ in range(30):
            trial = u + alpha * dx
            trial_res = evaluate(trial)
            if trial_res is not None:
                trial_norm = float(np.linalg.norm(trial_res))
                if trial_norm < norm:
                    u, res, norm = trial, trial_res, trial_norm
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break
        converged = norm < problem.tolerance
    n, period, tail = _grid_layout(problem, u[3])
    trajectory = propagate_extremal(problem.x_initial, u[:3], problem.family,
                                    n, period, tail)
    t_f = n * period if isinstance(problem.mode, LockedGrid) else float(u[3])
    return ShootingResult(adjoint=u[:3].copy(), period=period, tail=tail, n=n,
                          t_f=t_f, residual_norm=norm, trajectory=trajectory,
                          converged=converged, iterations=iterations,
                          seed_id=seed_id)


@lru_cache(maxsize=16)
def _lz_reference(omega: float, bound: float) -> analytic.ContinuousSolution:
    return analytic.lz_continuous_reference(omega, bound)


def _continuous_time(problem: ShootingProblem) -> float:
    """Continuous-limit minimum time of the problem family."""
    family = problem.family
    if isinstance(family, TwoControlFamily):
        return analytic.TWO_CONTROL_TIME
    if isinstance(family, OneControlFamily):
        return 2.0 * math.pi / math.sqrt(1.0 + family.delta ** 2)
    return _lz_reference(family.omega, family.bound).t_f


def default_seeds(problem: ShootingProblem, perturbations: int = 20,
                  sigma: float = 0.1, rng_seed: int = 42) -> list[np.ndarray]:
    """Deterministic seed list built from the continuous-limit solution.

    The leading seeds pair the analytic adjoint with the rescaled
    continuous time; Gaussian perturbations of the first seed follow.
    The one-control family adds the opposite bang branch.  The
    sweep-bound family has many nearby extremal branches and a
    root-selection landscape that traps plain perturbations, so it
    draws adjoints from a cone around the pulled-back continuous
    adjoint with randomized amplitude and jittered interval lengths.
    """
    t_ref = _continuous_time(problem)
    if isinstance(problem.mode, LockedGrid):
        def clock(scale):
            return scale * t_ref / problem.mode.n
    else:
        def clock(scale):
            return scale * t_ref
    rng = np.random.default_rng(rng_seed)
    family = problem.family
    seeds = []
    if isinstance(family, TwoControlFamily):
        adjoint = analytic.two_control_adjoint(mirror=family.mirror)
        for scale in (1.01, 1.0, 1.05, 1.1):
            seeds.append(np.append(adjoint, clock(scale)))
    elif isinstance(family, OneControlFamily):
        for first in (-1.0, 1.0):
            adjoint = analytic.one_control_adjoint(family.delta, first)
            for scale in (1.01, 1.05):
                seeds.append(np.append(adjoint, clock(scale)))
    else:
        reference = _lz_reference(family.omega, family.bound)
        base = np.asarray(reference.adjoint)
        norm = np.linalg.norm(base)
        for scale in (1.0, 1.25, 1.5, 2.0):
            seeds.append(np.append(scale * base, clock(1.02)))
        for _ in range(120):
            direction = base + 0.25 * norm * rng.normal(0.0, 1.0, 3)
            seeds.append(np.append(rng.uniform(0.9, 2.2) * direction,
                                   clock(rng.uniform(1.0, 1.12))))
        return seeds
    base = seeds[0]
    spread = np.array([1.0, 1.0, 1.0, 0.02 * base[3]])
    for _ in range(perturbations):
        seeds.append(base + rng.normal(0.0, sigma, 4) * spread)
    return seeds


def multistart(problem: ShootingProblem,
               seeds: Sequence[Sequence[float]] | None = None,
               perturbations: int = 20, sigma: float = 0.1,
               rng_seed: int = 42) -> ShootingResult:
    """Best converged solve over a seed list.

    Runs :func:`solve` from every seed and returns the converged result
    with the smallest total time.  Seeds that fail to evaluate are
    skipped.

    Raises
    ------
    AllSeedsFailedError
        If no seed converges.
    """
    if seeds is None:
        seeds = default_seeds(problem, perturbations=perturbations,
                              sigma=sigma, rng_seed=rng_seed)
    best = None
    for seed_id, seed in enumerate(seeds):
        try:
            result = solve(problem, seed, seed_id=seed_id)
        except MinpulseError:
            continue
        if not result.converged:
            continue
        if best is None or result.t_f < best.t_f - 1e-12:
            best = result
    if best is None:
        raise AllSeedsFailedError(f"none of the {len(seeds)} seeds converged")
    return best


def convergence_sweep(problem: ShootingProblem,
                      counts: Sequence[int] | None = None,
                      periods: Sequence[float] | None = None
                      ) -> list[ShootingResult]:
    """Solve a family of grids, warm-starting each from the previous one.

    Exactly one of ``counts`` (locked grids) or ``periods`` (free tails)
    must be given; the problem's mode is replaced per row.  Each row is
    first attempted from the previous converged solution with the time
    unknown rescaled, then from the default seed list.  Rows that do not
    converge are kept with their flag; rows whose every seed fails to
    evaluate are skipped.
    """
    if (counts is None) == (periods is None):
        raise ValueError("give exactly one of counts or periods")
    if counts is not None:
        modes = [LockedGrid(int(n)) for n in counts]
    else:
        modes = [FreeTail(float(t)) for t in periods]
    rows = []
    previous = None
    for mode in modes:
        row_problem = replace(problem, mode=mode)
        candidates = []
        if previous is not None and previous.converged:
            if isinstance(mode, LockedGrid):
                warm_time = previous.t_f / mode.n
            else:
                warm_time = previous.t_f
            candidates.append(np.append(previous.adjoint, warm_time))
        best = None
        for seed_id, seed in enumerate(candidates):
            try:
                result = solve(row_problem, seed, seed_id=seed_id)
            except MinpulseError:
                continue
            if result.converged:
                best = result
                break
            best = result
        if best is None or not best.converged:
            try:
                best = multistart(row_problem)
            except AllSeedsFailedError:
                pass
        if best is None:
            continue
        rows.append(best)
        if best.converged:
            previous = best
    return rows


def two_control_problem(mode, mirror: bool = False,
                        **options) -> ShootingProblem:
    """Resonant two-control transfer from ``(1,0,0)`` to ``(0,1,0)``."""
    return ShootingProblem(family=TwoControlFamily(mirror=mirror),
                           x_initial=np.array([1.0, 0.0, 0.0]),
                           x_target=np.array([0.0, 1.0, 0.0]),
                           mode=mode, **options)


def one_control_problem(mode, delta: float, bound: float = 1.0,
                        **options) -> ShootingProblem:
    """Pole-to-pole transfer with one bounded transverse control."""
    return ShootingProblem(family=OneControlFamily(delta=delta, bound=bound),
                           x_initial=np.array([0.0, 0.0, 1.0]),
                           x_target=np.array([0.0, 0.0, -1.0]),
                           mode=mode, **options)


def landau_zener_problem(mode, omega: float, bound: float = 2.0,
                         **options) -> ShootingProblem:
    """Adiabatic-state transfer with a bounded sweep control."""
    x_initial, x_target = analytic.lz_boundary_states(omega)
    return ShootingProblem(family=LandauZenerFamily(omega=omega, bound=bound),
                           x_initial=x_initial, x_target=x_target,
                           mode=mode, **options)
