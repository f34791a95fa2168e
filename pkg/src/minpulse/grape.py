"""Fixed-time fidelity maximization for piecewise constant two-level pulses.

The control is the phase of a unit transverse field: over interval k the
spinor propagator is ``U_k = exp(-i T (cos(phi_k) sx + sin(phi_k) sy)/2)``
and the figure of merit is ``J = |<psi_f|psi_N>|^2``.  Three gradient
engines share one ascent loop: a first-order split-operator approximation,
an auxiliary-matrix construction that doubles the system size, and a
closed-form evaluation of the interval moment integrals.  The last two are
exact and produce identical iterate sequences; the closed form avoids the
matrix exponentials.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from . import _kernels as _k
from .dynamics import PAULI_X, PAULI_Y

__all__ = [
    "METHODS",
    "GrapeProblem",
    "GradientReport",
    "AscentStep",
    "OptimizeResult",
    "TimeScanRow",
    "TimeScanResult",
    "quarter_turn_problem",
    "fidelity",
    "gradient",
    "gradient_pmp",
    "gradient_aux",
    "gradient_split",
    "optimize",
    "time_scan",
]

#: Gradient engines: first-order split operator, exact auxiliary matrix,
#: exact closed-form interval integrals.
METHODS = ("split", "aux", "pmp")

_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class GrapeProblem:
    """Fixed-time phase-control problem for a two-level system.

    Parameters
    ----------
    psi_initial, psi_target : ndarray, shape (2,), complex
        Normalized initial and target spinors.
    n : int
        Number of piecewise constant intervals.
    t_f : float
        Total control time; the sampling period is ``t_f / n``.
    method : str
        Gradient engine, one of ``METHODS``.
    """

    psi_initial: np.ndarray
    psi_target: np.ndarray
    n: int
    t_f: float
    method: str = "pmp"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"interval count must be >= 1, got {self.n}")
        if not self.t_f > 0.0:
            raise ValueError(f"total time must be positive, got {self.t_f}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("psi_initial", "psi_target"):
            psi = np.ascontiguousarray(getattr(self, name), dtype=np.complex128)
            if psi.shape != (2,):
                raise ValueError(f"{name} must be a 2-spinor, got shape {psi.shape}")
            norm = math.sqrt(float(np.vdot(psi, psi).real))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"{name} must be normalized, |{name}| = {norm}")
            object.__setattr__(self, name, psi)

    @property
    def period(self) -> float:
        """Sampling period ``t_f / n``."""
        return self.t_f / self.n


@dataclass(frozen=True)
class GradientReport:
    """Gradient of the fidelity with respect to the interval phases.

    Attributes
    ----------
    values : ndarray, shape (n,)
        Per-interval derivatives dJ/dphi_k.
    method : str
        Engine that produced the values.
    fidelity_value : float
        J at the evaluation point.
    """

    values: np.ndarray
    method: str
    fidelity_value: float


class AscentStep(NamedTuple):
    """One recorded ascent iterate."""

    iteration: int
    fidelity_value: float
    gradient_norm: float
    phases: np.ndarray


@dataclass(frozen=True)
class OptimizeResult:
    """Outcome of a gradient-ascent run.

    ``status`` is ``"converged"`` (gradient norm below tolerance),
    ``"stalled"`` (line search found no acceptable step; the last iterate
    is reported as-is) or ``"exhausted"`` (iteration budget spent).
    """

    phases: np.ndarray
    fidelity_value: float
    gradient_norm: float
    iterations: int
    status: str
    steps: tuple = field(repr=False, default=())

    @property
    def distance(self) -> float:
        """Distance to the target, 1 - J."""
        return 1.0 - self.fidelity_value


class TimeScanRow(NamedTuple):
    """Best multistart outcome at one final time."""

    t_f: float
    distance: float
    phases: np.ndarray


@dataclass(frozen=True)
class TimeScanResult:
    """Minimum-time scan: best distance to target per grid time."""

    rows: tuple
    threshold: float = 1e-6

    @property
    def minimum_time(self) -> float | None:
        """Smallest grid time whose best distance meets the threshold."""
        hits = [row.t_f for row in self.rows if row.distance <= self.threshold]
        return min(hits) if hits else None


def quarter_turn_problem(n: int, t_f: float, method: str = "pmp") -> GrapeProblem:
    """Benchmark problem: a quarter turn between equatorial states.

    The Bloch images of the two spinors are (1, 0, 0) and (0, 1, 0), the
    same boundary pair as the two-control shooting benchmark.
    """
    psi0 = np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2.0)
    psif = np.array([1.0, 1.0j], dtype=np.complex128) / math.sqrt(2.0)
    return GrapeProblem(psi0, psif, n, t_f, method)


def _check_phases(problem: GrapeProblem, phases) -> np.ndarray:
    phases = np.ascontiguousarray(phases, dtype=np.float64)
    if phases.shape != (problem.n,):
        raise ValueError(
            f"expected {problem.n} phases, got shape {phases.shape}")
    return phases


def _states(problem: GrapeProblem, phases: np.ndarray):
    psis = np.empty((problem.n + 1, 2), dtype=np.complex128)
    chis = np.empty((problem.n + 1, 2), dtype=np.complex128)
    j = _k.grape_states(phases, problem.period, problem.psi_initial,
                        problem.psi_target, psis, chis)
    return j, psis, chis


def fidelity(problem: GrapeProblem, phases) -> tuple:
    """Figure of merit and the forward/backward state sweeps.

    Parameters
    ----------
    problem : GrapeProblem
    phases : array_like, shape (n,)
        Interval phases.

    Returns
    -------
    j : float
        ``|<psi_f|psi_N>|^2``.
    forward : ndarray, shape (n + 1, 2)
        ``forward[k]`` is the state at time k T.
    backward : ndarray, shape (n + 1, 2)
        ``backward[k]`` is the target propagated back to time k T, so
        ``J = |<backward[k+1]|U_k|forward[k]>|^2`` for every k.
    """
    phases = _check_phases(problem, phases)
    return _states(problem, phases)


def gradient(problem: GrapeProblem, phases) -> GradientReport:
    """Gradient of J using the engine selected by ``problem.method``."""
    engine = {"split": gradient_split, "aux": gradient_aux,
              "pmp": gradient_pmp}[problem.method]
    return engine(problem, phases)


def gradient_pmp(problem: GrapeProblem, phases, quadrature: bool = False) -> GradientReport:
    """Exact gradient from the interval moment integrals.

    Over interval k the derivative is ``-sin(phi_k) I_x + cos(phi_k) I_y``
    where I_x and I_y are time integrals of cross matrix elements of the
    transverse spin operators between the forward and backward sweeps.  For
    a two-level system the integrands are trigonometric polynomials of the
    rotation angle, so the integrals have closed forms.

    Parameters
    ----------
    problem : GrapeProblem
    phases : array_like, shape (n,)
    quadrature : bool
        Evaluate the integrals with 32-point Gauss-Legendre quadrature
        instead of the closed form.  Agrees with the closed form to
        1e-12; kept as a template for Hamiltonians without one.
    """
    phases = _check_phases(problem, phases)
    j, psis, chis = _states(problem, phases)
    grad = np.empty(problem.n)
    if quadrature:
        _gradient_pmp_quadrature(problem, phases, psis, chis, grad)
    else:
        _k.grape_gradient_pmp(phases, problem.period, psis, chis, grad)
    return GradientReport(grad, "pmp", j)


def _gradient_pmp_quadrature(problem, phases, psis, chis, grad):
    tau = problem.period
    ov = np.vdot(psis[-1], chis[-1])
    for k, phi in enumerate(phases):
        ix = 0.0
        iy = 0.0
        for node, weight in zip(_k.GL_NODES, _k.GL_WEIGHTS):
            t = node * tau
            psi = _k.su2_step(phi, t, psis[k, 0], psis[k, 1])
            chi = _k.su2_step(phi, t, chis[k, 0], chis[k, 1])
            psi = np.array(psi)
            chi = np.array(chi)
            ix += weight * (ov * np.vdot(chi, PAULI_X @ psi)).imag
            iy += weight * (ov * np.vdot(chi, PAULI_Y @ psi)).imag
        ix *= tau
        iy *= tau
        grad[k] = -math.sin(phi) * ix + math.cos(phi) * iy


def gradient_aux(problem: GrapeProblem, phases) -> GradientReport:
    """Exact gradient from the auxiliary-matrix exponential.

    For each interval the block matrix [[A, B], [0, A]] with
    ``A = -i T H(phi_k)`` and ``B = -i T dH/dphi_k`` is exponentiated;
    the upper-right block of the result is the exact derivative of the
    interval propagator, chained into dJ/dphi_k.  The system size doubles
    but no structure of H is used, so this route is independent of the
    closed form and must agree with it to 1e-10.
    """
    phases = _check_phases(problem, phases)
    j, psis, chis = _states(problem, phases)
    tau = problem.period
    ov = np.vdot(psis[-1], chis[-1])
    grad = np.empty(problem.n)
    block = np.zeros((4, 4), dtype=np.complex128)
    for k, phi in enumerate(phases):
        ham = 0.5 * (math.cos(phi) * PAULI_X + math.sin(phi) * PAULI_Y)
        dham = 0.5 * (-math.sin(phi) * PAULI_X + math.cos(phi) * PAULI_Y)
        block[:2, :2] = -1j * tau * ham
        block[2:, 2:] = -1j * tau * ham
        block[:2, 2:] = -1j * tau * dham
        du = expm(block)[:2, 2:]
        grad[k] = 2.0 * (ov * np.vdot(chis[k + 1], du @ psis[k])).real
    return GradientReport(grad, "aux", j)


def gradient_split(problem: GrapeProblem, phases) -> GradientReport:
    """First-order gradient of the split-operator scheme.

    Approximates the propagator derivative by ``-i T (dH/dphi_k) U_k``,
    dropping the time ordering inside the interval.  The componentwise
    error relative to the exact gradient is O(T).
    """
    phases = _check_phases(problem, phases)
    j, psis, chis = _states(problem, phases)
    grad = np.empty(problem.n)
    _k.grape_gradient_split(phases, problem.period, psis, chis, grad)
    return GradientReport(grad, "split", j)


def optimize(problem: GrapeProblem, phases_init, *,
             gradient_tolerance: float = 1e-10,
             max_iterations: int = 10_000,
             armijo: float = 1e-4) -> OptimizeResult:
    """Gradient ascent on J with Armijo backtracking.

    Each iteration takes the full gradient step (initial step 1.0) and
    halves it until ``J(phi + a g) >= J(phi) + c a |g|^2`` with c the
    Armijo constant.  Exact-gradient engines go through identical update
    arithmetic, so their iterate sequences coincide to rounding.

    Parameters
    ----------
    problem : GrapeProblem
    phases_init : array_like, shape (n,)
        Starting phases.
    gradient_tolerance : float
        Stop once the gradient norm falls below this value.
    max_iterations : int
        Iteration budget.
    armijo : float
        Sufficient-increase constant c.

    Returns
    -------
    OptimizeResult
        Final iterate with the full recorded trace; ``status`` reports
        whether the run converged, stalled or exhausted its budget.
    """
    phases = _check_phases(problem, phases_init).copy()
    steps = []
    status = "exhausted"
    iteration = 0
    j_cur = math.nan
    gnorm = math.nan
    for iteration in range(max_iterations + 1):
        report = gradient(problem, phases)
        j_cur = report.fidelity_value
        grad = report.values
        gsq = float(grad @ grad)
        gnorm = math.sqrt(gsq)
        steps.append(AscentStep(iteration, j_cur, gnorm, phases.copy()))
        if gnorm < gradient_tolerance:
            status = "converged"
            break
        if iteration == max_iterations:
            break
        alpha = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            trial = phases + alpha * grad
            j_new = _k.grape_fidelity(trial, problem.period,
                                      problem.psi_initial, problem.psi_target)
            if j_new >= j_cur + armijo * alpha * gsq:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            status = "stalled"
            break
        phases = trial
    return OptimizeResult(phases, j_cur, gnorm, iteration, status, tuple(steps))


def _ascent_fast(problem: GrapeProblem, phases: np.ndarray,
                 gradient_tolerance: float, max_iterations: int,
                 armijo: float) -> float:
    """One start without trace recording; returns (1 - J, final phases)."""
    if problem.method == "pmp":
        n = problem.n
        work = (np.empty((n + 1, 2), dtype=np.complex128),
                np.empty((n + 1, 2), dtype=np.complex128),
                np.empty(n), np.empty(n))
        phases = phases.copy()
        _, j, _, _ = _k.ascent_pmp(phases, problem.period, problem.psi_initial,
                                   problem.psi_target, gradient_tolerance,
                                   max_iterations, armijo, *work)
        return 1.0 - j, phases
    result = optimize(problem, phases, gradient_tolerance=gradient_tolerance,
                      max_iterations=max_iterations, armijo=armijo)
    return result.distance, result.phases


def _scan_row(problem: GrapeProblem, t_f: float, starts: int,
              seed: np.random.SeedSequence, gradient_tolerance: float,
              max_iterations: int, armijo: float) -> TimeScanRow:
    row_problem = GrapeProblem(problem.psi_initial, problem.psi_target,
                               problem.n, t_f, problem.method)
    rng = np.random.default_rng(seed)
    best = math.inf
    best_phases = None
    for _ in range(starts):
        init = rng.uniform(-math.pi, math.pi, problem.n)
        distance, phases = _ascent_fast(row_problem, init, gradient_tolerance,
                                        max_iterations, armijo)
        if distance < best:
            best = distance
            best_phases = phases
    return TimeScanRow(t_f, best, best_phases)


def time_scan(problem: GrapeProblem, times, *, starts: int = 50,
              rng_seed: int = 7, workers: int = 1,
              threshold: float = 1e-6,
              gradient_tolerance: float = 1e-10,
              max_iterations: int = 10_000,
              armijo: float = 1e-4) -> TimeScanResult:
    """Minimum-time scan: multistart ascent at each grid time.

    ``problem`` serves as the template (states, interval count, engine);
    its ``t_f`` is replaced by each grid value in turn.  Rows are seeded
    independently from ``rng_seed``, so the result does not depend on the
    worker count.

    Parameters
    ----------
    problem : GrapeProblem
        Template problem.
    times : array_like
        Final-time grid.
    starts : int
        Random initializations per grid time.
    rng_seed : int
        Seed for the per-row generator streams.
    workers : int
        Rows run concurrently on this many threads when > 1.
    threshold : float
        Distance below which a grid time counts as reachable.

    Returns
    -------
    TimeScanResult
        One row per grid time, in input order; ``minimum_time`` is the
        smallest reachable grid time, or None.
    """
    times = [float(t) for t in np.asarray(times).ravel()]
    seeds = np.random.SeedSequence(rng_seed).spawn(len(times))
    args = [(problem, t, starts, seed, gradient_tolerance, max_iterations,
             armijo) for t, seed in zip(times, seeds)]
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda a: _scan_row(*a), args))
    else:
        rows = [_scan_row(*a) for a in args]
    return TimeScanResult(tuple(rows), threshold)
