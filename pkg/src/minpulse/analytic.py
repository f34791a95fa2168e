"""Closed-form continuous-limit solutions and reference maps.

Each solver family has an exact (or numerically exact) continuous-limit
solution: it provides the reference minimum time, a control law that can
be simulated to check boundary conditions, and the adjoint data used to
seed the discrete shooting solver.  The module also hosts the linear
single-spring model, the adjoint-sphere distance map, and the physical
time conversion for experimental pulse amplitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import dynamics
from ._kernels import (
    FAMILY_TWO_CONTROL,
    GL_NODES,
    GL_WEIGHTS,
    map_grid_distances,
)
from .dynamics import NDArrayFloat
from .errors import NoConvergenceError

SQRT3 = math.sqrt(3.0)

#: Minimum time of the resonant two-control problem in the continuous limit.
TWO_CONTROL_TIME = 0.5 * math.pi * SQRT3


@dataclass(frozen=True)
class ContinuousSolution:
    """A continuous-limit time-optimal solution.

    Parameters
    ----------
    family : str
        One of ``"two_control"``, ``"one_control"``, ``"landau_zener"``
        or ``"linear"``.
    t_f : float
        Minimum transfer time.
    control : callable
        Control value at time ``t`` in ``[0, t_f]``.
    x_initial, x_target : ndarray
        Boundary states.  Bloch vectors for the spin families, the
        ``(x, y)`` plane coordinates for the linear model.
    parameter : float or None
        Fixed model parameter: the detuning for ``"one_control"``, the
        coupling or offset for ``"landau_zener"`` and ``"linear"``.
    segments : tuple of (value, duration) or None
        Piecewise-constant schedule when the optimal control is
        bang-bang or bang-singular-bang.
    adjoint : ndarray or None
        A representative initial adjoint state of the optimal family,
        used to seed the discrete shooting solver.
    """

    family: str
    t_f: float
    control: Callable[[float], float]
    x_initial: NDArrayFloat
    x_target: NDArrayFloat
    parameter: float | None = None
    segments: tuple[tuple[float, float], ...] | None = None
    adjoint: NDArrayFloat | None = None

    def propagate(self, n_steps: int = 200_000) -> NDArrayFloat:
        """Simulate the stored control law and return the final state.

        Piecewise-constant schedules are propagated with exact interval
        rotations; smooth laws are sampled at interval midpoints with
        ``n_steps`` substeps.
        """
        if self.family == "linear":
            tau = self.t_f / n_steps
            mids = (np.arange(n_steps) + 0.5) * tau
            phases = np.array([self.control(t) for t in mids])
            z0 = complex(self.x_initial[0], self.x_initial[1])
            z = linear_propagate(self.parameter, tau, phases, z0)
            return np.array([z.real, z.imag])
        x = np.array(self.x_initial, dtype=float)
        if self.segments is not None:
            for value, duration in self.segments:
                x = _segment_rotation(self.family, self.parameter,
                                      value, duration) @ x
            return x
        tau = self.t_f / n_steps
        for k in range(n_steps):
            value = self.control((k + 0.5) * tau)
            x = _segment_rotation(self.family, self.parameter, value, tau) @ x
        return x

    def endpoint_error(self, n_steps: int = 200_000) -> float:
        """Distance between the simulated final state and the target."""
        return float(np.linalg.norm(self.propagate(n_steps) - self.x_target))


def _segment_rotation(family, parameter, value, duration):
    if family == "two_control":
        return dynamics.rotation_two_control(value, duration)
    if family == "one_control":
        return dynamics.rotation_axis(parameter, value, duration)
    if family == "landau_zener":
        return dynamics.rotation_axis(value, parameter, duration)
    raise ValueError(f"unknown family {family!r}")


def _schedule_control(segments):
    edges = np.cumsum([duration for _, duration in segments])
    values = [value for value, _ in segments]

    def control(t):
        for edge, value in zip(edges, values):
            if t < edge:
                return value
        return values[-1]

    return control


# ---------------------------------------------------------------------------
# two-control resonant problem
# ---------------------------------------------------------------------------

def two_control_adjoint(p_x: float = 0.0, mirror: bool = False) -> NDArrayFloat:
    """Initial adjoint of the continuous two-control family.

    The optimal adjoints form a one-parameter family ``(p_x, 1/sqrt(3),
    -1)``; the first component is free and does not affect the controls.
    The mirror branch flips the sign of the third component.
    """
    return np.array([p_x, 1.0 / SQRT3, 1.0 if mirror else -1.0])


def two_control_continuous(mirror: bool = False) -> ContinuousSolution:
    """Continuous-limit solution of the resonant two-control problem.

    The optimal phase decreases linearly, ``phi(t) = pi/2 - t/sqrt(3)``,
    and steers ``(1, 0, 0)`` to ``(0, 1, 0)`` in time ``pi sqrt(3)/2``.
    The mirror branch starts at ``-pi/2`` and runs through the opposite
    hemisphere in the same time.
    """
    phi0 = -0.5 * math.pi if mirror else 0.5 * math.pi

    def control(t, _phi0=phi0):
        return _phi0 - t / SQRT3

    return ContinuousSolution(
        family="two_control",
        t_f=TWO_CONTROL_TIME,
        control=control,
        x_initial=np.array([1.0, 0.0, 0.0]),
        x_target=np.array([0.0, 1.0, 0.0]),
        adjoint=two_control_adjoint(mirror=mirror),
    )


def two_control_state(t: float, mirror: bool = False) -> NDArrayFloat:
    """Closed-form state of the continuous two-control solution.

    The trajectory is a rotating-frame product: a fixed-axis rotation at
    rate ``2/sqrt(3)`` about ``(0, +-sqrt(3)/2, 1/2)`` followed by the
    frame rotation about ``z`` that tracks the control phase.
    """
    axis = np.array([0.0, -0.5 * SQRT3 if mirror else 0.5 * SQRT3, 0.5])
    x = dynamics.rotation_about_axis(axis, 2.0 * t / SQRT3) @ np.array(
        [1.0, 0.0, 0.0])
    return dynamics.rotation_about_axis(np.array([0.0, 0.0, 1.0]),
                                        -t / SQRT3) @ x


def two_control_polar_angle(t: float, mirror: bool = False) -> float:
    """Polar angle of the continuous trajectory at time ``t``.

    The law ``theta(t) = pi/2 + asin(sin(2 t/sqrt(3)) sqrt(3)/2)`` holds
    on the default branch where the angle first increases; the mirror
    branch flips the excursion to the opposite hemisphere.
    """
    s = 0.5 * SQRT3 * math.sin(2.0 * t / SQRT3)
    excursion = math.asin(s)
    return 0.5 * math.pi - excursion if mirror else 0.5 * math.pi + excursion


# ---------------------------------------------------------------------------
# one-control problem with fixed detuning
# ---------------------------------------------------------------------------

def one_control_continuous(delta: float, late_switch: bool = False,
                           first_sign: float = -1.0) -> ContinuousSolution:
    """Bang-bang continuous-limit solution of the one-control problem.

    Steers the north pole to the south pole with a single switch.  The
    two mirror solutions switch at ``t1 = (pi - acos(delta^2))/Omega``
    or ``t2 = (pi + acos(delta^2))/Omega`` with ``Omega =
    sqrt(1 + delta^2)``; both need the same total time ``2 pi / Omega``.

    Parameters
    ----------
    delta : float
        Fixed detuning, ``|delta| <= 1``.
    late_switch : bool
        Select the mirror solution that switches at ``t2``.
    first_sign : float
        Sign of the first bang segment, ``+1`` or ``-1``.
    """
    if abs(delta) > 1.0:
        raise ValueError(f"detuning {delta} outside [-1, 1]")
    omega_rate = math.sqrt(1.0 + delta * delta)
    spread = math.acos(delta * delta)
    t_f = 2.0 * math.pi / omega_rate
    switch = (math.pi + spread if late_switch else math.pi - spread) / omega_rate
    first = math.copysign(1.0, first_sign)
    segments = ((first, switch), (-first, t_f - switch))
    adjoint = one_control_adjoint(delta, first)
    return ContinuousSolution(
        family="one_control",
        t_f=t_f,
        control=_schedule_control(segments),
        x_initial=np.array([0.0, 0.0, 1.0]),
        x_target=np.array([0.0, 0.0, -1.0]),
        parameter=delta,
        segments=segments,
        adjoint=adjoint,
    )


def one_control_adjoint(delta: float, first_sign: float = -1.0) -> NDArrayFloat:
    """Initial adjoint compatible with a first bang of sign ``first_sign``.

    With the state at the north pole the angular momentum is ``L(0) =
    (-p_y, p_x, 0)``, so the adjoint ``(p_x, p_y, 0)`` encodes the bang
    sign through ``L_x(0) = -p_y`` and the switching geometry through
    ``p_x``.  The component along the state is free and set to zero.
    """
    if abs(delta) > 1.0:
        raise ValueError(f"detuning {delta} outside [-1, 1]")
    first = math.copysign(1.0, first_sign)
    if abs(delta) < 1e-12:
        l_y = 0.0
    else:
        omega_rate = math.sqrt(1.0 + delta * delta)
        l_y = first * math.sqrt(1.0 - delta ** 4) / (delta * omega_rate)
    return np.array([l_y, -first, 0.0])


# ---------------------------------------------------------------------------
# Landau-Zener-type problem, bounded sweep control
# ---------------------------------------------------------------------------

def lz_boundary_states(omega: float) -> tuple[NDArrayFloat, NDArrayFloat]:
    """Adiabatic boundary states of the bounded-sweep problem.

    The initial and target Bloch vectors are the ground eigenstates of
    the static Hamiltonian at sweep values ``-1`` and ``+1``.
    """
    norm = math.hypot(omega, 1.0)
    x_initial = np.array([-omega, 0.0, 1.0]) / norm
    x_target = np.array([-omega, 0.0, -1.0]) / norm
    return x_initial, x_target


def lz_continuous_reference(omega: float, delta_max: float) -> ContinuousSolution:
    """Bang-singular-bang reference solution of the bounded-sweep problem.

    The schedule is a bang at ``+-delta_max``, a singular arc at zero
    sweep, and a final bang.  The singular arc rotates about the ``x``
    axis, so the two bang durations are matched through the conserved
    ``x`` coordinate and the singular duration follows from the
    azimuthal angle gap; the first bang duration is then tuned to
    minimise the total time.

    Raises
    ------
    NoConvergenceError
        If ``delta_max`` is too small to support bang segments or no
        schedule reaches the target.
    """
    if omega <= 0.0 or delta_max < 0.0:
        raise ValueError("omega must be positive and delta_max nonnegative")
    if delta_max < 1e-9:
        raise NoConvergenceError(
            "sweep bound too small to form bang segments")
    x_initial, x_target = lz_boundary_states(omega)

    def bang_axis(sign):
        rate = math.hypot(omega, sign * delta_max)
        return np.array([omega, 0.0, sign * delta_max]) / rate, rate

    def match(sign1, sign2, tau1):
        """Singular and final durations matching the boundary states."""
        axis1, rate1 = bang_axis(sign1)
        axis2, rate2 = bang_axis(sign2)
        x1 = dynamics.rotation_about_axis(axis1, rate1 * tau1) @ x_initial

        def x_gap(tau2):
            back = dynamics.rotation_about_axis(axis2, -rate2 * tau2) @ x_target
            return back[0] - x1[0]

        grid = np.linspace(0.0, 2.0 * math.pi / rate2, 400)
        values = [x_gap(t) for t in grid]
        best = None
        for i in range(len(grid) - 1):
            if values[i] == 0.0:
                tau2 = grid[i]
            elif values[i] * values[i + 1] < 0.0:
                tau2 = brentq(x_gap, grid[i], grid[i + 1], xtol=1e-14)
            else:
                continue
            back = dynamics.rotation_about_axis(axis2, -rate2 * tau2) @ x_target
            gap = math.atan2(back[2], back[1]) - math.atan2(x1[2], x1[1])
            tau_s = (gap / omega) % (2.0 * math.pi / omega)
            total = tau1 + tau_s + tau2
            if best is None or total < best[0]:
                best = (total, tau_s, tau2)
        return best if best is not None else (math.inf, 0.0, 0.0)

    best = None
    tau1_max = math.pi / math.hypot(omega, delta_max)
    for sign1 in (1.0, -1.0):
        for sign2 in (1.0, -1.0):
            grid = np.linspace(0.0, tau1_max, 200)
            totals = [match(sign1, sign2, t)[0] for t in grid]
            i = int(np.argmin(totals))
            if not math.isfinite(totals[i]):
                continue
            result = minimize_scalar(
                lambda t: match(sign1, sign2, t)[0],
                bounds=(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]),
                method="bounded", options={"xatol": 1e-13})
            total, tau_s, tau2 = match(sign1, sign2, result.x)
            if best is None or total < best[0]:
                best = (total, sign1, sign2, result.x, tau_s, tau2)
    if best is None:
        raise NoConvergenceError("no bang-singular-bang schedule found")
    total, sign1, sign2, tau1, tau_s, tau2 = best
    segments = ((sign1 * delta_max, tau1), (0.0, tau_s),
                (sign2 * delta_max, tau2))
    # On the singular arc H = omega L_x = 1 fixes L = (1/omega, 0, 0);
    # pulling L back through the first bang gives the initial adjoint.
    l_singular = np.array([1.0 / omega, 0.0, 0.0])
    l_initial = dynamics.rotation_axis(sign1 * delta_max, omega,
                                       -tau1) @ l_singular
    solution = ContinuousSolution(
        family="landau_zener",
        t_f=total,
        control=_schedule_control(segments),
        x_initial=x_initial,
        x_target=x_target,
        parameter=omega,
        segments=segments,
        adjoint=np.cross(l_initial, x_initial),
    )
    if solution.endpoint_error() > 1e-6:
        raise NoConvergenceError(
            f"schedule misses the target by {solution.endpoint_error():.2e}")
    return solution


# ---------------------------------------------------------------------------
# linear single-spring model
# ---------------------------------------------------------------------------

def linear_continuous(omega: float) -> ContinuousSolution:
    """Continuous-limit solution of the linear model.

    The optimal phase is affine, ``phi(t) = theta + omega t - pi/2``
    with ``theta = pi - omega t_f``, and drives ``Z = x + iy`` from the
    origin to ``1`` in the minimum time ``t_f = 1``.
    """
    if omega == 0.0:
        raise ValueError("offset omega must be nonzero")
    t_f = 1.0
    theta = math.pi - omega * t_f

    def control(t):
        return theta + omega * t - 0.5 * math.pi

    return ContinuousSolution(
        family="linear",
        t_f=t_f,
        control=control,
        x_initial=np.array([0.0, 0.0]),
        x_target=np.array([1.0, 0.0]),
        parameter=omega,
        adjoint=np.array([math.cos(theta), math.sin(theta)]),
    )


def linear_state(omega: float, t: float) -> complex:
    """Closed-form state ``Z(t) = e^{i omega t}(Z(0) - e^{i theta} t)``."""
    theta = math.pi - omega
    return np.exp(1j * omega * t) * (0.0 - np.exp(1j * theta) * t)


@dataclass(frozen=True)
class LinearDiscrete:
    """Exact piecewise-constant solution of the linear model.

    Parameters
    ----------
    omega : float
        Offset term.
    n : int
        Number of intervals.
    period : float
        Interval duration ``T = (2/omega) asin(omega/(2 n))``.
    t_f : float
        Total time ``n T``.
    theta : float
        Adjoint angle ``pi - omega t_f``.
    phases : ndarray
        Interval controls, the averages of the continuous law.
    """

    omega: float
    n: int
    period: float
    t_f: float
    theta: float
    phases: NDArrayFloat


def linear_discrete(omega: float, n: int) -> LinearDiscrete:
    """Exact discrete-time solution of the linear model.

    The interval duration solves the boundary condition in closed form
    and each phase is the interval average of the continuous law,
    ``phi_k = theta + (k + 1/2) omega T - pi/2``.
    """
    if omega == 0.0:
        raise ValueError("offset omega must be nonzero")
    if n < 1:
        raise ValueError("n must be at least 1")
    ratio = omega / (2.0 * n)
    if abs(ratio) > 1.0:
        raise ValueError(f"omega/(2n) = {ratio} outside [-1, 1]")
    period = 2.0 / omega * math.asin(ratio)
    t_f = n * period
    theta = math.pi - omega * t_f
    k = np.arange(n)
    phases = theta + (k + 0.5) * omega * period - 0.5 * math.pi
    return LinearDiscrete(omega=omega, n=n, period=period, t_f=t_f,
                          theta=theta, phases=phases)


def linear_propagate(omega: float, period: float, phases: NDArrayFloat,
                     z_initial: complex = 0.0j) -> complex:
    """Propagate the linear model exactly through constant-phase intervals.

    Each interval map is ``Z -> e^{i omega T} Z - e^{i phi}(e^{i omega T}
    - 1)/omega``.  The recurrence is evaluated in the rotating frame
    with compensated summation so that round-off stays at machine level
    for interval counts up to ``10^4`` and beyond.
    """
    if omega == 0.0:
        raise ValueError("offset omega must be nonzero")
    half = 0.5 * omega * period
    weight = 2.0 * math.sin(half) / omega
    w = complex(z_initial)
    comp = 0.0j
    for k, phi in enumerate(phases):
        term = -weight * np.exp(1j * (phi - (2 * k + 1) * half + 0.5 * math.pi))
        delta = term - comp
        new = w + delta
        comp = (new - w) - delta
        w = new
    return np.exp(1j * omega * period * len(phases)) * w


# ---------------------------------------------------------------------------
# adjoint-sphere distance map
# ---------------------------------------------------------------------------

class SphereMapPoint(NamedTuple):
    """A grid point of the adjoint-sphere map."""

    theta: float
    phi: float
    distance: float


@dataclass(frozen=True)
class SphereMap:
    """Distance-to-target map over initial adjoint directions.

    The initial adjoint at angles ``(theta, phi)`` lies on the radius
    that keeps ``p_y^2 + p_z^2 = 4/3``, the invariant of the optimal
    family.  ``distance[i, j]`` is the final-state distance for
    ``theta[i]``, ``phi[j]``; failed propagations hold NaN.  The curve
    arrays sample the continuous-limit optimal family.
    """

    theta: NDArrayFloat
    phi: NDArrayFloat
    distance: NDArrayFloat
    curve_theta: NDArrayFloat
    curve_phi: NDArrayFloat

    def level_set(self, threshold: float) -> list[SphereMapPoint]:
        """Grid points whose distance does not exceed ``threshold``."""
        points = []
        for i, theta in enumerate(self.theta):
            for j, phi in enumerate(self.phi):
                d = self.distance[i, j]
                if np.isfinite(d) and d <= threshold:
                    points.append(SphereMapPoint(theta, phi, float(d)))
        return points


def sphere_radius(theta: float, phi: float) -> float:
    """Adjoint radius keeping ``p_y^2 + p_z^2 = 4/3`` at given angles."""
    s = math.sin(theta) * math.cos(phi)
    return math.sqrt(4.0 / 3.0 / (1.0 - s * s))


def sphere_curve(p_x: NDArrayFloat, mirror: bool = False
                 ) -> tuple[NDArrayFloat, NDArrayFloat]:
    """Spherical angles of the continuous optimal adjoint family.

    For the default branch ``P(0) = (p_x, 1/sqrt(3), -1)`` the angles
    are ``Theta = acos(-1/R)`` and ``Phi = atan(1/(sqrt(3) p_x))`` with
    ``R = sqrt(4/3 + p_x^2)``.
    """
    p_x = np.asarray(p_x, dtype=float)
    radius = np.sqrt(4.0 / 3.0 + p_x ** 2)
    sign = 1.0 if mirror else -1.0
    theta = np.arccos(sign / radius)
    with np.errstate(divide="ignore"):
        phi = np.arctan(1.0 / (SQRT3 * p_x))
    return theta, phi


def sphere_curve_theta(phi: float, mirror: bool = False) -> float:
    """Polar angle of the continuous adjoint family at azimuth ``phi``."""
    if phi == 0.0:
        return 0.5 * math.pi
    p_x = 1.0 / (SQRT3 * math.tan(phi))
    radius = math.sqrt(4.0 / 3.0 + p_x * p_x)
    sign = 1.0 if mirror else -1.0
    return math.acos(sign / radius)


def adjoint_sphere_map(n: int, period: float, grid_size: int = 200,
                       x_initial=(1.0, 0.0, 0.0), x_target=(0.0, 1.0, 0.0),
                       curve_samples: int = 2001) -> SphereMap:
    """Distance-to-target map of the two-control problem over adjoints.

    For each direction on a ``grid_size x grid_size`` grid of spherical
    angles, the initial adjoint is placed at the self-consistent radius
    and the extremal trajectory is propagated through ``n`` intervals of
    duration ``period``; the recorded figure of merit is the Euclidean
    distance from the final state to ``x_target``.

    Parameters
    ----------
    n, period : int, float
        Grid data of a converged discrete solve.
    grid_size : int
        Number of cells per angle; points sit at cell centres, so the
        open-interval bounds are respected.
    x_initial, x_target : array_like
        Boundary states.
    curve_samples : int
        Sample count of the continuous reference curve.

    Returns
    -------
    SphereMap
    """
    theta = (np.arange(grid_size) + 0.5) * math.pi / grid_size
    phi = -0.5 * math.pi + (np.arange(grid_size) + 0.5) * math.pi / grid_size
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    s = np.sin(tt) * np.cos(pp)
    radius = np.sqrt(4.0 / 3.0 / (1.0 - s * s))
    p0s = np.empty((grid_size * grid_size, 3))
    p0s[:, 0] = (radius * s).ravel()
    p0s[:, 1] = (radius * np.sin(tt) * np.sin(pp)).ravel()
    p0s[:, 2] = (radius * np.cos(tt)).ravel()
    out = np.empty(grid_size * grid_size)
    map_grid_distances(p0s, np.asarray(x_initial, dtype=float),
                       FAMILY_TWO_CONTROL, 0.0, 0.0, False, n, period, period,
                       np.asarray(x_target, dtype=float), GL_NODES, GL_WEIGHTS,
                       out)
    span = 0.5 * math.pi * (1.0 - 1.0 / curve_samples)
    p_x = np.tan(np.linspace(-span, span, curve_samples))
    curve_theta, curve_phi = sphere_curve(p_x)
    return SphereMap(theta=theta, phi=phi,
                     distance=out.reshape(grid_size, grid_size),
                     curve_theta=curve_theta, curve_phi=curve_phi)


# ---------------------------------------------------------------------------
# physical time conversion
# ---------------------------------------------------------------------------

def nmr_time(t_normalized: float, nu: float) -> float:
    """Convert a normalized time to microseconds at pulse amplitude ``nu``.

    The normalized time is ``t = 2 pi nu t_exp`` with ``nu`` in Hz, so
    the physical duration is ``t/(2 pi nu)``, returned in microseconds.
    """
    if nu <= 0.0:
        raise ValueError("pulse amplitude nu must be positive")
    return t_normalized / (2.0 * math.pi * nu) * 1e6
