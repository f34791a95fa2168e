"""Discrete-PMP extremal control rules and sequential extremal propagation.

For piecewise-constant pulses the Pontryagin maximization condition acts
on interval-averaged quantities rather than instantaneous ones: with
moments I_a = P^T M_a X at the interval start, the extremal control of
each family satisfies a variational inequality built from closed-form
time integrals over the interval.  Concretely,

* two controls: the phase solves a quadratic in h = tan(phi/2) whose
  coefficients mix the moments with sin(tau) and 1 - cos(tau); the kept
  root maximizes the averaged Hamiltonian (see `extremal_phase_two_control`);
* one bounded control: the sign pattern of the averaged switching
  function Gamma over the admissible range decides between the two bang
  values and an interior root of Gamma = 0;
* detuning control at fixed coupling: same three-case rule applied to
  the averaged d H_P / d Delta.

Sequential application of these rules from (X_0, P_0) builds the unique
extremal trajectory of a given adjoint seed, which is what the shooting
module drives to the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as k
from .dynamics import NDArrayFloat
from .errors import (DegenerateMomentsError, InvalidTailError,
                     NoAlignedRootError, NoRealRootError, ZeroCouplingError,
                     ZeroGeneratorError)

__all__ = [
    "MomentTriple", "AngularMomentum", "PiecewiseControl", "ExtremalTrajectory",
    "TwoControlFamily", "OneControlFamily", "LandauZenerFamily",
    "moments", "angular_momentum", "extremal_phase_two_control",
    "interval_moment_integrals", "gamma_one_control", "gamma_lz",
    "extremal_amplitude_one_control", "extremal_amplitude_lz",
    "propagate_extremal",
]


class MomentTriple(NamedTuple):
    """Moments I_a = P^T M_a X at an interval start."""

    i_x: float
    i_y: float
    i_z: float


class AngularMomentum(NamedTuple):
    """L = X x P; L_x is the instantaneous one-control switching function."""

    l_x: float
    l_y: float
    l_z: float


@dataclass(frozen=True)
class TwoControlFamily:
    """Resonant two-control problem; `mirror` selects the other quadratic root
    when both qualify (equator-mirrored trajectory)."""

    mirror: bool = False


@dataclass(frozen=True)
class OneControlFamily:
    """Single bounded amplitude |omega| <= bound at fixed detuning."""

    delta: float
    bound: float = 1.0


@dataclass(frozen=True)
class LandauZenerFamily:
    """Detuning control |delta| <= bound at fixed transverse coupling."""

    omega: float
    bound: float = 2.0


@dataclass(frozen=True)
class PiecewiseControl:
    """Piecewise-constant control: N values on a uniform grid with a tail.

    The first N-1 intervals have length `period`; the last has length
    `tail` with 0 < tail <= period, so t_f = (N-1)*period + tail.
    """

    period: float
    tail: float
    values: NDArrayFloat

    def __post_init__(self):
        if not 0.0 < self.tail <= self.period * (1.0 + 1e-12):
            raise InvalidTailError(
                f"tail {self.tail} outside (0, {self.period}]")
        if len(self.values) < 1:
            raise InvalidTailError("at least one interval is required")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def t_f(self) -> float:
        return (self.n - 1) * self.period + self.tail

    @property
    def durations(self) -> NDArrayFloat:
        d = np.full(self.n, self.period)
        d[-1] = self.tail
        return d


@dataclass(frozen=True)
class ExtremalTrajectory:
    """Per-interval record of an extremal: states, adjoints, controls, H_P.

    `states` and `adjoints` hold the N+1 interval endpoints; `controls`
    and `hamiltonians` hold one value per interval (H_P is constant
    inside each interval because X and P co-rotate, but may jump across
    interval boundaries).
    """

    family: object
    period: float
    tail: float
    states: NDArrayFloat
    adjoints: NDArrayFloat
    controls: NDArrayFloat
    hamiltonians: NDArrayFloat

    @property
    def n(self) -> int:
        return len(self.controls)

    @property
    def t_f(self) -> float:
        return (self.n - 1) * self.period + self.tail

    def piecewise_control(self) -> PiecewiseControl:
        return PiecewiseControl(self.period, self.tail, self.controls.copy())


def moments(x: NDArrayFloat, p: NDArrayFloat) -> MomentTriple:
    """Moments (I_x, I_y, I_z) = (P^T M_x X, P^T M_y X, P^T M_z X).

    Evaluated literally through the rotation generators; equals the
    components of X x P.
    """
    from .dynamics import M_X, M_Y, M_Z
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    return MomentTriple(float(p @ (M_X @ x)), float(p @ (M_Y @ x)),
                        float(p @ (M_Z @ x)))


def angular_momentum(x: NDArrayFloat, p: NDArrayFloat) -> AngularMomentum:
    """L = X x P, the adjoint angular momentum (equal to the moment triple)."""
    c = np.cross(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    return AngularMomentum(float(c[0]), float(c[1]), float(c[2]))


def _raise_for_status(status: int, interval: int | None = None):
    if status == k.DEGENERATE:
        raise DegenerateMomentsError(interval=interval)
    if status == k.NO_REAL_ROOT:
        raise NoRealRootError(interval=interval)
    if status == k.NO_ALIGNED_ROOT:
        raise NoAlignedRootError(interval=interval)
    if status == k.ZERO_GENERATOR:
        raise ZeroGeneratorError("zero generator encountered"
                                 + ("" if interval is None
                                    else f" (interval {interval})"))


def extremal_phase_two_control(i: MomentTriple, tau: float,
                               mirror: bool = False) -> float:
    """Extremal phase phi_k for a two-control interval of length tau.

    Solves a h^2 + b h + c = 0 with h = tan(phi_k/2),
    a = I_y sin tau + (1 - cos tau) I_z, b = 2 I_x sin tau,
    c = (1 - cos tau) I_z - I_y sin tau.  The constant term follows the
    only parenthesization whose tau -> 0 limit recovers the continuous
    condition tan(phi) = I_y/I_x.  Among the real roots the one whose
    rotation axis is aligned with the averaged field (the genuine
    interval maximizer) is returned; when both roots qualify, the larger
    h ("positive root", bound to the southern-hemisphere branch) wins
    unless `mirror` requests the other one.

    Raises
    ------
    DegenerateMomentsError
        If all coefficients vanish (P parallel to X, or a full-period
        interval).
    NoRealRootError
        If the discriminant is negative (NoAlignedRootError when real
        roots exist but none maximizes).
    """
    ix, iy, iz = float(i[0]), float(i[1]), float(i[2])
    status, phi = k.phase_rule(ix, iy, iz, float(tau), bool(mirror))
    _raise_for_status(status)
    return phi


def interval_moment_integrals(i: MomentTriple, phi: float,
                              tau: float) -> tuple[float, float]:
    """Closed-form integrals of P^T M_{x,y} X over one interval.

    The trajectory is generated by the phase `phi` from moments `i` at
    the interval start; the returned pair enters the stationarity
    condition cos(phi) J_y - sin(phi) J_x = 0 of the extremal phase.
    """
    jx, jy = k.interval_moment_integrals(float(i[0]), float(i[1]),
                                         float(i[2]), float(phi), float(tau))
    return jx, jy


def gamma_one_control(x0: NDArrayFloat, p0: NDArrayFloat, delta: float,
                      omega: float, tau: float) -> float:
    """Averaged switching function Gamma = (1/tau) * int_0^tau L_x(t) dt.

    Closed form over the interval generated by amplitude `omega` at
    detuning `delta`; Gamma's sign pattern over the admissible amplitude
    range drives the one-control maximization.

    Raises
    ------
    ZeroGeneratorError
        If delta = omega = 0.
    """
    if delta == 0.0 and omega == 0.0:
        raise ZeroGeneratorError("delta = omega = 0")
    lx, ly, lz = angular_momentum(x0, p0)
    return k.gamma_omega(lx, ly, lz, float(delta), float(omega), float(tau))


def gamma_lz(x0: NDArrayFloat, p0: NDArrayFloat, omega: float, delta: float,
             tau: float) -> float:
    """Averaged detuning-switching function (1/tau) * int_0^tau L_z(t) dt.

    Evaluated by 32-point Gauss-Legendre quadrature over the closed-form
    rotation of L, matching the rule used inside `extremal_amplitude_lz`.
    """
    if omega == 0.0 and delta == 0.0:
        raise ZeroGeneratorError("omega = delta = 0")
    lx, ly, lz = angular_momentum(x0, p0)
    return k.gamma_delta(lx, ly, lz, float(omega), float(delta), float(tau),
                         k.GL_NODES, k.GL_WEIGHTS)


def extremal_amplitude_one_control(x0: NDArrayFloat, p0: NDArrayFloat,
                                   delta: float, tau: float,
                                   bound: float = 1.0) -> float:
    """Extremal amplitude omega_k for a one-control interval.

    If Gamma > 0 over the whole admissible range the control saturates
    at +bound, if Gamma < 0 everywhere at -bound; otherwise an interior
    root of Gamma = 0 is bracketed on a 101-point grid and bisected to
    1e-12 (several roots: keep the one with the largest interval
    Hamiltonian).  The result satisfies the variational inequality
    (u - omega_k) * Gamma(omega_k) <= 0 for all |u| <= bound.

    Raises
    ------
    DegenerateMomentsError
        If P is parallel to X (Gamma vanishes identically).
    """
    lx, ly, lz = angular_momentum(x0, p0)
    status, om = k.omega_rule(lx, ly, lz, float(delta), float(tau),
                              float(bound))
    _raise_for_status(status)
    return om


def extremal_amplitude_lz(x0: NDArrayFloat, p0: NDArrayFloat, omega: float,
                          tau: float, bound: float = 2.0,
                          allow_degenerate: bool = False) -> float:
    """Extremal detuning Delta_k for a fixed-coupling interval.

    Same three-case rule as the one-control amplitude, applied to the
    averaged d H_P / d Delta (the mean of L_z over the interval).

    Parameters
    ----------
    allow_degenerate : bool
        When True, a vanishing L (P parallel to X) returns 0.0 instead
        of raising; the flag mirrors the degenerate-moments condition.

    Raises
    ------
    ZeroCouplingError
        If omega = 0 (the detuning alone cannot steer the transfer).
    DegenerateMomentsError
        If P is parallel to X and `allow_degenerate` is False.
    """
    if omega == 0.0:
        raise ZeroCouplingError("fixed coupling omega must be nonzero")
    lx, ly, lz = angular_momentum(x0, p0)
    status, dlt = k.delta_rule(lx, ly, lz, float(omega), float(tau),
                               float(bound), k.GL_NODES, k.GL_WEIGHTS)
    if status == k.DEGENERATE and allow_degenerate:
        return 0.0
    _raise_for_status(status)
    return dlt


def family_code(family) -> tuple[int, float, float, bool]:
    """Kernel dispatch tuple (code, par1, par2, mirror) of a control family."""
    if isinstance(family, TwoControlFamily):
        return k.FAMILY_TWO_CONTROL, 0.0, 0.0, family.mirror
    if isinstance(family, OneControlFamily):
        return k.FAMILY_ONE_CONTROL, family.delta, family.bound, False
    if isinstance(family, LandauZenerFamily):
        if family.omega == 0.0:
            raise ZeroCouplingError("fixed coupling omega must be nonzero")
        return k.FAMILY_LANDAU_ZENER, family.omega, family.bound, False
    raise TypeError(f"unknown control family {type(family).__name__}")


def propagate_extremal(x0: NDArrayFloat, p0: NDArrayFloat, family, n: int,
                       period: float, tail: float | None = None
                       ) -> ExtremalTrajectory:
    """Build the extremal trajectory of an adjoint seed interval by interval.

    For k = 0..n-1 the extremal control is computed from (X_k, P_k) by
    the family's maximization rule, then X and P are rotated through the
    interval (length `tail` for the last one, default `period`).

    Raises
    ------
    InvalidTailError
        If the tail length is outside (0, period].
    DegenerateMomentsError, NoRealRootError, ZeroGeneratorError
        Propagated from the failing interval with its index attached.
    """
    if n < 1:
        raise InvalidTailError("at least one interval is required")
    t_tail = period if tail is None else tail
    if not 0.0 < t_tail <= period * (1.0 + 1e-12):
        raise InvalidTailError(f"tail {t_tail} outside (0, {period}]")
    code, par1, par2, mirror = family_code(family)
    x0 = np.ascontiguousarray(x0, dtype=float)
    p0 = np.ascontiguousarray(p0, dtype=float)
    states = np.empty((n + 1, 3))
    adjoints = np.empty((n + 1, 3))
    controls = np.empty(n)
    hams = np.empty(n)
    status, bad = k.propagate_full(x0, p0, code, par1, par2, mirror, n,
                                   float(period), float(t_tail),
                                   k.GL_NODES, k.GL_WEIGHTS,
                                   states, adjoints, controls, hams)
    _raise_for_status(status, None if bad < 0 else bad)
    return ExtremalTrajectory(family, float(period), float(t_tail),
                              states, adjoints, controls, hams)
