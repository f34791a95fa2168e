"""Closed-form one-interval propagation for every Hamiltonian family.

The state of the two-level system is a Bloch vector X = (x, y, z) obeying
dX/dt = (omega_x M_x + omega_y M_y + Delta M_z) X with the standard SO(3)
generators M_x, M_y, M_z.  Over one sampling interval the generator is
constant, so propagation is an exact rotation; no ODE stepping is used
anywhere in the package (a fourth-order integrator exists only as a test
oracle).  The Pontryagin adjoint vector P obeys the same equation and is
propagated by the same rotations.

Three interval-generator families cover all control problems treated here:

* ``TwoControlResonant(phi)`` - unit-amplitude resonant field of phase phi,
  rotation about (cos phi, sin phi, 0) by the interval length.
* ``OneControlDetuned(delta, omega)`` - fixed detuning delta, bounded
  amplitude omega, rotation about (omega, 0, delta).
* ``LandauZener(delta, omega)`` - fixed coupling omega, detuning control
  delta, same rotation axis written (omega, 0, delta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import ZeroGeneratorError

__all__ = [
    "NDArrayFloat", "NDArrayComplex",
    "M_X", "M_Y", "M_Z", "PAULI_X", "PAULI_Y", "PAULI_Z", "IDENTITY2",
    "TwoControlResonant", "OneControlDetuned", "LandauZener",
    "rotation_about_axis", "rotation_two_control", "rotation_axis",
    "propagate", "spinor_propagator", "bloch_vector",
]

NDArrayFloat = npt.NDArray[np.floating]
NDArrayComplex = npt.NDArray[np.complexfloating]

M_X = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
M_Y = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
M_Z = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
IDENTITY2 = np.eye(2, dtype=np.complex128)


@dataclass(frozen=True)
class TwoControlResonant:
    """Resonant two-control interval generator with saturated unit amplitude."""

    phi: float
    duration: float


@dataclass(frozen=True)
class OneControlDetuned:
    """Fixed-detuning interval generator with bounded amplitude |omega| <= 1."""

    delta: float
    omega: float
    duration: float

    def __post_init__(self):
        if abs(self.omega) > 1.0 + 1e-9:
            raise ValueError(f"amplitude |omega| <= 1 required, got {self.omega}")


@dataclass(frozen=True)
class LandauZener:
    """Fixed-coupling interval generator; the detuning is the control.

    The detuning bound is a property of the control problem, not of a
    single interval, so it is enforced by the extremal-control rules.
    """

    delta: float
    omega: float
    duration: float


def rotation_about_axis(axis: NDArrayFloat, angle: float) -> NDArrayFloat:
    """Rodrigues rotation matrix about a (not necessarily unit) axis.

    Parameters
    ----------
    axis : array_like, shape (3,)
        Rotation axis; must have nonzero norm.
    angle : float
        Rotation angle in radians about the normalized axis.

    Returns
    -------
    ndarray, shape (3, 3)
        Proper orthogonal matrix.
    """
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ZeroGeneratorError("rotation axis has zero norm")
    n = axis / norm
    k = np.array([[0.0, -n[2], n[1]],
                  [n[2], 0.0, -n[0]],
                  [-n[1], n[0], 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rotation_two_control(phi: float, tau: float) -> NDArrayFloat:
    """Interval rotation for the resonant two-control generator.

    Explicit closed form of exp[(cos(phi) M_x + sin(phi) M_y) tau], a
    rotation by tau about the equatorial axis (cos phi, sin phi, 0).

    Parameters
    ----------
    phi : float
        Control phase.
    tau : float
        Interval length (non-negative).

    Returns
    -------
    ndarray, shape (3, 3)
    """
    s, c = np.sin(tau), np.cos(tau)
    sp, cp = np.sin(phi), np.cos(phi)
    return np.array([
        [sp * sp * c + cp * cp, (1.0 - c) * sp * cp, s * sp],
        [(1.0 - c) * sp * cp, sp * sp + c * cp * cp, -s * cp],
        [-s * sp, s * cp, c],
    ])


def rotation_axis(delta: float, omega: float, tau: float) -> NDArrayFloat:
    """Interval rotation for generator delta*M_z + omega*M_x.

    Rotation about (omega, 0, delta)/Omega_0 by angle Omega_0*tau with
    Omega_0 = sqrt(omega^2 + delta^2).  Used by both the fixed-detuning
    and the fixed-coupling families.

    Raises
    ------
    ZeroGeneratorError
        If delta = omega = 0 (no rotation axis is defined).
    """
    omega0 = np.hypot(omega, delta)
    if omega0 == 0.0:
        raise ZeroGeneratorError("delta = omega = 0 leaves the state frozen")
    return rotation_about_axis(np.array([omega, 0.0, delta]), omega0 * tau)


def _generator_rotation(g) -> NDArrayFloat:
    """Rotation matrix of an interval generator."""
    if isinstance(g, TwoControlResonant):
        return rotation_two_control(g.phi, g.duration)
    if isinstance(g, (OneControlDetuned, LandauZener)):
        return rotation_axis(g.delta, g.omega, g.duration)
    raise TypeError(f"unknown interval generator {type(g).__name__}")


def propagate(x: NDArrayFloat, g) -> NDArrayFloat:
    """Propagate a Bloch (or adjoint) vector through one interval.

    Parameters
    ----------
    x : array_like, shape (3,)
        State or costate at the interval start; both obey the same equation.
    g : TwoControlResonant | OneControlDetuned | LandauZener
        Interval generator.

    Returns
    -------
    ndarray, shape (3,)
        Rotated vector; the norm is preserved to round-off.
    """
    return _generator_rotation(g) @ np.asarray(x, dtype=float)


def spinor_propagator(phi: float, tau: float) -> NDArrayComplex:
    """Interval propagator U = cos(tau/2) I - i sin(tau/2)(cos phi sx + sin phi sy).

    The induced Bloch rotation (conjugation of the Pauli vector) equals
    ``rotation_two_control(phi, tau)``.
    """
    return (np.cos(0.5 * tau) * IDENTITY2
            - 1.0j * np.sin(0.5 * tau) * (np.cos(phi) * PAULI_X
                                          + np.sin(phi) * PAULI_Y))


def bloch_vector(psi: NDArrayComplex) -> NDArrayFloat:
    """Pauli expectation values (<sx>, <sy>, <sz>) of a normalized spinor."""
    psi = np.asarray(psi, dtype=np.complex128)
    return np.array([
        float(np.real(np.conj(psi) @ (PAULI_X @ psi))),
        float(np.real(np.conj(psi) @ (PAULI_Y @ psi))),
        float(np.real(np.conj(psi) @ (PAULI_Z @ psi))),
    ])
