"""Closed-form two-level propagators for rectangular microwave pulses.

Basis ordering is ``(|down>, |up>)`` with ``sigma_z = diag(1, -1)``, so
``|down>`` sits on the +z pole of the Bloch sphere.  A drive of phase
``phi`` rotates about ``cos(phi) x + sin(phi) y``; detuning is drive minus
qubit frequency in ordinary Hz and enters the rotating-frame Hamiltonian as
``+pi * detuning * sigma_z``.

All propagator builders broadcast over numpy arrays and return stacks of
2x2 complex matrices with shape ``(..., 2, 2)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class Outcome(str, enum.Enum):
    DOWN = "down"
    UP = "up"
    LEAKED = "leaked"


@dataclass(frozen=True)
class PulseParams:
    """One rectangular pulse.

    ``rabi_rate`` is angular (rad/s); ``detuning`` is in Hz.
    """

    rabi_rate: float
    phase: float
    detuning: float
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if self.rabi_rate < 0:
            raise ValueError(f"rabi_rate must be >= 0, got {self.rabi_rate}")


@dataclass(frozen=True)
class QubitState:
    amp_down: complex = 1.0 + 0j
    amp_up: complex = 0j
    leaked: bool = False

    @classmethod
    def down(cls) -> QubitState:
        return cls(1.0 + 0j, 0j)

    @classmethod
    def up(cls) -> QubitState:
        return cls(0j, 1.0 + 0j)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_down, self.amp_up], dtype=complex)

    @property
    def norm(self) -> float:
        return float(abs(self.amp_down) ** 2 + abs(self.amp_up) ** 2)

    @property
    def p_down(self) -> float:
        return float(abs(self.amp_down) ** 2)


def rabi_rate_for(pi2_duration: float) -> float:
    """Angular Rabi rate that makes a pulse of ``pi2_duration`` a pi/2 rotation."""
    return np.pi / (2.0 * pi2_duration)


def propagators(rabi_rate, phase, detuning, duration) -> np.ndarray:
    """Vectorized ``exp(-i t/2 [Omega(cos phi X + sin phi Y) + 2 pi Delta Z])``.

    Arguments broadcast against each other; the result has shape
    ``broadcast_shape + (2, 2)``.
    """
    rabi_rate, phase, detuning, duration = np.broadcast_arrays(
        np.asarray(rabi_rate, dtype=float),
        np.asarray(phase, dtype=float),
        np.asarray(detuning, dtype=float),
        np.asarray(duration, dtype=float),
    )
    hx = rabi_rate * np.cos(phase)
    hy = rabi_rate * np.sin(phase)
    hz = TWO_PI * detuning
    w = np.sqrt(hx * hx + hy * hy + hz * hz)
    half = 0.5 * w * duration
    c = np.cos(half)
    # sin(w t / 2) / w, finite as w -> 0
    s_over_w = 0.5 * duration * np.sinc(half / np.pi)
    out = np.empty(w.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * s_over_w * hz
    out[..., 1, 1] = c + 1j * s_over_w * hz
    out[..., 0, 1] = -1j * s_over_w * (hx - 1j * hy)
    out[..., 1, 0] = -1j * s_over_w * (hx + 1j * hy)
    return out


def pulse_propagator(p: PulseParams) -> np.ndarray:
    return propagators(p.rabi_rate, p.phase, p.detuning, p.duration)


def free_propagator(duration, detuning) -> np.ndarray:
    """Free precession: relative phase ``2 pi detuning duration`` split symmetrically."""
    if np.any(np.asarray(duration) < 0):
        raise ValueError("duration must be >= 0")
    phi = np.pi * np.asarray(detuning, dtype=float) * np.asarray(duration, dtype=float)
    return z_rotations(2.0 * phi)


def z_rotations(angle) -> np.ndarray:
    """``diag(exp(-i a/2), exp(i a/2))`` for each angle in ``angle``."""
    angle = np.asarray(angle, dtype=float)
    out = np.zeros(angle.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(-0.5j * angle)
    out[..., 1, 1] = np.exp(0.5j * angle)
    return out


def rotation(axis, angle: float) -> np.ndarray:
    """``exp(-i angle/2 n.sigma)`` for a unit (or zero) Bloch axis ``n``."""
    nx, ny, nz = np.asarray(axis, dtype=float)
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return c * IDENTITY - 1j * s * (nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z)


def apply(u: np.ndarray, s: QubitState) -> QubitState:
    if s.leaked:
        return s
    a, b = u @ s.vector
    return QubitState(complex(a), complex(b), False)


def project_measure(s: QubitState, rng: np.random.Generator) -> Outcome:
    if s.leaked:
        return Outcome.LEAKED
    return Outcome.DOWN if rng.random() < s.p_down else Outcome.UP


def is_unitary(u: np.ndarray, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    eye = np.broadcast_to(IDENTITY, u.shape)
    err = np.abs(np.conj(np.swapaxes(u, -1, -2)) @ u - eye).max()
    return bool(err < tol)


def mul2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Broadcasted ``a @ b`` for 2x2 stacks, written out elementwise.

    numpy's batched matmul carries per-matrix overhead that dominates for 2x2
    blocks; elementwise arithmetic on the four components does not.
    """
    a00, a01, a10, a11 = a[..., 0, 0], a[..., 0, 1], a[..., 1, 0], a[..., 1, 1]
    b00, b01, b10, b11 = b[..., 0, 0], b[..., 0, 1], b[..., 1, 0], b[..., 1, 1]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    out[..., 0, 0] = a00 * b00 + a01 * b10
    out[..., 0, 1] = a00 * b01 + a01 * b11
    out[..., 1, 0] = a10 * b00 + a11 * b10
    out[..., 1, 1] = a10 * b01 + a11 * b11
    return out


def chain_product(mats: np.ndarray) -> np.ndarray:
    """Time-ordered product along axis -3: ``mats[n-1] @ ... @ mats[0]``.

    Pairwise tree reduction, so the cost is a handful of large vectorized
    multiplies rather than ``n`` small ones.
    """
    mats = np.asarray(mats, dtype=complex)
    n = mats.shape[-3]
    if n == 0:
        return np.broadcast_to(IDENTITY, mats.shape[:-3] + (2, 2)).copy()
    while n > 1:
        if n % 2:
            tail = mats[..., -1:, :, :]
            body = mats[..., :-1, :, :]
        else:
            tail, body = None, mats
        prod = mul2(body[..., 1::2, :, :], body[..., 0::2, :, :])
        mats = prod if tail is None else np.concatenate([prod, tail], axis=-3)
        n = mats.shape[-3]
    return mats[..., 0, :, :]


def prefix_products(mats: np.ndarray) -> np.ndarray:
    """Inclusive running products: ``out[k] = mats[k] @ ... @ mats[0]``."""
    out = np.array(mats, dtype=complex, copy=True)
    n = out.shape[-3]
    step = 1
    while step < n:
        out[..., step:, :, :] = mul2(out[..., step:, :, :], out[..., :-step, :, :])
        step *= 2
    return out


def dagger(u: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(u, -1, -2))
