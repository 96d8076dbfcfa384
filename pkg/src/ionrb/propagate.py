"""Propagate a pulse program under realized noise.

Two regimes:

* coherent: every shot of a sequence shares the same event unitaries.  The
  product is formed once; rare Pauli jumps (depolarizing, idle bit flips) are
  spliced in per shot with running prefix products.
* dense: per-shot, per-event randomness (phase kicks, pulse-to-pulse power
  jitter, per-shot frequency draws).  Event unitaries are built for each shot
  in blocks and reduced with a tree product.

Leakage is absorbing and independent of the coherent dynamics, so it is
carried as a per-shot flag rather than as amplitude.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim
from .scheduler import PulseProgram

_PAULIS = np.stack([qsim.IDENTITY, qsim.SIGMA_X, qsim.SIGMA_Y, qsim.SIGMA_Z])
_DENSE_BLOCK_ELEMENTS = 4_000_000  # shots * events per block


@dataclass
class ShotResult:
    p_down: np.ndarray  # (reps,) probability of |down> for unleaked shots
    leaked: np.ndarray  # (reps,) bool


def event_unitaries(program: PulseProgram, rabi_rate: float, noise) -> np.ndarray:
    """Event propagators, shape ``(n,2,2)`` or ``(reps,n,2,2)`` if noise is per shot."""
    durations = program.durations
    drive = program.drive
    detuning = noise.detuning_hz
    if noise.shot_detuning_hz is not None:
        detuning = detuning + noise.shot_detuning_hz[:, None]
    dur = np.where(drive, durations + noise.duration_offset_s, durations)
    dur = np.maximum(dur, 0.0)
    rate = np.where(drive, rabi_rate * noise.rabi_scale, 0.0)
    u = qsim.propagators(rate, program.phase, detuning, dur)
    if noise.dephasing_kick is not None:
        u = qsim.mul2(qsim.z_rotations(noise.dephasing_kick), u)
    return u


def _apply_jumps_dense(u: np.ndarray, jumps: np.ndarray) -> np.ndarray:
    r, k = np.nonzero(jumps)
    if len(r):
        u = np.array(u, copy=True)
        u[r, k] = _PAULIS[jumps[r, k]] @ u[r, k]
    return u


def _coherent(u: np.ndarray, jumps: np.ndarray | None, reps: int) -> np.ndarray:
    """|<down|U|down>|^2 per shot when all shots share ``u`` up to sparse jumps."""
    if jumps is None or not jumps.any():
        total = qsim.chain_product(u)
        return np.full(reps, abs(total[0, 0]) ** 2)
    prefix = qsim.prefix_products(u)
    total = prefix[-1]
    out = np.full(reps, abs(total[0, 0]) ** 2)
    for r in np.flatnonzero(jumps.any(axis=1)):
        cols = np.flatnonzero(jumps[r])
        # state after event k is prefix[k] |down>; between jumps the evolution
        # from event a+1 to b is prefix[b] prefix[a]^dagger
        psi = prefix[cols[0]][:, 0]
        for a, b in zip(cols, list(cols[1:]) + [None]):
            psi = _PAULIS[jumps[r, a]] @ psi
            end = prefix[-1] if b is None else prefix[b]
            psi = end @ (qsim.dagger(prefix[a]) @ psi)
        out[r] = abs(psi[0]) ** 2
    return out


def simulate(program: PulseProgram, rabi_rate: float, noise) -> ShotResult:
    """Per-shot outcome probabilities for ``program`` starting from ``|down>``."""
    reps = noise.reps
    leaked = noise.leaked_shots()
    if len(program) == 0:
        return ShotResult(np.ones(reps), leaked)
    if not noise.per_shot:
        u = event_unitaries(program, rabi_rate, noise)
        return ShotResult(_coherent(u, noise.jumps, reps), leaked)

    n = len(program)
    block = max(1, _DENSE_BLOCK_ELEMENTS // max(n, 1))
    p = np.empty(reps)
    for lo in range(0, reps, block):
        sub = noise.shots(slice(lo, lo + block))
        u = event_unitaries(program, rabi_rate, sub)
        if u.ndim == 3:
            u = np.broadcast_to(u, (sub.reps,) + u.shape)
        if sub.jumps is not None:
            u = _apply_jumps_dense(u, sub.jumps)
        total = qsim.chain_product(u)
        p[lo : lo + sub.reps] = np.abs(total[:, 0, 0]) ** 2
    return ShotResult(p, leaked)
