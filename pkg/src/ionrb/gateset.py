"""Pauli/Clifford gate algebra and randomized benchmarking sequences.

A computational gate is a random Pauli (``exp(-i pi sigma_p / 2)``, eight
labels) followed by a random pi/2 Clifford (``exp(-i pi sigma_c / 4)``, four
labels).  A sequence ends with a random Pauli and a deterministic Clifford
that rotates the tracked state onto a pole, so the ideal outcome is known.

Predicted outcomes are tracked on the six cardinal Bloch states with exact
integer rotation matrices; :func:`ideal_sequence_unitary` is the brute-force
cross-check.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .qsim import IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, Outcome, chain_product

PAPER_LENGTHS = (1, 3, 8, 21, 55, 144, 233, 377, 610, 987)

_AXES = {"X": 0, "Y": 1, "Z": 2}
_PAULI_MATS = {"X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z, "I": IDENTITY}


class PauliLabel(str, enum.Enum):
    PX = "+X"
    MX = "-X"
    PY = "+Y"
    MY = "-Y"
    PZ = "+Z"
    MZ = "-Z"
    PI = "+I"
    MI = "-I"

    @property
    def axis(self) -> str:
        return self.value[1]

    @property
    def sign(self) -> int:
        return 1 if self.value[0] == "+" else -1

    @property
    def driven(self) -> bool:
        return self.axis in ("X", "Y")


class CliffordLabel(str, enum.Enum):
    PX90 = "+X90"
    MX90 = "-X90"
    PY90 = "+Y90"
    MY90 = "-Y90"

    @property
    def axis(self) -> str:
        return self.value[1]

    @property
    def sign(self) -> int:
        return 1 if self.value[0] == "+" else -1


PAULIS = tuple(PauliLabel)
CLIFFORDS = tuple(CliffordLabel)
PROTOCOL_GATES: tuple = PAULIS + CLIFFORDS
IDENTITY_TOKEN = "ID"


class CardinalState(str, enum.Enum):
    PZ = "+z"
    MZ = "-z"
    PX = "+x"
    MX = "-x"
    PY = "+y"
    MY = "-y"

    @property
    def vector(self) -> np.ndarray:
        v = np.zeros(3, dtype=int)
        v["xyz".index(self.value[1])] = 1 if self.value[0] == "+" else -1
        return v

    @classmethod
    def from_vector(cls, v) -> CardinalState:
        v = np.asarray(v)
        (idx,) = np.flatnonzero(v)
        return cls(("+" if v[idx] > 0 else "-") + "xyz"[idx])


# |down> is the +z pole
POLE_OUTCOME = {CardinalState.PZ: Outcome.DOWN, CardinalState.MZ: Outcome.UP}


@dataclass(frozen=True)
class ComputationalGate:
    pauli: PauliLabel
    clifford: CliffordLabel

    @property
    def token(self) -> str:
        return f"{self.pauli.value}/{self.clifford.value}"


@dataclass(frozen=True)
class GateSequence:
    length: int
    gates: tuple[ComputationalGate, ...]
    closing_pauli: PauliLabel
    closing_clifford: CliffordLabel | None
    predicted_outcome: Outcome
    seed: int

    def __post_init__(self):
        if self.length != len(self.gates):
            raise ValueError("length does not match number of gates")

    def to_record(self) -> dict:
        closing = self.closing_clifford.value if self.closing_clifford else IDENTITY_TOKEN
        return {
            "seed": int(self.seed),
            "length": self.length,
            "gates": " ".join(g.token for g in self.gates),
            "closing": f"{self.closing_pauli.value}/{closing}",
            "predicted": self.predicted_outcome.value,
        }

    @classmethod
    def from_record(cls, rec: dict) -> GateSequence:
        gates = []
        for tok in rec["gates"].split():
            p, c = tok.split("/")
            gates.append(ComputationalGate(PauliLabel(p), CliffordLabel(c)))
        p, c = rec["closing"].split("/")
        seq = cls(
            length=int(rec["length"]),
            gates=tuple(gates),
            closing_pauli=PauliLabel(p),
            closing_clifford=None if c == IDENTITY_TOKEN else CliffordLabel(c),
            predicted_outcome=Outcome(rec["predicted"]),
            seed=int(rec["seed"]),
        )
        if tracked_outcome(seq) is not seq.predicted_outcome:
            raise ValueError(f"record with seed {seq.seed} has an inconsistent predicted outcome")
        return seq


# ---------------------------------------------------------------------------
# rotation algebra


def _axis_vector(axis: str) -> np.ndarray:
    v = np.zeros(3, dtype=int)
    v[_AXES[axis]] = 1
    return v


def _cross_matrix(n: np.ndarray) -> np.ndarray:
    x, y, z = n
    return np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=int)


@lru_cache(maxsize=None)
def _so3(gate) -> np.ndarray:
    """Integer Bloch rotation of a protocol gate (Rodrigues with cos in {0, -1})."""
    if isinstance(gate, PauliLabel):
        if gate.axis == "I":
            return np.eye(3, dtype=int)
        n = _axis_vector(gate.axis)
        return -np.eye(3, dtype=int) + 2 * np.outer(n, n)
    n = gate.sign * _axis_vector(gate.axis)
    return _cross_matrix(n) + np.outer(n, n)


def rotation_matrix(gate) -> np.ndarray:
    return _so3(gate).copy()


def gate_unitary(gate) -> np.ndarray:
    """Ideal SU(2) unitary, including the label's global phase."""
    if isinstance(gate, PauliLabel):
        angle = np.pi / 2
    elif isinstance(gate, CliffordLabel):
        angle = np.pi / 4
    else:
        raise TypeError(f"not a protocol gate: {gate!r}")
    sigma = _PAULI_MATS[gate.axis]
    # exp(-i a s sigma) = cos(a) - i s sin(a) sigma, since sigma^2 = 1
    return np.cos(angle) * IDENTITY - 1j * gate.sign * np.sin(angle) * sigma


def step_cardinal(s: CardinalState, g) -> CardinalState:
    return CardinalState.from_vector(_so3(g) @ s.vector)


def closing_clifford_for(s: CardinalState) -> tuple[CliffordLabel | None, Outcome]:
    """Deterministic closing Clifford for ``s``.

    Poles need no rotation (identity).  Equatorial states take the first label
    in ``(+X90, -X90, +Y90, -Y90)`` that lands on a pole.
    """
    if s in POLE_OUTCOME:
        return None, POLE_OUTCOME[s]
    for c in CLIFFORDS:
        image = step_cardinal(s, c)
        if image in POLE_OUTCOME:
            return c, POLE_OUTCOME[image]
    raise AssertionError("unreachable: every equatorial state has a closing Clifford")


# ---------------------------------------------------------------------------
# the 24-element rotation group


@dataclass(frozen=True)
class CliffordTable:
    elements: tuple[np.ndarray, ...]
    products: np.ndarray  # products[i, j] = index of elements[i] @ elements[j]
    protocol_index: dict

    def __len__(self):
        return len(self.elements)

    def index_of(self, r: np.ndarray) -> int:
        key = tuple(np.asarray(r, dtype=int).ravel())
        for i, e in enumerate(self.elements):
            if tuple(e.ravel()) == key:
                return i
        raise KeyError("rotation not in table")

    def order(self, i: int) -> int:
        k, j = 1, i
        ident = self.index_of(np.eye(3, dtype=int))
        while j != ident:
            j = int(self.products[i, j])
            k += 1
        return k


@lru_cache(maxsize=1)
def clifford_table() -> CliffordTable:
    """The 24 single-qubit Clifford rotations as signed permutation matrices."""
    elems = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=int)
            for row, (col, sg) in enumerate(zip(perm, signs)):
                m[row, col] = sg
            if round(np.linalg.det(m)) == 1:
                elems.append(m)
    elems.sort(key=lambda m: tuple(-m.ravel()))
    lookup = {tuple(e.ravel()): i for i, e in enumerate(elems)}
    n = len(elems)
    products = np.empty((n, n), dtype=int)
    for i, a in enumerate(elems):
        for j, b in enumerate(elems):
            products[i, j] = lookup[tuple((a @ b).ravel())]
    protocol = {g: lookup[tuple(_so3(g).ravel())] for g in PROTOCOL_GATES}
    return CliffordTable(tuple(elems), products, protocol)


# ---------------------------------------------------------------------------
# sequences


def sequence_seed(master_seed: int, length: int, index: int) -> int:
    """64-bit per-sequence seed from (master seed, length, index)."""
    ss = np.random.SeedSequence([int(master_seed), int(length), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _track(start: CardinalState, gates: Iterable) -> CardinalState:
    s = start
    for g in gates:
        s = step_cardinal(s, g)
    return s


def _flat_gates(seq: GateSequence) -> list:
    out = []
    for g in seq.gates:
        out.extend((g.pauli, g.clifford))
    out.append(seq.closing_pauli)
    if seq.closing_clifford is not None:
        out.append(seq.closing_clifford)
    return out


def tracked_outcome(seq: GateSequence) -> Outcome | None:
    final = _track(CardinalState.PZ, _flat_gates(seq))
    return POLE_OUTCOME.get(final)


def sample_sequence(length: int, seed: int) -> GateSequence:
    if length < 1:
        raise ValueError(f"sequence length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)
    p_idx = rng.integers(len(PAULIS), size=length)
    c_idx = rng.integers(len(CLIFFORDS), size=length)
    closing_pauli = PAULIS[int(rng.integers(len(PAULIS)))]
    gates = tuple(ComputationalGate(PAULIS[p], CLIFFORDS[c]) for p, c in zip(p_idx, c_idx))

    s = CardinalState.PZ
    for g in gates:
        s = step_cardinal(step_cardinal(s, g.pauli), g.clifford)
    s = step_cardinal(s, closing_pauli)
    closing_clifford, outcome = closing_clifford_for(s)
    return GateSequence(length, gates, closing_pauli, closing_clifford, outcome, int(seed))


def ideal_sequence_unitary(seq: GateSequence) -> np.ndarray:
    mats = [gate_unitary(g) for g in _flat_gates(seq)]
    return chain_product(np.array(mats))


def write_sequences(path, sequences: Sequence[GateSequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for seq in sequences:
            fh.write(json.dumps(seq.to_record()) + "\n")


def read_sequences(path) -> list[GateSequence]:
    with open(path, encoding="utf-8") as fh:
        return [GateSequence.from_record(json.loads(line)) for line in fh if line.strip()]
