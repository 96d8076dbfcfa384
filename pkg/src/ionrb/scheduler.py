"""Compile gate sequences into timed microwave pulse programs.

Every computational gate occupies the same nominal slot::

    [Pauli: pi/2, delay, pi/2  | or idle of 2*tau + delay] delay [Clifford pi/2] delay

so the slot is ``3*tau + 3*delay`` (65.16 us at the defaults).  z Paulis
become idle intervals plus a pi shift of the frame applied to every later
drive phase.  Times are held as integer picoseconds; drive starts are
rounded to the nearest point of the phase-update grid and drive durations to
the duration grid.  Idle events tile the gaps, so the events cover the
program contiguously.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .gateset import CliffordLabel, GateSequence, PauliLabel

PS = 1e-12

_BASE_PHASE = {
    ("X", 1): 0.0,
    ("X", -1): np.pi,
    ("Y", 1): np.pi / 2,
    ("Y", -1): 3 * np.pi / 2,
}


@dataclass(frozen=True)
class TimingConfig:
    pi2_duration_s: float = 21e-6
    interpulse_delay_s: float = 0.72e-6
    phase_update_grid_s: float = 16e-9
    duration_grid_s: float = 5e-12
    detection_window_s: float = 400e-6

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        if self.phase_update_grid_s <= 0 or self.duration_grid_s <= 0:
            raise ValueError("timing grids must be positive")

    @property
    def pi2_ps(self) -> int:
        return _quantize(_to_ps(self.pi2_duration_s), _to_ps(self.duration_grid_s))

    @property
    def delay_ps(self) -> int:
        return _to_ps(self.interpulse_delay_s)

    @property
    def gate_span_ps(self) -> int:
        return 3 * self.pi2_ps + 3 * self.delay_ps

    @property
    def gate_span_s(self) -> float:
        return self.gate_span_ps * PS


@dataclass(frozen=True)
class FrameState:
    phase_offset: float = 0.0

    def shifted(self, delta: float) -> FrameState:
        return FrameState(float(np.mod(self.phase_offset + delta, 2 * np.pi)))


@dataclass(frozen=True)
class PulseEvent:
    start_ps: int
    duration_ps: int
    phase: float
    kind: str  # "drive" | "idle"

    @property
    def start(self) -> float:
        return self.start_ps * PS

    @property
    def duration(self) -> float:
        return self.duration_ps * PS

    @property
    def end_ps(self) -> int:
        return self.start_ps + self.duration_ps


@dataclass
class PulseProgram:
    """Contiguous event list stored column-wise."""

    start_ps: np.ndarray
    duration_ps: np.ndarray
    phase: np.ndarray
    drive: np.ndarray
    gate_starts_ps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    gate_of_event: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    sequence: GateSequence | None = None

    def __len__(self):
        return len(self.start_ps)

    @property
    def total_duration_ps(self) -> int:
        if len(self.start_ps) == 0:
            return 0
        return int(self.start_ps[-1] + self.duration_ps[-1])

    @property
    def total_duration(self) -> float:
        return self.total_duration_ps * PS

    @property
    def durations(self) -> np.ndarray:
        return self.duration_ps * PS

    @property
    def n_drive(self) -> int:
        return int(np.count_nonzero(self.drive))

    @property
    def events(self) -> list[PulseEvent]:
        return [
            PulseEvent(int(s), int(d), float(p), "drive" if k else "idle")
            for s, d, p, k in zip(self.start_ps, self.duration_ps, self.phase, self.drive)
        ]

    @classmethod
    def from_events(cls, events, sequence: GateSequence | None = None) -> PulseProgram:
        events = list(events)
        return cls(
            start_ps=np.array([e.start_ps for e in events], dtype=np.int64),
            duration_ps=np.array([e.duration_ps for e in events], dtype=np.int64),
            phase=np.array([e.phase for e in events], dtype=float),
            drive=np.array([e.kind == "drive" for e in events], dtype=bool),
            sequence=sequence,
        )

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write("start_ns,duration_ps,phase_urad,kind\n")
        for e in self.events:
            urad = int(round(e.phase * 1e6))
            buf.write(f"{_ps_to_ns_text(e.start_ps)},{e.duration_ps},{urad},{e.kind}\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> PulseProgram:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "start_ns,duration_ps,phase_urad,kind":
            raise ValueError("not a pulse program dump")
        events = []
        for ln in lines[1:]:
            start, dur, urad, kind = ln.split(",")
            if kind not in ("drive", "idle"):
                raise ValueError(f"unknown event kind {kind!r}")
            events.append(PulseEvent(_ns_text_to_ps(start), int(dur), int(urad) * 1e-6, kind))
        return cls.from_events(events)


def _to_ps(seconds: float) -> int:
    return int(round(seconds / PS))


def _quantize(value_ps: int, grid_ps: int) -> int:
    return int(round(value_ps / grid_ps)) * grid_ps


def _ps_to_ns_text(ps: int) -> str:
    whole, frac = divmod(int(ps), 1000)
    return str(whole) if frac == 0 else f"{whole}.{frac:03d}"


def _ns_text_to_ps(text: str) -> int:
    if "." in text:
        whole, frac = text.split(".")
        return int(whole) * 1000 + int(frac.ljust(3, "0"))
    return int(text) * 1000


def drive_phase(label, frame: FrameState) -> float:
    """Drive phase of each pi/2 pulse realizing ``label`` in ``frame``."""
    if isinstance(label, (PauliLabel, CliffordLabel)) and label.axis in ("X", "Y"):
        return float(np.mod(_BASE_PHASE[(label.axis, label.sign)] + frame.phase_offset, 2 * np.pi))
    raise ValueError(f"{label!r} is not realized by a drive pulse")


class _Builder:
    def __init__(self, timing: TimingConfig):
        self.grid = _to_ps(timing.phase_update_grid_s)
        self.tau = timing.pi2_ps
        self.delay = timing.delay_ps
        self.cursor = 0
        self.starts: list[int] = []
        self.durs: list[int] = []
        self.phases: list[float] = []
        self.drive: list[bool] = []
        self.gate_idx: list[int] = []
        self.gate = 0

    def _emit(self, start, dur, phase, drive):
        if start > self.cursor:
            self._push(self.cursor, start - self.cursor, 0.0, False)
        elif start < self.cursor:
            raise ValueError("timing grid too coarse: events would overlap")
        if dur > 0:
            self._push(start, dur, phase, drive)

    def _push(self, start, dur, phase, drive):
        self.starts.append(start)
        self.durs.append(dur)
        self.phases.append(phase)
        self.drive.append(drive)
        self.gate_idx.append(self.gate)
        self.cursor = start + dur

    def pulse(self, nominal_start, phase):
        start = _quantize(nominal_start, self.grid)
        self._emit(start, self.tau, phase, True)

    def idle(self, nominal_start, dur):
        self._emit(nominal_start, dur, 0.0, False)

    def pad_to(self, t):
        self._emit(t, 0, 0.0, False)


def compile(seq: GateSequence, timing: TimingConfig = TimingConfig(), include_closing: bool = True) -> PulseProgram:
    b = _Builder(timing)
    tau, delay = timing.pi2_ps, timing.delay_ps
    span = timing.gate_span_ps
    frame = FrameState()
    slots = [(g.pauli, g.clifford) for g in seq.gates]
    if include_closing:
        slots.append((seq.closing_pauli, seq.closing_clifford))

    gate_starts = []
    for k, (pauli, cliff) in enumerate(slots):
        t0 = k * span
        b.gate = k
        gate_starts.append(t0)
        if pauli.driven:
            ph = drive_phase(pauli, frame)
            b.pulse(t0, ph)
            b.pulse(t0 + tau + delay, ph)
        else:
            b.idle(t0, 2 * tau + delay)
            if pauli.axis == "Z":
                frame = frame.shifted(np.pi)
        if cliff is None:
            b.idle(t0 + 2 * tau + 2 * delay, tau)
        else:
            b.pulse(t0 + 2 * tau + 2 * delay, drive_phase(cliff, frame))
    # the trailing delay of the last slot closes the program on a nominal boundary
    b.pad_to(len(slots) * span)

    return PulseProgram(
        start_ps=np.array(b.starts, dtype=np.int64),
        duration_ps=np.array(b.durs, dtype=np.int64),
        phase=np.array(b.phases, dtype=float),
        drive=np.array(b.drive, dtype=bool),
        gate_starts_ps=np.array(gate_starts, dtype=np.int64),
        gate_of_event=np.array(b.gate_idx, dtype=np.int64),
        sequence=seq,
    )


def program_duration(p: PulseProgram) -> float:
    """Wall-clock time of the computational gates, closing slot excluded."""
    seq = p.sequence
    if seq is not None and len(p.gate_starts_ps) > seq.length:
        return int(p.gate_starts_ps[seq.length]) * PS
    return p.total_duration


def concatenate(programs) -> PulseProgram:
    """Back-to-back concatenation; each program is shifted to start at the previous end."""
    starts, durs, phases, drive = [], [], [], []
    offset = 0
    for p in programs:
        starts.append(p.start_ps + offset)
        durs.append(p.duration_ps)
        phases.append(p.phase)
        drive.append(p.drive)
        offset += p.total_duration_ps
    if not starts:
        return PulseProgram(*(np.zeros(0, dtype=t) for t in (np.int64, np.int64, float, bool)))
    return PulseProgram(np.concatenate(starts), np.concatenate(durs), np.concatenate(phases), np.concatenate(drive))
