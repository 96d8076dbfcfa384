"""Campaign execution.

A single coordinator lays out the simulated wall clock before any sequence
runs: it orders the sequences, assigns each one a clock time and seed, and
places recalibrations between sequences.  Workers then execute sequences as
pure functions of that plan, so results do not depend on how many processes
are used or in what order they finish.
"""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import detector, propagate, qsim
from ..analysis import FidelityRecord, FitResult, fit_decay, split_fit_by_target
from ..detector import CountHistogram
from ..gateset import GateSequence, sample_sequence, sequence_seed
from ..noise import CalibrationState, CalibrationTrack, DephasingModel, NoiseConfig, realize
from ..qsim import Outcome
from ..scheduler import compile as compile_program
from .config import CampaignConfig, ConfigError

log = logging.getLogger(__name__)

SWEEP_AXES = ("detuning", "pi2_error", "t2", "leak", "depolarizing")

# stream tags appended to (master, length, index) for the per-sequence streams
_NOISE_TAG, _SHOT_TAG = 1, 2


@dataclass(frozen=True)
class WorkUnit:
    sequence_index: int  # global, in execution order
    length: int
    index_in_length: int
    seed: int
    clock_s: float
    calibration: CalibrationState


@dataclass(frozen=True)
class RecalibrationEntry:
    time_s: float
    kind: str  # "frequency" | "pi2"
    detuning_residual_hz: float
    pi2_residual_s: float


@dataclass
class SequenceOutcome:
    unit: WorkUnit
    sequence: GateSequence
    counts: np.ndarray
    bright_ref: np.ndarray
    dark_ref: np.ndarray
    sequence_threshold: int  # from this sequence's own references
    threshold: int  # the one applied; equals the campaign threshold unless scope is "sequence"

    @property
    def expected(self) -> str:
        return "bright" if self.sequence.predicted_outcome is Outcome.DOWN else "dark"

    @property
    def read_bright(self) -> np.ndarray:
        return self.counts > self.threshold

    @property
    def success_fraction(self) -> float:
        hits = self.read_bright if self.expected == "bright" else ~self.read_bright
        return float(hits.mean())

    def record(self) -> FidelityRecord:
        return FidelityRecord(
            self.unit.length, self.unit.sequence_index, self.success_fraction, self.expected, len(self.counts)
        )


@dataclass
class CampaignResult:
    config: CampaignConfig
    outcomes: list[SequenceOutcome]
    recalibrations: list[RecalibrationEntry]
    simulated_time_s: float
    bright_histogram: CountHistogram = field(default_factory=CountHistogram)
    dark_histogram: CountHistogram = field(default_factory=CountHistogram)

    @property
    def records(self) -> list[FidelityRecord]:
        return [o.record() for o in self.outcomes]

    @property
    def sequences(self) -> list[GateSequence]:
        return [o.sequence for o in self.outcomes]

    @property
    def pooled_threshold(self) -> int:
        return detector.threshold_from_references(self.bright_histogram, self.dark_histogram)

    def fit(self) -> FitResult:
        return fit_decay(self.records)

    def split_fit(self) -> tuple[FitResult, FitResult]:
        return split_fit_by_target(self.records)


# ---------------------------------------------------------------------------
# planning


def shot_time_s(config: CampaignConfig, length: int) -> float:
    """Simulated time of one repetition of a length-``length`` sequence and its two references."""
    t = config.timing
    program = (length + 1) * t.gate_span_s
    per_detection = t.detection_window_s + config.shot_overhead_s
    return program + 3 * per_detection


def execution_order(config: CampaignConfig) -> list[tuple[int, int]]:
    """(length, index) pairs; lengths are interleaved so slow drifts spread over all of them."""
    return [(l, i) for i in range(config.sequences_per_length) for l in config.lengths]


def plan(config: CampaignConfig) -> tuple[list[WorkUnit], list[RecalibrationEntry], float]:
    """Assign clock times, seeds and calibration states to every sequence."""
    order = execution_order(config)
    rc = config.recalibration
    clock = 0.0
    starts = []
    freq_times, pi2_times = [], []
    next_freq = rc.frequency_interval_s
    next_pi2 = rc.pi2_interval_s
    for length, _ in order:
        if rc.enabled:
            # recalibrations run between sequences, at the first gap past their due time
            if clock >= next_freq:
                freq_times.append(clock)
                next_freq = clock + rc.frequency_interval_s
            if clock >= next_pi2:
                pi2_times.append(clock)
                next_pi2 = clock + rc.pi2_interval_s
        starts.append(clock)
        clock += config.reps_per_sequence * shot_time_s(config, length)

    track = CalibrationTrack(config.noise, freq_times, pi2_times, config.master_seed)
    units = [
        WorkUnit(k, l, i, sequence_seed(config.master_seed, l, i), t, track.state_at(t))
        for k, ((l, i), t) in enumerate(zip(order, starts))
    ]
    log_entries = [
        RecalibrationEntry(float(t), "frequency", track.freq_residual_hz(track.freq_epoch(t)), 0.0) for t in freq_times
    ] + [RecalibrationEntry(float(t), "pi2", 0.0, track.pi2_residual_s(track.pi2_epoch(t))) for t in pi2_times]
    log_entries.sort(key=lambda e: (e.time_s, e.kind))
    return units, log_entries, clock


# ---------------------------------------------------------------------------
# workers


def run_unit(config: CampaignConfig, unit: WorkUnit) -> SequenceOutcome:
    """Execute one sequence: gates, pulses, noise, propagation, detection, references."""
    seq = sample_sequence(unit.length, unit.seed)
    program = compile_program(seq, config.timing)
    base = [config.master_seed, unit.length, unit.index_in_length]
    reps = config.reps_per_sequence

    noise = realize(
        config.noise,
        program,
        reps,
        np.random.SeedSequence(base + [_NOISE_TAG]),
        clock=unit.clock_s,
        calibration=unit.calibration,
    )
    shots = propagate.simulate(program, qsim.rabi_rate_for(config.timing.pi2_duration_s), noise)

    rng = np.random.default_rng(np.random.SeedSequence(base + [_SHOT_TAG]))
    codes = np.where(rng.random(reps) < shots.p_down, detector.DOWN, detector.UP)
    codes[shots.leaked] = detector.LEAKED
    counts = detector.sample_counts_array(codes, config.photon, rng)
    bright, dark = detector.reference_counts(config.photon, reps, rng)
    threshold = detector.threshold_from_arrays(bright, dark)
    return SequenceOutcome(unit, seq, counts, bright, dark, threshold, threshold)


def _run_chunk(args) -> list[SequenceOutcome]:
    config, units = args
    return [run_unit(config, u) for u in units]


def run_campaign(config: CampaignConfig, workers: int = 1) -> CampaignResult:
    units, recal, total = plan(config)
    log.info("campaign: %d sequences, %.1f s simulated, %d recalibrations", len(units), total, len(recal))
    if workers <= 1:
        outcomes = [run_unit(config, u) for u in units]
    else:
        chunks = [units[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(config, c) for c in chunks]))
        outcomes = sorted((o for part in parts for o in part), key=lambda o: o.unit.sequence_index)

    result = CampaignResult(config, outcomes, recal, total)
    for o in outcomes:
        result.bright_histogram.update(o.bright_ref)
        result.dark_histogram.update(o.dark_ref)
    if config.threshold_scope == "campaign":
        thr = result.pooled_threshold
        for o in outcomes:
            o.threshold = thr
    return result


# ---------------------------------------------------------------------------
# error-budget sweeps


def isolated_noise(axis: str, value: float) -> NoiseConfig:
    """A noise configuration with only the swept channel switched on."""
    if axis == "detuning":
        return NoiseConfig(static_detuning_hz=value)
    if axis == "pi2_error":
        return NoiseConfig(pi2_time_error_s=value)
    if axis == "t2":
        if value <= 0:
            raise ConfigError("t2 sweep values must be positive (seconds)")
        return NoiseConfig(dephasing=DephasingModel(markovian_rate_per_s=1.0 / value))
    if axis == "leak":
        return NoiseConfig(leak_prob_per_pulse=value)
    if axis == "depolarizing":
        return NoiseConfig(depolarizing_epg=value)
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")


@dataclass(frozen=True)
class SweepPoint:
    value: float
    fit: FitResult
    bright_fit: FitResult | None = None
    dark_fit: FitResult | None = None

    @property
    def epg(self) -> float:
        return self.fit.epg

    def to_json(self, axis: str) -> dict:
        out = {"value": self.value, "unit": SWEEP_UNITS[axis], "epg_prob": self.fit.epg, "epg_se_prob": self.fit.epg_se,
               "dif_prob": self.fit.dif}
        if self.bright_fit is not None:
            out["bright_epg_prob"] = self.bright_fit.epg
            out["dark_epg_prob"] = self.dark_fit.epg
            out["bright_minus_dark_epg_prob"] = self.bright_fit.epg - self.dark_fit.epg
        return out


SWEEP_UNITS = {"detuning": "hz", "pi2_error": "s", "t2": "s", "leak": "prob_per_pulse", "depolarizing": "prob"}


def run_sweep(
    base: CampaignConfig,
    axis: str,
    values,
    sequences_per_length: int = 20,
    reps: int = 50,
    workers: int = 1,
) -> list[SweepPoint]:
    """Reduced campaigns, one per value, with every other noise channel off."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    points = []
    for v in values:
        cfg = dataclasses.replace(
            base,
            noise=isolated_noise(axis, float(v)),
            sequences_per_length=sequences_per_length,
            reps_per_sequence=reps,
        )
        res = run_campaign(cfg, workers)
        bright = dark = None
        if axis == "leak":
            bright, dark = res.split_fit()
        points.append(SweepPoint(float(v), res.fit(), bright, dark))
        log.info("sweep %s=%g: epg %.3e", axis, v, points[-1].epg)
    return points
