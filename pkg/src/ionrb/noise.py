"""Stochastic imperfection models and the auxiliary calibration experiments.

Channels and when they are drawn:

=============================  ==========================================
static detuning                constant
quasi-static detuning          once per sequence
frequency drift                Brownian qubit frequency, drive re-centred at
                               each recalibration (residual draw)
pi/2 duration error            constant plus a residual per pi/2 recalibration
microwave power                constant error, exponential warm-up, per-pulse
                               jitter; Rabi rate scales as sqrt(power)
markovian dephasing            Gaussian z kick after every event,
                               variance ``2 * rate * duration``
quasi-static dephasing         one frequency draw per shot
depolarizing                   random Pauli after each computational gate
idle decay                     bit flip during unpulsed intervals
leakage                        absorbing, after each drive pulse
=============================  ==========================================

Every random stream is a child of one seed, one child per channel, so turning
a channel on or off leaves the draws of the others untouched.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import propagate, qsim
from .scheduler import PS, PulseEvent, PulseProgram, TimingConfig

log = logging.getLogger(__name__)

IDLE_DECAY_BOUND_PER_S = 0.2  # 2e-7 per microsecond

_CHANNELS = ("quasistatic", "shot_detuning", "power_jitter", "kicks", "depolarizing", "idle_decay", "leak")


@dataclass(frozen=True)
class DriftModel:
    random_walk_hz_per_sqrt_s: float = 0.0
    residual_rms_hz: float = 0.0
    step_s: float = 1.0


@dataclass(frozen=True)
class AmplitudeModel:
    constant_power_error: float = 0.0
    warmup_power_drift: float = 0.0
    warmup_time_constant_s: float = 300.0
    pulse_to_pulse_power_rms: float = 0.0


@dataclass(frozen=True)
class DephasingModel:
    markovian_rate_per_s: float = 0.0
    quasistatic_rms_hz: float = 0.0


@dataclass(frozen=True)
class NoiseConfig:
    static_detuning_hz: float = 0.0
    quasistatic_detuning_rms_hz: float = 0.0
    drift: DriftModel | None = None
    pi2_time_error_s: float = 0.0
    pi2_time_residual_rms_s: float = 0.0
    amplitude: AmplitudeModel = field(default_factory=AmplitudeModel)
    dephasing: DephasingModel = field(default_factory=DephasingModel)
    depolarizing_epg: float = 0.0
    leak_prob_per_pulse: float = 0.0
    idle_decay_rate_per_s: float = 0.0

    def __post_init__(self):
        nonneg = {
            "quasistatic_detuning_rms_hz": self.quasistatic_detuning_rms_hz,
            "pi2_time_residual_rms_s": self.pi2_time_residual_rms_s,
            "pulse_to_pulse_power_rms": self.amplitude.pulse_to_pulse_power_rms,
            "warmup_time_constant_s": self.amplitude.warmup_time_constant_s,
            "markovian_rate_per_s": self.dephasing.markovian_rate_per_s,
            "quasistatic_rms_hz": self.dephasing.quasistatic_rms_hz,
            "depolarizing_epg": self.depolarizing_epg,
            "leak_prob_per_pulse": self.leak_prob_per_pulse,
            "idle_decay_rate_per_s": self.idle_decay_rate_per_s,
        }
        if self.drift is not None:
            nonneg["random_walk_hz_per_sqrt_s"] = self.drift.random_walk_hz_per_sqrt_s
            nonneg["residual_rms_hz"] = self.drift.residual_rms_hz
        for name, value in nonneg.items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        if self.leak_prob_per_pulse > 1:
            raise ValueError("leak_prob_per_pulse must be <= 1")
        if self.depolarizing_epg > 0.5:
            raise ValueError("depolarizing_epg must be <= 0.5")
        if self.idle_decay_rate_per_s > IDLE_DECAY_BOUND_PER_S:
            log.warning(
                "idle_decay_rate_per_s=%g exceeds the measured bound of %g /s",
                self.idle_decay_rate_per_s,
                IDLE_DECAY_BOUND_PER_S,
            )

    @property
    def per_shot(self) -> bool:
        return (
            self.dephasing.markovian_rate_per_s > 0
            or self.dephasing.quasistatic_rms_hz > 0
            or self.amplitude.pulse_to_pulse_power_rms > 0
        )


@dataclass(frozen=True)
class CalibrationState:
    """What the most recent recalibrations left behind at a given time."""

    detuning_hz: float = 0.0
    pi2_residual_s: float = 0.0


@dataclass(frozen=True)
class RealizedPulseNoise:
    detuning: float
    rabi_scale: float
    duration_offset: float
    dephasing_kick: float
    leak_event: bool


@dataclass
class RealizedNoise:
    """Noise realized for one program over ``reps`` shots.

    Per-event arrays are indexed ``[shot, event]``; ``None`` means the channel
    is off.
    """

    reps: int
    detuning_hz: float
    duration_offset_s: float
    rabi_scale: float | np.ndarray
    shot_detuning_hz: np.ndarray | None = None
    dephasing_kick: np.ndarray | None = None
    jumps: np.ndarray | None = None  # int8 Pauli index applied after the event
    leak: np.ndarray | None = None

    @property
    def per_shot(self) -> bool:
        return (
            self.shot_detuning_hz is not None
            or self.dephasing_kick is not None
            or np.ndim(self.rabi_scale) > 0
        )

    def leaked_shots(self) -> np.ndarray:
        if self.leak is None:
            return np.zeros(self.reps, dtype=bool)
        return self.leak.any(axis=1)

    def shots(self, sl: slice) -> RealizedNoise:
        def cut(a):
            return None if a is None else a[sl]

        return replace(
            self,
            reps=len(range(*sl.indices(self.reps))),
            rabi_scale=self.rabi_scale[sl] if np.ndim(self.rabi_scale) else self.rabi_scale,
            shot_detuning_hz=cut(self.shot_detuning_hz),
            dephasing_kick=cut(self.dephasing_kick),
            jumps=cut(self.jumps),
            leak=cut(self.leak),
        )

    def pulse(self, rep: int, k: int) -> RealizedPulseNoise:
        det = self.detuning_hz
        if self.shot_detuning_hz is not None:
            det += float(self.shot_detuning_hz[rep])
        scale = float(self.rabi_scale[rep, k]) if np.ndim(self.rabi_scale) else float(self.rabi_scale)
        kick = 0.0 if self.dephasing_kick is None else float(self.dephasing_kick[rep, k])
        leak = False if self.leak is None else bool(self.leak[rep, k])
        return RealizedPulseNoise(det, scale, self.duration_offset_s, kick, leak)


def _as_seed_sequence(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(rng.integers(2**63))
    return np.random.SeedSequence(rng)


def _power_offset(amp: AmplitudeModel, clock: float) -> float:
    warm = 0.0
    if amp.warmup_power_drift and amp.warmup_time_constant_s > 0:
        warm = amp.warmup_power_drift * np.exp(-clock / amp.warmup_time_constant_s)
    return amp.constant_power_error + warm


def realize(
    config: NoiseConfig,
    program: PulseProgram,
    reps: int,
    rng,
    clock: float = 0.0,
    calibration: CalibrationState = CalibrationState(),
) -> RealizedNoise:
    """Draw every enabled channel for ``reps`` shots of ``program``.

    ``rng`` may be an int seed, a ``SeedSequence`` or a ``Generator``; the
    result is a pure function of it together with the other arguments.
    """
    streams = dict(zip(_CHANNELS, (np.random.default_rng(s) for s in _as_seed_sequence(rng).spawn(len(_CHANNELS)))))
    n = len(program)
    drive = program.drive
    dur = program.durations

    detuning = config.static_detuning_hz + calibration.detuning_hz
    if config.quasistatic_detuning_rms_hz > 0:
        detuning += config.quasistatic_detuning_rms_hz * streams["quasistatic"].normal()

    shot_det = None
    if config.dephasing.quasistatic_rms_hz > 0:
        shot_det = config.dephasing.quasistatic_rms_hz * streams["shot_detuning"].normal(size=reps)

    power = _power_offset(config.amplitude, clock)
    if config.amplitude.pulse_to_pulse_power_rms > 0:
        jitter = config.amplitude.pulse_to_pulse_power_rms * streams["power_jitter"].normal(size=(reps, n))
        rabi_scale = np.sqrt(np.maximum(1.0 + power + jitter, 0.0))
    else:
        rabi_scale = float(np.sqrt(max(1.0 + power, 0.0)))

    kicks = None
    if config.dephasing.markovian_rate_per_s > 0:
        sd = np.sqrt(2.0 * config.dephasing.markovian_rate_per_s * dur)
        kicks = streams["kicks"].normal(size=(reps, n)) * sd

    jumps = None
    if config.depolarizing_epg > 0 and len(program.gate_starts_ps):
        jumps = np.zeros((reps, n), dtype=np.int8)
        _depolarizing_jumps(jumps, program, config.depolarizing_epg, streams["depolarizing"])
    if config.idle_decay_rate_per_s > 0:
        if jumps is None:
            jumps = np.zeros((reps, n), dtype=np.int8)
        p_flip = np.where(drive, 0.0, -np.expm1(-config.idle_decay_rate_per_s * dur))
        hit = streams["idle_decay"].random((reps, n)) < p_flip
        jumps[hit & (jumps == 0)] = 1

    leak = None
    if config.leak_prob_per_pulse > 0:
        leak = np.zeros((reps, n), dtype=bool)
        idx = np.flatnonzero(drive)
        leak[:, idx] = streams["leak"].random((reps, len(idx))) < config.leak_prob_per_pulse

    return RealizedNoise(
        reps=reps,
        detuning_hz=float(detuning),
        duration_offset_s=config.pi2_time_error_s + calibration.pi2_residual_s,
        rabi_scale=rabi_scale,
        shot_detuning_hz=shot_det,
        dephasing_kick=kicks,
        jumps=jumps,
        leak=leak,
    )


def _depolarizing_jumps(jumps, program, epg, rng):
    """Random Pauli after the last event of each computational gate.

    A replacement by the maximally mixed state with probability ``2*epg``
    shrinks the Bloch vector by ``1 - 2*epg``; equivalently a uniformly chosen
    X, Y or Z with probability ``1.5*epg``.
    """
    seq = program.sequence
    n_comp = seq.length if seq is not None else len(program.gate_starts_ps)
    gate = program.gate_of_event
    last = np.flatnonzero(np.diff(gate, append=gate[-1] + 1))  # last event of each gate
    last = last[gate[last] < n_comp]
    reps = jumps.shape[0]
    hit = rng.random((reps, len(last))) < 1.5 * epg
    which = rng.integers(1, 4, size=(reps, len(last)), dtype=np.int8)
    r, g = np.nonzero(hit)
    jumps[r, last[g]] = which[r, g]


# ---------------------------------------------------------------------------
# drift and recalibration


class CalibrationTrack:
    """Qubit-frequency random walk and recalibration residuals.

    The qubit frequency follows a Brownian path ``B(t)`` sampled on a grid of
    ``drift.step_s`` and linearly interpolated.  At each frequency
    recalibration ``t_e`` the drive is set to ``B(t_e) + r_e`` with residual
    ``r_e``; detuning afterwards is ``r_e + B(t_e) - B(t)``.  Every quantity is
    a pure function of ``seed`` and the recalibration times.
    """

    _BLOCK = 4096

    def __init__(self, config: NoiseConfig, freq_times, pi2_times, seed: int):
        self.config = config
        self.freq_times = np.asarray(sorted(set([0.0, *freq_times])), dtype=float)
        self.pi2_times = np.asarray(sorted(set([0.0, *pi2_times])), dtype=float)
        self.seed = int(seed)
        self._blocks: list[np.ndarray] = []

    def _walk_block(self, b: int) -> np.ndarray:
        while len(self._blocks) <= b:
            k = len(self._blocks)
            drift = self.config.drift
            steps = np.random.default_rng([self.seed, 101, k]).normal(size=self._BLOCK)
            steps *= drift.random_walk_hz_per_sqrt_s * np.sqrt(drift.step_s)
            start = self._blocks[-1][-1] if self._blocks else 0.0
            self._blocks.append(start + np.concatenate([[0.0], np.cumsum(steps)])[1:])
        return self._blocks[b]

    def _walk_at_index(self, i: int) -> float:
        if i == 0:
            return 0.0
        b, j = divmod(i - 1, self._BLOCK)
        return float(self._walk_block(b)[j])

    def qubit_shift_hz(self, t: float) -> float:
        drift = self.config.drift
        if drift is None or drift.random_walk_hz_per_sqrt_s == 0:
            return 0.0
        x = t / drift.step_s
        i = int(np.floor(x))
        frac = x - i
        lo = self._walk_at_index(i)
        return lo if frac == 0 else lo + frac * (self._walk_at_index(i + 1) - lo)

    def freq_residual_hz(self, epoch: int) -> float:
        drift = self.config.drift
        if drift is None or drift.residual_rms_hz == 0:
            return 0.0
        return float(drift.residual_rms_hz * np.random.default_rng([self.seed, 102, epoch]).normal())

    def pi2_residual_s(self, epoch: int) -> float:
        if self.config.pi2_time_residual_rms_s == 0:
            return 0.0
        return float(self.config.pi2_time_residual_rms_s * np.random.default_rng([self.seed, 103, epoch]).normal())

    def freq_epoch(self, t: float) -> int:
        return int(np.searchsorted(self.freq_times, t, side="right") - 1)

    def pi2_epoch(self, t: float) -> int:
        return int(np.searchsorted(self.pi2_times, t, side="right") - 1)

    def detuning_at(self, t: float) -> float:
        e = self.freq_epoch(t)
        te = self.freq_times[e]
        return self.freq_residual_hz(e) + self.qubit_shift_hz(te) - self.qubit_shift_hz(t)

    def state_at(self, t: float) -> CalibrationState:
        return CalibrationState(self.detuning_at(t), self.pi2_residual_s(self.pi2_epoch(t)))


# ---------------------------------------------------------------------------
# auxiliary experiments


def _program(events) -> PulseProgram:
    out, t = [], 0
    for dur_ps, phase, kind in events:
        if dur_ps > 0:
            out.append(PulseEvent(t, int(dur_ps), phase, kind))
            t += int(dur_ps)
    return PulseProgram.from_events(out)


def _ps(seconds: float) -> int:
    return int(round(seconds / PS))


def echo_program(tau: float, timing: TimingConfig = TimingConfig()) -> PulseProgram:
    """pi/2 - tau/2 - pi - tau/2 - pi/2, all about +x."""
    t2 = timing.pi2_ps
    half = _ps(tau / 2)
    return _program([(t2, 0.0, "drive"), (half, 0.0, "idle"), (2 * t2, 0.0, "drive"), (half, 0.0, "idle"), (t2, 0.0, "drive")])


def ramsey_program(tau: float, timing: TimingConfig = TimingConfig()) -> PulseProgram:
    """pi/2 about +x, wait tau, pi/2 about -x (ideally back to |down>)."""
    t2 = timing.pi2_ps
    return _program([(t2, 0.0, "drive"), (_ps(tau), 0.0, "idle"), (t2, np.pi, "drive")])


def _survival(make_program, config, tau_list, reps, rng, timing, sample_shots):
    ss = _as_seed_sequence(rng)
    children = ss.spawn(len(tau_list))
    rabi = qsim.rabi_rate_for(timing.pi2_duration_s)
    out = np.empty(len(tau_list))
    for i, (tau, child) in enumerate(zip(tau_list, children)):
        if tau < 0:
            raise ValueError(f"tau must be >= 0, got {tau}")
        prog = make_program(tau, timing)
        noise_seed, shot_seed = child.spawn(2)
        res = propagate.simulate(prog, rabi, realize(config, prog, reps, noise_seed))
        p = np.where(res.leaked, 0.0, res.p_down)
        if sample_shots:
            out[i] = np.mean(np.random.default_rng(shot_seed).random(reps) < p)
        else:
            out[i] = p.mean()
    return out


def echo_experiment(config, tau_list, reps, rng, timing=TimingConfig(), sample_shots=False) -> np.ndarray:
    """|down> recovery probability after a spin echo of total free time tau."""
    return _survival(echo_program, config, list(tau_list), reps, rng, timing, sample_shots)


def ramsey_experiment(config, tau_list, reps, rng, timing=TimingConfig(), sample_shots=False) -> np.ndarray:
    return _survival(ramsey_program, config, list(tau_list), reps, rng, timing, sample_shots)


@dataclass(frozen=True)
class Pi2Calibration:
    estimate_s: float
    setting_s: float
    scan_s: np.ndarray
    p_down: np.ndarray


def pi2_calibration_experiment(
    config: NoiseConfig,
    rng,
    timing: TimingConfig = TimingConfig(),
    n_pulses: int = 256,
    scan_half_width_s: float = 150e-9,
    n_points: int = 41,
    reps: int = 100,
    clock: float = 0.0,
) -> Pi2Calibration:
    """Locate the true pi/2 time with a train of ``n_pulses`` in-phase pi/2 pulses.

    The current setting is the nominal duration plus the configured duration
    error.  Settings around it are scanned; ``n_pulses`` pulses of setting ``s``
    return ``|down>`` with probability ``(1 + cos(k (s - tau0))) / 2`` where
    ``k = n_pulses * pi / (2 tau_nominal)``.  The peak ``tau0`` is fitted.
    """
    from .analysis import least_squares

    tau_nom = timing.pi2_duration_s
    setting = tau_nom + config.pi2_time_error_s
    scan = setting + np.linspace(-scan_half_width_s, scan_half_width_s, n_points)
    rabi = qsim.rabi_rate_for(tau_nom)
    delay = timing.delay_ps
    ss = _as_seed_sequence(rng)
    children = ss.spawn(n_points)
    # the scan sets durations directly; the standing error is already in `setting`
    scan_config = replace(config, pi2_time_error_s=0.0, pi2_time_residual_rms_s=0.0)

    p_meas = np.empty(n_points)
    for i, (s, child) in enumerate(zip(scan, children)):
        events = []
        for _ in range(n_pulses):
            events += [(_ps(s), 0.0, "drive"), (delay, 0.0, "idle")]
        prog = _program(events[:-1])
        noise_seed, shot_seed = child.spawn(2)
        res = propagate.simulate(prog, rabi, realize(scan_config, prog, reps, noise_seed, clock=clock))
        p = np.where(res.leaked, 0.0, res.p_down)
        p_meas[i] = np.mean(np.random.default_rng(shot_seed).random(reps) < p)

    k = n_pulses * np.pi / (2 * tau_nom)
    x_ns = (scan - setting) * 1e9

    def model(params, x):
        amp, c_ns = params
        return 0.5 + 0.5 * amp * np.cos(k * 1e-9 * (x - c_ns))

    c0 = x_ns[int(np.argmax(p_meas))]
    fit = least_squares(lambda q: model(q, x_ns) - p_meas, np.array([1.0, c0]))
    return Pi2Calibration(setting + fit.params[1] * 1e-9, setting, scan, p_meas)
