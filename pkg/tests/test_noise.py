import logging

import numpy as np
import pytest

import oracles
from ionrb import noise, qsim
from ionrb.analysis import fit_exponential
from ionrb.gateset import sample_sequence
from ionrb.noise import (
    AmplitudeModel,
    CalibrationState,
    CalibrationTrack,
    DephasingModel,
    DriftModel,
    NoiseConfig,
    realize,
)
from ionrb.propagate import simulate
from ionrb.qsim import Outcome
from ionrb.scheduler import compile

RABI = qsim.rabi_rate_for(21e-6)


def _success(seq, p_down):
    return p_down if seq.predicted_outcome is Outcome.DOWN else 1 - p_down


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"quasistatic_detuning_rms_hz": -1.0},
            {"leak_prob_per_pulse": -1e-5},
            {"leak_prob_per_pulse": 2.0},
            {"depolarizing_epg": 0.7},
            {"dephasing": DephasingModel(markovian_rate_per_s=-1.0)},
            {"drift": DriftModel(random_walk_hz_per_sqrt_s=-3.0)},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            NoiseConfig(**kwargs)

    def test_idle_decay_above_bound_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="ionrb.noise"):
            NoiseConfig(idle_decay_rate_per_s=1.0)
        assert "exceeds" in caplog.text

    def test_per_shot_flag(self):
        assert not NoiseConfig(static_detuning_hz=10, depolarizing_epg=1e-3).per_shot
        assert NoiseConfig(dephasing=DephasingModel(markovian_rate_per_s=1.0)).per_shot


class TestRealize:
    prog = compile(sample_sequence(21, 3))

    def test_deterministic(self):
        cfg = NoiseConfig(
            quasistatic_detuning_rms_hz=5,
            dephasing=DephasingModel(markovian_rate_per_s=2.0),
            leak_prob_per_pulse=0.01,
            depolarizing_epg=0.01,
        )
        a, b = realize(cfg, self.prog, 10, 42), realize(cfg, self.prog, 10, 42)
        assert a.detuning_hz == b.detuning_hz
        assert np.array_equal(a.dephasing_kick, b.dephasing_kick)
        assert np.array_equal(a.jumps, b.jumps)
        assert np.array_equal(a.leak, b.leak)

    def test_channels_use_independent_streams(self):
        base = NoiseConfig(dephasing=DephasingModel(markovian_rate_per_s=2.0))
        with_leak = NoiseConfig(dephasing=DephasingModel(markovian_rate_per_s=2.0), leak_prob_per_pulse=0.1)
        a, b = realize(base, self.prog, 8, 7), realize(with_leak, self.prog, 8, 7)
        assert np.array_equal(a.dephasing_kick, b.dephasing_kick)

    def test_zero_noise_reproduces_ideal(self):
        for l in (1, 8, 55):
            seq = sample_sequence(l, 100 + l)
            prog = compile(seq)
            res = simulate(prog, RABI, realize(NoiseConfig(), prog, 5, 0))
            assert np.allclose(_success(seq, res.p_down), 1.0, atol=1e-12)
            assert not res.leaked.any()

    def test_calibration_state_adds(self):
        r = realize(NoiseConfig(static_detuning_hz=3.0), self.prog, 1, 0, calibration=CalibrationState(2.0, 5e-9))
        assert r.detuning_hz == 5.0
        assert r.duration_offset_s == 5e-9

    def test_amplitude_scales_rabi_as_sqrt_power(self):
        r = realize(NoiseConfig(amplitude=AmplitudeModel(constant_power_error=0.01)), self.prog, 1, 0)
        assert r.rabi_scale == pytest.approx(np.sqrt(1.01))

    def test_warmup_decays(self):
        cfg = NoiseConfig(amplitude=AmplitudeModel(warmup_power_drift=0.02, warmup_time_constant_s=100))
        early = realize(cfg, self.prog, 1, 0, clock=0.0).rabi_scale
        late = realize(cfg, self.prog, 1, 0, clock=1000.0).rabi_scale
        assert early == pytest.approx(np.sqrt(1.02))
        assert late == pytest.approx(np.sqrt(1 + 0.02 * np.exp(-10)))

    def test_leak_only_on_drive_pulses(self):
        r = realize(NoiseConfig(leak_prob_per_pulse=0.5), self.prog, 50, 1)
        assert not r.leak[:, ~self.prog.drive].any()
        assert r.leak[:, self.prog.drive].mean() == pytest.approx(0.5, abs=0.05)

    def test_leak_rate(self):
        seq = sample_sequence(144, 9)
        prog = compile(seq)
        p = 1e-3
        res = simulate(prog, RABI, realize(NoiseConfig(leak_prob_per_pulse=p), prog, 20000, 3))
        expected = 1 - (1 - p) ** prog.n_drive
        assert abs(res.leaked.mean() - expected) < 4 * np.sqrt(expected * (1 - expected) / 20000)

    def test_idle_flips_only_in_idle_events(self):
        r = realize(NoiseConfig(idle_decay_rate_per_s=2000.0), self.prog, 50, 2)
        assert not r.jumps[:, self.prog.drive].any()
        assert r.jumps[:, ~self.prog.drive].any()


class TestDepolarizing:
    def test_matches_decay_model(self):
        # uniform X/Y/Z with probability 1.5 E shrinks the Bloch vector by 1 - 2E per gate
        epg, l, reps = 2e-3, 100, 4000
        succ = []
        for s in range(40):
            seq = sample_sequence(l, s)
            prog = compile(seq)
            res = simulate(prog, RABI, realize(NoiseConfig(depolarizing_epg=epg), prog, reps, s))
            succ.append(_success(seq, res.p_down).mean())
        expected = 0.5 + 0.5 * (1 - 2 * epg) ** l
        sigma = np.sqrt(expected * (1 - expected) / (40 * reps))
        assert abs(np.mean(succ) - expected) < 4 * sigma

    def test_coherent_and_dense_paths_agree(self):
        seq = sample_sequence(30, 5)
        prog = compile(seq)
        cfg = NoiseConfig(static_detuning_hz=200.0, depolarizing_epg=0.02)
        r = realize(cfg, prog, 64, 11)
        fast = simulate(prog, RABI, r).p_down
        # force the dense path by adding an all-zero per-shot detuning
        dense = simulate(prog, RABI, noise.RealizedNoise(**{**r.__dict__, "shot_detuning_hz": np.zeros(64)})).p_down
        assert np.allclose(fast, dense, atol=1e-10)


class TestCoherentErrors:
    @pytest.mark.parametrize("detuning", [50.0, 200.0])
    def test_detuning_epg_matches_transfer_matrix_oracle(self, detuning):
        # exact average over sequences versus the averaged-superoperator eigenvalue
        epg = oracles.benchmark_epg(detuning_hz=detuning)
        l, n_seq = 144, 300
        succ = []
        for s in range(n_seq):
            seq = sample_sequence(l, 10_000 + s)
            prog = compile(seq, include_closing=True)
            res = simulate(prog, RABI, realize(NoiseConfig(static_detuning_hz=detuning), prog, 1, s))
            succ.append(_success(seq, res.p_down[0]))
        succ = np.array(succ)
        signal = 2 * succ.mean() - 1
        sem = 2 * succ.std(ddof=1) / np.sqrt(n_seq)
        expected = (1 - 2 * epg) ** l
        assert abs(signal - expected) < 4 * sem + 2 * epg  # closing-slot error sets the second term

    def test_duration_error_oracle_scaling(self):
        a = oracles.benchmark_epg(duration_error_s=10e-9)
        b = oracles.benchmark_epg(duration_error_s=20e-9)
        assert b / a == pytest.approx(4.0, rel=0.01)


class TestEchoAndRamsey:
    def test_echo_t2(self):
        cfg = NoiseConfig(dephasing=DephasingModel(markovian_rate_per_s=1 / 0.38))
        taus = np.linspace(0, 1.2, 9)
        y = noise.echo_experiment(cfg, taus, 4000, 5)
        fit = fit_exponential(taus, y)
        assert fit.t2_s == pytest.approx(0.38, abs=0.02)

    def test_echo_refocuses_quasistatic(self):
        cfg = NoiseConfig(quasistatic_detuning_rms_hz=20.0)
        taus = [0.0, 0.01, 0.05]
        echo = noise.echo_experiment(cfg, taus, 1, 3)
        # per-sequence draws: average many independent single-shot sequences
        ramsey = np.mean([noise.ramsey_experiment(cfg, taus, 1, s) for s in range(300)], axis=0)
        assert np.all(echo > 0.999)
        assert ramsey[-1] < 0.75

    def test_ramsey_static_detuning_fringe(self):
        cfg = NoiseConfig(static_detuning_hz=10.0)
        tau = 0.025
        p = noise.ramsey_experiment(cfg, [tau], 1, 0)[0]
        # each pi/2 pulse adds about 2 tau_pi2 / pi of effective free precession
        assert p == pytest.approx(np.cos(np.pi * 10.0 * (tau + 4 * 21e-6 / np.pi)) ** 2, abs=1e-6)

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            noise.echo_experiment(NoiseConfig(), [-1.0], 1, 0)


class TestCalibrationTrack:
    def test_pure_function_of_seed(self):
        cfg = NoiseConfig(drift=DriftModel(random_walk_hz_per_sqrt_s=1.0, residual_rms_hz=2.0), pi2_time_residual_rms_s=5e-9)
        a = CalibrationTrack(cfg, [60, 120], [120], 4)
        b = CalibrationTrack(cfg, [60, 120], [120], 4)
        for t in (0.0, 30.5, 61.0, 500.0, 9000.0):
            assert a.state_at(t) == b.state_at(t)

    def test_detuning_equals_residual_at_recalibration(self):
        cfg = NoiseConfig(drift=DriftModel(random_walk_hz_per_sqrt_s=1.0, residual_rms_hz=2.0))
        track = CalibrationTrack(cfg, [60.0, 120.0], [], 1)
        assert track.detuning_at(60.0) == pytest.approx(track.freq_residual_hz(1))
        assert track.detuning_at(90.0) != track.detuning_at(60.0)

    def test_random_walk_variance(self):
        cfg = NoiseConfig(drift=DriftModel(random_walk_hz_per_sqrt_s=0.5))
        shifts = np.array([CalibrationTrack(cfg, [], [], s).qubit_shift_hz(400.0) for s in range(600)])
        # Var B(t) = D^2 t
        assert shifts.var() == pytest.approx(0.25 * 400, rel=0.2)

    def test_no_drift_means_no_detuning(self):
        track = CalibrationTrack(NoiseConfig(), [60.0], [120.0], 0)
        assert track.state_at(100.0) == CalibrationState(0.0, 0.0)


class TestPi2Calibration:
    @pytest.mark.parametrize("error", [0.0, 40e-9, -25e-9])
    def test_recovers_true_duration(self, error):
        cal = noise.pi2_calibration_experiment(NoiseConfig(pi2_time_error_s=error), 3)
        assert cal.setting_s == pytest.approx(21e-6 + error)
        assert cal.estimate_s == pytest.approx(21e-6, abs=3e-9)
