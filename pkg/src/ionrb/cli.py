"""Command-line entry point.

    ionrb generate --config cfg.json --seed 7 --out runs/a
    ionrb run      --config cfg.json --seed 7 --out runs/a --workers 4
    ionrb fit      --records runs/a/records.csv --out runs/a
    ionrb sweep    --axis detuning --values 5,10,25,50 --out runs/beta
    ionrb report   --run runs/a --out runs/a/report

Exit status is 0 on success, 2 for invalid input and 3 when a fit fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .campaign import (
    SWEEP_AXES,
    CampaignConfig,
    ConfigError,
    RecordError,
    read_records,
    run_campaign,
    run_sweep,
    write_run,
)
from .campaign import records as rec
from .campaign.runner import SWEEP_UNITS, execution_order
from .gateset import sample_sequence, sequence_seed, write_sequences

log = logging.getLogger("ionrb")

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT, detail: dict | None = None):
        super().__init__(message)
        self.code = code
        self.detail = detail


def _load_config(args) -> CampaignConfig:
    cfg = CampaignConfig.load(args.config) if args.config else CampaignConfig()
    if args.seed is not None:
        cfg = cfg.replace(master_seed=args.seed)
    return cfg


def _out_dir(args, cfg: CampaignConfig | None = None) -> Path:
    out = args.out or (cfg.output_dir if cfg else None)
    if not out:
        raise CliError("--out is required (or set output_dir in the config)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    seqs = [sample_sequence(l, sequence_seed(cfg.master_seed, l, i)) for l, i in execution_order(cfg)]
    write_sequences(out / rec.SEQUENCES_FILE, seqs)
    print(f"sequences={len(seqs)},path={out / rec.SEQUENCES_FILE}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    result = run_campaign(cfg, workers=args.workers)
    write_run(out, result, shots=not args.no_shots)
    print(
        f"sequences={len(result.outcomes)},simulated_time_s={result.simulated_time_s:.3f},"
        f"recalibrations={len(result.recalibrations)},threshold={result.pooled_threshold},out={out}"
    )
    return EXIT_OK


def _expected_lengths(args, records_path: Path):
    if args.config:
        return CampaignConfig.load(args.config).lengths
    sibling = records_path.parent / rec.CONFIG_FILE
    if sibling.exists():
        return CampaignConfig.load(sibling).lengths
    return None


def _fit_payload(records, n_boot: int, seed, split: bool) -> dict:
    fit = analysis.fit_with_bootstrap(records, n_boot, np.random.default_rng(seed))
    payload = {"fit": fit.to_json()}
    if split:
        bright, dark = analysis.split_fit_by_target(records)
        payload["bright_ending"] = bright.to_json()
        payload["dark_ending"] = dark.to_json()
        payload["bright_minus_dark_epg_prob"] = bright.epg - dark.epg
    return payload


def cmd_fit(args) -> int:
    path = Path(args.records)
    records = read_records(path)
    expected = _expected_lengths(args, path)
    if expected is not None:
        missing = rec.missing_lengths(records, expected)
        if missing:
            raise CliError(
                f"records file lacks lengths {missing}",
                EXIT_FIT,
                {"error": "missing_lengths", "missing_lengths": missing, "records": str(path)},
            )
    payload = _fit_payload(records, args.bootstrap, args.seed, args.split)
    out = _out_dir(args) if args.out else path.parent
    _write_json(out / "fit.json", payload)
    f = payload["fit"]
    print(f"epg={f['epg_prob']:.6e},epg_se={f['epg_se_prob']:.3e},"
          f"bootstrap_se={f['bootstrap_se_epg_prob']},dif={f['dif_prob']:.6e},out={out / 'fit.json'}")
    return EXIT_OK


def _sweep_summary(axis: str, points) -> analysis.SweepResult:
    if axis == "detuning":
        return analysis.extract_quadratic_coefficient([(p.value, p.epg) for p in points], "hz")
    if axis == "pi2_error":
        return analysis.extract_quadratic_coefficient([(p.value * 1e6, p.epg) for p in points], "us")
    if axis == "t2":
        # linear in the dephasing rate 1/T2
        return analysis.extract_power_coefficient([(1.0 / p.value, p.epg) for p in points], 1, "per_s")
    if axis == "leak":
        diff = [(p.value, p.bright_fit.epg - p.dark_fit.epg) for p in points]
        return analysis.extract_power_coefficient(diff, 1, "prob_per_pulse")
    return analysis.extract_power_coefficient([(p.value, p.epg) for p in points], 1, "prob")


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"--values must be comma-separated numbers: {exc}") from exc
    if len(values) < 3:
        raise CliError("--values needs at least 3 numbers")
    points = run_sweep(cfg, args.axis, values, args.sequences_per_length, args.reps, args.workers)
    summary = _sweep_summary(args.axis, points)
    payload = {
        "axis": args.axis,
        "value_unit": SWEEP_UNITS[args.axis],
        "sequences_per_length": args.sequences_per_length,
        "reps_per_sequence": args.reps,
        "points": [p.to_json(args.axis) for p in points],
        "summary": summary.to_json(),
    }
    _write_json(out / "sweep.json", payload)
    from .plotting import plot_sweep

    plot_sweep(summary, args.axis, out / "sweep.svg")
    print(f"axis={args.axis},coefficient={summary.coefficient:.6e},unit={summary.coefficient_unit},out={out}")
    return EXIT_OK


def cmd_report(args) -> int:
    from . import plotting
    from .detector import read_histogram_csv, threshold_from_references

    run = Path(args.run)
    records_path = run / rec.RECORDS_FILE
    if not records_path.exists():
        raise CliError(f"{run}: no {rec.RECORDS_FILE}; run 'ionrb run' first")
    out = _out_dir(args)
    records = read_records(records_path)
    payload = _fit_payload(records, args.bootstrap, args.seed, split=True)
    fit = analysis.fit_decay(records)
    _write_json(out / "fit.json", payload)

    written = [plotting.plot_decay(fit, out / "decay.svg")]
    written.append(plotting.write_fidelity_table(fit, out / "fidelity_by_length.csv"))
    written.append(plotting.write_success_histogram(records, out / "success_histogram.csv"))
    hist_path = run / rec.HISTOGRAM_FILE
    if hist_path.exists():
        bright, dark = read_histogram_csv(hist_path)
        thr = threshold_from_references(bright, dark)
        written.append(plotting.plot_reference_histogram(bright, dark, thr, out / "reference_histogram.svg"))
    cal_path = run / rec.CALIBRATION_FILE
    if cal_path.exists():
        entries = rec.read_calibration_log(cal_path)
        if entries:
            written.append(plotting.plot_calibration_log(entries, out / "calibration.svg"))
    for p in written:
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--config", default=None, help="campaign configuration (JSON)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="ionrb", description="Single-qubit randomized benchmarking simulator.")
    sub = p.add_subparsers(dest="cmd", required=True)

    sub.add_parser("generate", parents=[common], help="write the random gate sequences")

    run = sub.add_parser("run", parents=[common], help="simulate a campaign and write raw records")
    run.add_argument("--workers", type=int, default=1, help="worker processes")
    run.add_argument("--no-shots", action="store_true", help="skip the per-shot CSV")

    fit = sub.add_parser("fit", parents=[common], help="fit the decay of a records file")
    fit.add_argument("--records", required=True, help="records.csv written by 'run'")
    fit.add_argument("--bootstrap", type=int, default=1000, help="bootstrap resamples (0 disables)")
    fit.add_argument("--split", action="store_true", help="also fit bright- and dark-ending subsets")

    sw = sub.add_parser("sweep", parents=[common], help="error-budget sweep along one noise axis")
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", required=True, help="comma-separated values in SI units (Hz, s, probability)")
    sw.add_argument("--sequences-per-length", type=int, default=20)
    sw.add_argument("--reps", type=int, default=50)
    sw.add_argument("--workers", type=int, default=1)

    rp = sub.add_parser("report", parents=[common], help="render SVG figures and CSV tables for a run")
    rp.add_argument("--run", required=True, help="directory written by 'run'")
    rp.add_argument("--bootstrap", type=int, default=200, help="bootstrap resamples (0 disables)")
    return p


_COMMANDS = {"generate": cmd_generate, "run": cmd_run, "fit": cmd_fit, "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.cmd](args)
    except CliError as exc:
        if exc.detail is not None:
            print(json.dumps(exc.detail), file=sys.stderr)
        print(f"ionrb {args.cmd}: error: {exc}", file=sys.stderr)
        return exc.code
    except analysis.FitError as exc:
        print(json.dumps({"error": "fit_failed", "message": str(exc)}), file=sys.stderr)
        print(f"ionrb {args.cmd}: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (ConfigError, RecordError, ValueError, OSError) as exc:
        print(f"ionrb {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
