"""On-disk layout of a campaign run.

Every file is plain text with a fixed column order so that two runs of the
same configuration produce byte-identical output.

``shots.csv``
    one row per detection: ``sequence_index,length,rep,kind,counts,threshold,classification``
    where ``kind`` is ``sequence``, ``bright_ref`` or ``dark_ref``.
``records.csv``
    one row per sequence with the success fraction used for fitting.
``sequences.jsonl``
    the gate sequences, one JSON object per line.
``histogram.csv``
    pooled reference counts.
``calibration_log.csv``
    recalibration epochs on the simulated clock.
``config.json``
    the fully resolved configuration.
"""
from __future__ import annotations

import csv
from pathlib import Path

from ..analysis import FidelityRecord
from ..detector import write_histogram_csv
from ..gateset import write_sequences
from .runner import CampaignResult

SHOTS_FILE = "shots.csv"
RECORDS_FILE = "records.csv"
SEQUENCES_FILE = "sequences.jsonl"
HISTOGRAM_FILE = "histogram.csv"
CALIBRATION_FILE = "calibration_log.csv"
CONFIG_FILE = "config.json"

SHOT_COLUMNS = ["sequence_index", "length", "rep", "kind", "counts", "threshold", "classification"]
RECORD_COLUMNS = ["sequence_index", "length", "seed", "expected", "success_fraction", "reps", "threshold", "clock_s"]
CALIBRATION_COLUMNS = ["time_s", "kind", "detuning_residual_hz", "pi2_residual_s"]


class RecordError(ValueError):
    pass


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_shots(path, result: CampaignResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(SHOT_COLUMNS)
        for o in result.outcomes:
            head = (o.unit.sequence_index, o.unit.length)
            for kind, counts in (("sequence", o.counts), ("bright_ref", o.bright_ref), ("dark_ref", o.dark_ref)):
                for rep, c in enumerate(counts):
                    w.writerow([*head, rep, kind, int(c), o.threshold, "bright" if c > o.threshold else "dark"])


def write_records(path, result: CampaignResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(RECORD_COLUMNS)
        for o in result.outcomes:
            u = o.unit
            w.writerow(
                [u.sequence_index, u.length, u.seed, o.expected, repr(o.success_fraction), len(o.counts), o.threshold,
                 repr(u.clock_s)]
            )


def write_calibration_log(path, result: CampaignResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(CALIBRATION_COLUMNS)
        for e in result.recalibrations:
            w.writerow([repr(e.time_s), e.kind, repr(e.detuning_residual_hz), repr(e.pi2_residual_s)])


def write_run(out_dir, result: CampaignResult, shots: bool = True) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if shots:
        write_shots(out / SHOTS_FILE, result)
    write_records(out / RECORDS_FILE, result)
    write_sequences(out / SEQUENCES_FILE, result.sequences)
    write_histogram_csv(out / HISTOGRAM_FILE, result.bright_histogram, result.dark_histogram)
    write_calibration_log(out / CALIBRATION_FILE, result)
    (out / CONFIG_FILE).write_text(result.config.to_json(), encoding="utf-8")
    return out


def read_records(path) -> list[FidelityRecord]:
    path = Path(path)
    if not path.exists():
        raise RecordError(f"{path}: no such records file")
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_COLUMNS[:6]) - set(reader.fieldnames or ())
        if missing:
            raise RecordError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                out.append(
                    FidelityRecord(
                        length=int(row["length"]),
                        sequence_index=int(row["sequence_index"]),
                        success_fraction=float(row["success_fraction"]),
                        expected_outcome=row["expected"],
                        reps=int(row["reps"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise RecordError(f"{path}:{line}: {exc}") from exc
    return out


def read_calibration_log(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {"time_s": float(r["time_s"]), "kind": r["kind"], "detuning_residual_hz": float(r["detuning_residual_hz"]),
             "pi2_residual_s": float(r["pi2_residual_s"])}
            for r in csv.DictReader(fh)
        ]


def missing_lengths(records, expected_lengths) -> list[int]:
    present = {r.length for r in records}
    return [int(l) for l in expected_lengths if l not in present]
