"""Campaign orchestration: configuration, simulated clock, execution and records."""
from .config import CampaignConfig, ConfigError, RecalibrationConfig
from .records import RecordError, read_records, write_run
from .runner import (
    SWEEP_AXES,
    CampaignResult,
    RecalibrationEntry,
    SequenceOutcome,
    SweepPoint,
    WorkUnit,
    isolated_noise,
    plan,
    run_campaign,
    run_sweep,
    run_unit,
    shot_time_s,
)

__all__ = [
    "CampaignConfig",
    "CampaignResult",
    "ConfigError",
    "RecalibrationConfig",
    "RecalibrationEntry",
    "RecordError",
    "SWEEP_AXES",
    "SequenceOutcome",
    "SweepPoint",
    "WorkUnit",
    "isolated_noise",
    "plan",
    "read_records",
    "run_campaign",
    "run_sweep",
    "run_unit",
    "shot_time_s",
    "write_run",
]
