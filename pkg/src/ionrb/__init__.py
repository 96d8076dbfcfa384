"""Single-qubit randomized benchmarking with pulse-level noise and photon-count detection."""

__version__ = "0.1.0"
