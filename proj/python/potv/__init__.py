"""Toolkit for verifying rules on large-scale ML training runs.

Everything lives in the compiled extension; this package re-exports it.
"""

from potv._core import (  # noqa: F401
    calibrate_epsilon,
    chips_required,
    confidentiality_scan,
    detection_prob_spread,
    detection_prob_stretched,
    lemma_gap,
    load_transcript,
    run_audit,
    samples_per_period,
    simulate,
    snapshot_presence_prob,
    spoof_suite,
    table1,
    table1_cells,
    train,
    Transcript,
    verify,
)

__all__ = [
    "calibrate_epsilon",
    "chips_required",
    "confidentiality_scan",
    "detection_prob_spread",
    "detection_prob_stretched",
    "lemma_gap",
    "load_transcript",
    "run_audit",
    "samples_per_period",
    "simulate",
    "snapshot_presence_prob",
    "spoof_suite",
    "table1",
    "table1_cells",
    "train",
    "Transcript",
    "verify",
]
