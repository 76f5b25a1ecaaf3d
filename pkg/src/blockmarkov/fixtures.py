"""The six measured-channel cells (two days x morning/noon/evening).

Each cell ships an initial estimate and a converged estimate of a 3-state
model: two error-free states and one error state.  ``PE_MEASURED`` and
``PE_REGENERATED`` are the published error rates of the measured and the
model-regenerated sequences, kept for reference only.
"""

from __future__ import annotations

from importlib import resources

from .io import read_model

CELLS = ("day1_morning", "day1_noon", "day1_evening",
         "day2_morning", "day2_noon", "day2_evening")
STAGES = ("initial", "converged")

PE_MEASURED = dict(zip(CELLS, (0.0512, 0.0330, 0.0762, 0.0487, 0.0389, 0.0678)))
PE_REGENERATED = dict(zip(CELLS, (0.0501, 0.0320, 0.0751, 0.0476, 0.0378, 0.0667)))


def fixture_path(cell: str, stage: str = "converged"):
    if cell not in CELLS:
        raise KeyError(f"unknown cell {cell!r}; expected one of {CELLS}")
    if stage not in STAGES:
        raise KeyError(f"unknown stage {stage!r}; expected one of {STAGES}")
    return resources.files("blockmarkov") / "data" / f"{cell}.{stage}.model"


def load_cell(cell: str, stage: str = "converged"):
    with resources.as_file(fixture_path(cell, stage)) as p:
        return read_model(p)[0]
