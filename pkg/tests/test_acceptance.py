"""Acceptance gate: one test per verification criterion, one line printed each.

Criteria 1-8 are fully synthetic and run here. Criterion 9 validates the
road-model strategy on real driving data (predictions from a self-supervised
depth network, LiDAR ground truth, road segmentation masks, per-sequence
camera heights). That data cannot ship with the package, so the criterion is
conditional: see test_real_data_criterion below for how to run it.

Run with `pytest -s tests/test_acceptance.py` to see the PASS/FAIL lines, or
`roadscale synth-check` for the same suite from the command line.
"""

import pytest

from roadscale.checks import CRITERIA

SEED = 0


@pytest.mark.parametrize("crit", CRITERIA, ids=[c.name for c in CRITERIA])
def test_criterion(crit):
    ok, detail = crit.func(SEED)
    print(f"criterion {crit.number} [{crit.name}]: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {crit.number} [{crit.name}] failed: {detail}"


@pytest.mark.skip(
    reason="needs real driving data: place predictions (pred/*.pfm), road masks "
    "(mask/*.png), LiDAR ground truth (gt/*.png) and calib.json under a dataset "
    "root, then run `roadscale evaluate --root <root> --strategy road-model` and "
    "compare against `--strategy gt-median`: Abs Rel must match within 0.01 and "
    "RMSE within 0.3 m"
)
def test_real_data_criterion():
    """Criterion 9: road-model vs gt-median on real data (documented only)."""
