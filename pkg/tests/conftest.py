"""Shared fixtures.

The end-to-end acceptance checks all read from two seeded sweeps (the
incoherent-drive row over a dense window grid, and three off-star drive
amplitudes over a common grid). Both are built once per session; everything
downstream indexes the resulting PointResult table.
"""

import math
from types import SimpleNamespace

import pytest

from fluotomo.config import ExperimentConfig
from fluotomo.runner import cmd_sweep

OMEGA_STAR = math.sqrt(1.0 / 8.0)

STAR_TS = [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
OFF_OMEGAS = [0.2, 0.5, 0.8]
OFF_TS = [1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 10.0]

ACCEPTANCE_SAMPLES = 10000


def _point_table(result):
    return {(round(p.omega, 9), round(p.T, 9)): p for p in result.points}


def _run_sweep(tmp_path_factory, name, omegas, ts):
    root = tmp_path_factory.mktemp(name)
    config = ExperimentConfig.from_dict(
        data={
            "sweep": {"omegas": omegas, "Ts": ts},
            "trajectory": {"samples_per_phase": ACCEPTANCE_SAMPLES},
            "output_dir": str(root),
        }
    )
    code, result = cmd_sweep(config)
    assert not result.failures, f"sweep points failed: {result.failures}"
    return SimpleNamespace(
        root=root,
        exit_code=code,
        result=result,
        points=_point_table(result),
        config=config,
    )


@pytest.fixture(scope="session")
def star_sweep(tmp_path_factory):
    """Incoherent-drive row, 12 phases x 10^4 samples per window length."""
    return _run_sweep(
        tmp_path_factory, "star_sweep", ["omega_star"], STAR_TS
    )


@pytest.fixture(scope="session")
def offstar_sweep(tmp_path_factory):
    """Off-star drive amplitudes over the common window grid."""
    return _run_sweep(tmp_path_factory, "offstar_sweep", OFF_OMEGAS, OFF_TS)
