"""Experiment configuration: merging, validation, hashing, accessors."""

import hashlib
import json
import math

import numpy as np
import pytest

from fluotomo.config import OMEGA_STAR, ExperimentConfig, resolve_omega
from fluotomo.errors import ConfigError

STAR = math.sqrt(1.0 / 8.0)


def test_defaults_resolve():
    c = ExperimentConfig.from_dict()
    assert c.system_params().gamma == 1.0
    assert c.system_params().omega == pytest.approx(STAR)
    assert c.samples_per_phase == 2000
    assert c.seed == 1234
    assert c.filter_spec().kind == "boxcar"
    assert c.filter_spec().T == 2.0
    assert c.sweep_omegas() == pytest.approx([STAR])
    assert c.sweep_ts() == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert len(c.phases()) == 12
    assert c.phases()[1] == pytest.approx(math.pi / 12)
    edges = c.tomography_edges()
    assert edges.size == 82
    assert edges[0] == -6.0 and edges[-1] == 6.0


def test_profiles():
    desk = ExperimentConfig.from_dict(profile="desk")
    paper = ExperimentConfig.from_dict(profile="paper")
    assert desk.samples_per_phase == 2000
    assert paper.samples_per_phase == 10000
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(profile="poster")


def test_resolve_omega_forms():
    assert resolve_omega("omega_star", 1.0, "x") == pytest.approx(STAR)
    assert resolve_omega("omega_star", 2.0, "x") == pytest.approx(0.5)
    assert resolve_omega(0.3, 1.0, "x") == 0.3
    assert resolve_omega("0.3", 1.0, "x") == 0.3
    with pytest.raises(ConfigError):
        resolve_omega("sideways", 1.0, "x")
    assert OMEGA_STAR == "omega_star"


def test_unknown_key_rejected_with_path():
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(data={"trajectory": {"dtt": 1e-3}})
    assert "trajectory.dtt" in str(err.value)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data={"wavelength": 780.0})


def test_field_validation_paths():
    bad = [
        {"params": {"gamma": -1.0}},
        {"params": {"omega": "bogus"}},
        {"trajectory": {"dt": 2e-3}},
        {"trajectory": {"n_phases": 2}},
        {"trajectory": {"samples_per_phase": 0}},
        {"trajectory": {"harvesting": "recycle"}},
        {"filter": {"kind": "triangle"}},
        {"filter": {"t0": 3.0}},  # window opens before stationarity
        {"tomography": {"bins": 3}},
        {"tomography": {"edge_min": 6.0, "edge_max": -6.0}},
        {"tomography": {"tol": 0.0}},
        {"analysis": {"extent": 3.0}},
        {"sweep": {"Ts": []}},
    ]
    for data in bad:
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data=data)


def test_stationarity_checked_per_sweep_window():
    # t0 = 10 is fine for the filter default but the gaussian window of a
    # long sweep T reaches back before the burn-in ends
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(
            data={"filter": {"kind": "gaussian"}, "sweep": {"Ts": [4.0]}}
        )
    assert "t0" in str(err.value)


def test_overrides_and_coercion():
    c = ExperimentConfig.from_dict(
        overrides={
            "params.omega": "0.5",
            "trajectory.samples_per_phase": "300",
            "sweep.Ts": "[1, 2.5]",
            "filter.T": "1.5",
        }
    )
    assert c.system_params().omega == 0.5
    assert c.samples_per_phase == 300
    assert c.sweep_ts() == [1.0, 2.5]
    assert c.filter_spec().T == 1.5
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(overrides={"trajectory.dt": "fast"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(overrides={"trajectory.bogus": "1"})


def test_from_file(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(
        json.dumps({"params": {"omega": 0.2}, "trajectory": {"seed": 7}})
    )
    c = ExperimentConfig.from_file(str(path))
    assert c.system_params().omega == 0.2
    assert c.seed == 7
    # overrides beat the file
    c2 = ExperimentConfig.from_file(str(path), overrides={"trajectory.seed": "9"})
    assert c2.seed == 9


def test_hash_semantics():
    base = ExperimentConfig.from_dict()
    same = ExperimentConfig.from_dict(data={"output_dir": "elsewhere"})
    other = ExperimentConfig.from_dict(data={"trajectory": {"seed": 1}})
    assert base.config_hash() == same.config_hash()
    assert base.config_hash() != other.config_hash()
    # the hash is the sha256 of the canonical resolved document
    resolved = base.resolved()
    assert "output_dir" not in resolved
    assert resolved["params"]["omega"] == pytest.approx(STAR)
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    assert base.config_hash() == hashlib.sha256(blob.encode()).hexdigest()


def test_accessors():
    c = ExperimentConfig.from_dict(data={"sweep": {"omegas": [0.2, "omega_star"]}})
    assert c.sweep_omegas() == pytest.approx([0.2, STAR])
    assert c.n_fock_for(1.0) == 4
    assert c.n_fock_for(2.0) == 4
    assert c.n_fock_for(3.0) == 8
    forced = ExperimentConfig.from_dict(data={"tomography": {"n_fock": 6}})
    assert forced.n_fock_for(1.0) == 6
    tc = c.trajectory_config()
    assert tc.dt == 1e-3
    assert tc.seed == 1234
    assert tc.t0 == 10.0
    assert c.mle_tol == 1e-6
    assert c.mle_max_iter == 5000
    assert c.grid_extent == 5.0
    assert c.grid_step == 0.025
    phases = c.phases()
    assert np.all(phases >= 0.0) and np.all(phases < math.pi)
