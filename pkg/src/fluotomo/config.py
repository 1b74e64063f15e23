"""Experiment configuration: JSON schema, validation, hashing, overrides.

A configuration is a plain JSON object with sections params / filter /
trajectory / tomography / analysis / sweep plus output_dir. Every key has a
default, so {} is a valid config; unknown keys are rejected with their dotted
path. The special drive value "omega_star" resolves to sqrt(gamma/8), the
point where the coherently scattered amplitude vanishes.

The config hash is the sha256 of the canonical resolved JSON (sorted keys,
compact separators, omega_star replaced by its numeric value, profile and
overrides applied) excluding output_dir: where artifacts land must not change
their identity.
"""

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FluotomoError
from .filters import FILTER_KINDS, FilterSpec
from .model import SystemParams
from .trajectories import HARVESTING_MODES, TrajectoryConfig
from .wigner import _grid_axis

OMEGA_STAR = "omega_star"

DEFAULTS = {
    "params": {"gamma": 1.0, "omega": OMEGA_STAR},
    "filter": {"kind": "boxcar", "t0": 10.0, "T": 2.0},
    "trajectory": {
        "dt": 0.001,
        "n_phases": 12,
        "samples_per_phase": 2000,
        "seed": 1234,
        "harvesting": "fresh",
        "windows_per_trajectory": 1,
        "dead_time": 5.0,
    },
    "tomography": {
        "edge_min": -6.0,
        "edge_max": 6.0,
        "bins": 81,
        "n_fock": None,
        "tol": 1e-6,
        "max_iter": 5000,
    },
    "analysis": {"extent": 5.0, "step": 0.025},
    "sweep": {"omegas": [OMEGA_STAR], "Ts": [1.0, 2.0, 3.0, 4.0, 5.0]},
    "output_dir": "results",
}

# sample counts per LO phase: desk scale for fast iteration, paper scale for
# figure-quality statistics
PROFILES = {
    "desk": {"trajectory": {"samples_per_phase": 2000}},
    "paper": {"trajectory": {"samples_per_phase": 10000}},
}


def resolve_omega(value, gamma: float, where: str) -> float:
    """Resolve a drive amplitude entry: a number or the string omega_star."""
    if isinstance(value, str):
        if value == OMEGA_STAR:
            return math.sqrt(gamma / 8.0)
        try:
            return float(value)
        except ValueError:
            raise ConfigError(
                f"drive amplitude must be a number or {OMEGA_STAR!r}, "
                f"got {value!r}",
                field=where,
            ) from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"drive amplitude must be numeric, got {value!r}", field=where)
    return float(value)


def _coerce(raw: str, default, where: str):
    """Parse a CLI override string against the type of the default value."""
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}", field=where)
    if isinstance(default, int) and not isinstance(default, bool):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"expected an integer, got {raw!r}", field=where) from exc
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            # params.omega and sweep entries admit the omega_star keyword
            if raw == OMEGA_STAR:
                return raw
            raise ConfigError(f"expected a number, got {raw!r}", field=where)
    if isinstance(default, list):
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"expected a JSON list, got {raw!r}", field=where
            ) from exc
        if not isinstance(parsed, list):
            raise ConfigError(f"expected a JSON list, got {raw!r}", field=where)
        return parsed
    if default is None or isinstance(default, str):
        return raw
    raise ConfigError(f"cannot override key of type {type(default)}", field=where)


def _merge(base: dict, update: dict, prefix: str = "") -> None:
    for key, value in update.items():
        where = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}", field=where)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(
                    f"section {where!r} must be an object", field=where
                )
            _merge(base[key], value, prefix=where + ".")
        else:
            base[key] = value


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully resolved experiment description."""

    data: dict = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "data", copy.deepcopy(self.data))
        self._validate()

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict = None, profile: str = None,
                  overrides: dict = None) -> "ExperimentConfig":
        merged = copy.deepcopy(DEFAULTS)
        if profile is not None:
            if profile not in PROFILES:
                raise ConfigError(
                    f"unknown profile {profile!r}; choose from {sorted(PROFILES)}",
                    field="profile",
                )
            _merge(merged, PROFILES[profile])
        if data:
            if not isinstance(data, dict):
                raise ConfigError("configuration root must be a JSON object")
            _merge(merged, data)
        if overrides:
            for path, raw in overrides.items():
                cls._apply_override(merged, path, raw)
        return cls(merged)

    @classmethod
    def from_file(cls, path, profile: str = None,
                  overrides: dict = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data, profile=profile, overrides=overrides)

    @staticmethod
    def _apply_override(merged: dict, path: str, raw) -> None:
        parts = path.split(".")
        node = merged
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"unknown configuration key {path!r}", field=path)
            node = node[part]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError(f"unknown configuration key {path!r}", field=path)
        value = raw if not isinstance(raw, str) else _coerce(raw, node[leaf], path)
        node[leaf] = value

    # -- validation ---------------------------------------------------------

    def _validate(self) -> None:
        d = self.data
        gamma = d["params"]["gamma"]
        if isinstance(gamma, bool) or not isinstance(gamma, (int, float)) or gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {gamma!r}",
                              field="params.gamma")

        try:
            params = self.system_params()
        except FluotomoError as exc:
            raise ConfigError(str(exc), field="params") from exc

        tr = d["trajectory"]
        for key, floor in (("n_phases", 4), ("samples_per_phase", 1)):
            v = tr[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < floor:
                raise ConfigError(f"{key} must be an integer >= {floor}, got {v!r}",
                                  field=f"trajectory.{key}")
        if tr["harvesting"] not in HARVESTING_MODES:
            raise ConfigError(
                f"harvesting must be one of {HARVESTING_MODES}, got {tr['harvesting']!r}",
                field="trajectory.harvesting",
            )

        fl = d["filter"]
        if fl["kind"] not in FILTER_KINDS:
            raise ConfigError(
                f"filter kind must be one of {FILTER_KINDS}, got {fl['kind']!r}",
                field="filter.kind",
            )

        tm = d["tomography"]
        if not tm["edge_min"] < tm["edge_max"]:
            raise ConfigError(
                f"edge_min {tm['edge_min']!r} must be below edge_max {tm['edge_max']!r}",
                field="tomography.edge_min",
            )
        if isinstance(tm["bins"], bool) or not isinstance(tm["bins"], int) or tm["bins"] < 8:
            raise ConfigError(f"bins must be an integer >= 8, got {tm['bins']!r}",
                              field="tomography.bins")
        nf = tm["n_fock"]
        if nf is not None and (isinstance(nf, bool) or not isinstance(nf, int) or nf < 2):
            raise ConfigError(f"n_fock must be an integer >= 2 or null, got {nf!r}",
                              field="tomography.n_fock")
        if not (0.0 < tm["tol"] < 1.0):
            raise ConfigError(f"tol must be in (0, 1), got {tm['tol']!r}",
                              field="tomography.tol")
        if isinstance(tm["max_iter"], bool) or not isinstance(tm["max_iter"], int) \
                or tm["max_iter"] < 1:
            raise ConfigError(f"max_iter must be a positive integer, got {tm['max_iter']!r}",
                              field="tomography.max_iter")

        try:
            _grid_axis(d["analysis"]["extent"], d["analysis"]["step"])
        except FluotomoError as exc:
            raise ConfigError(str(exc), field="analysis") from exc

        sw = d["sweep"]
        if not isinstance(sw["omegas"], list) or not sw["omegas"]:
            raise ConfigError("sweep.omegas must be a non-empty list",
                              field="sweep.omegas")
        if not isinstance(sw["Ts"], list) or not sw["Ts"]:
            raise ConfigError("sweep.Ts must be a non-empty list", field="sweep.Ts")

        if not isinstance(d["output_dir"], str) or not d["output_dir"]:
            raise ConfigError("output_dir must be a non-empty string",
                              field="output_dir")

        # every sweep point must instantiate the module objects it will use
        for i, om in enumerate(self.sweep_omegas()):
            try:
                SystemParams(gamma=params.gamma, omega=om)
            except FluotomoError as exc:
                raise ConfigError(str(exc), field=f"sweep.omegas[{i}]") from exc
        windows = [(f"sweep.Ts[{i}]", float(t)) for i, t in enumerate(sw["Ts"])]
        windows.append(("filter.T", float(fl["T"])))
        for where, t_win in windows:
            try:
                spec = self.filter_spec(T=t_win)
            except (FluotomoError, TypeError, ValueError) as exc:
                raise ConfigError(str(exc), field=where) from exc
            lo = spec.support()[0]
            if lo < 10.0 / params.gamma * (1.0 - 1e-12):
                raise ConfigError(
                    f"filter window (T = {t_win:g}) starts at {lo:g}, before "
                    f"the emitter is stationary; raise filter.t0 to at least "
                    f"{10.0 / params.gamma + (float(fl['t0']) - lo):g}",
                    field=where,
                )
        try:
            self.trajectory_config(params)
        except FluotomoError as exc:
            raise ConfigError(str(exc), field="trajectory") from exc

    # -- resolution helpers --------------------------------------------------

    def resolved(self) -> dict:
        """Config with omega_star replaced by numbers, output_dir dropped."""
        out = copy.deepcopy(self.data)
        gamma = out["params"]["gamma"]
        out["params"]["omega"] = resolve_omega(
            out["params"]["omega"], gamma, "params.omega")
        out["sweep"]["omegas"] = [
            resolve_omega(v, gamma, f"sweep.omegas[{i}]")
            for i, v in enumerate(out["sweep"]["omegas"])
        ]
        out["sweep"]["Ts"] = [float(v) for v in out["sweep"]["Ts"]]
        out.pop("output_dir")
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.resolved(), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @property
    def output_dir(self) -> str:
        return self.data["output_dir"]

    def system_params(self, omega: float = None) -> SystemParams:
        gamma = float(self.data["params"]["gamma"])
        if omega is None:
            omega = resolve_omega(self.data["params"]["omega"], gamma,
                                  "params.omega")
        return SystemParams(gamma=gamma, omega=float(omega))

    def sweep_omegas(self) -> list:
        gamma = float(self.data["params"]["gamma"])
        return [
            resolve_omega(v, gamma, f"sweep.omegas[{i}]")
            for i, v in enumerate(self.data["sweep"]["omegas"])
        ]

    def sweep_ts(self) -> list:
        return [float(v) for v in self.data["sweep"]["Ts"]]

    def filter_spec(self, T: float = None) -> FilterSpec:
        fl = self.data["filter"]
        window = float(fl["T"] if T is None else T)
        return FilterSpec(kind=fl["kind"], t0=float(fl["t0"]), T=window)

    def trajectory_config(self, params: SystemParams = None) -> TrajectoryConfig:
        if params is None:
            params = self.system_params()
        tr = self.data["trajectory"]
        return TrajectoryConfig(
            params=params,
            dt=float(tr["dt"]),
            t0=float(self.data["filter"]["t0"]),
            seed=int(tr["seed"]),
            harvesting=tr["harvesting"],
            windows_per_trajectory=int(tr["windows_per_trajectory"]),
            dead_time=float(tr["dead_time"]),
        )

    def phases(self) -> np.ndarray:
        n = int(self.data["trajectory"]["n_phases"])
        return np.arange(n) * math.pi / n

    @property
    def samples_per_phase(self) -> int:
        return int(self.data["trajectory"]["samples_per_phase"])

    @property
    def seed(self) -> int:
        return int(self.data["trajectory"]["seed"])

    def tomography_edges(self) -> np.ndarray:
        tm = self.data["tomography"]
        return np.linspace(float(tm["edge_min"]), float(tm["edge_max"]),
                           int(tm["bins"]) + 1)

    def n_fock_for(self, T: float) -> int:
        """Cutoff: explicit setting, else 4 below T = 2 and 8 above.

        The filtered mean photon number stays below ~0.5 for T <= 2 at any
        drive, and below ~1.8 up to T = 10, so these cutoffs keep the
        truncated tail negligible against the statistical noise floor.
        """
        nf = self.data["tomography"]["n_fock"]
        if nf is not None:
            return int(nf)
        return 4 if T <= 2.0 else 8

    @property
    def mle_tol(self) -> float:
        return float(self.data["tomography"]["tol"])

    @property
    def mle_max_iter(self) -> int:
        return int(self.data["tomography"]["max_iter"])

    @property
    def grid_extent(self) -> float:
        return float(self.data["analysis"]["extent"])

    @property
    def grid_step(self) -> float:
        return float(self.data["analysis"]["step"])
