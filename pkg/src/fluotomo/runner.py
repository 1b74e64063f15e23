"""End-to-end pipelines: analytic oracles, single points, sweeps, re-analysis.

Every invocation resolves one ExperimentConfig and stamps its sha256 hash into
every artifact it writes; artifacts from different configurations refuse to
mix. Runs are reproducible to the byte (CSV and state JSON) from (config,
seed); wall-clock timings live only in report.json, which is exempt from the
byte-identity guarantee.

Output layout under output_dir:

    oracle/            steady_state.csv, correlation.csv, nbar.csv
    omega<o>_T<t>/     samples.csv, histogram.csv, state.json, wigner.csv,
                       report.json
    summary.csv        one row per sweep point
    sweep_report.json  per-point status and timings

Exit codes: 0 success, 2 configuration or artifact-provenance error,
3 completed with warnings (e.g. MLE hit max_iter), 4 numerical failure.
"""

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .errors import ArtifactMismatchError, ConfigError, FluotomoError
from .filters import filter_bandwidth
from .model import (
    filtered_mean_photon_number,
    output_coherent_amplitude,
    steady_state_bloch,
    two_time_correlation,
)
from .tomography import (
    FockDensityMatrix,
    bin_samples,
    build_projectors,
    convention_selftest,
    mle_reconstruct,
)
from .trajectories import batch_samples
from .wigner import (
    SINGLE_PHOTON_NEGATIVITY,
    PhaseSpaceGrid,
    _grid_axis,
    integrated_negativity,
    purity,
    wigner_fock_diagonal,
    wigner_from_density_matrix,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WARNINGS = 3
EXIT_NUMERICAL = 4

_N_POPULATIONS = 5


@dataclass(frozen=True)
class PointResult:
    """Reconstruction summary for one (omega, T) sweep point."""

    omega: float
    T: float
    populations: tuple
    purity: float
    negativity: float
    relative_negativity: float
    n_samples: int
    seed: int
    point_dir: str
    converged: bool
    warnings: tuple = ()
    runtime_s: float = 0.0

    def __post_init__(self):
        pops = tuple(float(v) for v in self.populations)
        if len(pops) != _N_POPULATIONS:
            raise FluotomoError(
                f"expected {_N_POPULATIONS} populations, got {len(pops)}"
            )
        if sum(pops) > 1.0 + 1e-8:
            raise FluotomoError(f"populations sum to {sum(pops)} > 1")
        object.__setattr__(self, "populations", pops)
        object.__setattr__(self, "warnings", tuple(self.warnings))


@dataclass
class SweepResult:
    """All points of a sweep plus any per-point failures."""

    config_hash: str
    points: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if self.failures:
            return EXIT_NUMERICAL
        if any(p.warnings or not p.converged for p in self.points):
            return EXIT_WARNINGS
        return EXIT_OK


# ---------------------------------------------------------------------------
# convention selftest

def selftest_rows(full: bool = True) -> list:
    """Convention checks as (name, passed, detail) rows.

    full=False skips the iterative reconstruction check for a fast startup
    gate; the analytic checks still pin every sign and scale convention.
    """
    rows = list(convention_selftest(include_reconstruction=full))
    axis = _grid_axis(5.0, 0.025)
    mesh = 0.5 * (axis[None, :] + 1j * axis[:, None])
    grid = PhaseSpaceGrid(x=axis, p=axis, values=wigner_fock_diagonal(1, mesh))
    report = integrated_negativity(grid)
    dev = abs(report.negativity - SINGLE_PHOTON_NEGATIVITY)
    rows.append(
        (
            "single_photon_negativity",
            dev < 1e-3,
            f"N={report.negativity:.6f}, closed form "
            f"{SINGLE_PHOTON_NEGATIVITY:.6f}, dev={dev:.2e}",
        )
    )
    return rows


def _selftest_gate() -> None:
    rows = selftest_rows(full=False)
    failed = [name for name, ok, _ in rows if not ok]
    if failed:
        raise FluotomoError(
            "convention selftest failed before the run: " + ", ".join(failed)
        )


# ---------------------------------------------------------------------------
# artifact writers

def _write_csv(path: str, meta: dict, columns: list, rows) -> None:
    """rows is an iterable of prejoined CSV line strings (no newline)."""
    with open(path, "w") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(row + "\n")


def _read_csv_hash(path: str):
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                return None
            body = line[1:].strip()
            if body.startswith("config_hash="):
                return body.split("=", 1)[1]
    return None


def _check_artifact_dir(directory: str, config_hash: str) -> None:
    """Refuse to mix artifacts carrying a different configuration hash."""
    if not os.path.isdir(directory):
        return
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        found = None
        if name.endswith(".csv"):
            found = _read_csv_hash(path)
        elif name.endswith(".json"):
            try:
                with open(path) as fh:
                    found = json.load(fh).get("config_hash")
            except (json.JSONDecodeError, OSError):
                continue
        if found is not None and found != config_hash:
            raise ArtifactMismatchError(
                f"{path} was produced by config {found[:12]}..., refusing to "
                f"mix with current config {config_hash[:12]}..."
            )


def _g(value: float) -> str:
    return f"{value:.17g}"


def _write_samples(path, meta, samples) -> None:
    rows = (
        f"{s.phase_index},{_g(s.phase)},{s.sample_index},"
        f"{s.trajectory_index},{_g(s.value)}"
        for s in samples
    )
    _write_csv(
        path,
        meta,
        ["phase_index", "phase", "sample_index", "trajectory_index", "value"],
        rows,
    )


def _write_histogram(path, meta, hist) -> None:
    meta = dict(meta)
    for p_idx in range(hist.phases.size):
        lo, hi = hist.overflow[p_idx]
        if lo or hi:
            meta[f"overflow_phase_{p_idx}"] = f"low:{lo},high:{hi}"
    rows = (
        f"{p_idx},{_g(float(hist.phases[p_idx]))},{b_idx},"
        f"{_g(hist.edges[b_idx])},{_g(hist.edges[b_idx + 1])},"
        f"{_g(hist.counts[p_idx, b_idx])}"
        for p_idx in range(hist.phases.size)
        for b_idx in range(hist.edges.size - 1)
    )
    _write_csv(
        path,
        meta,
        ["phase_index", "phase", "bin_index", "bin_lo", "bin_hi", "count"],
        rows,
    )


def _write_state(path, meta, rho: FockDensityMatrix, mle) -> None:
    payload = dict(meta)
    payload.update(
        {
            "n_fock": rho.n_fock,
            "rho_re": rho.matrix.real.tolist(),
            "rho_im": rho.matrix.imag.tolist(),
            "populations": rho.populations.tolist(),
            "purity": purity(rho.matrix),
            "mle": {
                "iterations": mle.iterations,
                "final_delta": mle.final_delta,
                "converged": mle.converged,
                "log_likelihood": mle.log_likelihood[-1],
            },
        }
    )
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_wigner(path, meta, grid: PhaseSpaceGrid) -> None:
    meta = dict(meta)
    meta["convention"] = grid.convention
    meta["extent"] = _g(grid.extent)
    meta["step"] = _g(grid.step)
    rows = (
        f"{_g(grid.x[ix])},{_g(grid.p[ip])},{grid.values[ip, ix]:.10g}"
        for ip in range(grid.p.size)
        for ix in range(grid.x.size)
    )
    _write_csv(path, meta, ["x", "p", "W"], rows)


def load_state(path: str):
    """Read a state.json back into (FockDensityMatrix, metadata dict)."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"state file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"state file {path} is not valid JSON: {exc}") from exc
    try:
        rho = np.array(payload["rho_re"], dtype=float) + 1j * np.array(
            payload["rho_im"], dtype=float
        )
    except KeyError as exc:
        raise ConfigError(f"state file {path} lacks field {exc}") from exc
    return FockDensityMatrix(matrix=rho), payload


# ---------------------------------------------------------------------------
# pipelines

def run_point(
    config: ExperimentConfig,
    omega: float,
    T: float,
    config_hash: str,
    output_root: str,
) -> PointResult:
    """simulate -> filter -> bin -> reconstruct -> analyze for one point."""
    started = time.perf_counter()
    params = config.system_params(omega)
    f = config.filter_spec(T)
    tcfg = config.trajectory_config(params)
    phases = config.phases()

    samples = batch_samples(tcfg, phases, config.samples_per_phase, f)
    edges = config.tomography_edges()
    hist = bin_samples(samples, edges, phases)
    n_fock = config.n_fock_for(T)
    proj = build_projectors(phases, edges, n_fock)
    rho, mle = mle_reconstruct(
        hist, n_fock, tol=config.mle_tol, max_iter=config.mle_max_iter,
        projectors=proj,
    )
    grid = wigner_from_density_matrix(
        rho.matrix, extent=config.grid_extent, step=config.grid_step
    )
    neg = integrated_negativity(grid)

    warnings = []
    n_overflow = int(hist.overflow.sum())
    if n_overflow:
        warnings.append(
            f"{n_overflow} of {len(samples)} samples fell outside the "
            "histogram range and were excluded"
        )
    if not mle.converged:
        warnings.append(
            f"MLE stopped at max_iter={config.mle_max_iter} with "
            f"delta={mle.final_delta:.2e} above tol={config.mle_tol:g}"
        )
    warnings.extend(grid.warnings)

    pops = list(rho.populations[:_N_POPULATIONS])
    pops += [0.0] * (_N_POPULATIONS - len(pops))

    point_dir = os.path.join(output_root, f"omega{omega:g}_T{T:g}")
    _check_artifact_dir(point_dir, config_hash)
    os.makedirs(point_dir, exist_ok=True)
    meta = {
        "config_hash": config_hash,
        "seed": config.seed,
        "omega": _g(omega),
        "T": _g(T),
    }
    _write_samples(
        os.path.join(point_dir, "samples.csv"),
        {**meta, "n_phases": phases.size,
         "samples_per_phase": config.samples_per_phase},
        samples,
    )
    _write_histogram(os.path.join(point_dir, "histogram.csv"), meta, hist)
    _write_state(
        os.path.join(point_dir, "state.json"),
        {"config_hash": config_hash, "seed": config.seed, "omega": omega, "T": T},
        rho,
        mle,
    )
    _write_wigner(
        os.path.join(point_dir, "wigner.csv"),
        {**meta,
         "negativity": _g(neg.negativity),
         "relative_negativity": _g(neg.relative_negativity)},
        grid,
    )

    runtime = time.perf_counter() - started
    result = PointResult(
        omega=omega,
        T=T,
        populations=pops,
        purity=purity(rho.matrix),
        negativity=neg.negativity,
        relative_negativity=neg.relative_negativity,
        n_samples=len(samples),
        seed=config.seed,
        point_dir=os.path.basename(point_dir),
        converged=mle.converged,
        warnings=warnings,
        runtime_s=runtime,
    )
    report = {
        "config_hash": config_hash,
        "seed": config.seed,
        "omega": omega,
        "T": T,
        "n_fock": n_fock,
        "populations": pops,
        "purity": result.purity,
        "negativity": neg.negativity,
        "relative_negativity": neg.relative_negativity,
        "wigner_min": neg.wigner_min,
        "wigner_mass": neg.mass,
        "mle_iterations": mle.iterations,
        "mle_converged": mle.converged,
        "warnings": warnings,
        "runtime_s": runtime,
    }
    with open(os.path.join(point_dir, "report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return result


def cmd_run(config: ExperimentConfig) -> tuple:
    """Single-point pipeline at (params.omega, filter.T). Returns (exit, result)."""
    _selftest_gate()
    config_hash = config.config_hash()
    omega = config.system_params().omega
    T = config.filter_spec().T
    os.makedirs(config.output_dir, exist_ok=True)
    result = run_point(config, omega, T, config_hash, config.output_dir)
    code = EXIT_WARNINGS if (result.warnings or not result.converged) else EXIT_OK
    return code, result


_SUMMARY_COLUMNS = [
    "omega", "T", "rho0", "rho1", "rho2", "rho3", "rho4",
    "purity", "N", "N_rel", "n_samples", "seed", "point_dir",
]


def _write_summary(path: str, config_hash: str, points: list) -> None:
    rows = []
    for p in points:
        cells = [
            _g(p.omega), _g(p.T),
            *(_g(v) for v in p.populations),
            _g(p.purity), _g(p.negativity), _g(p.relative_negativity),
            str(p.n_samples), str(p.seed), p.point_dir,
        ]
        rows.append(",".join(cells))
    _write_csv(path, {"config_hash": config_hash}, _SUMMARY_COLUMNS, rows)


def cmd_sweep(config: ExperimentConfig) -> tuple:
    """Run every (omega, T) sweep point; continue past per-point failures.

    Points are mutually independent (each phase/trajectory pair owns its own
    seeded stream), so any execution order yields identical artifacts; this
    implementation runs them sequentially through a single collector.
    Returns (exit_code, SweepResult).
    """
    _selftest_gate()
    config_hash = config.config_hash()
    os.makedirs(config.output_dir, exist_ok=True)
    sweep = SweepResult(config_hash=config_hash)
    for omega in config.sweep_omegas():
        for T in config.sweep_ts():
            try:
                sweep.points.append(
                    run_point(config, omega, T, config_hash, config.output_dir)
                )
            except FluotomoError as exc:
                sweep.failures.append(
                    {"omega": omega, "T": T,
                     "error_type": type(exc).__name__, "error": str(exc)}
                )
    summary_path = os.path.join(config.output_dir, "summary.csv")
    existing = _read_csv_hash(summary_path) if os.path.exists(summary_path) else None
    if existing is not None and existing != config_hash:
        raise ArtifactMismatchError(
            f"{summary_path} was produced by config {existing[:12]}..., "
            f"refusing to overwrite with config {config_hash[:12]}..."
        )
    _write_summary(summary_path, config_hash, sweep.points)
    report = {
        "config_hash": config_hash,
        "n_points": len(sweep.points),
        "failures": sweep.failures,
        "exit_code": sweep.exit_code,
        "points": [
            {"omega": p.omega, "T": p.T, "point_dir": p.point_dir,
             "converged": p.converged, "warnings": list(p.warnings),
             "runtime_s": p.runtime_s}
            for p in sweep.points
        ],
    }
    with open(os.path.join(config.output_dir, "sweep_report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return sweep.exit_code, sweep


def cmd_oracle(config: ExperimentConfig) -> tuple:
    """Write the analytic reference tables for the configured sweep grid."""
    config_hash = config.config_hash()
    oracle_dir = os.path.join(config.output_dir, "oracle")
    _check_artifact_dir(oracle_dir, config_hash)
    os.makedirs(oracle_dir, exist_ok=True)
    meta = {"config_hash": config_hash, "gamma": _g(config.system_params(0.0).gamma)}
    omegas = config.sweep_omegas()
    ts_list = config.sweep_ts()

    rows = []
    for om in omegas:
        p = config.system_params(om)
        ss = steady_state_bloch(p)
        amp = output_coherent_amplitude(p)
        rows.append(",".join([
            _g(om), _g(p.saturation), _g(ss.sm.real), _g(ss.sm.imag),
            _g(ss.sz.real), _g(0.5 * (1.0 + ss.sz.real)), _g(amp.real),
        ]))
    _write_csv(
        os.path.join(oracle_dir, "steady_state.csv"),
        meta,
        ["omega", "saturation", "re_sm", "im_sm", "sz", "excited_population",
         "output_amplitude"],
        rows,
    )

    t_max = max(ts_list)
    t_grid = np.linspace(0.0, float(t_max), 401)
    rows = []
    for om in omegas:
        p = config.system_params(om)
        for t in t_grid:
            c = two_time_correlation(p, float(t))
            rows.append(",".join([
                _g(om), _g(float(t)), _g(c.value.real),
                _g(c.coherent_part.real), _g(c.connected_part.real),
                _g(c.emitter_correlation.real),
            ]))
    _write_csv(
        os.path.join(oracle_dir, "correlation.csv"),
        meta,
        ["omega", "t", "value", "coherent", "connected", "emitter"],
        rows,
    )

    rows = []
    for om in omegas:
        p = config.system_params(om)
        for T in ts_list:
            f = config.filter_spec(T)
            bw = _g(filter_bandwidth(f)) if f.kind == "boxcar" else ""
            rows.append(",".join([
                _g(om), _g(T), _g(filtered_mean_photon_number(p, f)), bw,
            ]))
    _write_csv(
        os.path.join(oracle_dir, "nbar.csv"),
        meta,
        ["omega", "T", "nbar", "bandwidth"],
        rows,
    )
    return EXIT_OK, oracle_dir


def cmd_wigner(
    state_path: str,
    extent: float = 5.0,
    step: float = 0.025,
    output_dir: str = None,
) -> tuple:
    """Re-analyze a saved state.json: fresh Wigner grid and negativity."""
    rho, payload = load_state(state_path)
    config_hash = payload.get("config_hash", "unknown")
    out_dir = output_dir if output_dir is not None else os.path.dirname(
        os.path.abspath(state_path))
    _check_artifact_dir(out_dir, config_hash)
    os.makedirs(out_dir, exist_ok=True)

    grid = wigner_from_density_matrix(rho.matrix, extent=extent, step=step)
    neg = integrated_negativity(grid)
    meta = {
        "config_hash": config_hash,
        "source_state": os.path.basename(state_path),
        "negativity": _g(neg.negativity),
        "relative_negativity": _g(neg.relative_negativity),
    }
    _write_wigner(os.path.join(out_dir, "wigner.csv"), meta, grid)
    payload_out = {
        "config_hash": config_hash,
        "source_state": os.path.basename(state_path),
        "extent": extent,
        "step": step,
        "convention": grid.convention,
        "negativity": neg.negativity,
        "relative_negativity": neg.relative_negativity,
        "single_photon_negativity": neg.single_photon_negativity,
        "wigner_min": neg.wigner_min,
        "mass": neg.mass,
        "purity": purity(rho.matrix),
        "warnings": list(grid.warnings),
    }
    with open(os.path.join(out_dir, "negativity.json"), "w") as fh:
        json.dump(payload_out, fh, sort_keys=True, indent=1)
        fh.write("\n")
    code = EXIT_WARNINGS if grid.warnings else EXIT_OK
    return code, payload_out
