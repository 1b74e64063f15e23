"""Stochastic homodyne trajectories of the driven emitter.

The conditioned state of the two-level emitter is propagated in Bloch
coordinates (x, y, z) under the homodyne unraveling of the decay channel at
unit detection efficiency, with the coherent drive in the rotating frame.
Euler-Maruyama steps in Ito form:

    k  = sqrt(gamma) (x cos phi - y sin phi)
    dx = (2 sqrt(gamma) Omega z - gamma x / 2) dt
         + (sqrt(gamma) cos phi (1 + z) - x k) dW
    dy = -(gamma / 2) y dt - (sqrt(gamma) sin phi (1 + z) + y k) dW
    dz = -(2 sqrt(gamma) Omega x + gamma (1 + z)) dt - (1 + z) k dW
    dJ = k dt + dW

where phi is the local oscillator phase and dJ the measured current
increment. A Bloch-norm clamp (rescale to r = 1 whenever r > 1) removes the
O(dt) positivity violations of the explicit scheme; it is equivalent to
flooring the negative eigenvalue of the conditioned density matrix at zero
and renormalizing.

The filtered quadrature sample is x_f = sum_k f(t_k) dJ_k with the discrete
weights renormalized to unit vacuum variance (see filters.sampled_weights).
The record contains emission only: driving in the rotating frame adds no
local-oscillator offset, so the sample mean of a coherently radiating
emitter is 2 sqrt(gamma) Re[<sigma_-> e^{i phi}] sqrt(T) for a boxcar window.

Basis convention for the 2x2 conditioned density matrix: index 0 is the
excited state, index 1 the ground state, so rho = [[(1+z)/2, (x-iy)/2],
[(x+iy)/2, (1-z)/2]] and <sigma_-> = rho[0, 1] = (x - iy)/2.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CoverageError, NumericalInstabilityError, ParameterError
from .filters import FilterSpec, sampled_weights
from .model import SystemParams

HARVESTING_MODES = ("fresh", "multi")

# stationarization: the emitter relaxes to the steady state within a few
# 1/gamma; 10/gamma leaves a residual below e^-10 ~ 5e-5
MIN_BURN_IN = 10.0
MAX_DT = 1e-3

# target bytes of pre-generated noise per kernel call
_CHUNK_BYTES = 1.5e8


@dataclass(frozen=True)
class TrajectoryConfig:
    """Integration setup for one stochastic unraveling run.

    dt and t0 are in units of 1/gamma times the gamma-scaled bounds: the
    step must resolve the fastest rate (dt <= 1e-3/gamma) and the burn-in
    must stationarize the emitter (t0 >= 10/gamma).
    """

    params: SystemParams
    dt: float = 1e-3
    t0: float = 10.0
    phase: float = 0.0
    seed: int = 0
    harvesting: str = "fresh"
    windows_per_trajectory: int = 1
    dead_time: float = 5.0

    def __post_init__(self):
        g = self.params.gamma
        if not (0.0 < self.dt <= MAX_DT / g * (1.0 + 1e-12)):
            raise ParameterError(
                f"dt = {self.dt} outside (0, {MAX_DT / g:g}] for gamma = {g}"
            )
        if self.t0 < MIN_BURN_IN / g * (1.0 - 1e-12):
            raise ParameterError(
                f"burn-in t0 = {self.t0} below the stationarization "
                f"minimum {MIN_BURN_IN / g:g}"
            )
        if not (0.0 <= self.phase < math.pi):
            raise ParameterError(
                f"local oscillator phase {self.phase} outside [0, pi)"
            )
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {self.seed}")
        if self.harvesting not in HARVESTING_MODES:
            raise ParameterError(
                f"harvesting mode {self.harvesting!r} not in {HARVESTING_MODES}"
            )
        w = self.windows_per_trajectory
        if int(w) != w or w < 1:
            raise ParameterError(f"windows_per_trajectory must be >= 1, got {w}")
        if self.harvesting == "fresh" and w != 1:
            raise ParameterError(
                "fresh harvesting draws one window per trajectory; "
                f"got windows_per_trajectory = {w}"
            )
        if self.dead_time < 0.0:
            raise ParameterError(f"dead_time must be >= 0, got {self.dead_time}")


class ConditionedState:
    """Conditioned 2x2 density matrix of the emitter, Bloch-backed.

    Index 0 is the excited state, 1 the ground state.
    """

    __slots__ = ("x", "y", "z")

    def __init__(self, x: float, y: float, z: float):
        r2 = x * x + y * y + z * z
        if not np.isfinite(r2):
            raise ParameterError("Bloch components must be finite")
        if r2 > 1.0 + 1e-9:
            raise ParameterError(f"Bloch norm {math.sqrt(r2):.6f} exceeds 1")
        self.x = float(x)
        self.y = float(y)
        self.z = float(z)

    @classmethod
    def ground(cls) -> "ConditionedState":
        return cls(0.0, 0.0, -1.0)

    @classmethod
    def from_density_matrix(cls, rho) -> "ConditionedState":
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (2, 2):
            raise ParameterError(f"expected a 2x2 matrix, got {rho.shape}")
        if abs(rho[0, 0] + rho[1, 1] - 1.0) > 1e-10:
            raise ParameterError("density matrix trace differs from 1")
        if abs(rho[0, 1] - np.conj(rho[1, 0])) > 1e-10:
            raise ParameterError("density matrix is not Hermitian")
        return cls(
            2.0 * rho[1, 0].real, 2.0 * rho[1, 0].imag, (rho[0, 0] - rho[1, 1]).real
        )

    @property
    def bloch(self) -> tuple:
        return (self.x, self.y, self.z)

    @property
    def density_matrix(self) -> np.ndarray:
        x, y, z = self.x, self.y, self.z
        return 0.5 * np.array(
            [[1.0 + z, x - 1j * y], [x + 1j * y, 1.0 - z]], dtype=complex
        )

    @property
    def purity(self) -> float:
        return 0.5 * (1.0 + self.x**2 + self.y**2 + self.z**2)

    @property
    def excited_population(self) -> float:
        return 0.5 * (1.0 + self.z)

    def __repr__(self):
        return f"ConditionedState(x={self.x:.6g}, y={self.y:.6g}, z={self.z:.6g})"


@dataclass(frozen=True)
class HomodyneRecord:
    """One continuous homodyne current record at a fixed LO phase.

    times is the uniform step grid t_0..t_n (length n+1); increments holds
    the measured dJ over each step (length n).
    """

    phase: float
    times: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        dj = np.asarray(self.increments, dtype=float)
        if t.ndim != 1 or dj.ndim != 1 or t.size != dj.size + 1 or dj.size == 0:
            raise ParameterError(
                "times must be one longer than increments and non-trivial"
            )
        steps = np.diff(t)
        if np.any(np.abs(steps - steps[0]) > 1e-9 * max(steps[0], 1e-30)):
            raise ParameterError("times must be a uniform grid")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "increments", dj)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class QuadratureSample:
    """One filtered quadrature outcome tagged with its provenance indices."""

    phase: float
    value: float
    phase_index: int = 0
    sample_index: int = 0
    trajectory_index: int = 0


@njit(cache=True, inline="always")
def _bloch_update(x, y, z, dW, dt, gamma, sqg, a2, hg, cphi, sphi):
    # kv is evaluated at the step start (Ito); a2 = 2 sqrt(gamma) Omega,
    # hg = gamma/2
    kv = sqg * (x * cphi - y * sphi)
    opz = 1.0 + z
    kdw = kv * dW
    nx = x + (a2 * z - hg * x) * dt + sqg * cphi * opz * dW - x * kdw
    ny = y - hg * y * dt - sqg * sphi * opz * dW - y * kdw
    nz = z - (a2 * x + gamma * opz) * dt - opz * kdw
    r2 = nx * nx + ny * ny + nz * nz
    if r2 > 1.0:
        inv = 1.0 / np.sqrt(r2)
        nx *= inv
        ny *= inv
        nz *= inv
    return nx, ny, nz, kv


@njit(cache=True)
def _sme_chunk(
    bloch0,
    noise,
    dt,
    gamma,
    sqg,
    a2,
    hg,
    cphi,
    sphi,
    n_burn,
    w,
    n_dead,
    n_windows,
    check_every,
    checks,
):
    """Propagate a chunk of trajectories and harvest filtered samples.

    noise holds standard normals, shape (n_traj, n_steps). Each trajectory
    burns in for n_burn steps, then accumulates n_windows filtered samples
    of length len(w) steps separated by n_dead steps. States at step indices
    k = m*check_every - 1 are written to checks when check_every > 0.
    Returns (samples, final Bloch vectors, failure flags); a trajectory whose
    final state is not finite gets flag 1 (diagnosis is re-run outside).
    """
    n_traj, n_steps = noise.shape
    n_win = w.shape[0]
    samples = np.zeros((n_traj, n_windows))
    finals = np.empty((n_traj, 3))
    fail = np.zeros(n_traj, dtype=np.int64)
    sdt = np.sqrt(dt)
    for i in range(n_traj):
        x = bloch0[i, 0]
        y = bloch0[i, 1]
        z = bloch0[i, 2]
        wnd = 0
        pos = -n_burn
        nci = 0
        nxt = check_every - 1 if check_every > 0 else -1
        for k in range(n_steps):
            dW = noise[i, k] * sdt
            x, y, z, kv = _bloch_update(
                x, y, z, dW, dt, gamma, sqg, a2, hg, cphi, sphi
            )
            if wnd < n_windows:
                if pos >= 0:
                    if pos < n_win:
                        samples[i, wnd] += w[pos] * (kv * dt + dW)
                    pos += 1
                    if pos == n_win + n_dead:
                        wnd += 1
                        pos = 0
                else:
                    pos += 1
            if k == nxt:
                checks[i, nci, 0] = x
                checks[i, nci, 1] = y
                checks[i, nci, 2] = z
                nci += 1
                nxt += check_every
        finals[i, 0] = x
        finals[i, 1] = y
        finals[i, 2] = z
        if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z)):
            fail[i] = 1
    return samples, finals, fail


def _coefficients(params: SystemParams, phase: float) -> tuple:
    g = params.gamma
    sqg = math.sqrt(g)
    return (
        g,
        sqg,
        2.0 * sqg * params.omega,
        0.5 * g,
        math.cos(phase),
        math.sin(phase),
    )


def step_sme(
    state: ConditionedState, config: TrajectoryConfig, noise: float
) -> tuple:
    """One Euler-Maruyama step given the Wiener increment (variance dt).

    Returns (new state, current increment dJ). Mirrors the compiled kernel
    exactly, including the Bloch-norm clamp.
    """
    gamma, sqg, a2, hg, cphi, sphi = _coefficients(config.params, config.phase)
    dW = float(noise)
    nx, ny, nz, kv = _bloch_update.py_func(
        state.x, state.y, state.z, dW, config.dt, gamma, sqg, a2, hg, cphi, sphi
    )
    if not (np.isfinite(nx) and np.isfinite(ny) and np.isfinite(nz)):
        raise NumericalInstabilityError(
            "conditioned state left the Bloch ball non-finitely",
            state=(state.x, state.y, state.z),
        )
    return ConditionedState(nx, ny, nz), kv * config.dt + dW


def _stream_rng(seed: int, phase_index: int, traj_index: int) -> np.random.Generator:
    # one independent, reproducible stream per (phase, trajectory) pair
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(phase_index, traj_index))
    return np.random.default_rng(ss)


def simulate_record(
    config: TrajectoryConfig,
    duration: float,
    stream: tuple = (0, 0),
    initial: ConditionedState = None,
) -> HomodyneRecord:
    """Integrate one full record of length duration from the ground state.

    stream selects the (phase_index, trajectory_index) noise stream, so the
    record reproduces the corresponding batch trajectory. Pure python; meant
    for inspection and tests, not bulk harvesting.
    """
    if duration <= 0.0 or not np.isfinite(duration):
        raise ParameterError(f"duration must be positive, got {duration}")
    n_steps = int(round(duration / config.dt))
    if n_steps < 1:
        raise ParameterError("duration shorter than one step")
    gamma, sqg, a2, hg, cphi, sphi = _coefficients(config.params, config.phase)
    rng = _stream_rng(config.seed, int(stream[0]), int(stream[1]))
    xi = rng.standard_normal(n_steps)
    sdt = math.sqrt(config.dt)
    state = ConditionedState.ground() if initial is None else initial
    x, y, z = state.bloch
    increments = np.empty(n_steps)
    update = _bloch_update.py_func
    for k in range(n_steps):
        dW = xi[k] * sdt
        x, y, z, kv = update(x, y, z, dW, config.dt, gamma, sqg, a2, hg, cphi, sphi)
        if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z)):
            raise NumericalInstabilityError(
                "conditioned state became non-finite",
                step_index=k,
                phase_index=int(stream[0]),
                trajectory_index=int(stream[1]),
                state=(x, y, z),
            )
        increments[k] = kv * config.dt + dW
    times = config.dt * np.arange(n_steps + 1)
    return HomodyneRecord(phase=config.phase, times=times, increments=increments)


def sample_filtered_quadrature(record: HomodyneRecord, f: FilterSpec) -> QuadratureSample:
    """Filtered quadrature x_f = sum f(t_k) dJ_k from one record."""
    n_start, w = sampled_weights(f, record.dt)
    n_end = n_start + w.size
    if n_start < 0 or n_end > record.increments.size:
        lo, hi = f.support()
        raise CoverageError(
            f"record spans [0, {record.duration:g}) but the filter needs "
            f"[{lo:g}, {hi:g})"
        )
    value = float(np.dot(w, record.increments[n_start:n_end]))
    return QuadratureSample(phase=record.phase, value=value)


def _rescan_failure(
    config: TrajectoryConfig,
    phase: float,
    phase_index: int,
    traj_index: int,
    n_steps: int,
):
    """Replay a failed trajectory in python to locate the bad step."""
    gamma, sqg, a2, hg, cphi, sphi = _coefficients(config.params, phase)
    rng = _stream_rng(config.seed, phase_index, traj_index)
    xi = rng.standard_normal(n_steps)
    sdt = math.sqrt(config.dt)
    x, y, z = 0.0, 0.0, -1.0
    update = _bloch_update.py_func
    for k in range(n_steps):
        px, py, pz = x, y, z
        x, y, z, _ = update(x, y, z, xi[k] * sdt, config.dt, gamma, sqg, a2, hg, cphi, sphi)
        if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z)):
            raise NumericalInstabilityError(
                "conditioned state became non-finite during batch harvesting",
                step_index=k,
                phase_index=phase_index,
                trajectory_index=traj_index,
                state=(px, py, pz),
            )
    raise NumericalInstabilityError(
        "kernel flagged a non-finite trajectory but the replay stayed finite",
        phase_index=phase_index,
        trajectory_index=traj_index,
    )


def batch_samples(
    config: TrajectoryConfig,
    phases,
    samples_per_phase: int,
    f: FilterSpec,
) -> list:
    """Harvest filtered quadrature samples over a set of LO phases.

    Each (phase, trajectory) pair owns an independent, reproducible noise
    stream, so results are bit-identical for a given config regardless of
    chunking. In fresh mode every sample comes from its own trajectory; in
    multi mode each trajectory yields windows_per_trajectory samples
    separated by dead_time of discarded record.

    The burn-in is taken from the filter timeline: the window start
    f.support()[0] must leave at least 10/gamma of stationarization.
    Returns samples ordered by (phase_index, sample_index).
    """
    phases = np.asarray(phases, dtype=float)
    if phases.ndim != 1 or phases.size == 0:
        raise ParameterError("phases must be a non-empty 1-D sequence")
    if np.any(~np.isfinite(phases)) or np.any(phases < 0.0) or np.any(phases >= math.pi):
        raise ParameterError("all phases must lie in [0, pi)")
    if samples_per_phase < 1:
        raise ParameterError("samples_per_phase must be >= 1")

    n_burn, w = sampled_weights(f, config.dt)
    if n_burn * config.dt < MIN_BURN_IN / config.params.gamma * (1.0 - 1e-12):
        raise ParameterError(
            f"filter support starts at {n_burn * config.dt:g}, before the "
            f"emitter is stationary (needs {MIN_BURN_IN / config.params.gamma:g})"
        )
    n_win = w.size
    n_dead = int(round(config.dead_time / config.dt))
    if config.harvesting == "multi":
        n_windows = config.windows_per_trajectory
        n_traj = -(-samples_per_phase // n_windows)
    else:
        n_windows = 1
        n_traj = samples_per_phase
    n_steps = n_burn + n_windows * n_win + (n_windows - 1) * n_dead

    rows = max(1, min(n_traj, int(_CHUNK_BYTES / (8.0 * n_steps))))
    checks = np.empty((rows, 0, 3))
    out = []
    for p_idx, phase in enumerate(phases):
        gamma, sqg, a2, hg, cphi, sphi = _coefficients(config.params, float(phase))
        collected = []
        t_idx = 0
        while t_idx < n_traj:
            n_rows = min(rows, n_traj - t_idx)
            noise = np.empty((n_rows, n_steps))
            for r in range(n_rows):
                noise[r] = _stream_rng(
                    config.seed, p_idx, t_idx + r
                ).standard_normal(n_steps)
            bloch0 = np.zeros((n_rows, 3))
            bloch0[:, 2] = -1.0
            samples, _, flags = _sme_chunk(
                bloch0,
                noise,
                config.dt,
                gamma,
                sqg,
                a2,
                hg,
                cphi,
                sphi,
                n_burn,
                w,
                n_dead,
                n_windows,
                0,
                checks[:n_rows],
            )
            if np.any(flags != 0):
                bad = int(np.argmax(flags != 0))
                _rescan_failure(config, float(phase), p_idx, t_idx + bad, n_steps)
            collected.append(samples)
            t_idx += n_rows
        values = np.concatenate(collected, axis=0)
        for s_idx in range(samples_per_phase):
            out.append(
                QuadratureSample(
                    phase=float(phase),
                    value=float(values[s_idx // n_windows, s_idx % n_windows]),
                    phase_index=p_idx,
                    sample_index=s_idx,
                    trajectory_index=s_idx // n_windows,
                )
            )
    return out


def ensemble_bloch_checkpoints(
    config: TrajectoryConfig,
    n_trajectories: int,
    duration: float,
    check_every: int,
) -> np.ndarray:
    """Conditioned Bloch vectors at periodic checkpoints over an ensemble.

    Returns an array of shape (n_trajectories, n_checks, 3) holding the
    state after steps check_every, 2*check_every, ... Useful for verifying
    that the ensemble mean follows the unconditioned master equation.
    """
    if n_trajectories < 1:
        raise ParameterError("n_trajectories must be >= 1")
    if check_every < 1:
        raise ParameterError("check_every must be >= 1")
    n_steps = int(round(duration / config.dt))
    if n_steps < check_every:
        raise ParameterError("duration shorter than one checkpoint interval")
    gamma, sqg, a2, hg, cphi, sphi = _coefficients(config.params, config.phase)
    n_checks = n_steps // check_every
    w_empty = np.zeros(0)
    rows = max(1, min(n_trajectories, int(_CHUNK_BYTES / (8.0 * n_steps))))
    out = np.empty((n_trajectories, n_checks, 3))
    t_idx = 0
    while t_idx < n_trajectories:
        n_rows = min(rows, n_trajectories - t_idx)
        noise = np.empty((n_rows, n_steps))
        for r in range(n_rows):
            noise[r] = _stream_rng(config.seed, 0, t_idx + r).standard_normal(n_steps)
        bloch0 = np.zeros((n_rows, 3))
        bloch0[:, 2] = -1.0
        checks = np.empty((n_rows, n_checks, 3))
        _, _, flags = _sme_chunk(
            bloch0,
            noise,
            config.dt,
            gamma,
            sqg,
            a2,
            hg,
            cphi,
            sphi,
            n_steps,
            w_empty,
            0,
            0,
            check_every,
            checks,
        )
        if np.any(flags != 0):
            bad = int(np.argmax(flags != 0))
            _rescan_failure(config, config.phase, 0, t_idx + bad, n_steps)
        out[t_idx : t_idx + n_rows] = checks
        t_idx += n_rows
    return out
