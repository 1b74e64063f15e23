"""Phase-space representation and negativity of the reconstructed field.

Conventions match tomography.py: X_theta = a e^{-i theta} + a^dag e^{+i theta}
with vacuum variance 1, phase-space point alpha = (x + ip)/2, and the Wigner
function normalized so that integral W dx dp = 2. In these units the vacuum is
W_0 = exp(-2|alpha|^2)/pi = exp(-(x^2+p^2)/2)/pi and the marginal along the
theta direction reproduces (twice) the quadrature distribution of X_theta.

The integrated negativity of the ideal single photon is 4 e^{-1/2} - 2 in this
normalization; relative negativities are quoted against it and are therefore
convention-independent.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import CutoffError, GridError, ParameterError

CONVENTION = "alpha=(x+ip)/2; mass 2 over dx dp; X_theta vacuum variance 1"

# exact integrated negativity of |1><1| in this convention
SINGLE_PHOTON_NEGATIVITY = 4.0 * math.exp(-0.5) - 2.0

_MIN_EXTENT = 5.0
_MAX_STEP = 0.05


def _as_points(alpha):
    arr = np.asarray(alpha, dtype=complex)
    return arr, np.isscalar(alpha) or arr.ndim == 0


def _laguerre_stack(order: int, k: int, arg: np.ndarray) -> list:
    """L_n^{(k)}(arg) for n = 0..order via the upward three-term recurrence."""
    out = [np.ones_like(arg)]
    if order >= 1:
        out.append(1.0 + k - arg)
    for n in range(1, order):
        nxt = ((2 * n + 1 + k - arg) * out[n] - (n + k) * out[n - 1]) / (n + 1)
        out.append(nxt)
    return out


def wigner_fock_diagonal(n: int, alpha):
    """Wigner function of the Fock state |n> at phase-space points alpha.

    W_n(alpha) = (-1)^n e^{-2|alpha|^2} L_n(4|alpha|^2) / pi.
    """
    if int(n) != n or n < 0:
        raise ParameterError(f"Fock index must be a non-negative integer, got {n}")
    pts, scalar = _as_points(alpha)
    arg = 4.0 * np.abs(pts) ** 2
    prev = np.ones_like(arg)
    cur = prev if n == 0 else 1.0 - arg
    for m in range(1, n):
        prev, cur = cur, ((2 * m + 1 - arg) * cur - m * prev) / (m + 1)
    w = ((-1.0) ** n) * np.exp(-0.5 * arg) * cur / np.pi
    return float(w) if scalar else w


def wigner_two_level(rho0: float, rho1: float, rho10, alpha):
    """Wigner function of a state confined to {|0>, |1>} at points alpha.

    W = (1/pi) e^{-2|a|^2} [rho0 + rho1 (4|a|^2 - 1) + 4 Re(rho10 a*)]
    with rho10 = <1|rho|0>. The coherence term pushes the distribution
    toward x = 2 Re<a>, p = 2 Im<a>, consistent with the quadrature
    convention of the tomography module.
    """
    if abs(rho0 + rho1 - 1.0) > 1e-10:
        raise ParameterError(
            f"populations must sum to 1, got {rho0} + {rho1} = {rho0 + rho1}"
        )
    if rho0 < -1e-12 or rho1 < -1e-12:
        raise ParameterError("populations must be non-negative")
    if abs(rho10) ** 2 > rho0 * rho1 + 1e-10:
        raise ParameterError(
            f"|rho10|^2 = {abs(rho10) ** 2:.3e} exceeds rho0*rho1 = "
            f"{rho0 * rho1:.3e}: state not positive semidefinite"
        )
    pts, scalar = _as_points(alpha)
    arg = 4.0 * np.abs(pts) ** 2
    env = np.exp(-0.5 * arg) / np.pi
    w = env * (rho0 + rho1 * (arg - 1.0) + 4.0 * (complex(rho10) * np.conj(pts)).real)
    return float(w) if scalar else w


def _grid_axis(extent: float, step: float) -> np.ndarray:
    if not (np.isfinite(extent) and np.isfinite(step)) or step <= 0.0:
        raise GridError(f"invalid grid spec: extent {extent}, step {step}")
    if extent < _MIN_EXTENT - 1e-12:
        raise GridError(
            f"grid extent {extent} below required minimum {_MIN_EXTENT}"
        )
    if step > _MAX_STEP + 1e-12:
        raise GridError(f"grid step {step} above allowed maximum {_MAX_STEP}")
    n_side = int(round(extent / step))
    return step * np.arange(-n_side, n_side + 1, dtype=float)


def _check_axis(a: np.ndarray, name: str) -> None:
    if a.ndim != 1 or a.size < 3:
        raise GridError(f"{name} axis must be 1-D with at least 3 points")
    d = np.diff(a)
    if np.any(np.abs(d - d[0]) > 1e-9 * d[0]):
        raise GridError(f"{name} axis must be uniform")
    if abs(a[0] + a[-1]) > 1e-9 * a[-1]:
        raise GridError(f"{name} axis must be symmetric about 0")
    if a[-1] < _MIN_EXTENT - 1e-9:
        raise GridError(
            f"{name} extent {a[-1]:g} below required minimum {_MIN_EXTENT}"
        )
    if d[0] > _MAX_STEP + 1e-12:
        raise GridError(f"{name} step {d[0]:g} above allowed maximum {_MAX_STEP}")


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Wigner function sampled on a uniform symmetric (x, p) grid.

    values is indexed [i_p, i_x]. The convention tag records the phase-space
    normalization so exported grids are self-describing; warnings carry
    non-fatal diagnostics such as a truncation mass deficit.
    """

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray
    convention: str = CONVENTION
    warnings: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p = np.asarray(self.p, dtype=float)
        v = np.asarray(self.values, dtype=float)
        _check_axis(x, "x")
        _check_axis(p, "p")
        if v.shape != (p.size, x.size):
            raise GridError(
                f"values shape {v.shape} does not match (p, x) = "
                f"({p.size}, {x.size})"
            )
        if not np.all(np.isfinite(v)):
            raise GridError("Wigner values must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "values", v)

    @property
    def step(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def extent(self) -> float:
        return float(self.x[-1])

    def alpha(self) -> np.ndarray:
        return 0.5 * (self.x[None, :] + 1j * self.p[:, None])

    def weights(self) -> np.ndarray:
        """2-D trapezoid quadrature weights matching values."""
        wx = np.full(self.x.size, self.x[1] - self.x[0])
        wx[0] *= 0.5
        wx[-1] *= 0.5
        wp = np.full(self.p.size, self.p[1] - self.p[0])
        wp[0] *= 0.5
        wp[-1] *= 0.5
        return np.outer(wp, wx)

    def integrate(self, field=None) -> float:
        v = self.values if field is None else np.asarray(field)
        if v.shape != self.values.shape:
            raise GridError(f"field shape {v.shape} does not match grid")
        return float(np.sum(v * self.weights()))

    @property
    def mass(self) -> float:
        return self.integrate()


@dataclass(frozen=True)
class NegativityReport:
    """Integrated negativity of a Wigner grid and its provenance."""

    negativity: float
    relative_negativity: float
    single_photon_negativity: float
    wigner_min: float
    mass: float
    extent: float
    step: float
    convention: str = CONVENTION
    warnings: tuple = ()


def wigner_from_density_matrix(
    rho, extent: float = 5.0, step: float = 0.025
) -> PhaseSpaceGrid:
    """Wigner function of an arbitrary Fock-basis density matrix.

    Accumulates the kernel <n|K(alpha)|m> over diagonals d = m - n:

        (1/pi)(-1)^n sqrt(n!/m!) (2 alpha*)^d e^{-2|alpha|^2} L_n^{(d)}(4|alpha|^2)

    The d = 0 band is real; each d > 0 band contributes twice its real part.
    Coincides with wigner_two_level on {|0>,|1>}-supported states and with
    wigner_fock_diagonal on Fock states. A total-mass deficit beyond 1e-2
    (cutoff too small for the grid) is recorded as a warning, not an error.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise ParameterError(f"density matrix must be square, got {rho.shape}")
    axis = _grid_axis(extent, step)
    alpha = 0.5 * (axis[None, :] + 1j * axis[:, None])
    n_fock = rho.shape[0]
    arg = 4.0 * np.abs(alpha) ** 2
    env = np.exp(-0.5 * arg) / np.pi

    w = np.zeros_like(arg)
    z = np.ones_like(alpha)  # (2 alpha*)^d, updated per diagonal
    two_conj = 2.0 * np.conj(alpha)
    fact = np.ones(n_fock)
    for n in range(1, n_fock):
        fact[n] = fact[n - 1] * n

    for d in range(n_fock):
        band = [rho[n + d, n] for n in range(n_fock - d)]
        if any(b != 0.0 for b in band):
            lag = _laguerre_stack(n_fock - d - 1, d, arg)
            acc = np.zeros_like(alpha)
            for n in range(n_fock - d):
                c = band[n] * ((-1.0) ** n) * math.sqrt(fact[n] / fact[n + d])
                if c != 0.0:
                    acc = acc + c * lag[n]
            term = (acc * z).real
            w += term if d == 0 else 2.0 * term
        z = z * two_conj
    values = env * w

    warnings = ()
    trace = float(np.trace(rho).real)
    grid = PhaseSpaceGrid(x=axis, p=axis, values=values)
    deficit = abs(grid.mass - 2.0 * trace)
    if deficit > 1e-2:
        warnings = (
            f"wigner mass {grid.mass:.4f} deviates from {2.0 * trace:.4f} "
            "by more than 1e-2; cutoff or grid extent too small",
        )
        grid = PhaseSpaceGrid(x=axis, p=axis, values=values, warnings=warnings)
    return grid


def integrated_negativity(grid: PhaseSpaceGrid) -> NegativityReport:
    """Integrated negativity N = (1/2) int (|W| - W) dx dp with a grid check.

    The single-photon normalizer is evaluated on the same grid; if it misses
    the closed form 4 e^{-1/2} - 2 by more than 1e-3 the grid is unfit and
    GridError is raised. The grid's own warnings (e.g. mass deficit) are
    carried into the report.
    """
    if not isinstance(grid, PhaseSpaceGrid):
        raise GridError("integrated_negativity expects a PhaseSpaceGrid")
    weights = grid.weights()
    ref_w = wigner_fock_diagonal(1, grid.alpha())
    ref_neg = 0.5 * float(np.sum((np.abs(ref_w) - ref_w) * weights))
    if abs(ref_neg - SINGLE_PHOTON_NEGATIVITY) > 1e-3:
        raise GridError(
            "grid fails the single-photon negativity check: "
            f"got {ref_neg:.6f}, exact {SINGLE_PHOTON_NEGATIVITY:.6f}; "
            "increase the extent or refine the step"
        )
    v = grid.values
    neg = 0.5 * float(np.sum((np.abs(v) - v) * weights))
    return NegativityReport(
        negativity=neg,
        relative_negativity=neg / ref_neg,
        single_photon_negativity=ref_neg,
        wigner_min=float(v.min()),
        mass=grid.mass,
        extent=grid.extent,
        step=grid.step,
        convention=grid.convention,
        warnings=grid.warnings,
    )


def displace_density_matrix(rho, beta: complex, leak_tol: float = 1e-3) -> np.ndarray:
    """Displace a Fock-basis state by beta: rho -> D(beta) rho D(beta)^dag.

    The generator beta a^dag - beta* a is anti-Hermitian, so its exponential
    is exactly unitary in the enlarged space and the trace is preserved;
    truncation error instead shows up as population pushed against the top
    of the cutoff. The internal cutoff grows until the top max(4, N//8)
    levels hold less than leak_tol population; the returned matrix is
    trimmed to the smallest cutoff keeping all but 1e-9 of the trace.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ParameterError(f"density matrix must be square, got {rho.shape}")
    beta = complex(beta)
    if abs(beta) > 2.0 + 1e-12:
        raise ParameterError(
            f"|beta| = {abs(beta):.3f} exceeds the supported range |beta| <= 2"
        )
    n0 = rho.shape[0]
    for n_big in range(n0 + 16, 257, 16):
        a_op = np.diag(np.sqrt(np.arange(1.0, n_big)), 1)
        gen = beta * a_op.conj().T - np.conj(beta) * a_op
        d_op = expm(gen)
        big = np.zeros((n_big, n_big), dtype=complex)
        big[:n0, :n0] = rho
        out = d_op @ big @ d_op.conj().T
        top = max(4, n_big // 8)
        leak = float(np.sum(out.diagonal()[-top:].real))
        if leak <= leak_tol:
            pops = np.cumsum(out.diagonal().real)
            n_keep = int(np.searchsorted(pops, pops[-1] - 1e-9)) + 1
            n_keep = max(n_keep, 2)
            return out[:n_keep, :n_keep]
    raise CutoffError(
        "displaced state leaks into the top of every cutoff up to 256",
        required_cutoff=272,
    )


def purity(rho) -> float:
    """Tr rho^2 of a Fock-basis density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ParameterError(f"density matrix must be square, got {rho.shape}")
    return float(np.einsum("ij,ji->", rho, rho).real)
