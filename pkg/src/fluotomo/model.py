"""Analytic model of a resonantly driven two-level emitter with one output channel.

The emitter decays at rate gamma into a single 1D field (a mirror folds the
geometry into one channel) while a resonant drive of real amplitude omega
pumps it. Everything here is closed-form or deterministic quadrature: steady
state, output-field amplitude and two-time correlation, an independent
regression-theorem propagator used as a cross-check, and the mean photon
number of a temporal-mode filtered slice of the emission.

Units: time in 1/gamma, drive amplitude in sqrt(gamma), so omega**2 is a
photon rate. The incoherent point omega = sqrt(gamma/8) is where the coherent
amplitude of the total output field vanishes.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .filters import FilterSpec, evaluate_filter, filter_norm

# below this |s| the oscillatory pair of the correlation is evaluated by its
# degenerate (t-multiplied) limit; both branches agree to ~1e-12 here
_BRANCH_EPS = 1e-5


@dataclass(frozen=True)
class SystemParams:
    """Decay rate gamma > 0 and real drive amplitude omega >= 0."""

    gamma: float = 1.0
    omega: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 0.0) or not math.isfinite(self.gamma):
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if self.omega < 0.0 or not math.isfinite(self.omega):
            raise ParameterError(f"omega must be >= 0, got {self.omega}")

    @property
    def saturation(self) -> float:
        """The recurring denominator 1 + 8 omega^2 / gamma."""
        return 1.0 + 8.0 * self.omega**2 / self.gamma


@dataclass(frozen=True)
class BlochVector:
    """Expectations (sp, sm, sz) = (<sigma_+>, <sigma_->, <sigma_z>)."""

    sp: complex
    sm: complex
    sz: float

    def __post_init__(self):
        if abs(self.sm - self.sp.conjugate()) > 1e-12:
            raise ParameterError("sm must equal conj(sp)")
        if not (-1.0 - 1e-12 <= self.sz <= 1e-12):
            raise ParameterError(f"sz out of steady-state range: {self.sz}")
        if abs(self.sp) ** 2 > (1.0 - self.sz**2) / 4.0 + 1e-12:
            raise ParameterError("(sp, sz) outside the Bloch ball")

    @property
    def excited_population(self) -> float:
        return (1.0 + self.sz) / 2.0


@dataclass(frozen=True)
class CorrelationValue:
    """Output-field first-order correlation at delay t.

    value = coherent_part + connected_part, where coherent_part is the
    t-independent |<a_out>|^2 plateau and connected_part decays to zero.
    emitter_correlation is the bare dipole correlation <sp(t) sm(0)>_ss
    (constant term included) from which the connected part derives.
    """

    t: float
    value: complex
    coherent_part: complex
    connected_part: complex
    emitter_correlation: complex


def steady_state_bloch(p: SystemParams) -> BlochVector:
    """Stationary Bloch vector of the driven, damped emitter."""
    d = p.saturation
    sm = -(2.0 * p.omega / math.sqrt(p.gamma)) / d
    return BlochVector(sp=complex(sm), sm=complex(sm), sz=-1.0 / d)


def output_coherent_amplitude(p: SystemParams) -> complex:
    """Mean of the total output field, omega + sqrt(gamma) <sigma_->_ss.

    Vanishes only at omega = 0 and at the incoherent point sqrt(gamma/8).
    """
    ss = steady_state_bloch(p)
    return p.omega + math.sqrt(p.gamma) * ss.sm


def incoherent_drive_amplitude(gamma: float) -> float:
    """Drive amplitude sqrt(gamma/8) at which the coherent output vanishes."""
    if not (gamma > 0.0):
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return math.sqrt(gamma / 8.0)


def _emitter_correlation_terms(p: SystemParams):
    """Closed-form pieces of <sigma_+(t) sigma_-(0)>_ss.

    Returns (m, p_e, rates, amps) with the correlation
    m^2 + (p_e/2) e^{-gamma t/2} + sum_i amps[i] e^{-rates[i] t}.
    At the degenerate point s = 0 the oscillatory pair is returned as None
    and handled by the caller via the t-multiplied limit.
    """
    g, om = p.gamma, p.omega
    d = p.saturation
    m = -(2.0 * om / math.sqrt(g)) / d
    p_e = 0.5 * (1.0 - 1.0 / d)
    s = cmath.sqrt(1.0 - 64.0 * om**2 / g)
    c = 16.0 * om**2 / g - 1.0
    if abs(s) < _BRANCH_EPS:
        return m, p_e, None, (c,)
    k = (om**2 / g) / (2.0 * d**2)
    amp_plus = k * (s - 1.0) * (c + s) / s
    amp_minus = k * (-s - 1.0) * (c - s) / (-s)
    rates = (0.25 * g * (3.0 + s), 0.25 * g * (3.0 - s))
    return m, p_e, rates, (amp_plus, amp_minus)


def _emitter_correlation(p: SystemParams, t):
    """Vectorized <sigma_+(t) sigma_-(0)>_ss (complex, constant included)."""
    t = np.asarray(t, dtype=float)
    g = p.gamma
    m, p_e, rates, amps = _emitter_correlation_terms(p)
    out = (m * m + 0.5 * p_e * np.exp(-0.5 * g * t)).astype(complex)
    if rates is None:
        c = amps[0]
        pref = (p.omega**2 / g) / p.saturation**2
        out += pref * np.exp(-0.75 * g * t) * ((c - 1.0) + 0.25 * c * g * t)
    else:
        out += amps[0] * np.exp(-rates[0] * t) + amps[1] * np.exp(-rates[1] * t)
    return out


def two_time_correlation(p: SystemParams, t: float) -> CorrelationValue:
    """Stationary output-field correlation <a_out^d(t) a_out(0)>_ss.

    Evaluated in closed form with complex-branch-consistent square roots;
    at the degenerate point 64 omega^2 = gamma the oscillatory pair is
    replaced by its analytic limit.
    """
    if t < 0:
        raise ParameterError(f"delay must be >= 0, got t={t}")
    ss = steady_state_bloch(p)
    amp = output_coherent_amplitude(p)
    coherent = amp * amp.conjugate()
    emitter = complex(_emitter_correlation(p, t))
    connected = p.gamma * (emitter - ss.sp * ss.sm)
    return CorrelationValue(t=t, value=coherent + connected,
                            coherent_part=coherent, connected_part=connected,
                            emitter_correlation=emitter)


def _bloch_rhs(p: SystemParams, v: np.ndarray, drive: float) -> np.ndarray:
    """Right-hand side of the linear system for (u+, u-, uz).

    drive carries the inhomogeneity of the z component: 1 for the plain
    Bloch equations, <sigma_->_ss when propagating regression correlations.
    """
    g, om = p.gamma, p.omega
    sg = math.sqrt(g)
    up, um, uz = v
    return np.array([
        sg * om * uz - 0.5 * g * up,
        sg * om * uz - 0.5 * g * um,
        -2.0 * sg * om * (up + um) - g * uz - g * drive,
    ], dtype=complex)


def regression_correlation(p: SystemParams, t: float) -> complex:
    """<sigma_+(t) sigma_-(0)>_ss by direct propagation.

    Independent cross-check of the closed form: the same linear generator
    that drives the single-time Bloch vector is applied to the
    post-measurement initial condition (quantum regression), integrated
    with fixed-step RK4 at step <= 1e-3/gamma.
    """
    if t < 0:
        raise ParameterError(f"delay must be >= 0, got t={t}")
    ss = steady_state_bloch(p)
    m = ss.sm.real
    v = np.array([ss.excited_population, 0.0, -m], dtype=complex)
    if t == 0.0:
        return complex(v[0])
    n = max(1, math.ceil(t * p.gamma / 1e-3))
    h = t / n
    for _ in range(n):
        k1 = _bloch_rhs(p, v, m)
        k2 = _bloch_rhs(p, v + 0.5 * h * k1, m)
        k3 = _bloch_rhs(p, v + 0.5 * h * k2, m)
        k4 = _bloch_rhs(p, v + h * k3, m)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(v.view(float))):
            raise ParameterError(f"regression propagation diverged at t<={t}")
    return complex(v[0])


def filtered_mean_photon_number(p: SystemParams, f: FilterSpec) -> float:
    """Mean photon number of the filtered emission mode.

    n_f = gamma * int int f(t) f(t') <sigma_+(t) sigma_-(t')>_ss dt dt'
    over the filter support, for the emission field sqrt(gamma) sigma_- alone
    (the reflected drive does not enter the mode). Stationarity makes the
    integrand a function of t - t', so the double integral reduces to a
    single sum over lags of the filter autocorrelation; trapezoid weights,
    grid step T/2000.
    """
    filter_norm(f)  # raises FilterError when the spec is unnormalized
    if p.omega == 0.0:
        return 0.0
    lo, hi = f.support()
    n_seg = max(2000, int(round(2000 * (hi - lo) / f.T)))
    h = (hi - lo) / n_seg
    t = lo + h * np.arange(n_seg + 1)
    # quadrature wants the closed-window limit of f at the right edge, not
    # the half-open indicator value
    t[-1] = np.nextafter(hi, lo)
    u = np.asarray(evaluate_filter(f, t), dtype=float) * h
    u[0] *= 0.5
    u[-1] *= 0.5
    lags = h * np.arange(n_seg + 1)
    corr = _emitter_correlation(p, lags).real
    # autocorrelation of the weighted filter at nonnegative lags
    auto = np.correlate(u, u, mode="full")[n_seg:]
    total = corr[0] * auto[0] + 2.0 * np.dot(corr[1:], auto[1:])
    return float(p.gamma * total)
