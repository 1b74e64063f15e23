"""Quadrature histograms, bin projectors and the R rho R reconstruction."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from _oracles import inverse_cdf_samples
from fluotomo.errors import HistogramError, ParameterError
from fluotomo.tomography import (
    FockDensityMatrix,
    QuadratureHistogram,
    annihilation_expectation,
    bin_samples,
    build_projectors,
    coherent_density_matrix,
    convention_selftest,
    exact_probabilities,
    mle_reconstruct,
    quadrature_wavefunction,
)

EDGES = np.linspace(-8.0, 8.0, 82)
PHASES = np.arange(12) * (np.pi / 12)


def test_wavefunction_orthonormality_and_variance():
    for m in range(6):
        for n in range(m, 6):
            val, _ = quad(
                lambda x: quadrature_wavefunction(m, x)
                * quadrature_wavefunction(n, x),
                -14.0, 14.0, limit=300,
            )
            assert val == pytest.approx(1.0 if m == n else 0.0, abs=1e-9)
    var, _ = quad(
        lambda x: x * x * quadrature_wavefunction(0, x) ** 2, -12.0, 12.0
    )
    assert var == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ParameterError):
        quadrature_wavefunction(-1, 0.0)


def test_projectors_structure():
    proj = build_projectors(PHASES, EDGES, n_fock=8)
    assert proj.matrices.shape == (12, 81, 8, 8)
    assert proj.completeness_deficit() < 2e-6
    # each projector Hermitian and PSD
    sub = proj.matrices[3, 40]
    assert np.allclose(sub, sub.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(sub).min() > -1e-12
    # phase enters only through e^{i(m-n) theta}
    ratio = proj.matrices[3, 40] / np.where(
        np.abs(proj.bin_integrals[40]) < 1e-300, 1.0, proj.bin_integrals[40]
    )
    m = np.arange(8)
    expect = np.exp(1j * PHASES[3] * np.subtract.outer(m, m))
    mask = np.abs(proj.bin_integrals[40]) > 1e-12
    assert np.allclose(ratio[mask], expect[mask], atol=1e-12)


def test_bin_samples_hand_case():
    edges = np.array([-1.0, 0.0, 1.0])
    phases = np.array([0.0, np.pi / 2])
    samples = np.array(
        [
            [0.0, -0.5],
            [0.0, 0.5],
            [0.0, 5.0],
            [np.pi / 2, -2.0],
            [np.pi / 2, 0.1],
            [np.pi / 2, 0.2],
        ]
    )
    hist = bin_samples(samples, edges, phases)
    assert hist.counts.tolist() == [[1.0, 1.0], [0.0, 2.0]]
    assert hist.overflow.tolist() == [[0, 1], [1, 0]]
    assert hist.n == 4.0
    clamped = bin_samples(samples, edges, phases, clamp=True)
    assert clamped.counts.tolist() == [[1.0, 2.0], [1.0, 2.0]]
    assert clamped.n == 6.0
    # closed top edge keeps the boundary sample
    top = bin_samples(np.array([[0.0, 1.0]]), edges, phases)
    assert top.counts.tolist() == [[0.0, 1.0], [0.0, 0.0]]


def test_bin_samples_errors():
    edges = np.array([-1.0, 0.0, 1.0])
    phases = np.array([0.0])
    with pytest.raises(HistogramError):
        bin_samples(np.empty((0, 2)), edges, phases)
    with pytest.raises(HistogramError) as err:
        bin_samples(np.array([[0.0, np.nan]]), edges, phases)
    assert err.value.sample_index == 0
    with pytest.raises(HistogramError):
        bin_samples(np.array([[0.7, 0.1]]), edges, phases)


def test_histogram_validation():
    with pytest.raises(HistogramError):
        QuadratureHistogram(PHASES, EDGES, np.zeros((12, 80)))
    with pytest.raises(HistogramError):
        QuadratureHistogram(PHASES, EDGES, -np.ones((12, 81)))
    with pytest.raises(HistogramError):
        QuadratureHistogram(PHASES, np.array([0.0, 0.0, 1.0]), np.zeros((12, 2)))


def test_density_matrix_validation():
    with pytest.raises(ParameterError):
        FockDensityMatrix(np.eye(3))  # trace 3
    bad = np.diag([1.5, -0.5]).astype(complex)
    with pytest.raises(ParameterError):
        FockDensityMatrix(bad)
    nh = np.array([[0.5, 0.3], [0.1, 0.5]], dtype=complex)
    with pytest.raises(ParameterError):
        FockDensityMatrix(nh)
    ok = FockDensityMatrix(np.diag([0.25, 0.75]).astype(complex))
    assert ok.n_fock == 2
    assert ok.populations.tolist() == [0.25, 0.75]


def test_coherent_matrix_and_annihilation():
    alpha = 0.6 - 0.3j
    rho = coherent_density_matrix(alpha, 12)
    assert np.trace(rho).real == pytest.approx(1.0)
    # Poisson populations (up to the cutoff renormalization)
    pops = np.real(np.diag(rho))
    expect = np.exp(-abs(alpha) ** 2) * np.array(
        [abs(alpha) ** (2 * k) / math.factorial(k) for k in range(12)]
    )
    assert np.allclose(pops, expect / expect.sum(), atol=1e-12)
    assert annihilation_expectation(rho) == pytest.approx(alpha, abs=1e-8)


def test_exact_probabilities_coherent_signal():
    alpha = 0.7
    rho = coherent_density_matrix(alpha, 10)
    proj = build_projectors(PHASES, EDGES, n_fock=10)
    probs = exact_probabilities(rho, proj)
    sums = probs.sum(axis=1)
    assert np.all(sums <= 1.0 + 1e-10)
    assert np.all(sums > 0.9999)
    centers = 0.5 * (EDGES[1:] + EDGES[:-1])
    means = probs @ centers / sums
    # phase-resolved mean of a real coherent amplitude: 2 alpha cos(theta)
    assert np.allclose(means, 2.0 * alpha * np.cos(PHASES), atol=2e-3)


def test_reconstruction_phase_equivariance():
    """Feeding the same data tagged with rotated phases must rotate the
    reconstruction by the matching number operator phase, iterate for
    iterate."""
    rng = np.random.default_rng(7)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho_true = a @ a.conj().T
    rho_true /= np.trace(rho_true).real
    delta = np.pi / 24.0
    phases_a = np.arange(6) * (np.pi / 12)
    phases_b = phases_a + delta
    proj_a = build_projectors(phases_a, EDGES, n_fock=4)
    proj_b = build_projectors(phases_b, EDGES, n_fock=4)
    rot = np.diag(np.exp(1j * delta * np.arange(4)))

    probs_a = exact_probabilities(rho_true, proj_a)
    rho_rot = rot @ rho_true @ rot.conj().T
    assert np.allclose(
        exact_probabilities(rho_rot, proj_b), probs_a, atol=1e-12
    )

    hist_a = QuadratureHistogram(phases_a, EDGES, probs_a)
    hist_b = QuadratureHistogram(phases_b, EDGES, probs_a)
    state_a, _ = mle_reconstruct(hist_a, 4, tol=0.0, max_iter=300,
                                 projectors=proj_a)
    state_b, _ = mle_reconstruct(hist_b, 4, tol=0.0, max_iter=300,
                                 projectors=proj_b)
    expect = rot @ state_a.matrix @ rot.conj().T
    assert np.max(np.abs(state_b.matrix - expect)) < 1e-8


def test_reconstruction_recovers_coherent_state():
    alpha = 0.6
    rho_true = coherent_density_matrix(alpha, 6)
    rng = np.random.default_rng(29)
    samples = inverse_cdf_samples(rho_true, PHASES, 3000, rng)
    hist = bin_samples(samples, EDGES, PHASES)
    state, report = mle_reconstruct(hist, 6)
    assert report.converged
    fidelity = np.real(np.trace(state.matrix @ rho_true))
    assert fidelity > 0.98
    assert annihilation_expectation(state.matrix) == pytest.approx(
        alpha, abs=0.05
    )


def test_reconstruction_input_guards():
    hist = QuadratureHistogram(PHASES, EDGES, np.zeros((12, 81)))
    with pytest.raises(HistogramError):
        mle_reconstruct(hist, 4)
    good = QuadratureHistogram(
        np.array([0.0]), EDGES, np.ones((1, 81))
    )
    with pytest.raises(ParameterError):
        mle_reconstruct(good, 1)
    with pytest.raises(ParameterError):
        mle_reconstruct(good, 4, initial=np.eye(6) / 6.0)
    proj = build_projectors(np.array([0.0, 0.5]), EDGES, n_fock=4)
    with pytest.raises(ParameterError):
        mle_reconstruct(good, 4, projectors=proj)


def test_convention_selftest_all_pass():
    rows = convention_selftest()
    names = [r[0] for r in rows]
    assert "vacuum_variance" in names
    assert "coherent_alpha_recovery" in names
    assert all(passed for _, passed, _ in rows)
    fast = convention_selftest(include_reconstruction=False)
    assert len(fast) == len(rows) - 1
    assert all(passed for _, passed, _ in fast)
