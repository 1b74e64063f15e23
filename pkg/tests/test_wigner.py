"""Phase-space maps, integrated negativity and displacement."""

import math

import numpy as np
import pytest

from fluotomo.errors import CutoffError, GridError, ParameterError
from fluotomo.tomography import annihilation_expectation, coherent_density_matrix
from fluotomo.wigner import (
    CONVENTION,
    SINGLE_PHOTON_NEGATIVITY,
    displace_density_matrix,
    integrated_negativity,
    purity,
    wigner_fock_diagonal,
    wigner_from_density_matrix,
    wigner_two_level,
)

FOCK1 = np.diag([0.0, 1.0]).astype(complex)


def test_fock_values_at_origin():
    assert wigner_fock_diagonal(0, 0.0) == pytest.approx(1.0 / math.pi)
    assert wigner_fock_diagonal(1, 0.0) == pytest.approx(-1.0 / math.pi)
    assert wigner_fock_diagonal(2, 0.0) == pytest.approx(1.0 / math.pi)
    # scalar in, float out; array in, array out
    assert isinstance(wigner_fock_diagonal(0, 0.3 + 0.1j), float)
    arr = wigner_fock_diagonal(1, np.array([0.0, 0.5j]))
    assert arr.shape == (2,)
    with pytest.raises(ParameterError):
        wigner_fock_diagonal(-1, 0.0)


def test_vacuum_gaussian():
    # with alpha = (x + ip)/2 the raw dx dp integral carries mass 2 per
    # unit trace
    grid = wigner_from_density_matrix(np.diag([1.0, 0.0]).astype(complex))
    assert grid.integrate() == pytest.approx(2.0, abs=1e-5)
    assert grid.mass == pytest.approx(2.0, abs=1e-5)
    center = wigner_fock_diagonal(0, 0.0)
    i0 = grid.x.size // 2
    assert grid.values[i0, i0] == pytest.approx(center, rel=1e-12)


def test_two_level_matches_matrix_path():
    rho0, rho1, rho10 = 0.52, 0.48, 0.18 - 0.07j
    rho = np.array([[rho0, np.conj(rho10)], [rho10, rho1]], dtype=complex)
    grid = wigner_from_density_matrix(rho)
    pts = grid.alpha()
    direct = wigner_two_level(rho0, rho1, rho10, pts)
    assert np.max(np.abs(direct - grid.values)) < 1e-12


def test_two_level_validation():
    with pytest.raises(ParameterError):
        wigner_two_level(0.6, 0.5, 0.0, 0.0)  # populations sum 1.1
    with pytest.raises(ParameterError):
        wigner_two_level(1.2, -0.2, 0.0, 0.0)
    with pytest.raises(ParameterError):
        wigner_two_level(0.5, 0.5, 0.9, 0.0)  # coherence beyond PSD bound


def test_grid_geometry():
    grid = wigner_from_density_matrix(FOCK1, extent=5.0, step=0.05)
    assert grid.step == pytest.approx(0.05)
    assert grid.extent == pytest.approx(5.0)
    assert grid.x.size == 201
    assert grid.x[0] == -grid.x[-1]
    assert grid.convention == CONVENTION
    ones = np.ones_like(grid.values)
    assert float(np.sum(grid.weights() * ones)) == pytest.approx(
        (2.0 * 5.0) ** 2, rel=1e-12
    )
    # alpha grid encodes x + ip over 2
    a = grid.alpha()
    assert a[0, 0] == pytest.approx((grid.x[0] + 1j * grid.p[0]) / 2.0)


def test_grid_validation():
    with pytest.raises(GridError):
        wigner_from_density_matrix(FOCK1, extent=4.0)
    with pytest.raises(GridError):
        wigner_from_density_matrix(FOCK1, step=0.06)
    with pytest.raises(ParameterError):
        wigner_from_density_matrix(np.ones((2, 3)))


def test_single_photon_negativity_closed_form():
    assert SINGLE_PHOTON_NEGATIVITY == pytest.approx(
        4.0 * math.exp(-0.5) - 2.0, abs=1e-15
    )
    report = integrated_negativity(wigner_from_density_matrix(FOCK1))
    assert report.negativity == pytest.approx(SINGLE_PHOTON_NEGATIVITY, abs=1e-4)
    assert report.relative_negativity == pytest.approx(1.0, abs=3e-4)
    assert report.wigner_min == pytest.approx(-1.0 / math.pi, rel=1e-6)
    assert report.mass == pytest.approx(2.0, abs=1e-3)


def test_negativity_step_halving():
    a = integrated_negativity(wigner_from_density_matrix(FOCK1, step=0.025))
    b = integrated_negativity(wigner_from_density_matrix(FOCK1, step=0.0125))
    assert abs(a.negativity - b.negativity) < 1e-4


def test_negativity_threshold_and_admixture():
    def neg(rho):
        return integrated_negativity(wigner_from_density_matrix(rho)).negativity

    assert neg(np.diag([0.5, 0.5]).astype(complex)) < 1e-6
    assert neg(np.diag([0.45, 0.55]).astype(complex)) > 1e-6
    # two-photon admixture fills the dip and reduces the negativity
    pure = neg(FOCK1)
    mixed = neg(np.diag([0.0, 0.8, 0.2]).astype(complex))
    assert mixed < pure
    assert mixed > 0.0


def test_negativity_input_guard():
    with pytest.raises(GridError):
        integrated_negativity(np.zeros((11, 11)))


def test_displacement_unitary():
    rho = coherent_density_matrix(0.0, 20)
    beta = 0.7 + 0.2j
    out = displace_density_matrix(rho, beta)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-9)
    assert annihilation_expectation(out) == pytest.approx(beta, abs=1e-6)
    assert purity(out) == pytest.approx(1.0, abs=1e-9)


def test_displacement_guards():
    rho = coherent_density_matrix(0.0, 8)
    with pytest.raises(ParameterError):
        displace_density_matrix(rho, 2.5)
    high = np.zeros((251, 251), dtype=complex)
    high[250, 250] = 1.0
    with pytest.raises(CutoffError) as err:
        displace_density_matrix(high, 1.5)
    assert err.value.required_cutoff > 256


def test_purity_values():
    assert purity(np.diag([1.0, 0.0]).astype(complex)) == pytest.approx(1.0)
    assert purity(np.diag([0.5, 0.5]).astype(complex)) == pytest.approx(0.5)
