import numpy as np
import pytest

from ucpmaps.boundary import (
    boundary_algebra,
    ce_product,
    ce_product_iterative,
    return_time,
    structure_checksum,
    verify_cstar_axioms,
    verify_restricted_automorphism,
)
from ucpmaps.channel import EXAMPLE_FIXTURES, fixtures, from_kraus
from ucpmaps.errors import NotPeripheral, SubsequenceNotFound

from conftest import diag


def test_avg3_product_differs_from_matrix_product():
    D = diag(1, 3, 2)
    ch = fixtures("avg3")
    assert np.allclose(ce_product(ch, D, D), diag(1, 9, 5))
    assert np.allclose(D @ D, diag(1, 9, 4))


def test_comp3_product():
    D = diag(3, 0, 1)
    ch = fixtures("comp3")
    # one step gives diag(9, 0, 5/2); the limit of tau^n(D^2) is diag(9, 0, 3)
    assert np.allclose(ch.apply(D @ D), diag(9, 0, 2.5))
    assert np.allclose(ce_product(ch, D, D), diag(9, 0, 3))
    it = ce_product_iterative(ch, D, D)
    assert np.abs(it.estimate - diag(9, 0, 3)).max() < 1e-2 * 10


def test_station3_minus_one_eigenvector_squares_to_unit():
    X = diag(1, 1, -1)
    ch = fixtures("station3")
    assert np.allclose(ce_product(ch, X, X), np.eye(3))
    it = ce_product_iterative(ch, X, X)
    assert it.k_used == 2
    assert np.allclose(it.estimate, np.eye(3))


def test_non_peripheral_input_rejected():
    with pytest.raises(NotPeripheral):
        ce_product(fixtures("station3"), diag(1, 0, 0), np.eye(3))


def test_return_time_for_rotation():
    phase = np.exp(2j * np.pi * 2 / 7)
    k, _ = return_time([1, phase], 0.0, 1e-3, 100)
    assert k == 7


def test_return_time_not_found():
    k, (best_k, best) = return_time([np.exp(2j * np.pi * np.sqrt(2))], 0.0, 1e-12, 50)
    assert k is None and best_k is not None and best > 1e-12


def test_iterative_reports_missing_subsequence():
    theta = 2 * np.pi * np.sqrt(2)
    U = np.diag([1.0, np.exp(1j * theta)])
    ch = from_kraus([U])
    X = np.array([[0, 1.0], [0, 0]])
    with pytest.raises(SubsequenceNotFound) as info:
        ce_product_iterative(ch, X, np.eye(2), k_max=20, delta=1e-9)
    assert info.value.best_k is not None


@pytest.mark.parametrize("name", EXAMPLE_FIXTURES)
def test_boundary_is_cstar_algebra(name):
    alg = boundary_algebra(fixtures(name))
    rep = verify_cstar_axioms(alg)
    assert rep.max_gap <= 1e-7
    assert alg.closure_residual < 1e-10


def test_unit_coordinates_reproduce_identity():
    alg = boundary_algebra(fixtures("avg3"))
    assert np.allclose(alg.to_matrix(alg.unit_coords), np.eye(3))


def test_checksum_is_basis_independent():
    # station3 boundary is C^2 with minimal projections of HS norm sqrt(2) and 1
    alg = boundary_algebra(fixtures("station3"))
    expected = np.sqrt(1 / np.sqrt(2) ** 2 + 1)
    assert structure_checksum(alg) == pytest.approx(expected)


def test_restriction_is_automorphism():
    for name in ("station3", "avg3", "comp3"):
        rep = verify_restricted_automorphism(fixtures(name))
        assert rep.hom_gap < 1e-10 and rep.adjoint_gap < 1e-10 and rep.bijective
