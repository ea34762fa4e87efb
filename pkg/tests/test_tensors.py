"""Dense tensor kernels against numpy.linalg and einsum references."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gelstep import SingularMatrix
from gelstep.tensors import (
    DET_FLOOR,
    ddot,
    frob,
    mat_det,
    mat_inv_det,
    matmul,
    matvec,
    sym_part,
    transpose,
    triple_dot,
)


def random_batch(d, rng, shape=(4, 5)):
    return rng.standard_normal((d, d) + shape)


@pytest.mark.parametrize("d", [2, 3])
def test_det_matches_lapack(d):
    rng = np.random.default_rng(0)
    M = random_batch(d, rng)
    ref = np.linalg.det(np.moveaxis(M, (0, 1), (-2, -1)))
    np.testing.assert_allclose(mat_det(M), ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_inverse_reconstructs_identity(d):
    rng = np.random.default_rng(1)
    M = random_batch(d, rng) + 3.0 * np.eye(d)[..., None, None]
    inv, det = mat_inv_det(M)
    eye = np.einsum("ij...,jk...->ik...", M, inv)
    target = np.broadcast_to(np.eye(d)[..., None, None], eye.shape)
    np.testing.assert_allclose(eye, target, atol=1e-12)
    np.testing.assert_allclose(det, mat_det(M), rtol=1e-12)


def test_singular_matrix_raises():
    M = np.zeros((2, 2))
    M[0, 0] = 1.0  # rank one, det exactly 0 < DET_FLOOR
    with pytest.raises(SingularMatrix):
        mat_inv_det(M)
    assert DET_FLOOR > 0.0


def test_contractions_match_einsum():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 3, 7))
    B = rng.standard_normal((3, 3, 7))
    G = rng.standard_normal((3, 3, 3, 7))
    H = rng.standard_normal((3, 3, 3, 7))
    v = rng.standard_normal((3, 7))
    np.testing.assert_allclose(ddot(A, B), np.einsum("ij...,ij...->...", A, B))
    np.testing.assert_allclose(
        triple_dot(G, H), np.einsum("ijk...,ijk...->...", G, H)
    )
    np.testing.assert_allclose(
        matmul(A, B), np.einsum("ij...,jk...->ik...", A, B)
    )
    np.testing.assert_allclose(matvec(A, v), np.einsum("ij...,j...->i...", A, v))
    np.testing.assert_allclose(transpose(A), np.swapaxes(A, 0, 1))
    np.testing.assert_allclose(sym_part(A), 0.5 * (A + np.swapaxes(A, 0, 1)))


def test_frob_over_leading_axes():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((2, 2, 6))
    G = rng.standard_normal((2, 2, 2, 6))
    np.testing.assert_allclose(
        frob(M, 2), np.sqrt(np.einsum("ij...,ij...->...", M, M))
    )
    np.testing.assert_allclose(
        frob(G, 3), np.sqrt(np.einsum("ijk...,ijk...->...", G, G))
    )


matrix_entries = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(matrix_entries, min_size=8, max_size=8))
def test_det_is_multiplicative(entries):
    A = np.array(entries[:4]).reshape(2, 2) + 2.0 * np.eye(2)
    B = np.array(entries[4:]).reshape(2, 2) + 2.0 * np.eye(2)
    lhs = float(mat_det(matmul(A, B)))
    rhs = float(mat_det(A) * mat_det(B))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)
