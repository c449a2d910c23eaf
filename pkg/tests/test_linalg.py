import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hplab.errors import ConvergenceFailure, NegativeEigenvalue
from hplab.linalg import (
    dagger,
    det_and_trace,
    eigh,
    hermitian_part,
    hp_coefficient,
    is_hermitian,
    psd_inv_sqrt,
    psd_sqrt,
)

from conftest import random_hermitian


def test_hermitian_part_examples(rng):
    assert np.array_equal(hermitian_part(np.eye(3)), np.eye(3))
    out = hermitian_part(np.array([[0, 2], [0, 0]]))
    assert np.array_equal(out, np.array([[0, 1], [1, 0]]))
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = hermitian_part(A)
    # independent conjugate transpose
    manual = np.array([[np.conj(H[j, i]) for j in range(3)] for i in range(3)])
    assert np.max(np.abs(H - manual)) == 0.0


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (2, 4, 4), elements=finite))
def test_hermitian_part_exact_property(parts):
    H = hermitian_part(parts[0] + 1j * parts[1])
    assert is_hermitian(H)


def test_eigh_examples():
    w, U = eigh(np.eye(2))
    assert np.allclose(w, [1, 1])
    assert np.allclose(U @ dagger(U), np.eye(2))
    w, _ = eigh(np.diag([3.0, 1.0]))
    assert np.allclose(w, [1, 3])
    w, _ = eigh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(w, [-1, 1])


def test_eigh_reconstructs_and_batches(rng):
    H = np.stack([random_hermitian(rng, 4) for _ in range(5)])
    w, U = eigh(H)
    assert np.all(np.diff(w, axis=-1) >= 0)
    assert np.allclose((U * w[..., None, :]) @ dagger(U), H, atol=1e-12)


def test_eigh_failure_is_mapped(monkeypatch):
    def boom(_):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(np.linalg, "eigh", boom)
    with pytest.raises(ConvergenceFailure):
        eigh(np.eye(2))


def test_psd_sqrt_examples():
    assert np.allclose(psd_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    assert np.allclose(hp_coefficient(np.zeros((3, 3))), np.eye(3) / np.sqrt(2))
    with pytest.raises(NegativeEigenvalue):
        psd_sqrt(np.diag([1.0, -0.5]))


def test_psd_sqrt_squares_back(rng):
    A = random_hermitian(rng, 4)
    P = A @ A
    R = psd_sqrt(P)
    assert is_hermitian(R)
    assert np.allclose(R @ R, P, atol=1e-10)
    Q = P + np.eye(4)
    assert np.allclose(psd_inv_sqrt(Q) @ psd_sqrt(Q), np.eye(4), atol=1e-10)


def test_hp_coefficient_matches_definition(rng):
    X = random_hermitian(rng, 3)
    S = hp_coefficient(X)
    assert np.allclose(S @ S, (np.eye(3) + X @ X) / 2, atol=1e-12)
    assert np.allclose(hp_coefficient(X, inverse=True) @ S, np.eye(3), atol=1e-12)


def _cofactor_det(A):
    n = A.shape[0]
    total = 0
    for perm in itertools.permutations(range(n)):
        sign = np.linalg.det(np.eye(n)[list(perm)])
        total += sign * np.prod([A[i, perm[i]] for i in range(n)])
    return total


def test_det_and_trace_examples(rng):
    d, t = det_and_trace(np.eye(3))
    assert d == pytest.approx(1) and t == 3
    d, t = det_and_trace(np.diag([2, 3j]))
    assert d == pytest.approx(6j) and t == pytest.approx(2 + 3j)
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    d, _ = det_and_trace(A)
    ref = _cofactor_det(A)
    assert abs(d - ref) <= 1e-10 * abs(ref)


def test_non_square_rejected():
    with pytest.raises(ValueError):
        hermitian_part(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        det_and_trace(np.zeros((2, 3)))
