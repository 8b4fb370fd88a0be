import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirac_hardy.core import (Channel, PhysicalParams, ValidationError, channels_up_to, check_hermitian,
                              dirac_matrices, jacobi_eigh, log_grid, loglin_grid, operator_norm_herm4,
                              random_unitary)


def test_pauli_product():
    _, _, s = dirac_matrices()
    assert np.allclose(s[0] @ s[1], 1j * s[2], atol=0)


def test_anticommutation_relations():
    alpha, beta, _ = dirac_matrices()
    I = np.eye(4)
    for j in range(3):
        assert np.max(np.abs(alpha[j] @ beta + beta @ alpha[j])) <= 1e-15
        for l in range(3):
            ac = alpha[j] @ alpha[l] + alpha[l] @ alpha[j]
            assert np.max(np.abs(ac - 2 * (j == l) * I)) <= 1e-15
    assert np.max(np.abs(beta @ beta - I)) <= 1e-15
    assert np.max(np.abs(alpha[0] @ alpha[0] - I)) == 0


def test_matrices_read_only():
    alpha, _, _ = dirac_matrices()
    with pytest.raises(ValueError):
        alpha[0, 0, 0] = 5


def test_operator_norm_examples():
    assert operator_norm_herm4(np.eye(4)) == pytest.approx(1.0, abs=1e-14)
    assert operator_norm_herm4(np.diag([2.0, -3.0, 1.0, 0.0])) == pytest.approx(3.0, abs=1e-14)


def test_operator_norm_rejects_non_hermitian():
    M = np.zeros((4, 4))
    M[0, 1] = 1.0
    with pytest.raises(ValidationError):
        operator_norm_herm4(M)
    with pytest.raises(ValidationError):
        check_hermitian(np.zeros((3, 4)))


def _random_herm(rng, n=4):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return z + z.conj().T


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = _random_herm(rng)
        w, U = jacobi_eigh(M)
        assert np.allclose(w, np.linalg.eigvalsh(M), atol=1e-12)
        assert np.allclose(U.conj().T @ U, np.eye(4), atol=1e-12)
        assert np.allclose(M @ U, U * w, atol=1e-11)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_norm_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    M = _random_herm(rng)
    U = random_unitary(4, rng)
    assert abs(operator_norm_herm4(U.conj().T @ M @ U) - operator_norm_herm4(M)) <= 1e-10


def test_channel_validation():
    assert Channel(-1, 1).j == 0.5
    assert Channel(3, -5).mj == -2.5
    for bad in [(0, 1), (1, 2), (1, 3), (-2, 5)]:
        with pytest.raises(ValidationError):
            Channel(*bad)


def test_channels_up_to_count():
    # 2 signs times 2|k| projections per |k|
    assert len(channels_up_to(3)) == sum(4 * k for k in (1, 2, 3))


def test_physical_params_ranges():
    PhysicalParams(0.5, 0.3)
    for nu, a in [(1.0, 0.0), (0.5, 1.0), (0.0, 0.0), (0.5, -1.2)]:
        with pytest.raises(ValidationError):
            PhysicalParams(nu, a)


def test_log_grid_gamma_example():
    g = log_grid(1e-6, 60.0, 4000)
    r = g.nodes
    val = g.integrate(np.exp(-2 * r) * r)
    assert abs(val / 0.25 - 1) <= 1e-8


def test_log_grid_constant():
    g = log_grid(1.0, 2.0, 4000)
    assert abs(g.integrate(np.ones(4000)) - 1.0) <= 1e-10
    assert abs(np.sum(g.weights) - (g.r_max - g.r_min)) <= 1e-10


def test_log_grid_errors():
    with pytest.raises(ValidationError):
        log_grid(2.0, 1.0, 100)
    with pytest.raises(ValidationError):
        log_grid(1.0, 1.0, 100)
    with pytest.raises(ValidationError):
        log_grid(1e-3, 1.0, 15)


@pytest.mark.parametrize("lam", [0.3, 0.6, 1.0])
@pytest.mark.parametrize("s", [0.0, 0.5, 1.8])
def test_gamma_integral_oracle(lam, s):
    exact = math.gamma(s + 1) / (2 * lam) ** (s + 1)
    g = log_grid(1e-12, 40.0 / lam, 4000)
    r = g.nodes
    assert abs(g.integrate(np.exp(-2 * lam * r) * r ** s) / exact - 1) <= 1e-7


def test_loglin_grid_quadrature():
    g = loglin_grid(1e-8, 80.0, 1500, scale=5.0)
    r = g.nodes
    assert np.all(np.diff(r) > 0)
    assert abs(g.integrate(np.exp(-r) * r ** 2) / 2.0 - 1) <= 1e-8
