import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirac_hardy.core import Channel, ValidationError, log_grid
from dirac_hardy.hardy import Attainer, attainer_radial, bump
from dirac_hardy.radial import (IntegrationError, RadialOperator, RadialSpinor, apply_radial_dirac,
                                coefficient_matrix, integrate_system, interior, radial_residual)
from dirac_hardy.spectrum import coulomb, frobenius_angle


def _coulomb_attainer_residual(nu, n):
    a = np.sqrt(1 - nu * nu)
    att = Attainer(a)
    g = log_grid(1e-6, 40 / att.lam, n)
    u = attainer_radial(att, g)[0]
    return radial_residual(RadialOperator(-1, coulomb(nu), 1.0, a), u)


@pytest.mark.parametrize("nu", [0.3, 0.6, 0.9])
def test_attainer_residual_pins_convention(nu):
    assert _coulomb_attainer_residual(nu, 4000) <= 1e-6


def test_fourth_order_convergence():
    prev = _coulomb_attainer_residual(0.6, 250)
    for n in (500, 1000):
        cur = _coulomb_attainer_residual(0.6, n)
        assert prev / cur >= 8
        prev = cur


def test_free_exponential_example():
    g = log_grid(1e-2, 30.0, 3000)
    r = g.nodes
    u = RadialSpinor(Channel(1, 1), g, np.exp(-r), np.zeros_like(r))
    out = apply_radial_dirac(RadialOperator(1, None, 1.0, 0.0), u)
    sl = interior(len(g))
    assert np.allclose(out.f_plus, np.exp(-r), atol=1e-12)
    assert np.max(np.abs(out.f_minus[sl] - (-1 + 1 / r[sl]) * np.exp(-r[sl]))) <= 1e-8


def test_zero_in_zero_out():
    g = log_grid(1e-3, 10.0, 200)
    z = np.zeros(len(g))
    out = apply_radial_dirac(RadialOperator(-2, coulomb(0.4), 1.0, 0.1), RadialSpinor(Channel(-2, 1), g, z, z))
    assert np.all(out.components() == 0)


def test_grid_mismatch():
    g1, g2 = log_grid(1e-3, 10.0, 200), log_grid(1e-3, 11.0, 200)
    u = RadialSpinor(Channel(1, 1), g1, np.ones(200), np.ones(200))
    with pytest.raises(ValidationError):
        apply_radial_dirac(RadialOperator(1), u, g2)
    with pytest.raises(ValidationError):
        u + RadialSpinor(Channel(1, 1), g2, np.ones(200), np.ones(200))
    with pytest.raises(ValidationError):
        RadialSpinor(Channel(1, 1), g1, np.ones(5), np.ones(200))


def _smooth(rng, g, k):
    r = g.nodes
    lo = rng.uniform(0.2, 1.0)
    b = bump(r, lo, lo * rng.uniform(3, 8))
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    return RadialSpinor(Channel(k, 1), g, b * (c[0] + c[1] * r), b * (c[2] + c[3] * r * r))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([-3, -1, 1, 2]),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_linearity(seed, k, alpha):
    rng = np.random.default_rng(seed)
    g = log_grid(1e-3, 20.0, 600)
    u, w = _smooth(rng, g, k), _smooth(rng, g, k)
    op = RadialOperator(k, coulomb(0.3), 1.0, 0.2)
    lhs = apply_radial_dirac(op, u.scaled(alpha) + w)
    rhs = apply_radial_dirac(op, u).scaled(alpha) + apply_radial_dirac(op, w)
    scale = np.max(np.abs(lhs.components())) + 1
    assert np.max(np.abs(lhs.components() - rhs.components())) <= 1e-12 * scale


@pytest.mark.parametrize("k", [-2, -1, 1, 3])
def test_formal_symmetry(k):
    rng = np.random.default_rng(abs(k))
    g = log_grid(1e-3, 40.0, 6000)
    u, w = _smooth(rng, g, k), _smooth(rng, g, k)
    op = RadialOperator(k, coulomb(0.5), 1.0, 0.3)
    Tu, Tw = apply_radial_dirac(op, u), apply_radial_dirac(op, w)

    def inner(p, q):
        return g.integrate(np.conj(p.f_plus) * q.f_plus + np.conj(p.f_minus) * q.f_minus)

    a, b = inner(Tu, w), inner(u, Tw)
    assert abs(a - b) <= 1e-7 * max(abs(a), 1)


def test_integrate_scalar_exponential():
    sol = integrate_system(lambda r: -np.eye(2), 0.1, 5.0, [1.0, 0.0], tol=1e-12, log_variable=False)
    assert abs(sol.y[0, -1] / np.exp(-4.9) - 1) <= 1e-9


def test_integrate_inward_closed_form_free():
    # k = -1, v = 0: decaying solution (e^{-lam r}, -lam/(m+a) e^{-lam r}(1 + 1/(lam r)))
    m, a = 1.0, 0.5
    lam = np.sqrt(m * m - a * a)

    def exact(r):
        return np.array([np.exp(-lam * r), -lam / (m + a) * np.exp(-lam * r) * (1 + 1 / (lam * r))])

    sol = integrate_system(coefficient_matrix(-1, a, m), 40.0, 1.0, exact(40.0), tol=1e-12)
    assert np.max(np.abs(sol.y[:, -1] / exact(1.0) - 1)) <= 1e-8


def test_integrate_frobenius_exponent():
    nu, k, a = 0.5, -1, 0.3
    gamma = np.sqrt(k * k - nu * nu)
    th = frobenius_angle(k, nu)
    r0 = 1e-4
    rs = [1e-3 * 0.999, 1e-3 * 1.001, 2e-3 * 0.999, 2e-3 * 1.001]
    sol = integrate_system(coefficient_matrix(k, a, 1.0, coulomb(nu)), r0, 3e-3,
                           np.array([np.cos(th), np.sin(th)]) * r0 ** gamma, tol=1e-12, samples=rs)
    f = np.log(np.abs(sol.y[0]))
    s1 = (f[1] - f[0]) / np.log(1.001 / 0.999)
    s2 = (f[3] - f[2]) / np.log(1.001 / 0.999)
    # log-slope is gamma + c r + O(r^2); cancel the linear term from two radii
    assert abs(2 * s1 - s2 - gamma) <= 1e-4


def test_integrate_failure_reports_radius():
    # y' = y/(1 - r)^2 blows up like exp(1/(1 - r)) as r -> 1
    def rhs(r):
        return np.array([[1 / (1.0 - r) ** 2, 0.0], [0.0, 1.0]])

    with np.errstate(all="ignore"), pytest.raises(IntegrationError) as exc:
        integrate_system(rhs, 0.5, 2.0, [1.0, 1.0], log_variable=False)
    assert 0.9 < exc.value.radius < 1.0


def test_integrate_validation():
    with pytest.raises(ValidationError):
        integrate_system(lambda r: np.eye(2), 0.0, 1.0, [1, 0])
