import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirac_hardy.core import Channel, ValidationError, log_grid
from dirac_hardy.hardy import (Attainer, attainer_coulomb_residual, attainer_radial, hardy_constant,
                               hardy_functionals, random_channel_data, verify_sharpness,
                               verify_square_identity)
from dirac_hardy.partial_wave import AngularQuadrature, reconstruct
from dirac_hardy.radial import RadialSpinor


def _grid(a=0.8, n=4000):
    return log_grid(1e-6, 40 / np.sqrt(1 - a * a), n)


def test_attainer_profile_example():
    att = Attainer(0.8)
    assert att.lam == pytest.approx(0.6, abs=1e-15)
    g = log_grid(1e-3, 10.0, 1001)
    u = attainer_radial(att, g)[0]
    i = int(np.argmin(np.abs(g.nodes - 1.0)))
    assert u.f_plus[i].real == pytest.approx(np.exp(-0.6) * g.nodes[i] ** 0.8, rel=1e-14)
    assert abs(np.exp(-0.6) - 0.548812) < 1e-6
    assert np.allclose(np.abs(u.f_minus / u.f_plus), 1 / 3, atol=1e-14)


def test_attainer_validation():
    for a in (1.0, -1.2):
        with pytest.raises(ValidationError):
            Attainer(a)
    with pytest.raises(ValidationError):
        Attainer(0.5, (0, 0))
    with pytest.raises(ValidationError):
        verify_sharpness(1.0)


def test_zero_a_rejected():
    att = object.__new__(Attainer)
    object.__setattr__(att, "a", 0.0)
    object.__setattr__(att, "C", (1, 0))
    object.__setattr__(att, "m", 1.0)
    with pytest.raises(ValidationError):
        attainer_radial(att, _grid())


@pytest.mark.parametrize("a", [0.8, -0.8, 0.3])
def test_attainer_channels_reconstruct_spinor(a):
    att = Attainer(a, (0.4 + 0.3j, -1.1))
    g = log_grid(0.1, 5.0, 32)
    q = AngularQuadrature(6)
    field = reconstruct(attainer_radial(att, g), q.nodes)
    x = g.nodes[:, None, None] * q.nodes[None]
    assert np.allclose(field, att.reconstruction_phase * att.spinor(x), atol=1e-13)


@pytest.mark.parametrize("nu", [0.3, 0.6, 0.9])
@pytest.mark.parametrize("sign", [1, -1])
def test_coulomb_eigen_identity(nu, sign):
    assert attainer_coulomb_residual(nu, sign) <= 1e-6


def test_single_channel_k2_weighting():
    g = log_grid(1e-3, 30.0, 2000)
    r = g.nodes
    u = RadialSpinor(Channel(2, 1), g, r * np.exp(-r), 0.5 * r ** 2 * np.exp(-r))
    rep = hardy_functionals([u], 0.3)
    assert rep.mid == pytest.approx(4 * rep.lhs, rel=1e-14)


@pytest.mark.parametrize("a", [0.8, -0.8, 0.3, -0.3])
def test_sharpness_ratio(a):
    res = verify_sharpness(a)
    assert abs(res.ratio / hardy_constant(a) - 1) <= 1e-5


def test_sharpness_zero_a_sequence():
    res = verify_sharpness(0.0)
    assert len(res.differences) == 5
    for d, l in zip(res.differences, res.lhs_truncated):
        assert abs(d) <= 1e-12 * l
    # lhs itself diverges like log(1/eps), so the vanishing difference is not trivial
    assert res.lhs_truncated[-1] > res.lhs_truncated[0] + 15


def test_zero_input():
    g = log_grid(1e-3, 10.0, 200)
    z = np.zeros(200)
    assert verify_square_identity([RadialSpinor(Channel(-1, 1), g, z, z)], 0.5) == (0.0, 0.0)


@pytest.mark.parametrize("a", [-0.8, 0.0, 0.5])
def test_random_chain_and_square_identity(a):
    rng = np.random.default_rng(100)
    g = log_grid(1e-3, 200.0, 3000)
    for _ in range(30):
        chans = random_channel_data(rng, g, kmax=3)
        rep = hardy_functionals(chans, a)
        assert rep.holds(1e-8)
        assert rep.slack_lhs >= rep.slack_mid - 1e-8
        slack, square = verify_square_identity(chans, a)
        assert abs(slack - square) <= 1e-6 * abs(square)


def test_attainer_square_remainder_vanishes():
    for a in (0.8, -0.5):
        chans = attainer_radial(Attainer(a), _grid(a))
        slack, square = verify_square_identity(chans, a)
        norm = sum(u.norm2() for u in chans)
        assert abs(slack) <= 1e-8 * norm and abs(square) <= 1e-8 * norm


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_scaling_covariance(t):
    g = _grid(0.6, 2000)
    base = hardy_functionals(attainer_radial(Attainer(0.6, (1.0, 0.5j)), g), 0.6)
    scaled = hardy_functionals(attainer_radial(Attainer(0.6, (t, 0.5j * t)), g), 0.6)
    s = abs(t) ** 2
    for x, y in ((base.lhs, scaled.lhs), (base.mid, scaled.mid), (base.rhs, scaled.rhs)):
        assert y == pytest.approx(s * x, rel=1e-12)
    assert scaled.rhs / scaled.lhs == pytest.approx(base.rhs / base.lhs, rel=1e-12)


def test_attainer_exclusivity():
    a = 0.8
    g = _grid(a)
    chans = attainer_radial(Attainer(a), g)
    r = g.nodes
    bumpy = np.exp(-((r - 2) ** 2)) * r
    gaps = []
    for eps in (1e-2, 2e-2, 4e-2):
        extra = RadialSpinor(Channel(-2, 1), g, eps * bumpy, 0.5 * eps * bumpy)
        rep = hardy_functionals(chans + [extra], a)
        gaps.append(rep.slack_lhs / extra.norm2())
    base = hardy_functionals(chans, a).slack_lhs
    assert abs(base) <= 1e-8
    assert all(gap > 0 for gap in gaps)
    # the excess grows with the square of the perturbation
    assert gaps == pytest.approx([gaps[0]] * 3, rel=1e-3)


def test_non_finite_rejected():
    g = log_grid(1e-3, 10.0, 200)
    bad = np.full(200, np.nan)
    with pytest.raises(FloatingPointError):
        hardy_functionals([RadialSpinor(Channel(-1, 1), g, bad, bad)], 0.1)
