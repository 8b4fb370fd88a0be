import numpy as np
import pytest

from dirac_hardy.core import Channel, ValidationError, log_grid
from dirac_hardy.birman_schwinger import (FundamentalSolution, ResolventKernel, bs_grid, bs_matrix,
                                          bs_scan, fundamental_solution_residual,
                                          gaussian_convolution_check, multiplicity_at)
from dirac_hardy.radial import RadialOperator, RadialSpinor, apply_radial_dirac
from dirac_hardy.spectrum import sommerfeld


def coulomb_v(nu):
    return lambda r: -nu / r


@pytest.mark.parametrize("a", [0.0, 0.5, -0.7])
def test_fundamental_solution_residual(a):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(50, 3))
    x *= rng.uniform(0.3, 3.0, size=(50, 1)) / np.linalg.norm(x, axis=1, keepdims=True)
    assert np.max(fundamental_solution_residual(FundamentalSolution(a), x)) <= 1e-5


def test_fundamental_solution_validation():
    with pytest.raises(ValidationError):
        FundamentalSolution(1.0)


def test_gaussian_convolution():
    assert gaussian_convolution_check(FundamentalSolution(0.5)) <= 0.05


@pytest.mark.parametrize("k", [-1, 1, -2, 3])
def test_kernel_jump_and_wronskian(k):
    kern = ResolventKernel(k, 0.6)
    r = np.geomspace(1e-3, 30, 17)
    assert np.allclose(kern.jump(r), np.eye(2), atol=1e-10)


def test_decaying_closed_form_k_minus_one():
    a = 0.6
    kern = ResolventKernel(-1, a)
    lam = 0.8
    r = np.geomspace(1e-3, 50, 40)
    x = lam * r
    u = kern.decaying(r, scaled=True)
    assert np.allclose(u[0], np.pi / (2 * lam), rtol=1e-8)
    assert np.allclose(u[1], -np.pi / 2 * (1 + 1 / x) / (1 + a), rtol=1e-8)
    # log slope of the unscaled solution tends to -lam
    big = np.array([200.0, 200.001])
    d = np.log(np.abs(kern.decaying(big, scaled=False)[0]))
    assert (d[1] - d[0]) / 0.001 == pytest.approx(-lam, rel=1e-6)


def test_free_solutions_solve_homogeneous_equation():
    for k in (-1, 2):
        kern = ResolventKernel(k, -0.3)
        g = log_grid(1e-2, 20.0, 4000)
        for u in (kern.regular(g.nodes, scaled=False), kern.decaying(g.nodes, scaled=False)):
            s = RadialSpinor(Channel(k, 1), g, u[0], u[1])
            img = apply_radial_dirac(RadialOperator(k, None, 1.0, -0.3), s)
            scale = np.max(np.abs(u), axis=0)
            sl = slice(10, -10)
            assert np.max(np.abs(img.components()[:, sl]) / scale[sl]) <= 1e-5


def test_kernel_symmetry():
    kern = ResolventKernel(-2, 0.4)
    r = np.array([0.3, 1.1, 4.0])
    G = kern(r[:, None], r[None, :])
    assert np.allclose(G, np.swapaxes(G, 0, 1).transpose(0, 1, 3, 2), atol=1e-14)


def test_resolvent_identity():
    k, a = -1, 0.5
    kern = ResolventKernel(k, a)
    g = log_grid(1e-6, 40.0, 4000)
    r = g.nodes
    prof = np.exp(-(r - 3) ** 2)
    f = RadialSpinor(Channel(k, 1), g, r * prof, 0.5j * r ** 2 * prof)
    tf = apply_radial_dirac(RadialOperator(k, None, 1.0, a), f)
    back = kern.apply(tf)
    err = np.max(np.abs(back.components() - f.components())) / np.max(np.abs(f.components()))
    assert err <= 1e-6


def test_apply_rejects_long_grid():
    kern = ResolventKernel(-1, 0.0)
    g = log_grid(1e-3, 1000.0, 100)
    z = np.zeros(100)
    with pytest.raises(ValidationError):
        kern.apply(RadialSpinor(Channel(-1, 1), g, z, z))


def test_zero_potential_matrix():
    grid = bs_grid([0.9], n=60)
    K = bs_matrix(lambda r: np.zeros_like(r), -1, 0.9, grid).entries
    assert not np.any(K)


def test_eigenvalue_minus_one_at_ground_state():
    a = np.sqrt(0.75)
    grid = bs_grid([a])
    M = bs_matrix(coulomb_v(0.5), -1, a, grid)
    assert abs(M.nearest_to_minus_one() + 1) <= 1e-4
    alg, geo = multiplicity_at(coulomb_v(0.5), -1, a, grid)
    assert alg == 1


def test_no_eigenvalue_at_non_eigenvalue():
    grid = bs_grid([0.5])
    M = bs_matrix(coulomb_v(0.5), -1, 0.5, grid)
    assert abs(M.nearest_to_minus_one() + 1) > 0.05


def test_symmetric_variant_has_same_spectrum():
    grid = bs_grid([0.7], n=120)
    e1 = np.sort_complex(bs_matrix(coulomb_v(0.5), -1, 0.7, grid).eigenvalues())
    e2 = np.sort_complex(bs_matrix(coulomb_v(0.5), -1, 0.7, grid, symmetric=True).eigenvalues())
    big = np.abs(e1) > 1e-6
    assert np.allclose(e1[big], e2[big], rtol=1e-7, atol=1e-9)


def test_norm_bounded_under_refinement():
    norms = []
    for n in (200, 400):
        grid = bs_grid([0.7], n=n)
        norms.append(bs_matrix(coulomb_v(0.5), -1, 0.7, grid).singular_norm())
    assert abs(norms[1] - norms[0]) <= 1e-2 * norms[0]


def test_scan_crossings_match_sommerfeld():
    a_values = np.linspace(0.8, 0.975, 15)
    rep = bs_scan(coulomb_v(0.5), -1, a_values, n=300)
    found = [c.a for c in rep.crossings]
    ref = [sommerfeld(0.5, -1, n) for n in range(2)]
    assert len(found) == 2
    assert np.max(np.abs(np.array(found) - ref)) <= 1e-3
    assert all(c.agree and c.channel_multiplicity == 2 for c in rep.crossings)


def test_strong_coupling_crossing():
    a0 = np.sqrt(1 - 0.81)
    rep = bs_scan(coulomb_v(0.9), -1, [a0 - 0.02, a0 + 0.02], n=300)
    assert len(rep.crossings) == 1
    assert abs(rep.crossings[0].a - a0) <= 1e-3


def test_empty_scan():
    rep = bs_scan(coulomb_v(0.5), -1, [])
    assert rep.a_values == () and rep.crossings == ()
