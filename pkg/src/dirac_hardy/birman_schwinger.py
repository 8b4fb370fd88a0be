"""Free resolvent of H0 - a, in 3D and per channel, and the Birman-Schwinger operator.

The channel kernel is built from the free solutions of (T_k - a) u = 0,

    k < 0, l = -k - 1:  u_reg = (r i_l(lam r),  lam r i_{l+1}(lam r)/(m + a))
                        u_dec = (r k_l(lam r), -lam r k_{l+1}(lam r)/(m + a))
    k > 0, l = k:       same with order l - 1 in the lower component,

with i_l, k_l the modified spherical Bessel functions. Both are stored with the
exponential factor stripped (``e^{-lam r}`` for u_reg, ``e^{+lam r}`` for u_dec) so
that products over any range of r stay finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ive, kve

from .core import (RadialGrid, ValidationError, _gregory_weights, alpha_dot, decay_rate,
                   dirac_matrices, loglin_grid)
from .radial import RadialSpinor

BS_NODES = 400
BS_R_MIN = 1e-6
BS_DECAY_LENGTHS = 30.0
BS_SCALE = 6.0


# ---------------------------------------------------------------------------
# 3D fundamental solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FundamentalSolution:
    a: float
    m: float = 1.0

    def __post_init__(self):
        if not self.m > 0 or not abs(self.a) < self.m:
            raise ValidationError(f"need m > 0 and |a| < m, got a={self.a}, m={self.m}")

    @property
    def lam(self) -> float:
        return decay_rate(self.a, self.m)


def fundamental_solution_eval(fs: FundamentalSolution, x) -> np.ndarray:
    """phi^a(x) = e^{-lam|x|}/(4 pi |x|) (a + m beta + (1 + lam|x|) i alpha.x/|x|^2).

    ``x`` has shape (..., 3); returns (..., 4, 4).
    """
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValidationError("the fundamental solution is singular at x = 0")
    _, beta, _ = dirac_matrices()
    lam = fs.lam
    pref = (np.exp(-lam * r) / (4 * np.pi * r))[..., None, None]
    scal = (fs.a * np.eye(4) + fs.m * beta).astype(complex)
    ax = alpha_dot(x / (r * r)[..., None])
    return pref * (scal + 1j * (1 + lam * r)[..., None, None] * ax)


def apply_free_dirac_fd(field: Callable[[np.ndarray], np.ndarray], x, a: float, m: float = 1.0,
                        step: float = 1e-3):
    """(H0 - a) applied to a field by 4th-order central differences.

    ``field`` maps points (..., 3) to spinors (..., 4) or matrices (..., 4, c) whose
    columns are spinors. Returns the result and the pointwise magnitude
    |alpha.grad field| + |(m beta - a) field| used for relative residuals.
    """
    alpha, beta, _ = dirac_matrices()
    x = np.asarray(x, dtype=float)

    def cols(y):
        f = np.asarray(field(y), dtype=complex)
        return f[..., None] if f.ndim == y.ndim else f

    grad_term = 0
    for d in range(3):
        e = np.zeros(3)
        e[d] = step
        g = (-cols(x + 2 * e) + 8 * cols(x + e) - 8 * cols(x - e) + cols(x - 2 * e)) / (12 * step)
        grad_term = grad_term + np.einsum("ab,...bc->...ac", alpha[d], g)
    mass_term = np.einsum("ab,...bc->...ac", m * beta - a * np.eye(4), cols(x))
    out = -1j * grad_term + mass_term
    scale = _norm(grad_term) + _norm(mass_term)
    if np.asarray(field(x)).ndim == x.ndim:
        out = out[..., 0]
    return out, scale


def _norm(f):
    return np.sqrt(np.sum(np.abs(f) ** 2, axis=(-2, -1)))


def fundamental_solution_residual(fs: FundamentalSolution, points, step: float = 1e-3) -> np.ndarray:
    """Relative finite-difference residual of (H0 - a) phi^a at each point (matrix columns pooled)."""
    res, scale = apply_free_dirac_fd(lambda y: fundamental_solution_eval(fs, y), points, fs.a, fs.m, step)
    return _norm(res) / scale


def gaussian_convolution_check(fs: FundamentalSolution, center=(0.3, -0.2, 0.5), width: float = 0.2,
                               spinor=(1.0, 0.5j, -0.25, 0.75), step: float | None = None,
                               n_radial: int = 48, degree: int = 36) -> float:
    """Relative error of (H0 - a)(phi^a * g)(center) against g(center) for a Gaussian g.

    The convolution is evaluated in spherical coordinates about each evaluation
    point, which absorbs the 1/|x|^2 singularity into the Jacobian; the outer
    derivative is a 4th-order central difference.
    """
    from .partial_wave import AngularQuadrature

    c = np.asarray(center, dtype=float)
    s = np.asarray(spinor, dtype=complex)
    h = width / 4 if step is None else step
    quad = AngularQuadrature(degree)
    reach = 9 * width + 4 * h
    t, wt = np.polynomial.legendre.leggauss(n_radial)
    rr = 0.5 * reach * (t + 1)
    wr = 0.5 * reach * wt
    z = rr[:, None, None] * quad.nodes[None]  # (R, M, 3)
    kern = fundamental_solution_eval(fs, z)  # (R, M, 4, 4)
    w = (wr * rr ** 2)[:, None] * quad.weights[None, :]

    def conv(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 3)
        out = np.empty((len(flat), 4), dtype=complex)
        for i, p in enumerate(flat):
            d = p[None, None, :] - z - c
            g = np.exp(-np.sum(d * d, axis=-1) / (2 * width ** 2))
            out[i] = np.einsum("rm,rmab,b->a", w * g, kern, s)
        return out.reshape(x.shape[:-1] + (4,))

    res, _ = apply_free_dirac_fd(conv, c, fs.a, fs.m, h)
    return float(np.linalg.norm(res - s) / np.linalg.norm(s))


# ---------------------------------------------------------------------------
# Channel resolvent
# ---------------------------------------------------------------------------

def _i_scaled(l: int, x):
    return np.sqrt(np.pi / (2 * x)) * ive(l + 0.5, x)


def _k_scaled(l: int, x):
    return np.sqrt(np.pi / (2 * x)) * kve(l + 0.5, x)


@dataclass(frozen=True)
class ResolventKernel:
    """G_k(a; r, r') with (T_k - a) G g = g; evaluate via ``__call__`` or ``matrix``."""

    k: int
    a: float
    m: float = 1.0

    def __post_init__(self):
        if self.k == 0 or int(self.k) != self.k:
            raise ValidationError("k must be a nonzero integer")
        if not abs(self.a) < self.m:
            raise ValidationError(f"|a| < m required, got a={self.a}")

    @property
    def lam(self) -> float:
        return decay_rate(self.a, self.m)

    def _orders(self):
        if self.k < 0:
            l = -self.k - 1
            return l, l + 1
        return self.k, self.k - 1

    def regular(self, r, scaled: bool = True) -> np.ndarray:
        """u_reg at r, shape (2, len(r)); ``scaled`` drops the factor e^{lam r}."""
        r = np.asarray(r, dtype=float)
        l, lo = self._orders()
        x = self.lam * r
        u = np.array([r * _i_scaled(l, x), x * _i_scaled(lo, x) / (self.m + self.a)])
        return u if scaled else u * np.exp(x)

    def decaying(self, r, scaled: bool = True) -> np.ndarray:
        """u_dec at r, shape (2, len(r)); ``scaled`` drops the factor e^{-lam r}."""
        r = np.asarray(r, dtype=float)
        l, lo = self._orders()
        x = self.lam * r
        u = np.array([r * _k_scaled(l, x), -x * _k_scaled(lo, x) / (self.m + self.a)])
        return u if scaled else u * np.exp(-x)

    @property
    def wronskian(self) -> float:
        """u_dec+ u_reg- - u_reg+ u_dec-, constant in r."""
        r = np.array([1.0 / self.lam])
        d, g = self.decaying(r), self.regular(r)
        w = float(d[0, 0] * g[1, 0] - g[0, 0] * d[1, 0])
        if not np.isfinite(w) or abs(w) < 1e-300:
            raise ValidationError(f"degenerate Wronskian at a={self.a}")
        return w

    def __call__(self, r, rp) -> np.ndarray:
        """2x2 blocks G(r, r'), broadcasting r against r'; shape (..., 2, 2).

        On the diagonal r = r' the mean of the two one-sided limits is returned.
        """
        r, rp = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(rp, dtype=float))
        W = self.wronskian
        dr, gr = self.decaying(r), self.regular(r)
        dp, gp = self.decaying(rp), self.regular(rp)
        upper = np.einsum("a...,b...->...ab", dr, gp)  # r > r'
        lower = np.einsum("a...,b...->...ab", gr, dp)  # r < r'
        fac = np.exp(-self.lam * np.abs(r - rp))[..., None, None]
        out = np.where((r > rp)[..., None, None], upper, lower)
        out = np.where((r == rp)[..., None, None], 0.5 * (upper + lower), out)
        return fac * out / W

    def jump(self, r) -> np.ndarray:
        """D (G(r+, r) - G(r-, r)) with D = ((0, -1), (1, 0)); equals I."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        W = self.wronskian
        d, g = self.decaying(r), self.regular(r)
        diff = (np.einsum("a...,b...->...ab", d, g) - np.einsum("a...,b...->...ab", g, d)) / W
        D = np.array([[0.0, -1.0], [1.0, 0.0]])
        return np.einsum("ab,...bc->...ac", D, diff)

    def matrix(self, grid: RadialGrid) -> np.ndarray:
        """G at all node pairs as a (2n, 2n) array, node-major: index 2 i + s."""
        r = grid.nodes
        n = len(r)
        G = self(r[:, None], r[None, :])  # (n, n, 2, 2)
        return G.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)

    def apply(self, g: RadialSpinor) -> RadialSpinor:
        """(G g)(r) = int G(r, r') g(r') dr' by cumulative quadrature on g's grid."""
        grid = g.grid
        r = grid.nodes
        if self.lam * grid.r_max > 600:
            raise ValidationError("grid too long for unscaled cumulative quadrature")
        from scipy.integrate import cumulative_simpson

        W = self.wronskian
        reg = self.regular(r, scaled=False)
        dec = self.decaying(r, scaled=False)
        comps = g.components()
        # integrals in the log variable, where the grid is uniform
        t = np.log(r)

        def cum(y):
            return (cumulative_simpson(y.real, x=t, initial=0)
                    + 1j * cumulative_simpson(y.imag, x=t, initial=0))

        left = cum(r * np.sum(reg * comps, axis=0))
        right_full = cum(r * np.sum(dec * comps, axis=0))
        right = right_full[-1] - right_full
        out = (dec * left + reg * right) / W
        return RadialSpinor(g.channel, grid, out[0], out[1])


def resolvent_kernel(k: int, a: float, m: float = 1.0) -> ResolventKernel:
    return ResolventKernel(k, a, m)


# ---------------------------------------------------------------------------
# Birman-Schwinger matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BSMatrix:
    k: int
    a: float
    grid: RadialGrid
    entries: np.ndarray
    symmetric: bool = False

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.entries)

    def nearest_to_minus_one(self) -> complex:
        ev = self.eigenvalues()
        return complex(ev[np.argmin(np.abs(ev + 1))])

    def singular_norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))


def bs_grid(a_values: Sequence[float], m: float = 1.0, n: int = BS_NODES, r_min: float = BS_R_MIN,
            decay_lengths: float = BS_DECAY_LENGTHS, scale: float = BS_SCALE) -> RadialGrid:
    """Log-linear grid long enough for the slowest decay rate among ``a_values``."""
    lam = min(decay_rate(a, m) for a in a_values)
    return loglin_grid(r_min, decay_lengths / lam, n, scale)


def _potential_blocks(V, r) -> np.ndarray:
    vals = np.asarray(V(r))
    if vals.shape == r.shape:
        return vals[:, None, None] * np.eye(2, dtype=vals.dtype)
    if vals.shape == r.shape + (2, 2):
        return vals
    raise ValidationError("V must return shape (n,) or (n, 2, 2) on the grid")


def _piece_weights(length: int) -> np.ndarray:
    # Gregory-corrected trapezoid on ``length`` equispaced nodes (unit spacing).
    if length == 1:
        return np.zeros(1)
    w = np.ones(length)
    if length >= 8:
        head = np.array([3 / 8, 7 / 6, 23 / 24])
        w[:3] = head
        w[-3:] = head[::-1]
    else:
        w[0] = w[-1] = 0.5
    return w


@lru_cache(maxsize=16)
def _split_weights(n: int):
    """Row-wise weights integrating over [r_0, r_i] and [r_i, r_n] separately.

    Returns the off-diagonal weight matrix and the weights multiplying the left
    and right limits of the kernel on the diagonal, in units of the uniform
    spacing. Splitting at the diagonal keeps the jump of G out of every piece.
    """
    Wm = np.zeros((n, n))
    wl = np.zeros(n)
    wr = np.zeros(n)
    for i in range(n):
        left = _piece_weights(i + 1)
        right = _piece_weights(n - i)
        Wm[i, : i + 1] += left
        Wm[i, i:] += right
        wl[i], wr[i] = left[-1], right[0]
        Wm[i, i] = 0.0
    for arr in (Wm, wl, wr):
        arr.setflags(write=False)
    return Wm, wl, wr


def _kernel_blocks(kern: ResolventKernel, grid: RadialGrid):
    """Quadrature-weighted kernel blocks w_ij G(r_i, r_j), shape (n, n, 2, 2)."""
    r = grid.nodes
    n = len(r)
    Wd = kern.wronskian
    d, g = kern.decaying(r), kern.regular(r)
    fac = np.exp(-kern.lam * np.abs(r[:, None] - r[None, :]))
    below = np.tril(np.ones((n, n), dtype=bool), -1)  # r_i > r_j
    G = np.where(below[..., None, None], np.einsum("ai,bj->ijab", d, g), np.einsum("ai,bj->ijab", g, d))
    G *= (fac / Wd)[..., None, None]
    if grid.kind in ("log", "loglin"):
        # weights = spacing * jacobian * global Gregory factors
        jac = grid.weights / _gregory_weights(n)
        Wm, wl, wr = _split_weights(n)
        W = Wm * jac[None, :]
        out = G * W[..., None, None]
        g_minus = np.einsum("ai,bi->iab", d, g) / Wd  # r -> r_i from above the source
        g_plus = np.einsum("ai,bi->iab", g, d) / Wd
        idx = np.arange(n)
        out[idx, idx] = (wl * jac)[:, None, None] * g_minus + (wr * jac)[:, None, None] * g_plus
        return out
    idx = np.arange(n)
    G[idx, idx] = 0.5 * (np.einsum("ai,bi->iab", d, g) + np.einsum("ai,bi->iab", g, d)) / Wd
    return G * grid.weights[None, :, None, None]


def bs_matrix(V, k: int, a: float, grid: RadialGrid, m: float = 1.0,
              symmetric: bool = False) -> BSMatrix:
    """Discretised u (T_k - a)^{-1} v with u = r^{1/2} V and v = r^{-1/2}.

    Rows integrate separately on each side of the diagonal so the jump of the
    kernel does not degrade the quadrature. ``symmetric`` moves half of every
    quadrature weight in front of the kernel; the result is similar to the
    default matrix and serves as a conditioning cross-check.
    """
    r = grid.nodes
    n = len(r)
    Vb = _potential_blocks(V, r)  # (n, 2, 2)
    GW = _kernel_blocks(ResolventKernel(k, a, m), grid)
    left = np.sqrt(r)
    right = 1 / np.sqrt(r)
    if symmetric:
        s = np.sqrt(grid.weights)
        left, right = left * s, right / s
    K = np.einsum("iab,ijbc->iajc", Vb, GW) * (left[:, None, None, None] * right[None, None, :, None])
    K = K.reshape(2 * n, 2 * n)
    if not np.iscomplexobj(Vb) or np.all(Vb.imag == 0):
        K = K.real
    return BSMatrix(k, a, grid, K, symmetric)


@dataclass(frozen=True)
class Crossing:
    a: float
    algebraic: int
    geometric: int
    channel_multiplicity: int  # times 2|k| for the m_j copies

    @property
    def agree(self) -> bool:
        return self.algebraic == self.geometric


@dataclass(frozen=True)
class BSScanReport:
    k: int
    a_values: tuple
    distances: tuple
    nearest: tuple
    crossings: tuple = ()
    grid: str = ""


def _det_indicator(V, k, grid, m):
    n2 = 2 * len(grid)

    def f(a):
        K = bs_matrix(V, k, a, grid, m).entries
        sign, logdet = np.linalg.slogdet(np.eye(n2) + K)
        return float(np.real(sign) * math.exp(logdet / n2))

    return f


def multiplicity_at(V, k: int, a: float, grid: RadialGrid, m: float = 1.0,
                    cluster: float = 1e-3, rank_tol: float = 1e-6) -> tuple[int, int]:
    """(algebraic, geometric) multiplicity of -1 for the discretised operator at a."""
    K = bs_matrix(V, k, a, grid, m).entries
    ev = np.linalg.eigvals(K)
    alg = int(np.count_nonzero(np.abs(ev + 1) < cluster))
    s = np.linalg.svd(np.eye(len(K)) + K, compute_uv=False)
    geo = int(np.count_nonzero(s < rank_tol * s[0]))
    return alg, geo


def bs_scan(V, k: int, a_values: Sequence[float], m: float = 1.0, grid: RadialGrid | None = None,
            n: int = BS_NODES, refine: bool = True) -> BSScanReport:
    """Distance of the BS spectrum to -1 along ``a_values``; sign changes of det(I + K) are refined."""
    a_values = tuple(sorted(float(a) for a in a_values))
    if not a_values:
        return BSScanReport(k, (), (), (), (), "")
    if grid is None:
        grid = bs_grid(a_values, m, n)
    dist, near, dets = [], [], []
    n2 = 2 * len(grid)
    I = np.eye(n2)
    for a in a_values:
        K = bs_matrix(V, k, a, grid, m).entries
        ev = np.linalg.eigvals(K)
        j = int(np.argmin(np.abs(ev + 1)))
        near.append(complex(ev[j]))
        dist.append(float(abs(ev[j] + 1)))
        sign, logdet = np.linalg.slogdet(I + K)
        dets.append(float(np.real(sign)))
    crossings = []
    if refine:
        f = _det_indicator(V, k, grid, m)
        for i in range(len(a_values) - 1):
            if dets[i] * dets[i + 1] < 0:
                a_star = brentq(f, a_values[i], a_values[i + 1], xtol=1e-12)
                alg, geo = multiplicity_at(V, k, a_star, grid, m)
                crossings.append(Crossing(a_star, alg, geo, 2 * abs(k) * geo))
    return BSScanReport(k, a_values, tuple(dist), tuple(near), tuple(crossings), grid.describe())
