"""Spinor spherical harmonics and the partial-wave decomposition of 4-spinor fields.

Spherical harmonics are the complex ``Y_l^mu`` with the Condon-Shortley phase.
For a channel ``(k, m_j)`` with ``j = |k| - 1/2``::

    Phi+_{m_j,k} = (i psi^{m_j}_{j + sgn(k)/2}, 0)
    Phi-_{m_j,k} = (0, psi^{m_j}_{j - sgn(k)/2})
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.special import sph_harm_y

from .core import Channel, RadialGrid, ValidationError, dirac_matrices
from .radial import RadialSpinor

L_MAX_DEFAULT = 4


def _angles(xhat):
    xhat = np.asarray(xhat, dtype=float)
    theta = np.arccos(np.clip(xhat[..., 2], -1.0, 1.0))
    phi = np.arctan2(xhat[..., 1], xhat[..., 0])
    return theta, phi


def ylm(l: int, mu: int, xhat) -> np.ndarray:
    """Complex spherical harmonic Y_l^mu at unit vectors; zero when |mu| > l."""
    theta, phi = _angles(xhat)
    if abs(mu) > l or l < 0:
        return np.zeros(np.shape(theta), dtype=complex)
    return sph_harm_y(l, mu, theta, phi)


def spherical_spinor(j: float, two_mj: int, branch: int, xhat) -> np.ndarray:
    """Two-component spinor psi^{m_j}_{j + branch/2}; ``branch`` is -1 or +1.

    Returns an array of shape (..., 2) for xhat of shape (..., 3).
    """
    two_j = int(round(2 * j))
    if two_j != 2 * j or two_j < 1 or two_j % 2 == 0:
        raise ValidationError(f"j must be a positive half-integer, got {j}")
    if two_mj % 2 == 0 or abs(two_mj) > two_j:
        raise ValidationError(f"invalid 2 m_j = {two_mj} for j = {j}")
    if branch not in (-1, 1):
        raise ValidationError("branch must be -1 (l = j - 1/2) or +1 (l = j + 1/2)")
    mj = two_mj / 2
    mu_up = (two_mj - 1) // 2
    mu_dn = (two_mj + 1) // 2
    if branch == -1:
        l = (two_j - 1) // 2
        c_up = np.sqrt((j + mj) / (2 * j))
        c_dn = np.sqrt((j - mj) / (2 * j))
    else:
        l = (two_j + 1) // 2
        c_up = np.sqrt((j + 1 - mj) / (2 * j + 2))
        c_dn = -np.sqrt((j + 1 + mj) / (2 * j + 2))
    return np.stack([c_up * ylm(l, mu_up, xhat), c_dn * ylm(l, mu_dn, xhat)], axis=-1)


@dataclass(frozen=True)
class SpinorHarmonic:
    channel: Channel
    sign: int  # +1 selects Phi+, -1 selects Phi-

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValidationError("sign must be +1 or -1")


def phi_basis(h: SpinorHarmonic, xhat) -> np.ndarray:
    """Evaluate Phi^{sign}_{m_j,k}; returns shape (..., 4)."""
    ch = h.channel
    s = 1 if ch.k > 0 else -1
    if h.sign == 1:
        two = 1j * spherical_spinor(ch.j, ch.two_mj, s, xhat)
        return np.concatenate([two, np.zeros_like(two)], axis=-1)
    two = spherical_spinor(ch.j, ch.two_mj, -s, xhat)
    return np.concatenate([np.zeros_like(two), two], axis=-1)


def spin_orbit_apply(h: SpinorHarmonic, xhat) -> np.ndarray:
    """(1 + 2 S.L) Phi = -k beta Phi."""
    _, beta, _ = dirac_matrices()
    return -h.channel.k * (phi_basis(h, xhat) @ beta.T)


def spin_orbit_finite_difference(field: Callable[[np.ndarray], np.ndarray], points, step: float = 1e-4) -> np.ndarray:
    """(1 + 2 S.L) field at ``points`` with L = -i x ^ grad by central differences.

    ``field`` maps an array of shape (..., 3) to (..., 4). Fourth-order central
    differences are used for each Cartesian derivative.
    """
    _, _, sigma = dirac_matrices()
    x = np.asarray(points, dtype=float)
    grads = []
    for d in range(3):
        e = np.zeros(3)
        e[d] = step
        g = (-field(x + 2 * e) + 8 * field(x + e) - 8 * field(x - e) + field(x - 2 * e)) / (12 * step)
        grads.append(g)
    grads = np.stack(grads, axis=-2)  # (..., 3, 4)
    # (x ^ grad)_j = eps_jab x_a d_b
    cross = np.stack([
        x[..., 1, None] * grads[..., 2, :] - x[..., 2, None] * grads[..., 1, :],
        x[..., 2, None] * grads[..., 0, :] - x[..., 0, None] * grads[..., 2, :],
        x[..., 0, None] * grads[..., 1, :] - x[..., 1, None] * grads[..., 0, :],
    ], axis=-2)
    L = -1j * cross  # (..., 3, 4)
    out = field(x).astype(complex)
    for j in range(3):
        s4 = np.kron(np.eye(2), sigma[j])
        out = out + L[..., j, :] @ s4.T
    return out


# ---------------------------------------------------------------------------
# Angular quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AngularQuadrature:
    """Gauss-Legendre in cos(theta) times the uniform rule in phi.

    Integrates every polynomial of degree <= ``degree`` on the sphere exactly.
    """

    degree: int

    @classmethod
    def for_lmax(cls, l_max: int = L_MAX_DEFAULT) -> "AngularQuadrature":
        return cls(2 * l_max + 2)

    @cached_property
    def _rule(self):
        n_theta = self.degree // 2 + 1
        n_phi = self.degree + 1
        c, wc = np.polynomial.legendre.leggauss(n_theta)
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        C, P = np.meshgrid(c, phi, indexing="ij")
        S = np.sqrt(1 - C ** 2)
        xhat = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
        w = np.repeat(wc, n_phi) * (2 * np.pi / n_phi)
        return xhat, w

    @property
    def nodes(self) -> np.ndarray:
        return self._rule[0]

    @property
    def weights(self) -> np.ndarray:
        return self._rule[1]

    def __len__(self):
        return len(self.weights)

    def inner(self, f, g) -> complex:
        """<f, g> = int conj(f) . g over the sphere; f, g of shape (M, d)."""
        return complex(np.sum(self.weights * np.sum(np.conj(f) * g, axis=-1)))


def gram_matrix(harmonics: list[SpinorHarmonic], quad: AngularQuadrature) -> np.ndarray:
    vals = np.stack([phi_basis(h, quad.nodes) for h in harmonics])  # (H, M, 4)
    return np.einsum("am,amd,bmd->ab", np.broadcast_to(quad.weights, vals.shape[:2]), np.conj(vals), vals)


def all_harmonics(kmax: int) -> list[SpinorHarmonic]:
    from .core import channels_up_to

    return [SpinorHarmonic(ch, s) for ch in channels_up_to(kmax) for s in (1, -1)]


# ---------------------------------------------------------------------------
# Decomposition and reconstruction
# ---------------------------------------------------------------------------

def sample_field(field: Callable[[np.ndarray], np.ndarray], grid: RadialGrid, quad: AngularQuadrature) -> np.ndarray:
    """Samples of a 4-spinor field on grid x quadrature, shape (n_r, M, 4)."""
    x = grid.nodes[:, None, None] * quad.nodes[None, :, :]
    return np.asarray(field(x), dtype=complex)


def decompose(samples: np.ndarray, grid: RadialGrid, quad: AngularQuadrature,
              channels: Iterable[Channel]) -> dict[Channel, RadialSpinor]:
    """Project sampled field onto the requested channels.

    f^{+-}(r) = r <Phi^{+-}, psi(r .)>_{S^2} at every radial node.
    """
    channels = list(channels)
    if not channels:
        raise ValidationError("channel list must not be empty")
    samples = np.asarray(samples)
    if samples.shape != (len(grid), len(quad), 4):
        raise ValidationError(f"samples must have shape (n_r, M, 4), got {samples.shape}")
    r = grid.nodes
    out = {}
    for ch in channels:
        comps = []
        for s in (1, -1):
            phi = phi_basis(SpinorHarmonic(ch, s), quad.nodes)  # (M, 4)
            proj = np.einsum("m,md,rmd->r", quad.weights, np.conj(phi), samples)
            comps.append(r * proj)
        out[ch] = RadialSpinor(ch, grid, comps[0], comps[1])
    return out


def reconstruct(channel_data: Mapping[Channel, RadialSpinor] | Iterable[RadialSpinor], xhat) -> np.ndarray:
    """Sum over channels of (1/r)(f+ Phi+ + f- Phi-) at r = grid nodes, shape (n_r, M, 4)."""
    items = channel_data.values() if isinstance(channel_data, Mapping) else channel_data
    total = None
    for u in items:
        r = u.grid.nodes
        pp = phi_basis(SpinorHarmonic(u.channel, 1), xhat)
        pm = phi_basis(SpinorHarmonic(u.channel, -1), xhat)
        term = (u.f_plus / r)[:, None, None] * pp[None] + (u.f_minus / r)[:, None, None] * pm[None]
        total = term if total is None else total + term
    if total is None:
        raise ValidationError("no channel data to reconstruct")
    return total


def field_integral(samples: np.ndarray, grid: RadialGrid, quad: AngularQuadrature, power: int = 0) -> float:
    """int |psi|^2 |x|^power dx over the sampled shell region."""
    dens = np.einsum("m,rmd->r", quad.weights, np.abs(samples) ** 2)
    r = grid.nodes
    return float(grid.integrate(dens * r ** (2 + power)))


def channel_sums(channel_data: Mapping[Channel, RadialSpinor] | Iterable[RadialSpinor]) -> dict[str, float]:
    """Channel-reduced norm, weighted norm and spin-orbit weighted norm."""
    items = channel_data.values() if isinstance(channel_data, Mapping) else channel_data
    norm = lhs = mid = 0.0
    for u in items:
        d = u.density()
        g = u.grid
        norm += float(g.integrate(d))
        w = float(g.integrate(d / g.nodes))
        lhs += w
        mid += u.k ** 2 * w
    return {"norm": norm, "lhs": lhs, "mid": mid}
