"""Dirac algebra, channel bookkeeping, radial grids and small Hermitian utilities.

Units are hbar = c = 1 and lengths are measured in units of 1/m.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

HERMITIAN_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates the documented contract of an operation."""


# ---------------------------------------------------------------------------
# Dirac algebra
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _matrices():
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    sigma = np.array([s1, s2, s3])
    z = np.zeros((2, 2), dtype=complex)
    i2 = np.eye(2, dtype=complex)
    beta = np.block([[i2, z], [z, -i2]])
    alpha = np.array([np.block([[z, s], [s, z]]) for s in sigma])
    for arr in (sigma, beta, alpha):
        arr.setflags(write=False)
    return alpha, beta, sigma


def dirac_matrices():
    """Return ``(alpha, beta, sigma)``.

    ``alpha`` has shape (3, 4, 4), ``beta`` is 4x4 and ``sigma`` holds the three
    Pauli matrices with shape (3, 2, 2). The arrays are read-only.
    """
    return _matrices()


def sigma_dot(v) -> np.ndarray:
    """sigma . v for a real 3-vector (or a stack of them, shape (..., 3))."""
    _, _, sigma = _matrices()
    return np.einsum("...j,jab->...ab", np.asarray(v, dtype=float), sigma)


def alpha_dot(v) -> np.ndarray:
    """alpha . v for a real 3-vector (or a stack, shape (..., 3))."""
    alpha, _, _ = _matrices()
    return np.einsum("...j,jab->...ab", np.asarray(v, dtype=float), alpha)


# ---------------------------------------------------------------------------
# Channels and physical parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Channel:
    """Partial-wave sector labelled by the spin-orbit number ``k`` and ``2 m_j``."""

    k: int
    two_mj: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k == 0:
            raise ValidationError(f"k must be a nonzero integer, got {self.k!r}")
        if int(self.two_mj) != self.two_mj or self.two_mj % 2 == 0:
            raise ValidationError(f"two_mj must be odd, got {self.two_mj!r}")
        if abs(self.two_mj) > 2 * abs(self.k) - 1:
            raise ValidationError(f"|two_mj| <= 2|k|-1 violated for k={self.k}, two_mj={self.two_mj}")

    @property
    def j(self) -> float:
        return abs(self.k) - 0.5

    @property
    def mj(self) -> float:
        return self.two_mj / 2


def channels_up_to(kmax: int) -> list[Channel]:
    """All channels with 1 <= |k| <= kmax, ordered by (|k|, sign, m_j)."""
    out = []
    for ak in range(1, kmax + 1):
        for k in (-ak, ak):
            for two_mj in range(-(2 * ak - 1), 2 * ak, 2):
                out.append(Channel(k, two_mj))
    return out


@dataclass(frozen=True)
class PhysicalParams:
    nu: float
    a: float = 0.0
    m: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValidationError(f"mass must be positive, got {self.m}")
        if not abs(self.a) < self.m:
            raise ValidationError(f"|a| < m required, got a={self.a}, m={self.m}")
        if not 0 < self.nu < 1:
            raise ValidationError(f"0 < nu < 1 required, got nu={self.nu}")


def decay_rate(a: float, m: float = 1.0) -> float:
    """sqrt(m^2 - a^2), the exponential decay rate of gap solutions."""
    if not abs(a) < m:
        raise ValidationError(f"|a| < m required, got a={a}, m={m}")
    return float(np.sqrt(m * m - a * a))


def coulomb_ground_energy(nu: float, m: float = 1.0) -> float:
    return m * float(np.sqrt(1.0 - nu * nu))


# ---------------------------------------------------------------------------
# Radial grids
# ---------------------------------------------------------------------------

def _gregory_weights(n: int) -> np.ndarray:
    # Trapezoid with third-order Gregory end corrections (exact for cubics).
    if n < 8:
        raise ValidationError("need at least 8 nodes for Gregory weights")
    w = np.ones(n)
    head = np.array([3 / 8, 7 / 6, 23 / 24])
    w[:3] = head
    w[-3:] = head[::-1]
    return w


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Radial nodes with quadrature weights for integrals over [r_min, r_max].

    ``weights`` already include the Jacobian of the underlying uniform variable.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if r.ndim != 1 or r.shape != w.shape:
            raise ValidationError("nodes and weights must be 1-D arrays of equal length")
        if r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise ValidationError("nodes must be positive and strictly increasing")
        if np.any(w <= 0):
            raise ValidationError("weights must be positive")
        r.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "nodes", r)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.nodes)

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    def integrate(self, values) -> complex | float:
        """Quadrature of sampled values (last axis runs over the nodes)."""
        return np.tensordot(np.asarray(values), self.weights, axes=([-1], [0]))

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            len(self) == len(other) and np.array_equal(self.nodes, other.nodes)
        )

    def describe(self) -> str:
        extra = " ".join(f"{k}={v}" for k, v in self.params.items() if k not in ("r_min", "r_max", "n"))
        return f"{self.kind} n={len(self)} r_min={self.r_min:.6g} r_max={self.r_max:.6g} {extra}".strip()


def log_grid(r_min: float, r_max: float, n: int) -> RadialGrid:
    """Geometric nodes r_i = r_min q^i with weights from the uniform log variable."""
    if not (r_min > 0 and r_max > r_min):
        raise ValidationError(f"need 0 < r_min < r_max, got ({r_min}, {r_max})")
    if n < 16:
        raise ValidationError(f"need n >= 16, got {n}")
    t = np.linspace(np.log(r_min), np.log(r_max), n)
    h = t[1] - t[0]
    r = np.exp(t)
    r[0], r[-1] = r_min, r_max
    return RadialGrid(r, h * _gregory_weights(n) * r, "log",
                      {"r_min": r_min, "r_max": r_max, "n": n})


def loglin_grid(r_min: float, r_max: float, n: int, scale: float = 4.0) -> RadialGrid:
    """Nodes uniform in rho = ln r + r/scale: geometric near 0, roughly uniform beyond ``scale``."""
    if not (r_min > 0 and r_max > r_min):
        raise ValidationError(f"need 0 < r_min < r_max, got ({r_min}, {r_max})")
    if n < 16 or scale <= 0:
        raise ValidationError("need n >= 16 and scale > 0")
    rho = np.linspace(np.log(r_min) + r_min / scale, np.log(r_max) + r_max / scale, n)
    h = rho[1] - rho[0]
    r = np.exp(rho)  # Newton on ln r + r/s = rho, started from the pure-log guess
    r = np.minimum(r, r_max)
    for _ in range(100):
        g = np.log(r) + r / scale - rho
        r_new = r - g / (1.0 / r + 1.0 / scale)
        r_new = np.where(r_new <= 0, r / 2, r_new)
        if np.max(np.abs(r_new - r) / r_new) < 1e-15:
            r = r_new
            break
        r = r_new
    r[0], r[-1] = r_min, r_max
    jac = r * scale / (r + scale)
    return RadialGrid(r, h * _gregory_weights(n) * jac, "loglin",
                      {"r_min": r_min, "r_max": r_max, "n": n, "scale": scale})


def default_r_max(lam: float, floor: float = 1e-12) -> float:
    """Smallest r_max with exp(-lam r_max) below ``floor``."""
    return float(-np.log(floor) / lam)


# ---------------------------------------------------------------------------
# 4x4 Hermitian utilities
# ---------------------------------------------------------------------------

def check_hermitian(M, tol: float = HERMITIAN_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.shape[-2:] != (M.shape[-1], M.shape[-1]):
        raise ValidationError(f"square matrix expected, got shape {M.shape}")
    dev = np.max(np.abs(M - np.conj(np.swapaxes(M, -1, -2))), initial=0.0)
    if dev > tol:
        raise ValidationError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return M


def jacobi_eigh(M, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigen-decomposition of a small complex Hermitian matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues and the unitary whose columns are eigenvectors.
    """
    A = np.array(M, dtype=complex)
    n = A.shape[0]
    A = 0.5 * (A + A.conj().T)
    U = np.eye(n, dtype=complex)
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(A - np.diag(np.diag(A))) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                # Phase the (p, q) entry to be real, then apply a real Givens rotation.
                phase = apq / abs(apq)
                app, aqq = A[p, p].real, A[q, q].real
                theta = 0.5 * np.arctan2(2 * abs(apq), aqq - app)
                c, s = np.cos(theta), np.sin(theta)
                R = np.eye(n, dtype=complex)
                R[p, p] = c
                R[q, q] = c
                R[p, q] = s * phase
                R[q, p] = -s * np.conj(phase)
                A = R.conj().T @ A @ R
                U = U @ R
    w = np.real(np.diag(A))
    order = np.argsort(w)
    return w[order], U[:, order]


def operator_norm_herm4(M) -> float:
    """sup |M u| / |u| for a Hermitian matrix, i.e. the largest |eigenvalue|."""
    M = check_hermitian(M)
    w, _ = jacobi_eigh(M)
    return float(np.max(np.abs(w)))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


RadialFunction = Callable[[np.ndarray], np.ndarray]
