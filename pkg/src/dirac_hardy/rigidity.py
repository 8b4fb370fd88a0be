"""Potentials with a doubly degenerate threshold eigenvalue a = +-m sqrt(1 - nu^2).

For sign +1 (a > 0)

    V = -nu/|x| I + [[N^2 s W s, i N s W], [-i N W s, W]],      s = sigma.xhat

and for sign -1 the mirrored blocks with +nu/|x|. Here
N = sqrt((1 - g)/(1 + g)), g = sqrt(1 - nu^2), and the eigenvalues of the 2x2
Hermitian field W must lie in [0, nu (1 + g)/|x|] (sign +1) or in
[-nu (1 + g)/|x|, 0] (sign -1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (ValidationError, check_hermitian, jacobi_eigh, operator_norm_herm4, random_unitary,
                   sigma_dot)
from .hardy import Attainer, attainer_coulomb_residual
from .partial_wave import AngularQuadrature

MatrixField = Callable[[np.ndarray], np.ndarray]


def rigid_N(nu: float) -> float:
    g = np.sqrt(1 - nu * nu)
    return float(np.sqrt((1 - g) / (1 + g)))


def window_cap(nu: float, r) -> np.ndarray:
    """Upper end nu (1 + sqrt(1 - nu^2))/r of the admissible eigenvalue window."""
    return nu * (1 + np.sqrt(1 - nu * nu)) / np.asarray(r, dtype=float)


@dataclass(frozen=True)
class RigidSpec:
    nu: float
    sign: int
    W: MatrixField
    m: float = 1.0
    label: str = "custom"

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValidationError(f"0 < nu < 1 required, got {self.nu}")
        if self.sign not in (1, -1):
            raise ValidationError("sign must be +1 or -1")

    @property
    def N(self) -> float:
        return rigid_N(self.nu)

    @property
    def threshold(self) -> float:
        return self.sign * self.m * float(np.sqrt(1 - self.nu * self.nu))


# ---------------------------------------------------------------------------
# Built-in W fields; ``fraction`` is measured in units of the window cap
# ---------------------------------------------------------------------------

def _radius(x):
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def w_zero() -> MatrixField:
    return lambda x: np.zeros(np.shape(x)[:-1] + (2, 2), dtype=complex)


def w_scalar(nu: float, sign: int = 1, fraction: float = 1.0) -> MatrixField:
    """sign * fraction * cap(|x|) * I_2; fraction = 1 is the window boundary."""
    def W(x):
        c = sign * fraction * window_cap(nu, _radius(x))
        return c[..., None, None] * np.eye(2, dtype=complex)
    return W


def w_diagonal(nu: float, sign: int = 1, fractions=(0.3, 0.8)) -> MatrixField:
    """Angle-dependent diagonal field with entries inside the window."""
    f1, f2 = fractions

    def W(x):
        x = np.asarray(x, dtype=float)
        r = _radius(x)
        z = x[..., 2] / r
        cap = window_cap(nu, r)
        d1 = f1 * (0.75 + 0.25 * z) * cap
        d2 = f2 * (0.75 - 0.25 * z * z) * cap
        out = np.zeros(x.shape[:-1] + (2, 2), dtype=complex)
        out[..., 0, 0] = sign * d1
        out[..., 1, 1] = sign * d2
        return out
    return W


def w_generic(nu: float, sign: int = 1, seed: int = 0) -> MatrixField:
    """Diagonal field rotated by a fixed random unitary and an x-dependent phase."""
    U = random_unitary(2, np.random.default_rng(seed))
    base = w_diagonal(nu, sign)

    def W(x):
        x = np.asarray(x, dtype=float)
        ph = np.exp(1j * np.arctan2(x[..., 1], x[..., 0]))
        R = np.zeros(x.shape[:-1] + (2, 2), dtype=complex)
        R[..., 0, 0] = 1.0
        R[..., 1, 1] = ph
        Ux = np.einsum("ab,...bc->...ac", U, R)
        return Ux @ base(x) @ np.conj(np.swapaxes(Ux, -1, -2))
    return W


def builtin_spec(kind: str, nu: float, sign: int = 1, m: float = 1.0, seed: int = 0) -> RigidSpec:
    """Named W fields: zero, boundary, diagonal, generic, violating (10% over the cap)."""
    table = {
        "zero": lambda: w_zero(),
        "boundary": lambda: w_scalar(nu, sign, 1.0),
        "diagonal": lambda: w_diagonal(nu, sign),
        "generic": lambda: w_generic(nu, sign, seed),
        "violating": lambda: w_scalar(nu, sign, 1.1),
    }
    if kind not in table:
        raise ValidationError(f"unknown W kind {kind!r}; choose from {sorted(table)}")
    return RigidSpec(nu, sign, table[kind](), m, kind)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def _blocks(top_left, top_right, bottom_left, bottom_right):
    top = np.concatenate([top_left, top_right], axis=-1)
    bot = np.concatenate([bottom_left, bottom_right], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def build_rigid_potential(spec: RigidSpec, x) -> np.ndarray:
    """4x4 potential at x (shape (..., 3)); returns (..., 4, 4)."""
    x = np.asarray(x, dtype=float)
    r = _radius(x)
    if np.any(r == 0):
        raise ValidationError("the rigid potential is defined for x != 0")
    W = check_hermitian(spec.W(x))
    s = sigma_dot(x / r[..., None]).astype(complex)
    N = spec.N
    sWs = s @ W @ s
    if spec.sign == 1:
        B = _blocks(N * N * sWs, 1j * N * s @ W, -1j * N * W @ s, W)
    else:
        B = _blocks(W, 1j * N * W @ s, -1j * N * s @ W, N * N * sWs)
    return (-spec.sign * spec.nu / r)[..., None, None] * np.eye(4) + B


def rigid_potential_field(spec: RigidSpec) -> MatrixField:
    return lambda x: build_rigid_potential(spec, x)


def coulomb_matrix(nu: float, sign: int = 1) -> MatrixField:
    return lambda x: (-sign * nu / _radius(x))[..., None, None] * np.eye(4, dtype=complex)


def screened_coulomb_matrix(nu: float, sign: int = 1) -> MatrixField:
    """-sign nu e^{-r}/r I_4: Coulomb-bounded but not Coulomb."""
    def V(x):
        r = _radius(x)
        return (-sign * nu * np.exp(-r) / r)[..., None, None] * np.eye(4, dtype=complex)
    return V


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def sample_points(rng: np.random.Generator, count: int, r_range=(0.1, 10.0)) -> np.ndarray:
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = np.exp(rng.uniform(np.log(r_range[0]), np.log(r_range[1]), size=count))
    return d * r[:, None]


@dataclass(frozen=True)
class NormBoundReport:
    nu: float
    max_value: float
    argmax: tuple
    passed: bool
    hermitian_error: float


def check_norm_bound(V: MatrixField, nu: float, sample_xs, tol: float = 1e-10) -> NormBoundReport:
    """max |x| |V(x)| over samples against nu + tol; Hermiticity is checked along the way."""
    xs = np.asarray(sample_xs, dtype=float).reshape(-1, 3)
    if np.any(_radius(xs) == 0):
        raise ValidationError("samples must be nonzero")
    mats = V(xs)
    herm = float(np.max(np.abs(mats - np.conj(np.swapaxes(mats, -1, -2)))))
    vals = np.array([_radius(x) * operator_norm_herm4(M) for x, M in zip(xs, mats)])
    i = int(np.argmax(vals))
    return NormBoundReport(nu, float(vals[i]), tuple(xs[i]), bool(vals[i] <= nu + tol), herm)


@dataclass(frozen=True)
class EigenRelationReport:
    u_residual: float
    v_residual: float
    orthonormality: float
    eigenvalues: tuple
    passed: bool


def rigid_basis(spec: RigidSpec, x, e_basis=None):
    """(u_1, u_2, v_1, v_2) as columns and the W eigenvalues at a single point x."""
    x = np.asarray(x, dtype=float)
    r = float(_radius(x))
    W = check_hermitian(spec.W(x))
    if e_basis is None:
        lam, E = jacobi_eigh(W)
    else:
        E = np.asarray(e_basis, dtype=complex)
        lam = np.real(np.einsum("aj,ab,bj->j", np.conj(E), W, E))
    s = sigma_dot(x / r)
    N = spec.N
    c = 1.0 / np.sqrt(N * N + 1)
    sE = 1j * N * (s @ E)
    if spec.sign == 1:
        U = c * np.vstack([E, sE])
        Vv = c * np.vstack([sE, E])
    else:
        U = c * np.vstack([-sE, E])
        Vv = c * np.vstack([E, -sE])
    return U, Vv, np.asarray(lam)


def check_eigen_relations(spec: RigidSpec, x, e_basis=None, tol: float = 1e-10) -> EigenRelationReport:
    """V u_j = -sign nu/|x| u_j and V v_j = (-sign nu/|x| + lambda_j (N^2 + 1)) v_j."""
    x = np.asarray(x, dtype=float)
    r = float(_radius(x))
    U, Vv, lam = rigid_basis(spec, x, e_basis)
    M = build_rigid_potential(spec, x)
    base = -spec.sign * spec.nu / r
    scale = max(spec.nu / r, float(np.max(np.abs(lam), initial=0.0)), 1.0)
    ru = np.max(np.abs(M @ U - base * U)) / scale
    rv = np.max(np.abs(M @ Vv - Vv * (base + lam * (spec.N ** 2 + 1))[None, :])) / scale
    Q = np.hstack([U, Vv])
    ortho = float(np.max(np.abs(np.conj(Q.T) @ Q - np.eye(4))))
    ok = ru <= tol and rv <= tol and ortho <= tol
    return EigenRelationReport(float(ru), float(rv), ortho, tuple(lam), bool(ok))


def window_violations(spec: RigidSpec, xs) -> list[tuple]:
    """Sample points where an eigenvalue of W leaves the admissible window."""
    out = []
    for x in np.asarray(xs, dtype=float).reshape(-1, 3):
        lam, _ = jacobi_eigh(check_hermitian(spec.W(x)))
        cap = float(window_cap(spec.nu, _radius(x)))
        scaled = spec.sign * lam
        if np.any(scaled < -1e-12 * cap) or np.any(scaled > cap * (1 + 1e-12)):
            out.append(tuple(x))
    return out


def mirror_difference(W: MatrixField, nu: float, xs) -> float:
    """max |V^-(W) + P V^+(-W) P^{-1}| with P the block swap ((0, -I), (I, 0))."""
    P = np.zeros((4, 4))
    P[:2, 2:] = -np.eye(2)
    P[2:, :2] = np.eye(2)
    minus = RigidSpec(nu, -1, W)
    plus = RigidSpec(nu, 1, lambda x: -W(x))
    xs = np.asarray(xs, dtype=float)
    lhs = build_rigid_potential(minus, xs)
    rhs = -P @ build_rigid_potential(plus, xs) @ P.T
    return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class ThresholdReport:
    a: float
    pointwise: tuple  # per C direction: max |V psi + sign nu/|x| psi| / |nu psi/|x||
    residual_bound: tuple  # per C direction: bound on ||(H0 + V - a) psi|| / ||psi||
    failing: tuple
    multiplicity: int
    passed: bool


def verify_threshold_eigenfunction(V: MatrixField | RigidSpec, nu: float | None = None, sign: int | None = None,
                                   m: float = 1.0, r_nodes=None, quad: AngularQuadrature | None = None,
                                   pointwise_tol: float = 1e-9, residual_tol: float = 1e-6) -> ThresholdReport:
    """Check V psi^a_C = -sign (nu/|x|) psi^a_C for C = (1,0) and (0,1).

    The full residual is bounded by the Coulomb attainer residual plus the L2
    norm of (V + sign nu/|x|) psi, by the triangle inequality.
    """
    if isinstance(V, RigidSpec):
        spec = V
        nu, sign, m = spec.nu, spec.sign, spec.m
        V = rigid_potential_field(spec)
    if nu is None or sign not in (1, -1):
        raise ValidationError("nu and sign are required for a plain potential")
    a = sign * m * float(np.sqrt(1 - nu * nu))
    if r_nodes is None:
        r_nodes = np.geomspace(1e-3, 30.0, 60)
    r_nodes = np.asarray(r_nodes, dtype=float)
    quad = quad or AngularQuadrature(10)
    x = r_nodes[:, None, None] * quad.nodes[None]  # (R, M, 3)
    Vx = V(x)
    coul = attainer_coulomb_residual(nu, sign, m)
    pw, rb, bad = [], [], []
    for idx, C in enumerate(((1.0, 0.0), (0.0, 1.0))):
        psi = Attainer(a, C, m).spinor(x)  # (R, M, 4)
        dev = np.einsum("rmab,rmb->rma", Vx, psi) + (sign * nu / r_nodes)[:, None, None] * psi
        ref = (nu / r_nodes)[:, None] * np.linalg.norm(psi, axis=-1)
        p = float(np.max(np.linalg.norm(dev, axis=-1) / ref))
        # L2 norms over the sampled shell with trapezoid weights in r
        wr = np.gradient(r_nodes) * r_nodes ** 2
        num = np.sum(wr[:, None] * quad.weights[None] * np.sum(np.abs(dev) ** 2, axis=-1))
        den = np.sum(wr[:, None] * quad.weights[None] * np.sum(np.abs(psi) ** 2, axis=-1))
        bound = coul + float(np.sqrt(num / den))
        pw.append(p)
        rb.append(bound)
        if p > pointwise_tol or bound > residual_tol:
            bad.append(idx)
    mult = 2 - len(bad)
    return ThresholdReport(a, tuple(pw), tuple(rb), tuple(bad), mult, not bad)
