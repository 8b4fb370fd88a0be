"""Channel-reduced radial Dirac operator, nonuniform differentiation and ODE integration.

In the channel with spin-orbit number ``k`` a spinor
``psi = (1/r) (f+ Phi+ + f- Phi-)`` is represented by the pair ``(f+, f-)`` and
``H0 + v`` acts as

    T_k (f+, f-) = ((m + v) f+ + (-d/dr + k/r) f-,
                    (d/dr + k/r) f+ + (-m + v) f-).

The sign convention is the one under which the Coulomb ground state
``r^gamma e^{-lambda r} (1, -N)`` is annihilated by ``T_k - a`` with ``k = -1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .core import Channel, RadialGrid, ValidationError

STENCIL = 5


class IntegrationError(RuntimeError):
    """The adaptive integrator could not continue; ``radius`` is where it stopped."""

    def __init__(self, message: str, radius: float):
        super().__init__(f"{message} (at r = {radius:.6g})")
        self.radius = radius


@dataclass(frozen=True, eq=False)
class RadialSpinor:
    channel: Optional[Channel]
    grid: RadialGrid
    f_plus: np.ndarray
    f_minus: np.ndarray

    def __post_init__(self):
        fp = np.asarray(self.f_plus, dtype=complex)
        fm = np.asarray(self.f_minus, dtype=complex)
        if fp.shape != (len(self.grid),) or fm.shape != (len(self.grid),):
            raise ValidationError("component samples must match the grid length")
        object.__setattr__(self, "f_plus", fp)
        object.__setattr__(self, "f_minus", fm)

    @property
    def k(self) -> int:
        return self.channel.k

    def components(self) -> np.ndarray:
        return np.stack([self.f_plus, self.f_minus])

    def density(self) -> np.ndarray:
        return np.abs(self.f_plus) ** 2 + np.abs(self.f_minus) ** 2

    def norm2(self) -> float:
        return float(self.grid.integrate(self.density()))

    def scaled(self, c) -> "RadialSpinor":
        return RadialSpinor(self.channel, self.grid, c * self.f_plus, c * self.f_minus)

    def __add__(self, other: "RadialSpinor") -> "RadialSpinor":
        if not self.grid.same_as(other.grid):
            raise ValidationError("grid mismatch")
        return RadialSpinor(self.channel, self.grid, self.f_plus + other.f_plus,
                            self.f_minus + other.f_minus)

    @classmethod
    def from_functions(cls, channel, grid, fp, fm) -> "RadialSpinor":
        r = grid.nodes
        return cls(channel, grid, fp(r), fm(r))


@dataclass(frozen=True)
class RadialOperator:
    k: int
    v: Optional[Callable[[np.ndarray], np.ndarray]] = None
    m: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if self.k == 0 or int(self.k) != self.k:
            raise ValidationError("k must be a nonzero integer")
        if not abs(self.a) < self.m:
            raise ValidationError(f"|a| < m required, got a={self.a}")

    def potential(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.zeros_like(r) if self.v is None else np.asarray(self.v(r), dtype=float)


# ---------------------------------------------------------------------------
# Finite differences on nonuniform grids
# ---------------------------------------------------------------------------

def lagrange_derivative_weights(x: np.ndarray, z) -> np.ndarray:
    """Weights w with sum_j w_j f(x_j) = p'(z), p the interpolant through (x_j, f_j).

    ``x`` may hold a batch of stencils with shape (..., s); ``z`` broadcasts
    against the leading axes.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)[..., None]
    s = x.shape[-1]
    w = np.zeros(np.broadcast_shapes(x.shape, z.shape))
    for j in range(s):
        total = 0.0
        for l in range(s):
            if l == j:
                continue
            term = 1.0 / (x[..., j] - x[..., l])
            for q in range(s):
                if q != j and q != l:
                    term = term * (z[..., 0] - x[..., q]) / (x[..., j] - x[..., q])
            total = total + term
        w[..., j] = total
    return w


@lru_cache(maxsize=64)
def _derivative_stencils(grid: RadialGrid):
    r = grid.nodes
    n = len(r)
    half = STENCIL // 2
    start = np.clip(np.arange(n) - half, 0, n - STENCIL)
    idx = start[:, None] + np.arange(STENCIL)[None, :]
    # Shift and scale by the local spacing to keep the arithmetic well conditioned.
    x = r[idx]
    h = (x[:, -1] - x[:, 0])[:, None]
    wts = lagrange_derivative_weights((x - r[:, None]) / h, 0.0) / h
    return idx, wts


def derivative(grid: RadialGrid, values) -> np.ndarray:
    """Fourth-order derivative of samples on ``grid`` (last axis = nodes)."""
    idx, wts = _derivative_stencils(grid)
    values = np.asarray(values)
    return np.sum(values[..., idx] * wts, axis=-1)


def interior(n: int) -> slice:
    """Nodes whose derivative uses a centred stencil."""
    return slice(STENCIL // 2, n - STENCIL // 2)


# ---------------------------------------------------------------------------
# The radial operator
# ---------------------------------------------------------------------------

def apply_radial_dirac(op: RadialOperator, u: RadialSpinor, grid: RadialGrid | None = None) -> RadialSpinor:
    """Return ``(T_k - a) u`` sampled on every node of ``u.grid``.

    The two outermost nodes at each end use one-sided stencils; use
    :func:`interior` to restrict to centred ones.
    """
    if grid is not None and not grid.same_as(u.grid):
        raise ValidationError("spinor is not sampled on the operator's grid")
    g = u.grid
    r = g.nodes
    v = op.potential(r)
    k = op.k
    fp, fm = u.f_plus, u.f_minus
    dfp = derivative(g, fp)
    dfm = derivative(g, fm)
    top = (op.m + v - op.a) * fp - dfm + k / r * fm
    bot = dfp + k / r * fp + (-op.m + v - op.a) * fm
    return RadialSpinor(u.channel, g, top, bot)


def radial_residual(op: RadialOperator, u: RadialSpinor) -> float:
    """Relative L2 residual ||(T_k - a) u|| / ||u|| over centred nodes."""
    res = apply_radial_dirac(op, u)
    sl = interior(len(u.grid))
    w = np.zeros(len(u.grid))
    w[sl] = u.grid.weights[sl]
    num = np.sum(w * res.density())
    den = np.sum(w * u.density())
    return float(np.sqrt(num / den)) if den > 0 else 0.0


def coefficient_matrix(k: int, a: float, m: float = 1.0, v=None):
    """r -> A(r) with (f+, f-)' = A(r) (f+, f-) equivalent to (T_k - a) f = 0."""

    def A(r):
        vr = 0.0 if v is None else float(v(np.asarray(r)))
        return np.array([[-k / r, m - vr + a], [m + vr - a, k / r]])

    return A


# ---------------------------------------------------------------------------
# Adaptive integration of first-order 2x2 systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Solution:
    r: np.ndarray
    y: np.ndarray  # shape (2, len(r))
    nfev: int


def integrate_system(rhs: Callable[[float], np.ndarray], r0: float, r1: float, init,
                     tol: float = 1e-10, samples=None, log_variable: bool = True) -> Solution:
    """Integrate y' = rhs(r) y from r0 to r1 (either direction) with an embedded RK pair.

    With ``log_variable`` the system is advanced in t = ln r, which keeps the step
    size proportional to r near the origin. ``samples`` (radii between r0 and r1)
    are returned in the order given; by default only the endpoints.
    """
    if not (r0 > 0 and r1 > 0):
        raise ValidationError("integration endpoints must be positive")
    y0 = np.asarray(init, dtype=complex)
    if not np.all(np.isfinite(y0)):
        raise ValidationError("initial vector must be finite")
    # The system is linear: integrate from a unit vector so tolerances are scale free.
    scale = float(np.linalg.norm(y0))
    if scale == 0:
        r = np.array([r0, r1]) if samples is None else np.asarray(samples, dtype=float)
        return Solution(r, np.zeros((len(y0), len(r)), dtype=complex), 0)
    y0 = y0 / scale
    if np.all(y0.imag == 0):
        y0 = y0.real

    if log_variable:
        def f(t, y):
            r = np.exp(t)
            return r * (rhs(r) @ y)
        span = (np.log(r0), np.log(r1))
        t_eval = None if samples is None else np.log(np.asarray(samples, dtype=float))
    else:
        def f(t, y):
            return rhs(t) @ y
        span = (r0, r1)
        t_eval = None if samples is None else np.asarray(samples, dtype=float)

    if t_eval is not None:
        lo, hi = min(span), max(span)
        t_eval = np.clip(t_eval, lo, hi)
    sol = solve_ivp(f, span, y0, method="DOP853", rtol=tol, atol=tol * 1e-3,
                    t_eval=t_eval, dense_output=False)
    if sol.status != 0:
        last = sol.t[-1] if len(sol.t) else span[0]
        radius = float(np.exp(last)) if log_variable else float(last)
        raise IntegrationError(f"integration failed: {sol.message}", radius)
    t = sol.t
    r = np.exp(t) if log_variable else t
    if samples is None:
        keep = [0, len(t) - 1]
        return Solution(r[keep], scale * sol.y[:, keep], sol.nfev)
    return Solution(r, scale * sol.y, sol.nfev)
