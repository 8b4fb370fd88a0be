"""The sharp weighted Hardy inequality for H0 - a, its attainers and the square identity.

For channel data ``{(f+, f-)_k}`` the three members are

    lhs = sum int (|f+|^2 + |f-|^2) / r dr
    mid = sum k^2 int (|f+|^2 + |f-|^2) / r dr
    rhs = sum int r |(T_k - a)(f+, f-)|^2 dr

and the inequality reads ``c lhs <= c mid <= rhs`` with ``c = (m^2 - a^2)/m^2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (Channel, RadialGrid, ValidationError, channels_up_to, decay_rate,
                   log_grid, sigma_dot)
from .radial import (RadialOperator, RadialSpinor, apply_radial_dirac, radial_residual)


def hardy_constant(a: float, m: float = 1.0) -> float:
    return (m * m - a * a) / (m * m)


@dataclass(frozen=True)
class Attainer:
    """The equality case psi^a_C; ``C`` is a complex 2-vector, ``0 < |a| < m``."""

    a: float
    C: tuple = (1.0, 0.0)
    m: float = 1.0

    def __post_init__(self):
        if not abs(self.a) < self.m:
            raise ValidationError(f"|a| < m required, got a={self.a}")
        C = tuple(complex(c) for c in self.C)
        if len(C) != 2 or not any(C):
            raise ValidationError("C must be a nonzero complex 2-vector")
        object.__setattr__(self, "C", C)

    @property
    def lam(self) -> float:
        return decay_rate(self.a, self.m)

    @property
    def ratio_magnitude(self) -> float:
        """sqrt((m - |a|)/(m + |a|)), the N of the rigidity construction."""
        b = abs(self.a)
        return float(np.sqrt((self.m - b) / (self.m + b)))

    @property
    def k(self) -> int:
        return -1 if self.a >= 0 else 1

    def radial_profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.exp(-self.lam * r) * r ** (abs(self.a) / self.m)

    def spinor(self, x) -> np.ndarray:
        """psi^a_C(x) for x of shape (..., 3); the decaying exponential is used."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        xhat = x / r[..., None]
        C = np.asarray(self.C)
        prof = (np.exp(-self.lam * r) * r ** (abs(self.a) / self.m - 1.0))[..., None]
        phi = prof * C
        chi = 1j * self.ratio_magnitude * np.einsum("...ab,...b->...a", sigma_dot(xhat), phi)
        if self.a >= 0:
            return np.concatenate([phi, chi], axis=-1)
        return np.concatenate([-chi, phi], axis=-1)

    @property
    def reconstruction_phase(self) -> complex:
        """Constant c with reconstruct(attainer_radial(att)) = c * psi^a_C."""
        return (1j if self.a >= 0 else 1.0) / np.sqrt(4 * np.pi)


def attainer_radial(att: Attainer, grid: RadialGrid) -> list[RadialSpinor]:
    """Channel data of the attainer: channels k = -sign(a), m_j = +1/2 and -1/2.

    For a > 0: f+ = C_m e^{-lam r} r^{a/m}, f- = -N f+.
    For a < 0 the roles swap: f- = C_m e^{-lam r} r^{|a|/m}, f+ = -N f-.
    """
    if att.a == 0:
        raise ValidationError("a = 0 has no attainer in L^2(|x|^-1); use verify_sharpness")
    g = att.radial_profile(grid.nodes)
    N = att.ratio_magnitude
    out = []
    for two_mj, c in ((1, att.C[0]), (-1, att.C[1])):
        ch = Channel(att.k, two_mj)
        if att.a > 0:
            out.append(RadialSpinor(ch, grid, c * g, -N * c * g))
        else:
            out.append(RadialSpinor(ch, grid, -N * c * g, c * g))
    return out


def _zero_a_attainer(grid: RadialGrid, m: float = 1.0) -> RadialSpinor:
    g = np.exp(-m * grid.nodes)
    return RadialSpinor(Channel(-1, 1), grid, g, -g)


@dataclass(frozen=True)
class HardyReport:
    lhs: float
    mid: float
    rhs: float
    a: float
    m: float = 1.0

    @property
    def constant(self) -> float:
        return hardy_constant(self.a, self.m)

    @property
    def slack_mid(self) -> float:
        return self.rhs - self.constant * self.mid

    @property
    def slack_lhs(self) -> float:
        return self.rhs - self.constant * self.lhs

    def holds(self, tol: float = 1e-8) -> bool:
        return self.slack_mid >= -tol and self.mid >= self.lhs - tol


def _free_image(u: RadialSpinor, a: float, m: float) -> RadialSpinor:
    return apply_radial_dirac(RadialOperator(u.k, None, m, a), u)


def _finite(value: float, what: str) -> float:
    if not np.isfinite(value):
        raise FloatingPointError(f"{what} is not finite")
    return float(value)


def hardy_functionals(channels: Sequence[RadialSpinor], a: float, m: float = 1.0) -> HardyReport:
    if not abs(a) < m:
        raise ValidationError(f"|a| < m required, got a={a}")
    lhs = mid = rhs = 0.0
    for u in channels:
        g = u.grid
        r = g.nodes
        w = float(np.real(g.integrate(u.density() / r)))
        lhs += w
        mid += u.k ** 2 * w
        rhs += float(np.real(g.integrate(r * _free_image(u, a, m).density())))
    return HardyReport(_finite(lhs, "lhs"), _finite(mid, "mid"), _finite(rhs, "rhs"), a, m)


def square_remainder(u: RadialSpinor, a: float, m: float = 1.0) -> RadialSpinor:
    """(T_k - a) f - i alpha.xhat (1 - (a/m) beta)(1 + 2 S.L) f / r in channel form."""
    img = _free_image(u, a, m)
    r = u.grid.nodes
    k = u.k
    top = img.f_plus - (1 + a / m) * k * u.f_minus / r
    bot = img.f_minus - (1 - a / m) * k * u.f_plus / r
    return RadialSpinor(u.channel, u.grid, top, bot)


def verify_square_identity(channels: Sequence[RadialSpinor], a: float, m: float = 1.0):
    """Return (rhs - c mid, int |x| |square remainder|^2) computed independently."""
    rep = hardy_functionals(channels, a, m)
    sq = 0.0
    for u in channels:
        rem = square_remainder(u, a, m)
        sq += float(np.real(u.grid.integrate(u.grid.nodes * rem.density())))
    return rep.slack_mid, _finite(sq, "square integral")


@dataclass(frozen=True)
class SharpnessResult:
    a: float
    m: float
    ratio: float | None = None
    eps: tuple = ()
    differences: tuple = ()
    lhs_truncated: tuple = ()


def verify_sharpness(a: float, m: float = 1.0, grid: RadialGrid | None = None,
                     eps_values: Iterable[float] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5),
                     n: int = 4000) -> SharpnessResult:
    """rhs/lhs on the attainer for a != 0; truncated differences for a = 0.

    For a = 0 each entry is int_{|x|>eps} (|x| |H0 psi|^2 - |psi|^2/|x|) dx evaluated
    on a log grid starting at eps.
    """
    if not abs(a) < m:
        raise ValidationError(f"|a| < m required, got a={a}")
    if a != 0:
        att = Attainer(a, (1.0, 0.0), m)
        if grid is None:
            grid = log_grid(1e-6, 40.0 / att.lam, n)
        rep = hardy_functionals(attainer_radial(att, grid), a, m)
        return SharpnessResult(a, m, ratio=rep.rhs / rep.lhs)
    eps_values = tuple(float(e) for e in eps_values)
    r_max = 40.0 / m if grid is None else grid.r_max
    diffs, lhss = [], []
    for eps in eps_values:
        g = log_grid(eps, r_max, n)
        rep = hardy_functionals([_zero_a_attainer(g, m)], 0.0, m)
        diffs.append(rep.rhs - rep.lhs)
        lhss.append(rep.lhs)
    return SharpnessResult(a, m, eps=eps_values, differences=tuple(diffs), lhs_truncated=tuple(lhss))


def attainer_coulomb_residual(nu: float, sign: int = 1, m: float = 1.0, n: int = 4000,
                              C=(1.0, 0.0)) -> float:
    """Relative channel residual of (T_k - sign nu/r - a) on psi^a_C with a = sign m sqrt(1-nu^2)."""
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1")
    a = sign * m * np.sqrt(1 - nu * nu)
    att = Attainer(a, C, m)
    grid = log_grid(1e-6, 40.0 / att.lam, n)
    worst = 0.0
    for u in attainer_radial(att, grid):
        if u.norm2() == 0:
            continue
        op = RadialOperator(u.k, lambda r: -sign * nu / r, m, a)
        worst = max(worst, radial_residual(op, u))
    return worst


# ---------------------------------------------------------------------------
# Random smooth test data
# ---------------------------------------------------------------------------

def bump(r, r1: float, r2: float) -> np.ndarray:
    """C-infinity bump supported on (r1, r2)."""
    r = np.asarray(r, dtype=float)
    s = (2 * r - (r1 + r2)) / (r2 - r1)
    out = np.zeros_like(r)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def random_channel_data(rng: np.random.Generator, grid: RadialGrid, kmax: int = 3,
                        max_channels: int = 4, degree: int = 3) -> list[RadialSpinor]:
    """Random bump-times-polynomial profiles on a few channels with |k| <= kmax."""
    pool = channels_up_to(kmax)
    count = int(rng.integers(1, max_channels + 1))
    picks = rng.choice(len(pool), size=count, replace=False)
    r = grid.nodes
    out = []
    for i in sorted(picks):
        r1 = float(rng.uniform(0.05, 1.0))
        r2 = r1 * float(rng.uniform(3.0, 20.0))
        b = bump(r, r1, r2)
        s = (r - r1) / (r2 - r1)
        comps = []
        for _ in range(2):
            coef = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
            comps.append(b * np.polyval(coef, s))
        out.append(RadialSpinor(pool[i], grid, comps[0], comps[1]))
    return out
