"""Gap eigenvalues of the channel-reduced Dirac operator by Pruefer-angle shooting.

Writing ``(f+, f-) = rho (cos theta, sin theta)`` turns ``(T_k - a) f = 0`` into

    theta'    = m cos 2theta - a + v(r) + (k/r) sin 2theta
    (ln rho)' = m sin 2theta - (k/r) cos 2theta

The regular solution is shot outward from a Frobenius seed, the decaying one
inward from an asymptotic seed. The mismatch ``theta_out(r*) - theta_in(r*)`` is
strictly decreasing in ``a`` and hits a multiple of pi exactly at eigenvalues,
which gives both bracketing and an exact count of eigenvalues in a window.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import Channel, RadialGrid, ValidationError, log_grid
from .radial import IntegrationError, RadialOperator, RadialSpinor, radial_residual

Potential = Optional[Callable[[np.ndarray], np.ndarray]]

R0 = 1e-7
TOL = 1e-12
DECAY_LENGTHS = 36.0
R_CAP = 4000.0
EIGEN_GRID_N = 4000
RESIDUAL_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class EigenResult:
    a: float
    k: int
    node_count: int
    eigenfunction: RadialSpinor
    residual: float
    index: int = 0  # position of the root among multiples of pi in the window scan
    multiplicity: int = 0  # 2j + 1 = 2|k|, counted analytically

    @property
    def channel(self) -> Channel:
        return self.eigenfunction.channel


def _v(v: Potential, r):
    return 0.0 if v is None else float(v(r))


def coulomb(nu: float) -> Callable[[np.ndarray], np.ndarray]:
    """v(r) = -nu / r."""
    def v(r):
        return -nu / np.asarray(r, dtype=float)
    v.nu = nu
    return v


def softened_coulomb(nu: float, scale: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """v(r) = -nu (1 - e^{-r/scale}) / r."""
    def v(r):
        r = np.asarray(r, dtype=float)
        return -nu * (-np.expm1(-r / scale)) / r
    v.nu = nu
    return v


def coupling_at_origin(v: Potential, r0: float = R0) -> float:
    """nu0 = -lim r v(r), estimated at r0."""
    return -r0 * _v(v, r0)


def frobenius_angle(k: int, nu0: float) -> float:
    """Angle of the regular solution r^gamma (x, y) at the origin, gamma = sqrt(k^2 - nu0^2)."""
    if abs(nu0) >= abs(k):
        raise ValidationError(f"coupling {nu0} too strong for channel k={k}")
    gamma = np.sqrt(k * k - nu0 * nu0)
    v1 = np.array([nu0, k + gamma])
    v2 = np.array([k - gamma, nu0])
    x, y = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    return float(np.arctan2(y, x))


def decaying_angle(a: float, m: float = 1.0) -> float:
    """Angle of the e^{-lam r} solution at infinity, in (-pi/2, 0)."""
    return float(-np.arctan(np.sqrt((m - a) / (m + a))))


def turning_radius(v: Potential, a: float, m: float = 1.0, r_min: float = 1e-3, r_max: float = 1e3) -> float | None:
    """Largest r with |v(r)| >= m - |a|, or None."""
    if v is None:
        return None
    rs = np.geomspace(r_max, r_min, 400)
    vals = np.abs(np.asarray(v(rs), dtype=float))
    hit = np.nonzero(vals >= m - abs(a))[0]
    if len(hit) == 0:
        return None
    i = hit[0]
    if i == 0:
        return float(rs[0])
    f = lambda r: abs(_v(v, r)) - (m - abs(a))
    return float(brentq(f, rs[i], rs[i - 1]))


class ShootingProblem:
    """Pruefer shooting for one channel, fixed potential and fixed matching geometry."""

    def __init__(self, v: Potential, k: int, window: tuple[float, float], m: float = 1.0,
                 r0: float = R0, tol: float = TOL, r_match: float | None = None,
                 r_far: float | None = None):
        a_lo, a_hi = window
        if not (-m < a_lo < a_hi < m):
            raise ValidationError(f"window must satisfy -m < a_lo < a_hi < m, got {window}")
        if k == 0:
            raise ValidationError("k must be nonzero")
        self.v, self.k, self.m, self.r0, self.tol = v, k, m, r0, tol
        self.window = (float(a_lo), float(a_hi))
        self.nu0 = coupling_at_origin(v, r0)
        self.theta0 = frobenius_angle(k, self.nu0)
        if r_match is None:
            # Smallest turning radius over the window keeps r* inside every allowed region.
            a_near = 0.0 if a_lo < 0 < a_hi else min(a_lo, a_hi, key=abs)
            rt = turning_radius(v, a_near, m)
            r_match = 1.0 if rt is None else rt
        self.r_match = float(max(r_match, 100 * r0))
        self._r_far = r_far

    def far_radius(self, a: float) -> float:
        """Start of the inward integration; the seed error decays like exp(-2 lam (R - r))."""
        if self._r_far is not None:
            return float(self._r_far)
        lam = math.sqrt(self.m * self.m - a * a)
        return float(min(2 * self.r_match + DECAY_LENGTHS / lam + 20.0, R_CAP))

    # theta and ln rho as functions of t = ln r
    def _rhs(self, a):
        m, k, v = self.m, self.k, self.v

        def f(t, y):
            r = math.exp(t)
            s2, c2 = math.sin(2 * y[0]), math.cos(2 * y[0])
            return [r * (m * c2 - a + _v(v, r)) + k * s2, r * m * s2 - k * c2]

        return f

    def _rhs_theta(self, a):
        m, k, v = self.m, self.k, self.v

        def f(t, y):
            r = math.exp(t)
            th2 = 2 * y[0]
            return [r * (m * math.cos(th2) - a + _v(v, r)) + k * math.sin(th2)]

        return f

    def _solve(self, f, t0, t1, y0, t_eval=None):
        sol = solve_ivp(f, (t0, t1), y0, method="DOP853", rtol=self.tol, atol=self.tol,
                        t_eval=t_eval)
        if sol.status != 0:
            raise IntegrationError(f"shooting integration failed: {sol.message}",
                                   float(np.exp(sol.t[-1])))
        return sol

    def mismatch(self, a: float) -> float:
        """theta_out(r*) - theta_in(r*): strictly decreasing in a."""
        f = self._rhs_theta(a)
        t0, tm, t1 = math.log(self.r0), math.log(self.r_match), math.log(self.far_radius(a))
        th_out = self._solve(f, t0, tm, [self.theta0]).y[0, -1]
        th_in = self._solve(f, t1, tm, [decaying_angle(a, self.m)]).y[0, -1]
        return float(th_out - th_in)

    def count_in_window(self, window: tuple[float, float] | None = None) -> list[int]:
        """Integers j with mismatch(a) = j pi for some a in the open window (ascending a)."""
        lo, hi = window or self.window
        d_lo = self.mismatch(lo)
        d_hi = self.mismatch(hi)
        j_hi = int(np.floor(d_lo / np.pi))
        j_lo = int(np.ceil(d_hi / np.pi))
        js = [j for j in range(j_hi, j_lo - 1, -1) if d_hi < j * np.pi < d_lo]
        return js

    def root(self, j: int, bracket: tuple[float, float] | None = None) -> float:
        lo, hi = bracket or self.window
        g = lambda a: self.mismatch(a) - j * np.pi
        return float(brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))

    def eigenfunction(self, a: float, grid: RadialGrid) -> RadialSpinor:
        """Matched, L2-normalised solution at energy a sampled on ``grid``."""
        r = grid.nodes
        t = np.log(r)
        tm = np.log(self.r_match)
        f = self._rhs(a)
        inner = t <= tm
        t_out = np.concatenate([t[inner], [tm]])
        t_in = np.concatenate([[tm], t[~inner]])
        so = self._solve(f, np.log(self.r0), tm, [self.theta0, 0.0], t_eval=t_out)
        si = self._solve(f, t[-1] if t[-1] > tm else tm + 1e-12, tm,
                         [decaying_angle(a, self.m), 0.0], t_eval=t_in[::-1])
        th_o, lr_o = so.y
        th_i, lr_i = si.y[:, ::-1]
        # Shift the inner branch by a multiple of pi and a log-amplitude constant.
        shift = np.pi * np.round((th_o[-1] - th_i[0]) / np.pi)
        th_i = th_i + shift
        lr_i = lr_i + (lr_o[-1] - lr_i[0])
        theta = np.concatenate([th_o[:-1], th_i[1:]])
        lrho = np.concatenate([lr_o[:-1], lr_i[1:]])
        lrho = lrho - np.max(lrho)
        rho = np.exp(lrho)
        fp, fm = rho * np.cos(theta), rho * np.sin(theta)
        u = RadialSpinor(Channel(self.k, 1 if self.k > 0 else -1), grid, fp, fm)
        return u.scaled(1.0 / np.sqrt(u.norm2()))


def count_nodes(values: np.ndarray, rel_floor: float = 1e-10) -> int:
    """Sign changes of a real sequence, ignoring samples below rel_floor * max."""
    vals = np.real(values)
    keep = np.abs(vals) > rel_floor * np.max(np.abs(vals))
    s = np.sign(vals[keep])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def solve_channel(v: Potential, k: int, window: tuple[float, float] | None = None,
                  n_states: int | None = None, m: float = 1.0, grid_n: int = EIGEN_GRID_N,
                  tol: float = TOL, residual_tol: float = RESIDUAL_TOL) -> list[EigenResult]:
    """Eigenvalues of T_k + v in the window, ascending, at most ``n_states`` of them."""
    if window is None:
        window = (-m * (1 - 1e-6), m * (1 - 1e-6))
    prob = ShootingProblem(v, k, window, m, tol=tol)
    a_lo, a_hi = prob.window
    # Grow the upper end towards a_hi until enough levels are enclosed.
    top = a_hi
    if n_states is not None:
        gap = m - a_lo
        for frac in (0.5, 0.2, 0.05, 0.01, 1e-3, 1e-4, 1e-5, 0.0):
            top = max(min(m - frac * gap, a_hi), a_lo + 1e-12) if frac else a_hi
            if len(prob.count_in_window((a_lo, top))) >= n_states or top >= a_hi:
                break
    js = prob.count_in_window((a_lo, top))
    if n_states is not None:
        js = js[:n_states]
    results = []
    lo = a_lo
    for j in js:
        a = prob.root(j, (lo, top))
        lo = a
        # Eigenfunction with matching geometry adapted to this level.
        rt = turning_radius(v, a, m)
        local = ShootingProblem(v, k, (a - 1e-9, min(a + 1e-9, m * (1 - 1e-15))), m, tol=tol,
                                r_match=1.0 if rt is None else rt)
        grid = log_grid(local.r0, local.far_radius(a), grid_n)
        u = local.eigenfunction(a, grid)
        res = radial_residual(RadialOperator(k, v, m, a), u)
        if res > residual_tol:
            raise IntegrationError(f"eigenfunction residual {res:.3e} exceeds {residual_tol:.1e}", local.r_match)
        results.append(EigenResult(a, k, count_nodes(u.f_plus), u, res, j, 2 * abs(k)))
    return results


@dataclass(frozen=True)
class MergedLevel:
    a: float
    members: tuple  # EigenResult from every channel sharing this energy
    multiplicity: int  # sum of 2|k| over members
    first_state: int  # 1-based position counting multiplicity


def merge_levels(results: Sequence[EigenResult], cluster: float = 1e-8) -> list[MergedLevel]:
    """Merge channel-resolved eigenvalues into one ascending list of distinct levels."""
    ordered = sorted(results, key=lambda e: (e.a, e.k))
    groups: list[list[EigenResult]] = []
    for e in ordered:
        if groups and abs(e.a - groups[-1][-1].a) <= cluster:
            groups[-1].append(e)
        else:
            groups.append([e])
    out, count = [], 1
    for g in groups:
        mult = sum(e.multiplicity for e in g)
        out.append(MergedLevel(float(np.mean([e.a for e in g])), tuple(g), mult, count))
        count += mult
    return out


def solve_channels(v: Potential, ks: Sequence[int], window=None, n_states: int | None = None,
                   m: float = 1.0, workers: int = 1) -> list[EigenResult]:
    """solve_channel over several channels; results in channel order then energy."""
    ks = list(ks)
    if workers > 1 and len(ks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda k: solve_channel(v, k, window, n_states, m), ks))
    else:
        parts = [solve_channel(v, k, window, n_states, m) for k in ks]
    return [e for part in parts for e in part]


def sommerfeld(nu: float, k: int, n_r: int, m: float = 1.0) -> float:
    """Closed-form Dirac-Coulomb level for v = -nu/r; n_r >= 0 (n_r >= 1 when k > 0)."""
    if k > 0 and n_r < 1:
        raise ValidationError("k > 0 requires n_r >= 1")
    gamma = np.sqrt(k * k - nu * nu)
    return float(m / np.sqrt(1 + (nu / (n_r + gamma)) ** 2))


def sommerfeld_levels(nu: float, k: int, count: int, m: float = 1.0) -> list[float]:
    start = 1 if k > 0 else 0
    return [sommerfeld(nu, k, n, m) for n in range(start, start + count)]


# ---------------------------------------------------------------------------
# Verification helpers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LowerBoundReport:
    nu: float
    bound: float
    margins: tuple
    eigenvalues: tuple
    tol: float
    passed: bool
    offending: tuple = ()


def sampled_coupling(v: Potential, r_min: float = 1e-6, r_max: float = 1e3, n: int = 2000) -> float:
    """sup r |v(r)| over log-spaced samples."""
    if v is None:
        return 0.0
    rs = np.geomspace(r_min, r_max, n)
    return float(np.max(rs * np.abs(np.asarray(v(rs), dtype=float))))


def verify_lower_bound(nu: float, results: Sequence[EigenResult], m: float = 1.0,
                       tol: float = 1e-6, v: Potential = None) -> LowerBoundReport:
    """Check |a| >= m sqrt(1 - nu^2) - tol for each eigenvalue."""
    if v is not None:
        sup = sampled_coupling(v)
        if sup > nu + 1e-10:
            raise ValidationError(f"sampled sup r|v| = {sup} exceeds nu = {nu}")
    bound = m * np.sqrt(1 - nu * nu)
    eig = tuple(float(r.a) for r in results)
    margins = tuple(abs(a) - bound for a in eig)
    bad = tuple(a for a, g in zip(eig, margins) if g < -tol)
    return LowerBoundReport(nu, float(bound), margins, eig, tol, not bad, bad)


@dataclass(frozen=True)
class SymmetryReport:
    a: float
    mirrored: float | None
    difference: float
    passed: bool


def symmetry_check(v: Potential, k: int, a: float | None, m: float = 1.0, tol: float = 1e-6,
                   halfwidth: float = 1e-3) -> SymmetryReport:
    """Confirm -a is an eigenvalue of T_{-k} - v when a is one of T_k + v."""
    if v is None or a is None:
        return SymmetryReport(float("nan") if a is None else a, None, 0.0, True)
    neg = lambda r: -np.asarray(v(r), dtype=float)
    lo = max(-a - halfwidth, -m * (1 - 1e-9))
    hi = min(-a + halfwidth, m * (1 - 1e-9))
    found = solve_channel(neg, -k, (lo, hi), m=m)
    if not found:
        return SymmetryReport(a, None, float("inf"), False)
    best = min(found, key=lambda e: abs(e.a + a))
    diff = abs(best.a + a)
    return SymmetryReport(a, best.a, diff, diff <= tol)


def random_admissible_potential(rng: np.random.Generator, nu: float, terms: int = 3):
    """v = -nu s(r)/r with 0 <= s <= 1 built from a random convex mix of smooth profiles."""
    w = rng.dirichlet(np.ones(terms))
    scales = rng.uniform(0.2, 5.0, size=terms)
    kinds = rng.integers(0, 3, size=terms)

    def s(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for wi, sc, kd in zip(w, scales, kinds):
            x = r / sc
            if kd == 0:
                prof = -np.expm1(-x)
            elif kd == 1:
                prof = np.exp(-x)
            else:
                prof = 1.0 / (1.0 + x * x)
            out = out + wi * prof
        return out

    def v(r):
        r = np.asarray(r, dtype=float)
        return -nu * s(r) / r

    v.nu = nu
    return v
