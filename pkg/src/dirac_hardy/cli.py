"""Command-line driver: ``dirac-hardy <command> [--key value]... [--config path] [--out path]``.

Every command writes CSV (header row, ``#`` provenance preamble, 17 significant
digits, LF line endings). Exit status: 0 all checks pass, 1 a check failed,
2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from .core import ValidationError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Parameter schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    kind: Callable[[str], Any]
    default: Any = None
    check: Callable[[Any], str | None] | None = None  # returns an error message or None
    help: str = ""


def _open_unit(name):
    return lambda v: None if -1 < v < 1 else f"{name} must satisfy |{name}| < m = 1 (got {v})"


def _nu(v):
    return None if 0 < v < 1 else f"0 < nu < 1 required (got {v})"


def _positive(name):
    return lambda v: None if v > 0 else f"{name} must be positive (got {v})"


def _at_least(name, lo):
    return lambda v: None if v >= lo else f"{name} must be >= {lo} (got {v})"


def _choice(name, options):
    return lambda v: None if v in options else f"{name} must be one of {', '.join(options)} (got {v})"


def _nonzero(v):
    return None if v != 0 else "k must be a nonzero integer"


def _sign(v):
    return None if v in (1, -1) else f"sign must be +1 or -1 (got {v})"


COMMON = {
    "m": Param(float, 1.0, _positive("m"), "mass"),
}

SCHEMAS: dict[str, dict[str, Param]] = {
    "hardy-verify": {
        "a": Param(float, 0.5, None, "spectral parameter"),
        "trials": Param(int, 200, _at_least("trials", 1)),
        "seed": Param(int, 0),
        "kmax": Param(int, 3, _at_least("kmax", 1)),
        "n": Param(int, 3000, _at_least("n", 16), "radial nodes"),
    },
    "hardy-sharpness": {
        "a": Param(float, 0.8),
        "n": Param(int, 4000, _at_least("n", 16)),
    },
    "spectrum": {
        "nu": Param(float, None, _nu),
        "k": Param(int, None, _nonzero),
        "kmax": Param(int, None, _at_least("kmax", 1), "solve all channels |k| <= kmax and merge"),
        "n-states": Param(int, 1, _at_least("n-states", 1)),
        "window-lo": Param(float, None),
        "window-hi": Param(float, None),
        "potential": Param(str, "coulomb", _choice("potential", ("coulomb", "softened"))),
        "scale": Param(float, 1.0, _positive("scale"), "softening length"),
    },
    "bs-scan": {
        "nu": Param(float, None, _nu),
        "k": Param(int, -1, _nonzero),
        "a-lo": Param(float, 0.8),
        "a-hi": Param(float, 0.99),
        "points": Param(int, 100, _at_least("points", 0)),
        "n": Param(int, 400, _at_least("n", 16)),
        "tol": Param(float, 1e-3, _positive("tol"), "crossing/solver agreement"),
    },
    "rigidity-check": {
        "nu": Param(float, None, _nu),
        "sign": Param(int, 1, _sign),
        "w": Param(str, "zero", _choice("w", ("zero", "boundary", "diagonal", "generic", "violating",
                                              "screened"))),
        "samples": Param(int, 20, _at_least("samples", 1)),
        "seed": Param(int, 0),
    },
    "fundsol-check": {
        "a": Param(float, 0.0),
        "points": Param(int, 50, _at_least("points", 1)),
        "seed": Param(int, 0),
        "tol": Param(float, 1e-5, _positive("tol")),
    },
}

ENERGY_KEYS = {"hardy-verify": ["a"], "hardy-sharpness": ["a"], "fundsol-check": ["a"],
               "spectrum": ["window-lo", "window-hi"], "bs-scan": ["a-lo", "a-hi"]}


@dataclass
class RunConfig:
    command: str
    params: dict[str, Any]
    output: str | None = None
    sources: dict[str, str] = field(default_factory=dict)


def _normalise(key: str) -> str:
    return key.strip().replace("_", "-").lower()


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``[section]`` headers become ``section.`` key prefixes."""
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), interpolation=None,
                                       default_section="\x00")
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[\x01]\n" + fh.read(), source=path)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        prefix = "" if section == "\x01" else _normalise(section) + "."
        for key, value in parser.items(section):
            out[prefix + _normalise(key)] = value.strip()
    return out


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirac-hardy", description="Hardy inequality and Dirac spectral checks")
    p.add_argument("--version", action="version", version=f"dirac-hardy {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        for key, prm in {**COMMON, **schema}.items():
            sp.add_argument(f"--{key}", dest=key, default=None, help=prm.help or None)
        sp.add_argument("--config", default=None)
        sp.add_argument("--out", default=None)
    return p


def parse_config(argv: list[str]) -> RunConfig:
    """Resolve flags over config-file values over defaults, then validate."""
    parser = _build_parser()
    ns = parser.parse_args(argv)  # exits with status 2 on malformed input
    command = ns.command
    schema = {**COMMON, **SCHEMAS[command]}
    raw: dict[str, str] = {}
    sources: dict[str, str] = {}
    if ns.config:
        for key, value in read_config_file(ns.config).items():
            prefix, _, bare = key.rpartition(".")
            if prefix and prefix != command:
                if prefix in SCHEMAS:
                    continue  # belongs to another command
                raise UsageError(f"unknown config key: {key}")
            if bare not in schema:
                raise UsageError(f"unknown config key: {key}")
            raw[bare] = value
            sources[bare] = "file"
    for key in schema:
        value = getattr(ns, key)
        if value is not None:
            raw[key] = value
            sources[key] = "flag"
    params: dict[str, Any] = {}
    for key, prm in schema.items():
        if key in raw:
            try:
                value = prm.kind(raw[key])
            except ValueError:
                raise UsageError(f"{key}: cannot parse {raw[key]!r} as {prm.kind.__name__}") from None
        else:
            value = prm.default
            sources.setdefault(key, "default")
        params[key] = value
    _validate(command, params)
    return RunConfig(command, params, ns.out, sources)


def _validate(command: str, params: dict[str, Any]) -> None:
    schema = {**COMMON, **SCHEMAS[command]}
    for key, prm in schema.items():
        value = params[key]
        if value is None:
            if command == "spectrum" and key in ("k", "kmax", "window-lo", "window-hi"):
                continue
            raise UsageError(f"missing required key: {key}")
        if prm.check is not None:
            msg = prm.check(value)
            if msg:
                raise UsageError(f"{key}: {msg}")
    m = params["m"]
    for key in ENERGY_KEYS.get(command, []):
        value = params[key]
        if value is not None and not abs(value) < m:
            raise UsageError(f"{key}: |{key}| < m = {m} required (got {value})")
    if command == "spectrum":
        if (params["k"] is None) == (params["kmax"] is None):
            raise UsageError("k: give exactly one of --k or --kmax")
        lo, hi = params["window-lo"], params["window-hi"]
        if (lo is None) != (hi is None):
            raise UsageError("window-lo: give both window ends or neither")
        if lo is not None and not lo < hi:
            raise UsageError("window-lo: window-lo < window-hi required")
    if command == "bs-scan" and not params["a-lo"] < params["a-hi"]:
        raise UsageError("a-lo: a-lo < a-hi required")


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "pass" if value else "fail"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    notes: list[str] = field(default_factory=list)
    passed: bool = True


def render(config: RunConfig, table: Table) -> str:
    buf = io.StringIO()
    buf.write(f"# dirac-hardy {__version__} {config.command}\n")
    for key in sorted(config.params):
        buf.write(f"# config: {key} = {fmt(config.params[key]) if config.params[key] is not None else ''}\n")
    for note in table.notes:
        buf.write(f"# {note}\n")
    buf.write(f"# status: {'pass' if table.passed else 'fail'}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def worker_count() -> int:
    raw = os.environ.get("DIRAC_HARDY_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"DIRAC_HARDY_THREADS must be an integer (got {raw!r})") from None
    if n < 0:
        raise UsageError("DIRAC_HARDY_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _pool_map(fn, items):
    items = list(items)
    workers = min(worker_count(), max(len(items), 1))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _hardy_verify(p) -> Table:
    from .core import log_grid
    from .hardy import hardy_functionals, random_channel_data, verify_square_identity

    a, m = p["a"], p["m"]
    grid = log_grid(1e-3, 200.0, p["n"])
    seeds = np.random.SeedSequence(p["seed"]).spawn(p["trials"])

    def trial(item):
        i, ss = item
        chans = random_channel_data(np.random.default_rng(ss), grid, p["kmax"])
        rep = hardy_functionals(chans, a, m)
        slack, square = verify_square_identity(chans, a, m)
        rel = abs(slack - square) / max(abs(square), abs(slack), 1e-300)
        ok = rep.slack_mid >= -1e-8 and rep.mid >= rep.lhs - 1e-12 * rep.mid and rel <= 1e-6
        return [i, len(chans), rep.lhs, rep.mid, rep.rhs, rep.slack_mid, rep.slack_lhs, square, rel, ok]

    rows = sorted(_pool_map(trial, enumerate(seeds)), key=lambda r: r[0])
    return Table(["trial", "channels", "lhs", "mid", "rhs", "slack_mid", "slack_lhs", "square_integral",
                  "square_rel_diff", "status"], rows, [f"grid: {grid.describe()}", f"seed: {p['seed']}"],
                 all(r[-1] for r in rows))


def _hardy_sharpness(p) -> Table:
    from .hardy import hardy_constant, verify_sharpness

    a, m = p["a"], p["m"]
    res = verify_sharpness(a, m, n=p["n"])
    if a != 0:
        c = hardy_constant(a, m)
        rel = abs(res.ratio - c) / c
        ok = rel <= 1e-5
        return Table(["a", "ratio", "expected", "rel_error", "status"], [[a, res.ratio, c, rel, ok]],
                     [f"grid: log n={p['n']}"], ok)
    rows, ok = [], True
    for i, (eps, d, l) in enumerate(zip(res.eps, res.differences, res.lhs_truncated)):
        good = abs(d) <= 1e-10 * l and (i == 0 or abs(d) <= abs(res.differences[i - 1]) + 1e-10 * l)
        ok &= good
        rows.append([eps, d, l, good])
    return Table(["eps", "difference", "lhs_truncated", "status"], rows, [f"grid: log n={p['n']}"], ok)


def _spectrum(p) -> Table:
    from .spectrum import (coulomb, merge_levels, softened_coulomb, solve_channels, sommerfeld,
                           verify_lower_bound)

    nu, m = p["nu"], p["m"]
    v = coulomb(nu) if p["potential"] == "coulomb" else softened_coulomb(nu, p["scale"])
    window = None if p["window-lo"] is None else (p["window-lo"], p["window-hi"])
    ks = [p["k"]] if p["k"] is not None else [s * q for q in range(1, p["kmax"] + 1) for s in (-1, 1)]
    results = solve_channels(v, ks, window, p["n-states"], m, workers=worker_count())
    lb = verify_lower_bound(nu, results, m)
    merged = merge_levels(results)
    level_of = {id(e): (i + 1, lvl.first_state) for i, lvl in enumerate(merged) for e in lvl.members}
    rows = []
    per_channel: dict[int, int] = {}
    for e in sorted(results, key=lambda e: (e.k, e.a)):
        per_channel[e.k] = per_channel.get(e.k, 0) + 1
        n_r = per_channel[e.k] - 1 + (1 if e.k > 0 else 0)
        oracle = sommerfeld(nu, e.k, n_r, m) if p["potential"] == "coulomb" and window is None else float("nan")
        merged_idx, first_state = level_of[id(e)]
        rows.append([e.k, per_channel[e.k], merged_idx, first_state, e.a, e.node_count, e.residual,
                     e.multiplicity, abs(e.a) - lb.bound, oracle])
    rows.sort(key=lambda r: (r[2], r[0]))
    notes = [f"potential: {p['potential']}", f"lower_bound: {lb.bound:.17g}"]
    return Table(["k", "channel_index", "merged_index", "merged_first_state", "a", "node_count", "residual",
                  "multiplicity", "gap_margin", "sommerfeld"], rows, notes, lb.passed)


def _bs_scan(p) -> Table:
    from .birman_schwinger import bs_grid, bs_matrix, multiplicity_at
    from .spectrum import coulomb, solve_channel

    nu, k, m = p["nu"], p["k"], p["m"]
    if p["points"] == 0:
        return Table(["kind", "a", "distance", "nearest_real", "nearest_imag", "algebraic", "geometric"], [],
                     ["empty a grid"], True)
    a_values = np.linspace(p["a-lo"], p["a-hi"], p["points"])
    V = coulomb(nu)
    grid = bs_grid(a_values, m, p["n"])

    def point(a):
        K = bs_matrix(V, k, a, grid, m).entries
        ev = np.linalg.eigvals(K)
        j = int(np.argmin(np.abs(ev + 1)))
        sign, _ = np.linalg.slogdet(np.eye(len(K)) + K)
        return float(a), float(abs(ev[j] + 1)), complex(ev[j]), float(np.real(sign))

    scan = sorted(_pool_map(point, a_values))
    from scipy.optimize import brentq

    def det_sign(a):
        K = bs_matrix(V, k, a, grid, m).entries
        sign, logdet = np.linalg.slogdet(np.eye(len(K)) + K)
        return float(np.real(sign)) * float(np.exp(logdet / len(K)))

    brackets = [(scan[i][0], scan[i + 1][0]) for i in range(len(scan) - 1) if scan[i][3] * scan[i + 1][3] < 0]

    def refine(br):
        a_star = brentq(det_sign, *br, xtol=1e-12)
        return (a_star,) + multiplicity_at(V, k, a_star, grid, m)

    crossings = sorted(_pool_map(refine, brackets))
    eig = [e.a for e in solve_channel(V, k, (p["a-lo"], p["a-hi"]), m=m)]
    ok = len(eig) == len(crossings) and all(abs(c[0] - e) <= p["tol"] for c, e in zip(crossings, eig))
    ok &= all(c[1] == 1 and c[2] == 1 for c in crossings)
    rows = [["scan", a, d, z.real, z.imag, "", ""] for a, d, z, _ in scan]
    rows += [["crossing", a, "", "", "", alg, geo] for a, alg, geo in crossings]
    rows += [["solver", a, "", "", "", 1, 1] for a in eig]
    notes = [f"grid: {grid.describe()}", f"solver_eigenvalues: {len(eig)}", f"crossings: {len(crossings)}",
             f"channel multiplicity per level: {2 * abs(k)}"]
    return Table(["kind", "a", "distance", "nearest_real", "nearest_imag", "algebraic", "geometric"], rows,
                 notes, ok)


def _rigidity_check(p) -> Table:
    from .rigidity import (builtin_spec, check_eigen_relations, check_norm_bound, rigid_potential_field,
                           sample_points, screened_coulomb_matrix, verify_threshold_eigenfunction,
                           window_violations)

    nu, sign, m = p["nu"], p["sign"], p["m"]
    xs = sample_points(np.random.default_rng(p["seed"]), p["samples"])
    rows = []
    if p["w"] == "screened":
        V = screened_coulomb_matrix(nu, sign)
        nb = check_norm_bound(V, nu, xs)
        th = verify_threshold_eigenfunction(V, nu, sign, m)
        rows.append(["norm_bound", nb.max_value, nu, nb.passed])
        rows.append(["hermitian", nb.hermitian_error, 1e-14, nb.hermitian_error <= 1e-14])
        for i, (pw, rb) in enumerate(zip(th.pointwise, th.residual_bound)):
            rows.append([f"threshold_pointwise_C{i + 1}", pw, 1e-9, pw <= 1e-9])
            rows.append([f"threshold_residual_C{i + 1}", rb, 1e-6, rb <= 1e-6])
        rows.append(["threshold_multiplicity", th.multiplicity, 2, th.multiplicity == 2])
    else:
        spec = builtin_spec(p["w"], nu, sign, m, p["seed"])
        V = rigid_potential_field(spec)
        nb = check_norm_bound(V, nu, xs)
        viol = window_violations(spec, xs)
        rels = [check_eigen_relations(spec, x) for x in xs]
        worst_u = max(r.u_residual for r in rels)
        worst_v = max(r.v_residual for r in rels)
        worst_o = max(r.orthonormality for r in rels)
        th = verify_threshold_eigenfunction(spec)
        rows.append(["window", len(viol), 0, not viol])
        rows.append(["hermitian", nb.hermitian_error, 1e-14, nb.hermitian_error <= 1e-14])
        rows.append(["norm_bound", nb.max_value, nu, nb.passed])
        rows.append(["eigen_relation_u", worst_u, 1e-10, worst_u <= 1e-10])
        rows.append(["eigen_relation_v", worst_v, 1e-10, worst_v <= 1e-10])
        rows.append(["orthonormality", worst_o, 1e-10, worst_o <= 1e-10])
        for i, (pw, rb) in enumerate(zip(th.pointwise, th.residual_bound)):
            rows.append([f"threshold_pointwise_C{i + 1}", pw, 1e-9, pw <= 1e-9])
            rows.append([f"threshold_residual_C{i + 1}", rb, 1e-6, rb <= 1e-6])
        rows.append(["threshold_multiplicity", th.multiplicity, 2, th.multiplicity == 2])
    notes = [f"seed: {p['seed']}", f"samples: {p['samples']}"]
    return Table(["check", "value", "tolerance", "status"], rows, notes, all(r[-1] for r in rows))


def _fundsol_check(p) -> Table:
    from .birman_schwinger import FundamentalSolution, fundamental_solution_residual, gaussian_convolution_check
    from .rigidity import sample_points

    fs = FundamentalSolution(p["a"], p["m"])
    xs = sample_points(np.random.default_rng(p["seed"]), p["points"], (0.5, 3.0))
    res = fundamental_solution_residual(fs, xs)
    rows = [["point", x[0], x[1], x[2], r, p["tol"], r <= p["tol"]] for x, r in zip(xs, res)]
    g = gaussian_convolution_check(fs)
    rows.append(["gaussian", 0.3, -0.2, 0.5, g, 0.05, g <= 0.05])
    return Table(["kind", "x", "y", "z", "residual", "tolerance", "status"], rows, [f"seed: {p['seed']}"],
                 all(r[-1] for r in rows))


COMMANDS = {
    "hardy-verify": _hardy_verify,
    "hardy-sharpness": _hardy_sharpness,
    "spectrum": _spectrum,
    "bs-scan": _bs_scan,
    "rigidity-check": _rigidity_check,
    "fundsol-check": _fundsol_check,
}


def run(config: RunConfig) -> tuple[int, str]:
    table = COMMANDS[config.command](config.params)
    return (EXIT_OK if table.passed else EXIT_FAIL), render(config, table)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
        worker_count()
    except UsageError as exc:
        print(f"dirac-hardy: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        status, text = run(config)
    except ValidationError as exc:
        print(f"dirac-hardy: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if config.output:
        with open(config.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status
