"""Command-line front end: ``thickslab {xtable,transmit,profile,mc,verify}``.

Exit codes: 0 success, 1 numerical failure, 2 usage error, 3 verification or
comparison failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .quad import Quadrature, QuadratureError
from .solver import (
    BOUNDARY_LAYER_WIDTH,
    SlabProblem,
    ThinSlabWarning,
    in_boundary_layer,
    interior_density,
    scalar_profile,
    solve_thick,
)
from .specfun import XFunction

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_FAILED = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """``"0,0.5,1"`` lists values; ``"start:stop:num"`` is an inclusive linspace."""
    text = text.strip()
    if not text:
        raise UsageError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range grid must be start:stop:num, got {text!r}")
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        if num < 1:
            raise UsageError("grid needs at least one point")
        return np.linspace(start, stop, num).tolist()
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None
    if not values:
        raise UsageError("empty grid")
    return values


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment, keys use underscores."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.10g}")
    return v


def render(columns, rows, meta, fmt) -> str:
    if fmt == "json":
        doc = {
            "meta": {k: _json_value(v) for k, v in meta.items()},
            "columns": list(columns),
            "rows": [{c: _json_value(v) for c, v in zip(columns, r)} for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def emit(args, columns, rows, meta):
    text = render(columns, rows, meta, args.format)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)


def _quad(args) -> Quadrature:
    return Quadrature(abs_tol=args.abs_tol, rel_tol=args.rel_tol)


def _meta(args, command, **extra):
    meta = {"thickslab_version": __version__, "command": command,
            "abs_tol": args.abs_tol, "rel_tol": args.rel_tol}
    meta.update(extra)
    return meta


def _problem(D, g1, mu0) -> SlabProblem:
    try:
        return SlabProblem(D, g1, mu0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _warn_g1(g1):
    if abs(g1) > 1.0 / 3.0:
        print(f"warning: |g1| = {abs(g1)} > 1/3 has no positive-kernel Monte Carlo "
              "validation", file=sys.stderr)


def cmd_xtable(args) -> int:
    grid = parse_grid(args.mu)
    if any(not 0.0 <= m <= 1.0 for m in grid):
        raise UsageError("mu grid must lie in [0, 1]")
    if not 0.0 < args.c <= 1.0:
        raise UsageError("albedo c must lie in (0, 1]")
    xf = XFunction(c=args.c, quad=_quad(args), cached=False)
    mu = np.array(grid)
    x = xf(mu)
    if args.c == 1.0:
        rows = [(m, xv, math.sqrt(3.0) / xv, 1.5 * m / xv) for m, xv in zip(mu, x)]
        columns = ("mu", "X(-mu)", "H(mu)", "gamma(mu)")
    else:
        rows = list(zip(mu, x))
        columns = ("mu", "X(-mu)")
    emit(args, columns, rows, _meta(args, "xtable", c=args.c))
    return EXIT_OK


def cmd_transmit(args) -> int:
    xf = XFunction(quad=_quad(args))
    _warn_g1(args.g1)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThinSlabWarning)
        for D in parse_grid(args.D):
            for mu0 in parse_grid(args.mu0):
                p = _problem(D, args.g1, mu0)
                s = solve_thick(p, xf)
                rows.append((D, args.g1, mu0, s.j, s.a_s, s.j, s.z0, p.thick_slab_valid))
    emit(args, ("D", "g1", "mu0", "T", "a_s", "j", "z0", "thick_slab_valid"), rows,
         _meta(args, "transmit"))
    return EXIT_OK


def cmd_profile(args) -> int:
    xf = XFunction(quad=_quad(args))
    _warn_g1(args.g1)
    p = _problem(args.D, args.g1, args.mu0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThinSlabWarning)
        s = solve_thick(p, xf)
    zs = parse_grid(args.z) if args.z else np.linspace(0.0, p.D, 21).tolist()
    mus = parse_grid(args.mu)
    if any(not 0.0 <= z <= p.D for z in zs):
        raise UsageError(f"z grid must lie in [0, {p.D}]")
    if any(abs(m) > 1.0 for m in mus):
        raise UsageError("mu grid must lie in [-1, 1]")
    rows = []
    for z in zs:
        rho, current = scalar_profile(s, z)
        layer = in_boundary_layer(s, z)
        for mu in mus:
            rows.append((z, mu, interior_density(s, z, mu).value, rho, current, layer))
    emit(args, ("z", "mu", "f_asymptotic", "rho", "J", "in_boundary_layer"), rows,
         _meta(args, "profile", D=p.D, g1=p.g1, mu0=p.mu0, a_s=s.a_s, j=s.j, z0=s.z0,
               boundary_layer_width=BOUNDARY_LAYER_WIDTH))
    return EXIT_OK


def _write_tallies(result, directory: Path, fmt: str, meta):
    directory.mkdir(parents=True, exist_ok=True)
    f = result.angular_density()
    ze, me = result.z_edges, result.mu_edges
    rows = [(ze[i], ze[i + 1], me[k], me[k + 1], f[i, k])
            for i in range(f.shape[0]) for k in range(f.shape[1])]
    ext = "json" if fmt == "json" else "csv"
    (directory / f"interior.{ext}").write_text(
        render(("z_lo", "z_hi", "mu_lo", "mu_hi", "f"), rows, meta, fmt))
    rho, rho_err = result.scalar_density()
    cur, cur_err = result.net_current()
    rows = [(ze[i], ze[i + 1], rho[i], rho_err[i], cur[i], cur_err[i]) for i in range(len(rho))]
    (directory / f"profile.{ext}").write_text(
        render(("z_lo", "z_hi", "rho", "rho_stderr", "J", "J_stderr"), rows, meta, fmt))
    ee = result.exit_mu_edges
    rows = [(ee[k], ee[k + 1], result.exit_hist_transmit[k], result.exit_hist_reflect[k])
            for k in range(len(ee) - 1)]
    (directory / f"exits.{ext}").write_text(
        render(("abs_mu_lo", "abs_mu_hi", "transmitted", "reflected"), rows, meta, fmt))


def cmd_mc(args) -> int:
    from .mc import CollisionCapExceeded, McConfig, compare, run

    try:
        kwargs = dict(D=args.D, g1=args.g1, mu0=args.mu0, n_particles=args.n_particles,
                      seed=args.seed, z_bins=args.z_bins, mu_bins=args.mu_bins,
                      n_batches=args.n_batches)
        if args.workers is not None:
            kwargs["n_workers"] = args.workers
        config = McConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        result = run(config)
    except CollisionCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    summary = result.summary()
    meta = _meta(args, "mc", D=config.D, g1=config.g1, mu0=config.mu0,
                 n_particles=config.n_particles, seed=config.seed, z_bins=config.z_bins,
                 mu_bins=config.mu_bins, n_batches=config.n_batches)
    rows = [(k, summary[k]) for k in ("transmitted_fraction", "transmitted_stderr",
                                      "reflected_fraction", "reflected_stderr", "n_transmitted",
                                      "n_reflected", "n_collisions_total")]
    status = EXIT_OK
    if args.compare:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ThinSlabWarning)
            s = solve_thick(_problem(config.D, config.g1, config.mu0), XFunction(quad=_quad(args)))
        report = compare(result, s, transmission_tol=args.transmission_tol,
                         slope_tol=args.slope_tol)
        rows.append(("analytic_j_over_mu0", s.transmitted_fraction))
        for c in report.checks:
            rows.append((f"check: {c.name}", c.measured))
            rows.append((f"check: {c.name} [tolerance]", c.tolerance))
            rows.append((f"check: {c.name} [status]", "PASS" if c.passed else "FAIL"))
        for note in report.notices:
            rows.append(("notice", note))
        for c in report.checks:
            print(c.line(), file=sys.stderr)
        if not report.passed:
            status = EXIT_FAILED
    emit(args, ("quantity", "value"), rows, meta)
    if args.tally_dir:
        _write_tallies(result, Path(args.tally_dir), args.format, meta)
    return status


def cmd_verify(args) -> int:
    from .verify import DEFAULT_TOLERANCES, run_all

    overrides = {}
    for item in args.tol or ():
        key, _, value = item.partition("=")
        if key not in DEFAULT_TOLERANCES or not value:
            raise UsageError(f"--tol expects NAME=VALUE with NAME in {sorted(DEFAULT_TOLERANCES)}")
        overrides[key] = float(value)
    checks = run_all(overrides, _quad(args))
    rows = [(c.name, c.measured, c.expected, c.tolerance, "PASS" if c.passed else "FAIL")
            for c in checks]
    emit(args, ("check", "measured", "expected", "tolerance", "status"), rows,
         _meta(args, "verify"))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


# option name -> (type, default); subcommand options left at None fall back to
# the config file, then to these defaults
DEFAULTS = {
    "format": (str, "csv"),
    "output": (str, None),
    "abs_tol": (float, 1e-10),
    "rel_tol": (float, 1e-10),
    "c": (float, 1.0),
    "mu": (str, None),
    "D": (str, None),
    "g1": (float, 0.0),
    "mu0": (str, "1"),
    "z": (str, None),
    "n_particles": (int, 100_000),
    "seed": (int, 0),
    "workers": (int, None),
    "z_bins": (int, 40),
    "mu_bins": (int, 20),
    "n_batches": (int, 64),
    "transmission_tol": (float, 0.005),
    "slope_tol": (float, 0.02),
    "tally_dir": (str, None),
}

SUBCOMMAND_DEFAULTS = {
    "xtable": {"mu": "0:1:11"},
    "profile": {"mu": "-1:1:5", "D": "10", "mu0": "1"},
    "transmit": {"D": "10"},
    "mc": {"D": "10"},
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("-o", "--output", default=None, help="output file (default stdout)")
    common.add_argument("--config", default=None, help="flat key = value config file")
    common.add_argument("--abs-tol", type=float, default=None)
    common.add_argument("--rel-tol", type=float, default=None)

    parser = argparse.ArgumentParser(prog="thickslab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("xtable", parents=[common], help="tabulate X(-mu), H(mu), gamma(mu)")
    p.add_argument("--mu", default=None, help="mu grid, list or start:stop:num (default 0:1:11)")
    p.add_argument("--c", type=float, default=None, help="single-scattering albedo (default 1)")
    p.set_defaults(func=cmd_xtable)

    p = sub.add_parser("transmit", parents=[common], help="thick-slab transmission table")
    p.add_argument("--D", default=None, help="optical thickness grid")
    p.add_argument("--g1", type=float, default=None)
    p.add_argument("--mu0", default=None, help="incidence cosine grid, each in (0, 1]")
    p.set_defaults(func=cmd_transmit)

    p = sub.add_parser("profile", parents=[common], help="asymptotic interior density")
    p.add_argument("--D", type=float, default=None)
    p.add_argument("--g1", type=float, default=None)
    p.add_argument("--mu0", type=float, default=None)
    p.add_argument("--z", default=None, help="depth grid (default 21 points on [0, D])")
    p.add_argument("--mu", default=None, help="cosine grid (default -1:1:5)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo oracle run")
    p.add_argument("--D", type=float, default=None)
    p.add_argument("--g1", type=float, default=None)
    p.add_argument("--mu0", type=float, default=None)
    p.add_argument("-n", "--n-particles", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default $THICKSLAB_WORKERS or CPU count)")
    p.add_argument("--z-bins", type=int, default=None)
    p.add_argument("--mu-bins", type=int, default=None)
    p.add_argument("--n-batches", type=int, default=None)
    p.add_argument("--compare", action="store_true", help="compare against the analytic solution")
    p.add_argument("--transmission-tol", type=float, default=None)
    p.add_argument("--slope-tol", type=float, default=None)
    p.add_argument("--tally-dir", default=None, help="directory for interior/profile/exit tallies")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("verify", parents=[common], help="run the identity suite")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance")
    p.set_defaults(func=cmd_verify)
    return parser


def _resolve(args):
    """Apply precedence: command-line flags > config file > defaults."""
    file_values = read_config(args.config) if args.config else {}
    per_command = SUBCOMMAND_DEFAULTS.get(args.command, {})
    for name, (typ, default) in DEFAULTS.items():
        if not hasattr(args, name) or getattr(args, name) is not None:
            continue
        if name in file_values:
            raw = file_values[name]
        elif name in per_command:
            raw = per_command[name]
        elif default is None:
            setattr(args, name, None)
            continue
        else:
            raw = default
        try:
            value = _coerce(args, name, raw, typ)
        except ValueError:
            raise UsageError(f"bad value for {name}: {raw!r}") from None
        setattr(args, name, value)
    unknown = set(file_values) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return args


_SCALAR_ON = {"profile": {"D", "mu0"}, "mc": {"D", "mu0"}}


def _coerce(args, name, raw, typ):
    if typ is str and name == "output":
        return raw
    if name in _SCALAR_ON.get(args.command, ()):
        return float(raw)
    return typ(raw)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        _resolve(args)
        if args.format not in ("csv", "json"):
            raise UsageError("format must be csv or json")
        return args.func(args)
    except UsageError as exc:
        print(f"thickslab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"thickslab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, ArithmeticError) as exc:
        print(f"thickslab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
