"""Command-line interface.

Exit codes: 0 ok, 1 verification failure / instability / closed gap,
2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .butterfly import ResultCache, render_svg, sweep
from .errors import (
    Degenerate,
    GapClosed,
    GridTooCoarse,
    HarperError,
    NoConvergence,
    NotCoprime,
    NotInteger,
    RangeError,
)
from .noncomm import REFERENCE, REPS
from .numtheory import validate_model
from .serialize import (
    dumps,
    spectrum_to_csv,
    spectrum_to_dict,
    trace_to_dict,
    verify_to_csv,
    verify_to_dict,
)
from .spectral import DEFAULT_GAP_TOL, DENSE_N_CAP, KGrid, band_structure, gap_chart, parse_grid
from .tknn import analyse, make_record, rational_identity_holds, track_irrational, verify_all
from .topology import chern_of_projection

log = logging.getLogger("harper_tknn")

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3

_BOOL_KEYS = {"json", "csv", "no_cache", "canonical"}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key in _BOOL_KEYS:
            out[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            out[key] = value
    return out


def _common(p, model=True):
    p.add_argument("--q", type=int)
    p.add_argument("--r", type=int, default=0)
    if model:
        p.add_argument("--M", type=int)
        p.add_argument("--N", type=int)
    p.add_argument("--grid", default="32x32", help="k-grid per unit cell, e.g. 32x32")
    p.add_argument("--gap-tol", type=float, default=DEFAULT_GAP_TOL)
    p.add_argument("--out", help="write output files to this directory instead of stdout")


def _formats(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--json", action="store_true")
    g.add_argument("--csv", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="harper-tknn", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file supplying defaults for any flag")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="band extrema and gap chart")
    _common(p)
    _formats(p)
    p.add_argument("--rep", choices=REPS, default=REFERENCE)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", help="gap-by-gap TKNN verification")
    _common(p)
    _formats(p)
    p.add_argument("--canonical", action="store_true", help="also integrate the canonical bundle over the extended zone")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("chern", help="both Chern computations for one gap")
    _common(p)
    p.add_argument("--json", action="store_true")
    which = p.add_mutually_exclusive_group()
    which.add_argument("--gap", type=int, help="ordinal of an open gap (0 = inf-gap)")
    which.add_argument("--d", type=int, help="gap label: number of bands below")
    p.set_defaults(func=cmd_chern)

    p = sub.add_parser("butterfly", help="sweep all admissible fluxes up to --nmax")
    _common(p, model=False)
    p.add_argument("--nmax", type=int)
    p.add_argument("--svg", help="write an SVG butterfly to this path")
    p.add_argument("--color", choices=("t", "s", "none"), default="t")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_butterfly)

    p = sub.add_parser("track", help="follow a gap along convergents of an irrational flux")
    _common(p, model=False)
    p.add_argument("--theta", help="flux as a decimal or M/N")
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--ids", type=float, help="integrated density of states of the gap to track")
    p.add_argument("--window", type=float, default=1e-2)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_track)
    return parser, sub


def _require(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"missing required option(s): {' '.join(missing)}")


def _model(args):
    _require(args, "q", "r", "M", "N")
    model = validate_model(args.q, args.r, args.M, args.N)
    if model.N > DENSE_N_CAP:
        raise RangeError(f"N={model.N} exceeds the dense diagonalization cap {DENSE_N_CAP}")
    return model


def _grid(args) -> KGrid:
    return parse_grid(args.grid)


def _emit(args, name, text):
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
        log.info("wrote %s", out / name)
    else:
        sys.stdout.write(text)


def _stem(model):
    return f"q{model.q}_r{model.r}_M{model.M}_N{model.N}"


def _fmt(x):
    return "-" if x is None else str(x)


def cmd_spectrum(args):
    model, grid = _model(args), _grid(args)
    bands = band_structure(model, grid, args.rep)
    chart = gap_chart(bands, args.gap_tol)
    if args.json:
        _emit(args, f"spectrum_{_stem(model)}.json", dumps(spectrum_to_dict(model, grid, chart, args.rep)))
    elif args.csv:
        _emit(args, f"spectrum_{_stem(model)}.csv", spectrum_to_csv(model, grid, chart))
    else:
        lines = [f"{model}  M0={model.M0}  grid={grid}  rep={args.rep}", "band      e_min      e_max"]
        lines += [f"{j + 1:4d} {lo:10.6f} {hi:10.6f}" for j, (lo, hi) in enumerate(chart.band_edges)]
        lines.append("   g    d  status            e_lo       e_hi")
        for gap in chart.gaps:
            lines.append(f"{_fmt(gap.g):>4} {gap.d:4d}  {gap.status:<13} {gap.e_lo:10.6f} {gap.e_hi:10.6f}")
        _emit(args, f"spectrum_{_stem(model)}.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify(args):
    model, grid = _model(args), _grid(args)
    records = verify_all(model, grid, args.gap_tol, with_canonical=args.canonical)
    ok = all(r.match and r.satisfies(model) and rational_identity_holds(model, r) for r in records if r.status == "open")
    if args.canonical:
        ok &= all(r.c_ext == -model.M0 * r.s_num for r in records if r.status == "open")
    if args.json:
        _emit(args, f"verify_{_stem(model)}.json", dumps(verify_to_dict(model, grid, records)))
    elif args.csv:
        _emit(args, f"verify_{_stem(model)}.csv", verify_to_csv(model, grid, records))
    else:
        lines = [f"{model}  M0={model.M0}: {model.N} t + ({model.M0}) s = {model.q} d", "   g    d  t_num  s_num  t_dio  s_dio  match"]
        for r in records:
            lines.append(
                f"{_fmt(r.g):>4} {r.d:4d} {_fmt(r.t_num):>6} {_fmt(r.s_num):>6} {_fmt(r.t_dio):>6} {_fmt(r.s_dio):>6}  {r.match}"
            )
        lines.append("all open gaps verified" if ok else "VERIFICATION FAILED")
        _emit(args, f"verify_{_stem(model)}.txt", "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_chern(args):
    model, grid = _model(args), _grid(args)
    if args.gap is None and args.d is None:
        raise UsageError("one of --gap or --d is required")
    bands, chart = analyse(model, grid, args.gap_tol)
    gap = chart.by_ordinal(args.gap) if args.gap is not None else chart.by_d(args.d)
    if not 0 <= gap.d <= model.N:
        raise RangeError(f"gap label d={gap.d} outside [0, {model.N}]")
    if not gap.is_open:
        raise GapClosed(gap.d)
    ref = chern_of_projection(model, "reference", gap.d, grid, args.gap_tol)
    can = chern_of_projection(model, "canonical", gap.d, grid, args.gap_tol)
    rec = make_record(model, chart, bands, gap.d, grid, args.gap_tol, False)
    out = {
        "q": model.q, "r": model.r, "M": model.M, "N": model.N, "M0": model.M0,
        "g": gap.g, "d": gap.d, "t": rec.t_num, "s": rec.s_num,
        "t_dio": rec.t_dio, "s_dio": rec.s_dio, "match": rec.match,
        "reference": {"c": ref.c, "max_plaquette": ref.max_plaquette, "grid": [ref.grid.n1, ref.grid.n2]},
        "canonical_extended": {
            "c": can.c, "max_plaquette": can.max_plaquette,
            "grid": [can.grid.n1, can.grid.n2], "span2": can.grid.span2,
        },
        "duality": can.c == model.M0 * ref.c,
    }
    if args.json:
        text = dumps(out)
    else:
        text = (
            f"{model}  gap g={gap.g} d={gap.d}\n"
            f"reference Chern       {ref.c:4d}  (max plaquette {ref.max_plaquette:.3f} rad, grid {ref.grid})\n"
            f"canonical extended    {can.c:4d}  (max plaquette {can.max_plaquette:.3f} rad, grid {can.grid})\n"
            f"M0 * reference        {model.M0 * ref.c:4d}  duality {'holds' if out['duality'] else 'FAILS'}\n"
            f"(t, s) = ({rec.t_num}, {rec.s_num})   Diophantine ({_fmt(rec.t_dio)}, {_fmt(rec.s_dio)})\n"
        )
    _emit(args, f"chern_{_stem(model)}_d{gap.d}.{'json' if args.json else 'txt'}", text)
    return EXIT_OK if out["duality"] and rec.match else EXIT_FAIL


def cmd_butterfly(args):
    _require(args, "q", "nmax")
    if args.nmax < 2:
        raise RangeError("--nmax must be at least 2")
    if args.nmax > DENSE_N_CAP:
        raise RangeError(f"--nmax exceeds the dense diagonalization cap {DENSE_N_CAP}")
    grid = _grid(args)
    cache = None if args.no_cache else ResultCache()
    ds = sweep(args.q, args.r, args.nmax, grid, args.gap_tol, cache, args.jobs)
    _emit(args, f"butterfly_q{args.q}_r{args.r}_n{args.nmax}.json", dumps(ds.to_dict()))
    if args.svg:
        Path(args.svg).write_text(render_svg(ds, args.color))
    for row in ds.rows:
        if not row.verified:
            log.warning("flux %d/%d not verified %s", row.M, row.N, row.error or "")
    return EXIT_OK if ds.verified else EXIT_FAIL


def _theta(text):
    try:
        return Fraction(text) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise RangeError(f"cannot parse flux {text!r}") from None


def cmd_track(args):
    _require(args, "q", "theta", "ids")
    validate_model(args.q, args.r, 1, args.q + 1)  # checks (q, r) on their own
    trace = track_irrational(
        _theta(args.theta), args.q, args.r, args.depth, args.ids, args.window, _grid(args), args.gap_tol, jobs=args.jobs
    )
    _emit(args, f"track_q{args.q}_r{args.r}.json", dumps(trace_to_dict(trace)))
    return EXIT_OK if trace.stable and trace.identities_hold else EXIT_FAIL


def main(argv=None) -> int:
    parser, sub = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = read_config(known.config)
        except (OSError, UsageError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        for choice in sub.choices.values():
            choice.set_defaults(**cfg)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, NotCoprime, RangeError, Degenerate) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except GapClosed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (GridTooCoarse, NoConvergence, NotInteger) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HarperError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
