"""Command-line front end.

Subcommands: ``phantom`` (sample a configured phantom to a GTM field),
``forward`` (tomogram family of a field or phantom), ``invert``
(reconstruct a field from a GTM-T file), ``check`` (property suites) and
``export`` (CSV / PGM conversion).

Exit codes: 0 success (warnings included), 2 bad input, 3 inconsistent
inputs, 4 I/O failure.  Warnings go to stderr and never change the exit
code; only precondition violations do.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import checks, formats
from .core import (GridError, GridSpec, ScalarField, make_grid, sample_phantom,
                   total_mass)
from .forward import forward_binned, normalization_profile
from .geometry import (Hybrid, Hyperplane, LevelFamily, Quadric, QuadricForm,
                       circle_family, hyperbola_family, hyperboloid_family)
from .inverse import characteristic_slice, invert_for_family

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_INCONSISTENT = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _threads() -> int:
    """GENTOMO_THREADS caps worker parallelism (0 = auto).

    The numerical engines are sequential and deterministic, which satisfies
    the cap for every value; the variable is validated so misuse fails fast.
    """
    raw = os.environ.get("GENTOMO_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"GENTOMO_THREADS must be an integer, got {raw!r}",
                       EXIT_BAD_INPUT) from None
    if n < 0:
        raise CliError("GENTOMO_THREADS must be >= 0", EXIT_BAD_INPUT)
    return n


def _parse_box(text: str, count_text: str) -> GridSpec:
    """--*-box 'lo,hi;lo,hi' + --*-count 'n;n' (singletons broadcast)."""
    boxes = [part for part in text.split(";") if part.strip()]
    counts = [part for part in count_text.split(";") if part.strip()]
    if len(counts) == 1 and len(boxes) > 1:
        counts = counts * len(boxes)
    if len(counts) != len(boxes):
        raise CliError("box and count flags disagree in axis count",
                       EXIT_BAD_INPUT)
    axes = []
    try:
        for box, cnt in zip(boxes, counts):
            lo, hi = (float(tok) for tok in box.split(","))
            axes.append((lo, hi, int(cnt)))
        return GridSpec(tuple(axes))
    except (ValueError, GridError) as exc:
        raise CliError(f"bad grid flags: {exc}", EXIT_BAD_INPUT) from None


def _family_from_args(args, ndim: int) -> LevelFamily:
    name = args.family
    if name == "hyperplane":
        return Hyperplane(ndim)
    if name == "circle":
        return circle_family()
    if name == "hyperbola":
        return hyperbola_family()
    if name == "hyperboloid":
        if ndim % 2:
            raise CliError("hyperboloid family needs an even-dimensional space",
                           EXIT_INCONSISTENT)
        return hyperboloid_family(ndim // 2)
    if name in ("quadric", "hybrid"):
        if not args.B:
            raise CliError(f"--family {name} requires --B", EXIT_BAD_INPUT)
        entries = [float(tok) for tok in args.B.split(",") if tok.strip()]
        n = int(round(len(entries) ** 0.5))
        if n * n != len(entries):
            raise CliError("--B must hold a square row-major matrix",
                           EXIT_BAD_INPUT)
        if n != ndim:
            raise CliError(f"--B is {n}x{n} but the data is {ndim}-dimensional",
                           EXIT_INCONSISTENT)
        split = ()
        if args.split:
            split = tuple(int(tok) for tok in args.split.split(",") if tok.strip())
        try:
            form = QuadricForm(np.array(entries).reshape(n, n), linear_axes=split)
            return Hybrid(form) if name == "hybrid" else Quadric(form)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_BAD_INPUT) from None
    raise CliError(f"unknown family {name!r}", EXIT_BAD_INPUT)


def _load_source(path: str):
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    try:
        if magic == formats.FIELD_MAGIC:
            return formats.read_field(path)
        with open(path, "r") as fh:
            return formats.phantom_from_config(formats.parse_config(fh.read()))
    except (formats.FormatError, ValueError, UnicodeDecodeError) as exc:
        raise CliError(f"bad source {path}: {exc}", EXIT_BAD_INPUT) from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_phantom(args) -> int:
    try:
        with open(args.config) as fh:
            cfg = formats.parse_config(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO) from None
    try:
        phantom = formats.phantom_from_config(cfg)
        grid = formats.grid_from_config(cfg)
        field = sample_phantom(phantom, grid)
    except (formats.FormatError, ValueError) as exc:
        raise CliError(f"bad config: {exc}", EXIT_BAD_INPUT) from None
    _write_field(args.out, field)
    print(f"total mass {total_mass(field):.9g}")
    return EXIT_OK


def cmd_forward(args) -> int:
    source = _load_source(args.input)
    ndim = source.grid.ndim if isinstance(source, ScalarField) else source.ndim
    family = _family_from_args(args, ndim)
    param_grid = _parse_box(args.mu_box, args.mu_count)
    if param_grid.ndim != family.param_dim:
        raise CliError("parameter box rank does not match the family",
                       EXIT_INCONSISTENT)
    try:
        lo, hi = (float(tok) for tok in args.x_range.split(","))
        x_grid = make_grid(1, [(lo, hi, int(args.x_count))])
    except (ValueError, GridError) as exc:
        raise CliError(f"bad X grid flags: {exc}", EXIT_BAD_INPUT) from None
    q_grid = None
    if not isinstance(source, ScalarField):
        if not args.q_box:
            raise CliError("phantom sources require --q-box/--q-count",
                           EXIT_BAD_INPUT)
        q_grid = _parse_box(args.q_box, args.q_count)
    tomo = forward_binned(source, family, param_grid, x_grid, q_grid)
    for w in tomo.warnings:
        _warn(w)
    if args.family == "circle":
        degenerate = np.all(param_grid.points() == 0.0, axis=1)
        if degenerate.any():
            _warn("parameter grid contains the degenerate direction (0, 0)")
    try:
        formats.write_tomogram(args.out, tomo)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from None
    norm = normalization_profile(tomo)
    print(f"normalization min {norm.min():.6g} max {norm.max():.6g}")
    print(f"overflow mass max {tomo.overflow.max():.6g}")
    return EXIT_OK


def cmd_invert(args) -> int:
    try:
        tomo = formats.read_tomogram(args.input)
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}", EXIT_IO) from None
    except formats.FormatError as exc:
        raise CliError(str(exc), EXIT_BAD_INPUT) from None
    family = _family_from_args(args, tomo.param_grid.ndim)
    if family.tag != tomo.family_tag:
        raise CliError(
            f"tomogram was produced by the {tomo.family_tag!r} family, "
            f"flags request {family.tag!r}", EXIT_INCONSISTENT)
    out_grid = _parse_box(args.q_box, args.q_count)
    taper = args.taper if args.taper is not None else None
    slc = characteristic_slice(tomo)
    field, diag = invert_for_family(slc, family, out_grid,
                                    decay_floor=args.decay_floor, taper=taper)
    for w in diag.warnings:
        _warn(w)
    _write_field(args.out, field)
    print(f"imaginary residual ratio {diag.imag_ratio:.6g}")
    print(f"boundary decay {diag.boundary_decay:.6g}")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        results = checks.run_suite(args.suite, seed=args.seed,
                                   samples=args.samples, lam=args.lam)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), EXIT_BAD_INPUT) from None
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name} measured={r.measured:.6g} bound={r.bound:.6g} {status}")
        failed += not r.passed
    return EXIT_OK if failed == 0 else 1


def cmd_export(args) -> int:
    try:
        with open(args.input, "rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}", EXIT_IO) from None
    if magic not in (formats.FIELD_MAGIC, formats.TOMOGRAM_MAGIC):
        raise CliError(f"{args.input} is neither a GTM nor a GTM-T file",
                       EXIT_BAD_INPUT)
    is_field = magic == formats.FIELD_MAGIC
    try:
        obj = (formats.read_field if is_field else formats.read_tomogram)(args.input)
    except formats.FormatError as exc:
        raise CliError(str(exc), EXIT_BAD_INPUT) from None
    try:
        if args.format == "csv":
            if is_field:
                formats.write_field_csv(args.out, obj)
            else:
                formats.write_tomogram_csv(args.out, obj)
        else:
            if is_field:
                if obj.grid.ndim != 2:
                    raise CliError(
                        "PGM export of a field needs two dimensions "
                        "(a slice flag for higher ranks is not implemented)",
                        EXIT_BAD_INPUT)
                lo, hi = formats.write_pgm(args.out, obj.values)
            else:
                if obj.param_grid.ndim != 1:
                    raise CliError("PGM export of a tomogram needs a "
                                   "one-dimensional parameter grid",
                                   EXIT_BAD_INPUT)
                lo, hi = formats.write_pgm(args.out, obj.values)
            print(f"scaling min {lo:.9g} max {hi:.9g}")
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from None
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def _add_family_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", required=True,
                   choices=["hyperplane", "circle", "hyperbola", "hyperboloid",
                            "quadric", "hybrid"])
    p.add_argument("--B", help="row-major comma list for quadric/hybrid forms")
    p.add_argument("--split", help="comma list of linear axes for hybrid forms")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="gentomo",
        description="generalized tomographic transforms and reconstructions")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="sample a configured phantom to GTM")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_phantom)

    p = sub.add_parser("forward", help="tomogram family of a field or phantom")
    p.add_argument("input", help="GTM field or phantom config")
    _add_family_flags(p)
    p.add_argument("--mu-box", required=True, help="'lo,hi;lo,hi' per axis")
    p.add_argument("--mu-count", required=True, help="'n;n' per axis")
    p.add_argument("--x-range", required=True, help="'lo,hi'")
    p.add_argument("--x-count", required=True, type=int)
    p.add_argument("--q-box", help="phantom sampling box (phantom input only)")
    p.add_argument("--q-count", help="phantom sampling counts")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_forward)

    p = sub.add_parser("invert", help="reconstruct a field from a GTM-T file")
    p.add_argument("input")
    _add_family_flags(p)
    p.add_argument("--q-box", required=True, help="output grid box")
    p.add_argument("--q-count", required=True, help="output grid counts")
    p.add_argument("--decay-floor", type=float, default=1e-4)
    p.add_argument("--taper", nargs="?", const=True, default=None, type=float,
                   help="Gaussian taper width (bare flag = box half-width / 3)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_invert)

    p = sub.add_parser("check", help="run a property suite")
    p.add_argument("suite", choices=[*checks.SUITES, "all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=None,
                   help="Monte-Carlo draws for the oracle-agreement suite")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="extra scaling factor for the homogeneity suite")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("export", help="convert GTM/GTM-T to csv or pgm")
    p.add_argument("input")
    p.add_argument("--format", required=True, choices=["csv", "pgm"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export)
    return top


def _write_field(path, field: ScalarField) -> None:
    try:
        formats.write_field(path, field)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _threads()
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
