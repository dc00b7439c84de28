"""Command-line batch runs producing CSV and JSON for external plotting.

Exit codes: 0 success, 1 usage error, 2 computation error (an error JSON
object is printed to stdout), 3 the loop passes through an exceptional point.

Complex values are written as ``re_``/``im_`` column pairs in CSV and as
``[re, im]`` pairs in JSON. Every subcommand is deterministic: rerunning with
the same options produces byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, epfind, jordan, linalg, models, puiseux, tracking
from .errors import AmbiguousStructure, EPAtlasError, EPOnPath, InvalidInput

EXIT_OK, EXIT_USAGE, EXIT_ERROR, EXIT_EP_ON_PATH = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as a complex number") from None


def _complex_pair(text: str) -> complex:
    """``re,im`` -> complex."""
    parts = text.split(",")
    if len(parts) == 1:
        return _complex(parts[0])
    if len(parts) != 2:
        raise UsageError(f"expected re,im, got {text!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise UsageError(f"expected re,im, got {text!r}") from None


def _floats(text: str, count=None, what="values") -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"{what} needs {count} comma-separated numbers, got {len(vals)}")
    return vals


def _pair(x) -> list:
    x = complex(x)
    return [x.real, x.imag]


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, complex):
        return _pair(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite(obj):
    """Replace non-finite floats by strings so output stays strict JSON."""
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EP3_ATLAS_THREADS", "1")))
    except ValueError:
        return 1


def _emit(args, text: str, suffix: str, stdout: bool = True):
    if args.out:
        path = Path(f"{args.out}{suffix}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    if stdout:
        sys.stdout.write(text)


def _linear_at(family, center: complex):
    if not isinstance(family, models.PolynomialFamily):
        raise UsageError(f"family {family.name!r} is not a one-parameter polynomial family")
    return family(center), family.derivative(center)


def _family(args):
    """Resolve ``--family``; an unknown built-in name is a usage error."""
    if not args.family.startswith("file:") and args.family not in models.BUILTIN:
        raise UsageError(f"unknown family {args.family!r}; choose one of "
                         f"{sorted(models.BUILTIN)} or file:PATH")
    return models.get_family(args.family)


# -- subcommands -------------------------------------------------------------


def cmd_jordan(args) -> int:
    family = _family(args)
    center = _complex_pair(args.center)
    if family.nparams != 1:
        raise UsageError("jordan needs a one-parameter family")
    h0 = family(center)
    chain = jordan.jordan_chain(h0, tol=args.tol)
    out = {"family": family.name, "center": _pair(center), "chain": chain.to_json()}
    _emit(args, _dump(out), ".json")
    return EXIT_OK


def cmd_classify(args) -> int:
    family = _family(args)
    center = _complex_pair(args.center)
    h0, h1 = _linear_at(family, center)
    records = [r for r in jordan.detect_ep(h0) if r.is_ep]
    if not records:
        raise AmbiguousStructure(f"no exceptional point at z = {center}")
    rec = max(records, key=lambda r: (r.order, -abs(r.lambda0)))
    if rec.order > 3:
        raise InvalidInput(f"EP of order {rec.order}: only EP2 and EP3 can be classified")
    lam0 = jordan.ep_eigenvalue(h0, rec)
    chain = jordan.normalize_chain(jordan.build_chain(h0, lam0, rec.order), rec.order)
    cls = puiseux.classify(chain, h1, args.tol)
    out = {
        "family": family.name,
        "center": _pair(center),
        "kind": cls.kind.value,
        "class": cls.to_json(),
        "chain": chain.to_json(),
    }
    _emit(args, _dump(out), ".json")
    return EXIT_OK


def cmd_sheet(args) -> int:
    family = _family(args)
    nx, ny = (int(v) for v in _floats(args.grid, 2, "--grid"))
    if nx < 2 or ny < 2:
        raise UsageError("--grid needs at least 2 points per axis")
    x0, x1, y0, y1 = _floats(args.bounds, 4, "--bounds")
    if not (x1 > x0 and y1 > y0):
        raise UsageError("--bounds must be xmin,xmax,ymin,ymax with xmin < xmax, ymin < ymax")
    xs = [x0 + (x1 - x0) * i / (nx - 1) for i in range(nx)]
    ys = [y0 + (y1 - y0) * j / (ny - 1) for j in range(ny)]
    if family.nparams == 1:
        points = [((complex(x, y),), x, y) for y in ys for x in xs]
    elif family.nparams == 2:
        points = [((x, y), x, y) for y in ys for x in xs]
    else:
        raise UsageError("sheet supports one- and two-parameter families")

    def spectrum(p):
        return linalg.eig(family(*p[0]))

    nthreads = _threads()
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            spectra = list(pool.map(spectrum, points))
    else:
        spectra = [spectrum(p) for p in points]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_z", "im_z", "branch", "re_lambda", "im_lambda", "defect"])
    row_start = None
    prev = None
    for k, ((_, x, y), spec) in enumerate(zip(points, spectra)):
        vals = spec.values
        if k % nx == 0:
            ref = row_start
        else:
            ref = prev
        if ref is not None:
            assign, _ = tracking.match_branches(ref, vals)
            vals = vals[assign]
        defect_of = np.zeros(vals.size, dtype=int)
        for members, flag in zip(spec.clusters, spec.defect_flags):
            if flag:
                for i in members:
                    defect_of[i] = 1
        if ref is not None:
            defect_of = defect_of[assign]
        for b, lam in enumerate(vals):
            w.writerow([repr(x), repr(y), b, repr(float(lam.real)), repr(float(lam.imag)),
                        int(defect_of[b])])
        prev = vals
        if k % nx == 0:
            row_start = vals
    _emit(args, buf.getvalue(), ".csv")
    return EXIT_OK


def _loop_spec(args, family) -> tracking.LoopSpec:
    center = _complex_pair(args.center)
    orientation = -1 if args.reverse else 1
    if family.nparams == 1:
        path = tracking.ComplexCircle(center, args.radius, orientation)
    elif family.nparams == 2:
        path = tracking.RealEllipse(args.radius, None, (center.real, center.imag), orientation)
    else:
        raise UsageError("loop supports one- and two-parameter families")
    return tracking.LoopSpec(family, path, args.steps, args.cycles)


def cmd_loop(args) -> int:
    family = _family(args)
    try:
        spec = _loop_spec(args, family)
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None
    report = tracking.track_loop(spec)
    summary = _finite(report.summary())
    if args.out:
        _emit(args, report.to_csv(), ".csv", stdout=False)
    _emit(args, _dump(summary), ".json")
    return EXIT_OK


def cmd_fit(args) -> int:
    family = _family(args)
    if family.nparams != 1:
        raise UsageError("fit needs a one-parameter family")
    radii = _floats(args.radii, None, "--radii")
    center = _complex_pair(args.center)
    if args.lambda0 is not None:
        lam0 = _complex_pair(args.lambda0)
    else:
        recs = jordan.detect_ep(family(center))
        rec = max(recs, key=lambda r: (r.order, -abs(r.lambda0)))
        lam0 = jordan.ep_eigenvalue(family(center), rec)
    try:
        fit = puiseux.fit_exponents(family, lam0, radii, args.steps, center=center)
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None
    out = {"family": family.name, "center": _pair(center), **fit.to_json()}
    _emit(args, _dump(_finite(out)), ".json")
    return EXIT_OK


def cmd_find_ep(args) -> int:
    family = _family(args)
    if args.guess:
        guess = tuple(_complex(g) for g in args.guess.split(","))
    else:
        rng = np.random.default_rng(args.seed)
        guess = tuple(complex(*(0.1 * rng.standard_normal(2))) for _ in range(family.nparams))
    order = args.order or (3 if family.nparams >= 2 else 2)
    lam = _complex_pair(args.lambda0) if args.lambda0 is not None else None
    try:
        problem = epfind.EPSearchProblem(family, order, guess, lam)
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None
    res = epfind.find_ep(problem, tol=args.tol if args.tol is not None else 1e-12)
    out = {"family": family.name, "order": order, "guess": [_pair(g) for g in guess], **res.to_json()}
    _emit(args, _dump(out), ".json")
    return EXIT_OK


COMMANDS = {
    "jordan": cmd_jordan,
    "classify": cmd_classify,
    "sheet": cmd_sheet,
    "loop": cmd_loop,
    "fit": cmd_fit,
    "find-ep": cmd_find_ep,
}


def build_parser() -> argparse.ArgumentParser:
    families = ", ".join(sorted(models.BUILTIN)) + ", file:PATH"
    parser = _Parser(
        prog="ep3-atlas",
        description="Exceptional points of complex symmetric matrix families.",
        epilog="Exit codes: 0 ok, 1 usage, 2 computation error, 3 loop hits an EP. "
               "EP3_ATLAS_THREADS caps worker threads for sheet and fit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, default_family="waveguide-ab-equal"):
        p.add_argument("--family", default=default_family, help=f"one of: {families}")
        p.add_argument("--out", help="output path prefix (.json / .csv appended)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized choices")

    p = sub.add_parser("jordan", help="normalized Jordan chain at the EP of H(center)")
    common(p)
    p.add_argument("--center", default="0,0", help="parameter value re,im (default 0,0)")
    p.add_argument("--tol", type=float, default=None, help="relative eigenvalue clustering tolerance")

    p = sub.add_parser("classify", help="Puiseux scenario of H(center + z)")
    common(p)
    p.add_argument("--center", default="0,0", help="EP location re,im (default 0,0)")
    p.add_argument("--tol", type=float, default=None, help="relative vanishing threshold (default 1e-8)")

    p = sub.add_parser("sheet", help="eigenvalues on a rectangular parameter grid (CSV)")
    common(p)
    p.add_argument("--grid", default="41,41", help="nx,ny (default 41,41)")
    p.add_argument("--bounds", default="-0.2,0.2,-0.2,0.2", help="xmin,xmax,ymin,ymax")

    p = sub.add_parser("loop", help="track branches around a closed loop")
    common(p)
    p.add_argument("--center", default="0,0", help="loop centre re,im (or a,b for 2-parameter families)")
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=512, help="samples per cycle (even, >= 64)")
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--reverse", action="store_true", help="traverse clockwise")

    p = sub.add_parser("fit", help="fit Puiseux exponents from circles of shrinking radius")
    common(p)
    p.add_argument("--radii", default="1e-3,1e-4,1e-5,1e-6", help="descending comma list")
    p.add_argument("--center", default="0,0")
    p.add_argument("--steps", type=int, default=128, help="samples per circle")
    p.add_argument("--lambda0", default=None, help="expansion point re,im (default: EP eigenvalue)")

    p = sub.add_parser("find-ep", help="Newton search for an EP2/EP3")
    common(p, default_family="waveguide-2param")
    p.add_argument("--guess", default=None, help="comma list of complex parameters, e.g. 0.1,-0.05")
    p.add_argument("--order", type=int, choices=(2, 3), default=None)
    p.add_argument("--lambda0", default=None, help="eigenvalue guess re,im")
    p.add_argument("--tol", type=float, default=None, help="residual tolerance (default 1e-12)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"ep3-atlas: error: {exc}\n")
        return EXIT_USAGE
    except EPOnPath as exc:
        sys.stdout.write(_dump({"error": "EPOnPath", "message": str(exc), "phi": exc.phi}))
        return EXIT_EP_ON_PATH
    except (EPAtlasError, OSError, json.JSONDecodeError) as exc:
        sys.stdout.write(_dump({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
