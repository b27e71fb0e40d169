"""Command-line interface: ``convsw {compare,distance,slicer-info,bench}``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.  Errors are
written to stderr as one-line JSON objects ``{"code": ..., "message": ...}``.
"""
import argparse
import json
import os
import sys
import time

import numpy as np

from . import _backend
from . import dataio
from . import distances as dist
from . import slicer as sl
from .errors import CapacityError, CSWError, FormatError, ShapeError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_error(code, message):
    sys.stderr.write(json.dumps({"code": code, "message": str(message)}) + "\n")


def _add_method_flags(p, default_method="csw-s"):
    p.add_argument("--method", default=default_method, choices=dist.METHODS)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=None)


def build_parser():
    parser = _Parser(prog="convsw", description="Convolution sliced Wasserstein distances.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cmp_ = sub.add_parser("compare", help="distance matrix between class-conditional measures")
    cmp_.add_argument("--images", required=True, help="IDX image file (optionally .gz)")
    cmp_.add_argument("--labels", required=True, help="IDX label file (optionally .gz)")
    _add_method_flags(cmp_)
    cmp_.add_argument("--per-class", type=int, default=None)
    cmp_.add_argument("--repeats", type=int, default=1)
    cmp_.add_argument("--normalization", default="unit", choices=dataio.NORMALIZATIONS)
    cmp_.add_argument("--out", default=None)
    cmp_.add_argument("--format", default="json", choices=("csv", "json"))

    dst = sub.add_parser("distance", help="distance between two CSWT tensor files")
    dst.add_argument("a")
    dst.add_argument("b")
    _add_method_flags(dst)
    dst.add_argument("--out", default=None)

    info = sub.add_parser("slicer-info", help="print a slicer schedule")
    info.add_argument("--variant", default="stride",
                      choices=("base", "stride", "dilation", "full", "b", "s", "d"))
    info.add_argument("--c", type=int, default=1)
    info.add_argument("--d", type=int, default=28)
    info.add_argument("--k", type=int, default=1)
    info.add_argument("--nonlinear", action="store_true")
    info.add_argument("--format", default="text", choices=("text", "json"))

    bench = sub.add_parser("bench", help="time estimators on synthetic Gaussian measures")
    bench.add_argument("--c", type=int, default=1)
    bench.add_argument("--d", type=int, default=28)
    bench.add_argument("--n", type=int, default=256)
    bench.add_argument("--methods", default="sw,csw-b,csw-s,csw-d")
    bench.add_argument("--L", type=int, default=100)
    bench.add_argument("--p", type=float, default=2.0)
    bench.add_argument("--seed", type=int, default=42)
    bench.add_argument("--threads", type=int, default=None)
    bench.add_argument("--backends", default=_backend.get_backend(),
                       help="comma list from: " + ",".join(_backend.available_backends()))
    bench.add_argument("--out", default=None)
    return parser


def _threads(args):
    env = os.environ.get("CSW_THREADS")
    if env:
        return max(1, int(env))
    return args.threads


def _spec(args):
    try:
        return dist.MethodSpec(args.method, args.p, args.L, args.k, args.steps, args.lr, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write(text, out):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w") as f:
            f.write(text if text.endswith("\n") else text + "\n")


# -- compare -----------------------------------------------------------------

def compare_matrix(splits, spec, threads=None, seed=None):
    """Distance matrix over classes; the diagonal compares disjoint halves."""
    classes = sorted(splits)
    m = len(classes)
    mat = np.zeros((m, m))
    seed = spec.seed if seed is None else seed
    if spec.family in dist.MONTE_CARLO:
        proj = dist.slice_measures([splits[c].full for c in classes], spec.method, spec.L,
                                   seed, threads)
        for i, ci in enumerate(classes):
            half = splits[ci].half_a.shape[0]
            diag = dist.costs_from_projections(proj[i][:, :half], proj[i][:, half:2 * half],
                                               spec.p)
            mat[i, i] = float(np.mean(diag)) ** (1.0 / spec.p)
            for j in range(i + 1, m):
                costs = dist.costs_from_projections(proj[i], proj[j], spec.p)
                mat[i, j] = mat[j, i] = float(np.mean(costs)) ** (1.0 / spec.p)
        return classes, mat
    run = dist.MethodSpec(spec.method, spec.p, spec.L, spec.k, spec.steps, spec.lr, seed)
    for i, ci in enumerate(classes):
        mat[i, i] = dist.evaluate(run, splits[ci].half_a, splits[ci].half_b, threads)
        for j in range(i + 1, m):
            mat[i, j] = mat[j, i] = dist.evaluate(run, splits[ci].full,
                                                  splits[classes[j]].full, threads)
    return classes, mat


def cmd_compare(args):
    spec = _spec(args)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    images = dataio.read_idx_images(args.images, args.normalization)
    labels = dataio.read_idx_labels(args.labels)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    splits = dataio.split_by_class(images, labels, args.per_class, spec.seed)
    threads = _threads(args)
    t0 = time.perf_counter()
    mats = []
    for r in range(args.repeats):
        classes, mat = compare_matrix(splits, spec, threads, seed=spec.seed + r)
        mats.append(mat)
    runtime_ms = (time.perf_counter() - t0) * 1e3
    stack = np.stack(mats)
    _, c, d, _ = images.shape
    report = dataio.DistanceMatrixReport(
        spec=spec.as_dict(),
        normalization=args.normalization,
        param_count=dist.projection_param_count(spec, c, d),
        runtime_ms=runtime_ms,
        classes=classes,
        matrix=stack.mean(axis=0),
        std=stack.std(axis=0, ddof=1) if args.repeats > 1 else None,
        repeats=args.repeats,
        variant=spec.variant,
        nonlinear=spec.nonlinear,
    )
    _write(report.to_csv() if args.format == "csv" else report.to_json(), args.out)
    return report


# -- distance ----------------------------------------------------------------

def cmd_distance(args):
    spec = _spec(args)
    a = dataio.read_tensor_file(args.a)
    b = dataio.read_tensor_file(args.b)
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"support shapes differ: {a.shape[1:]} vs {b.shape[1:]}")
    t0 = time.perf_counter()
    value = dist.evaluate(spec, a, b, _threads(args))
    runtime_ms = (time.perf_counter() - t0) * 1e3
    _, c, d, _ = a.shape
    result = {
        "method": spec.method,
        "variant": spec.variant,
        "nonlinear": spec.nonlinear,
        "p": spec.p,
        "L": spec.L,
        "k": spec.k,
        "steps": spec.steps,
        "lr": spec.lr,
        "seed": spec.seed,
        "value": value,
        "runtime_ms": runtime_ms,
        "param_count": dist.projection_param_count(spec, c, d),
    }
    _write(json.dumps(result, indent=2), args.out)
    return result


# -- slicer-info -------------------------------------------------------------

def format_schedule(info):
    head = (f"variant={info['variant']} c={info['channels']} d={info['size']} "
            f"k={info['k']} nonlinear={info['nonlinear']}")
    lines = [head, "layer  kernel        stride  dilation  size     activation  params   macs"]
    for i, layer in enumerate(info["layers"], 1):
        kern = "x".join(str(v) for v in [layer["out_channels"]] + layer["kernel"])
        lines.append(f"{i:<6} {kern:<13} {layer['stride']:<7} {layer['dilation']:<9} "
                     f"{layer['in_size']:>3}->{layer['out_size']:<3} {layer['activation']:<11} "
                     f"{layer['params']:<8} {layer['macs']}")
    lines.append(f"param_count={info['param_count']} mac_count={info['mac_count']}")
    return "\n".join(lines)


def cmd_slicer_info(args):
    schedule = sl.make_schedule(args.variant, args.c, args.d, args.k, args.nonlinear)
    info = sl.describe(schedule)
    _write(json.dumps(info, indent=2) if args.format == "json" else format_schedule(info), None)
    return info


# -- bench -------------------------------------------------------------------

def cmd_bench(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in dist.METHODS:
            raise UsageError(f"unknown method {m!r}")
    backends = [b.strip() for b in args.backends.split(",") if b.strip()]
    for b in backends:
        if b not in _backend.available_backends():
            raise UsageError(f"backend {b!r} is not available")
    rng = np.random.default_rng(args.seed)
    shape = (args.n, args.c, args.d, args.d)
    mu = rng.standard_normal(shape)
    nu = rng.standard_normal(shape) + 0.5
    threads = _threads(args)
    rows = []
    previous = _backend.get_backend()
    try:
        for backend in backends:
            _backend.set_backend(backend)
            for m in methods:
                spec = dist.MethodSpec(m, args.p, args.L, seed=args.seed)
                dist.evaluate(dist.MethodSpec(m, args.p, 1, steps=1, seed=args.seed),
                              mu[:2], nu[:2], threads)  # warm-up / jit compile
                t0 = time.perf_counter()
                value = dist.evaluate(spec, mu, nu, threads)
                rows.append({
                    "method": m,
                    "backend": backend,
                    "value": value,
                    "wall_ms": (time.perf_counter() - t0) * 1e3,
                    "param_count": dist.projection_param_count(spec, args.c, args.d),
                    "mac_count": dist.projection_mac_count(spec, args.c, args.d),
                })
    finally:
        _backend.set_backend(previous)
    report = {"c": args.c, "d": args.d, "n": args.n, "L": args.L, "p": args.p,
              "seed": args.seed, "threads": threads, "results": rows}
    _write(json.dumps(report, indent=2), args.out)
    if args.out is not None:
        for r in rows:
            print(f"{r['method']:<10} {r['backend']:<6} {r['wall_ms']:10.1f} ms  "
                  f"params={r['param_count']:<6} macs={r['mac_count']}")
    return report


COMMANDS = {
    "compare": cmd_compare,
    "distance": cmd_distance,
    "slicer-info": cmd_slicer_info,
    "bench": cmd_bench,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        _emit_error("usage", exc)
        return 2
    except CapacityError as exc:
        _emit_error("capacity", exc)
        return 1
    except (FormatError, OSError) as exc:
        _emit_error("data", exc)
        return 1
    except (CSWError, ValueError) as exc:
        _emit_error("invalid", exc)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
