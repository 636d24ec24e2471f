# Command-line front end: pack, bound, curve, approx, simulate and verify.
#
# Tables go to stdout as CSV (fixed header, 17 significant digits, LF line
# endings) or JSON; diagnostics go to stderr through logging.
import csv
import sys
import json
import math
import logging
import argparse
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from tabulate import tabulate

from noisyperm import approx, bounds, packing, sim, verify
from noisyperm.bounds import Bec, BoundMethod, Bsc
from noisyperm.errors import (
    DomainError,
    EmptyMessageSetError,
    InfeasibleTargetError,
    InputValidationError,
    NoisyPermError,
    ResourceLimitError,
)
from noisyperm.packing import ChannelMatrix

logger = logging.getLogger(__name__)

CSV_HEADER = ["n", "method", "m", "log2_m", "rate", "eps_bound", "capacity"]

EXIT_OK          = 0
EXIT_USAGE       = 2
EXIT_NUMERIC     = 3
EXIT_VERIFY      = 4

NUMERIC_ERRORS = (DomainError, InfeasibleTargetError, EmptyMessageSetError, ResourceLimitError)

DEFAULT_METHODS = {
    "bsc": [BoundMethod.THM3_BSC, BoundMethod.APPROX_BSC_CEIL],
    "bec": [BoundMethod.THM4_BEC, BoundMethod.APPROX_BEC_CEIL],
    "matrix": [BoundMethod.THM2_EXACT, BoundMethod.APPROX_GENERAL],
}
DEFAULT_APPROX = {
    "bsc": [BoundMethod.APPROX_BSC],
    "bec": [BoundMethod.APPROX_BEC],
    "matrix": [BoundMethod.APPROX_GENERAL],
}
BOUND_METHODS = {BoundMethod.THM2_EXACT, BoundMethod.THM3_BSC, BoundMethod.THM4_BEC}
CONFIG_RESERVED = {"command", "handler", "config"}
CONFIG_ALIASES = {"lambda": "lam"}


# ---------------------------------------------------------------- formatting

def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def point_row(point, capacity):
    return [point.n, point.method.value, point.m_achieved, point.log2_m, point.rate, point.eps_bound, capacity]


# Streams curve rows as CSV or collects them for a JSON array
class RowWriter():

    def __init__(self, stream, fmt="csv"):
        self.stream = stream
        self.fmt = fmt
        self.rows = []
        if fmt == "csv":
            self.writer = csv.writer(stream, lineterminator="\n")
            self.writer.writerow(CSV_HEADER)

    def write(self, row):
        if self.fmt == "csv":
            self.writer.writerow([format_value(v) for v in row])
            self.stream.flush()
        else:
            self.rows.append(dict(zip(CSV_HEADER, row)))

    def close(self):
        if self.fmt == "json":
            self.stream.write(json.dumps(self.rows, indent=2) + "\n")
        self.stream.flush()


def _open_output(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


# ------------------------------------------------------------------- parsing

# "logspace:min:max:points" or a comma list; returns strictly increasing ints
def parse_n_grid(value):
    if isinstance(value, (list, tuple)):
        grid = [int(v) for v in value]
    elif isinstance(value, int):
        grid = [value]
    else:
        value = str(value).strip()
        try:
            if value.startswith("logspace:"):
                _, lo, hi, points = value.split(":")
                lo, hi, points = float(lo), float(hi), int(points)
                if not (1 <= lo <= hi and points >= 1):
                    raise InputValidationError(f"bad logspace grid {value!r}")
                grid = sorted(set(int(v) for v in np.round(np.logspace(math.log10(lo), math.log10(hi), points))))
            else:
                grid = [int(tok) for tok in value.split(",") if tok.strip()]
        except ValueError as exc:
            raise InputValidationError(f"cannot parse n grid {value!r}: {exc}") from exc
    if not grid:
        raise InputValidationError("empty n grid")
    if grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InputValidationError(f"n grid must be positive and strictly increasing, got {grid}")
    return grid


def parse_methods(value, kind, defaults):
    if not value:
        return list(defaults[kind])
    names = value if isinstance(value, (list, tuple)) else str(value).split(",")
    methods = []
    for name in names:
        name = name.strip().upper()
        try:
            method = BoundMethod(name)
        except ValueError:
            choices = ", ".join(m.value for m in sorted(BOUND_METHODS | approx.APPROX_METHODS, key=lambda m: m.value))
            raise InputValidationError(f"unknown method {name!r}; choose from {choices}") from None
        if method not in BOUND_METHODS | approx.APPROX_METHODS:
            raise InputValidationError(f"{name} cannot be requested directly")
        methods.append(method)
    return methods


def _require(args, name, flag):
    value = getattr(args, name, None)
    if value is None:
        raise InputValidationError(f"{args.command}: {flag} is required")
    return value


# (channel, capacity) from the positional kind and its parameter flag
def resolve_channel(args):
    kind = args.channel
    if kind == "bsc":
        channel = Bsc(float(_require(args, "delta", "--delta")))
        if not (0.0 < channel.delta < 0.5):
            raise InputValidationError(f"--delta must lie in (0, 1/2), got {channel.delta}")
        return channel, ChannelMatrix.bsc(channel.delta).capacity
    if kind == "bec":
        channel = Bec(float(_require(args, "eta", "--eta")))
        if not (0.0 < channel.eta < 1.0):
            raise InputValidationError(f"--eta must lie in (0, 1), got {channel.eta}")
        return channel, ChannelMatrix.bec(channel.eta).capacity
    if kind == "matrix":
        channel = ChannelMatrix.from_file(_require(args, "matrix", "--matrix"))
        return channel, channel.capacity
    raise InputValidationError(f"channel kind must be bsc, bec or matrix, got {kind!r}")


def _check_method(channel, method):
    if method is BoundMethod.THM3_BSC and not isinstance(channel, Bsc):
        raise InputValidationError("THM3_BSC needs a BSC")
    if method is BoundMethod.THM4_BEC and not isinstance(channel, Bec):
        raise InputValidationError("THM4_BEC needs a BEC")
    if method in (BoundMethod.THM2_EXACT, BoundMethod.APPROX_GENERAL) and isinstance(channel, Bec):
        raise InputValidationError(f"{method.value} needs a square channel; the BEC is 2x3")


def _bound_channel(channel, method):
    # the general bound on a BSC runs on its 2x2 matrix
    if method is BoundMethod.THM2_EXACT and isinstance(channel, Bsc):
        return ChannelMatrix.bsc(channel.delta)
    return channel


def _eps(args):
    eps = float(_require(args, "eps", "--eps"))
    if not (0.0 < eps < 1.0):
        raise InputValidationError(f"--eps must lie in (0, 1), got {eps}")
    return eps


def load_config(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputValidationError(f"config {path} must hold a JSON object")
    out = {}
    for key, value in data.items():
        key = CONFIG_ALIASES.get(key, key.replace("-", "_"))
        if key not in CONFIG_RESERVED:
            out[key] = value
    return out


# ------------------------------------------------------------------ commands

def cmd_pack(args):
    if args.matrix is not None:
        w = ChannelMatrix.from_file(args.matrix)
        k, lam = w.n_outputs, packing.volume_ratio(w)
    else:
        w, k, lam = None, _require(args, "k", "--k"), args.lam
    if args.grid_n is not None:
        if args.grid_n < 1:
            raise InputValidationError(f"--grid-n must be positive, got {args.grid_n}")
        r0 = packing.r0_for_grid(args.grid_n)
    else:
        r0 = float(_require(args, "r0", "--r0 or --grid-n"))
    lower, upper, exact = packing.packing_count_bounds(r0, k)
    result = {
        "k": k,
        "r0": r0,
        "grid_n": packing.grid_resolution(packing.tv_radius(r0)),
        "exact": exact,
        "bracket_lower": lower,
        "bracket_upper": upper,
    }
    if lam is not None:
        result["lambda"] = lam
        result["subspace_lower"] = packing.packing_lower_bound_subspace(r0, k, lam)
    if w is not None:
        result["channel_image_count"] = len(packing.build_dmc_message_set(w, r0))
    if args.format == "json":
        print(json.dumps(result, indent=2))
    else:
        print(tabulate([[key, format_value(value)] for key, value in result.items()],
                       headers=["quantity", "value"], disable_numparse=True))
    return EXIT_OK


def cmd_bound(args):
    channel, capacity = resolve_channel(args)
    n = int(_require(args, "n", "--n"))
    if args.m is None and args.eps is None:
        raise InputValidationError("bound needs --eps (search) or --m (fixed size)")
    if args.m is not None:
        point = bounds.evaluate_bound(channel, n, int(args.m))
    else:
        point = bounds.search_max_m(channel, n, _eps(args))
    if not point.feasible:
        logger.warning("no message set of size 2 or more meets the target at n=%d", n)
    stream, owned = _open_output(args.output)
    try:
        writer = RowWriter(stream, args.format)
        writer.write(point_row(point, capacity))
        writer.close()
    finally:
        if owned:
            stream.close()
    return EXIT_OK


# (points, failures) for one blocklength; numeric failures are reported, not
# raised. Approximations outside their domain come back as flagged nan points.
def _points_at(channel, n, eps, methods):
    points, failures = [], []
    for method in methods:
        try:
            if method in BOUND_METHODS:
                point = bounds.search_max_m(_bound_channel(channel, method), n, eps)
            else:
                point = approx.approx_point(channel, n, eps, method)
        except NUMERIC_ERRORS as exc:
            failures.append(f"{method.value} at n={n}: {exc}")
            continue
        points.append(point)
    return points, failures


def _run_curve(args, methods):
    channel, capacity = resolve_channel(args)
    eps = _eps(args)
    grid = parse_n_grid(_require(args, "n_grid", "--n-grid"))
    for method in methods:
        _check_method(channel, method)
    workers = max(1, int(getattr(args, "workers", 1) or 1))
    logger.info("%d blocklengths x %d methods with %d worker(s)", len(grid), len(methods), workers)

    def compute(n):
        return _points_at(channel, n, eps, methods)

    stream, owned = _open_output(args.output)
    collected, failures = [], []
    try:
        writer = RowWriter(stream, args.format)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map yields in grid order, so rows stream out deterministically
            for points, failed in pool.map(compute, grid):
                for point in points:
                    row = point_row(point, capacity)
                    writer.write(row)
                    collected.append(dict(zip(CSV_HEADER, row)))
                for message in failed:
                    logger.error("%s", message)
                failures.extend(failed)
        writer.close()
    finally:
        if owned:
            stream.close()
    return collected, failures


def cmd_curve(args):
    methods = parse_methods(args.methods, args.channel, DEFAULT_METHODS)
    rows, failures = _run_curve(args, methods)
    if args.plot:
        from noisyperm.plot import plot_rate_curves
        if rows:
            plot_rate_curves(rows, args.plot, title=args.title)
        else:
            logger.warning("no rows to plot")
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_approx(args):
    methods = parse_methods(args.methods, args.channel, DEFAULT_APPROX)
    if any(m not in approx.APPROX_METHODS for m in methods):
        raise InputValidationError("approx only runs the APPROX_* methods")
    if args.n is not None and args.n_grid is None:
        args.n_grid = [int(args.n)]
    _, failures = _run_curve(args, methods)
    return EXIT_NUMERIC if failures else EXIT_OK


# (channel matrix, message set, analytic bound callable, config echo)
def _simulation_setup(args, channel):
    n = int(_require(args, "n", "--n"))
    if isinstance(channel, ChannelMatrix):
        grid_n = int(_require(args, "grid_n", "--grid-n"))
        s = packing.build_dmc_message_set(channel, packing.r0_for_grid(grid_n))
        echo = {"channel": "matrix", "matrix": str(args.matrix), "grid_n": grid_n}
        return channel, s, lambda: bounds.achievability_general(s, n), echo
    m = int(_require(args, "m", "--m"))
    if isinstance(channel, Bsc):
        delta, echo = channel.delta, {"channel": "bsc", "delta": channel.delta, "m": m}
    else:
        # the BEC is simulated through its BSC(eta/2) equivalent
        delta, echo = channel.eta / 2, {"channel": "bec", "eta": channel.eta, "m": m}
    s = packing.build_binary_message_set_by_size(delta, delta, m)
    if isinstance(channel, Bsc):
        def analytic():
            return bounds.bsc_achievability(delta, s, n)
    else:
        def analytic():
            return bounds.bec_achievability(channel.eta, m, n)
    return ChannelMatrix.bsc(delta), s, analytic, echo


def cmd_simulate(args):
    channel, _ = resolve_channel(args)
    seed = _require(args, "seed", "--seed")
    trials = int(_require(args, "trials", "--trials"))
    w, s, analytic, echo = _simulation_setup(args, channel)
    cfg = sim.SimConfig(channel=w, message_set=s, n=int(args.n), trials=trials, seed=int(seed),
                        permute=not args.no_permute, workers=max(1, int(args.workers or 1)))
    echo.update({"n": cfg.n, "trials": cfg.trials, "seed": cfg.seed, "permute": cfg.permute})
    report = sim.run_trials(cfg)
    try:
        bound = analytic()
    except ResourceLimitError as exc:
        logger.warning("analytic bound unavailable: %s", exc)
        bound = None
    out = {"config": echo, "report": report.to_dict(), "analytic_bound": bound}
    if args.invariance:
        check = sim.permutation_invariance_check(cfg)
        out["invariance"] = {
            "unpermuted": check.unpermuted.to_dict(),
            "difference": check.difference,
            "z": check.z,
            "within_noise": check.within_noise,
        }
    stream, owned = _open_output(args.output)
    try:
        stream.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
        stream.flush()
    finally:
        if owned:
            stream.close()
    return EXIT_OK


def cmd_verify(args):
    only = set(args.only.split(",")) if args.only else None
    results = verify.run_checks(quick=not args.full, only=only)
    print(tabulate([[r.name, "PASS" if r.passed else "FAIL", r.detail, f"{r.seconds:.1f}s"] for r in results],
                   headers=["check", "result", "detail", "time"]))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


# -------------------------------------------------------------------- parser

def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="JSON file whose keys mirror the flag names", default=None)
    common.add_argument("-v", "--verbose", action="count", help="-v for progress, -vv for debug output", default=0)
    return common


def _channel_args(p):
    p.add_argument("channel", nargs="?", choices=["bsc", "bec", "matrix"], help="Channel family", default=None)
    p.add_argument("--delta", type=float, help="BSC crossover probability in (0, 1/2)", default=None)
    p.add_argument("--eta", type=float, help="BEC erasure probability in (0, 1)", default=None)
    p.add_argument("--matrix", type=str, help="Channel matrix file: '|X| |Y|' then row-major probabilities", default=None)


def _output_args(p, formats=("csv", "json")):
    p.add_argument("-o", "--output", type=str, help="Output file (default stdout)", default=None)
    p.add_argument("--format", choices=list(formats), help="Output format", default=formats[0])


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(
        prog="noisyperm",
        description="Finite-blocklength achievability bounds for noisy permutation channels",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    subparsers = {}

    p = sub.add_parser("pack", parents=[common], help="Divergence packing counts")
    p.add_argument("--k", type=int, help="Output alphabet size", default=None)
    p.add_argument("--r0", type=float, help="KL packing radius in bits", default=None)
    p.add_argument("--grid-n", dest="grid_n", type=int, help="Grid resolution floor(1/r) instead of --r0", default=None)
    p.add_argument("--lambda", dest="lam", type=float, help="Volume ratio of the channel image", default=None)
    p.add_argument("--matrix", type=str, help="Channel matrix file (sets k and lambda)", default=None)
    p.add_argument("--format", choices=["table", "json"], help="Output format", default="table")
    p.set_defaults(handler=cmd_pack)
    subparsers["pack"] = p

    p = sub.add_parser("bound", parents=[common], help="Achievability bound at one blocklength")
    _channel_args(p)
    p.add_argument("--n", type=int, help="Blocklength", default=None)
    p.add_argument("--eps", type=float, help="Target error probability (search for the largest M)", default=None)
    p.add_argument("--m", type=int, help="Fixed size: M for bsc/bec, grid resolution for a matrix", default=None)
    _output_args(p)
    p.set_defaults(handler=cmd_bound)
    subparsers["bound"] = p

    p = sub.add_parser("curve", parents=[common], help="Rate-blocklength curve over an n grid")
    _channel_args(p)
    p.add_argument("--eps", type=float, help="Target error probability", default=None)
    p.add_argument("--n-grid", dest="n_grid", type=str, help="'logspace:min:max:points' or a comma list", default=None)
    p.add_argument("--methods", type=str, help="Comma list of method tags", default=None)
    p.add_argument("--workers", type=int, help="Threads evaluating blocklengths", default=1)
    p.add_argument("--plot", type=str, help="Also render the curve to this PNG", default=None)
    p.add_argument("--title", type=str, help="Plot title", default=None)
    _output_args(p)
    p.set_defaults(handler=cmd_curve)
    subparsers["curve"] = p

    p = sub.add_parser("approx", parents=[common], help="Gaussian approximations of log2 M")
    _channel_args(p)
    p.add_argument("--eps", type=float, help="Target error probability", default=None)
    p.add_argument("--n", type=int, help="Blocklength", default=None)
    p.add_argument("--n-grid", dest="n_grid", type=str, help="'logspace:min:max:points' or a comma list", default=None)
    p.add_argument("--methods", type=str, help="Comma list of APPROX_* tags", default=None)
    _output_args(p)
    p.set_defaults(handler=cmd_approx, workers=1)
    subparsers["approx"] = p

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo error probability with ML decoding")
    _channel_args(p)
    p.add_argument("--n", type=int, help="Blocklength", default=None)
    p.add_argument("--m", type=int, help="Number of messages (bsc/bec)", default=None)
    p.add_argument("--grid-n", dest="grid_n", type=int, help="Grid resolution of the message set (matrix)", default=None)
    p.add_argument("--trials", type=int, help="Number of transmitted messages", default=None)
    p.add_argument("--seed", type=int, help="RNG seed (required)", default=None)
    p.add_argument("--no-permute", dest="no_permute", action="store_true", help="Skip the permutation block")
    p.add_argument("--invariance", action="store_true", help="Also rerun without the permutation and compare")
    p.add_argument("--workers", type=int, help="Threads running trial blocks", default=1)
    p.add_argument("-o", "--output", type=str, help="Output file (default stdout)", default=None)
    p.set_defaults(handler=cmd_simulate)
    subparsers["simulate"] = p

    p = sub.add_parser("verify", parents=[common], help="Run the oracle and property checks")
    p.add_argument("--full", action="store_true", help="Use the full acceptance sizes")
    p.add_argument("--only", type=str, help="Comma list of check names", default=None)
    p.set_defaults(handler=cmd_verify)
    subparsers["verify"] = p

    return parser, subparsers


def parse_args(argv=None):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=str, default=None)
    known, _ = pre.parse_known_args(argv)
    parser, subparsers = build_parser()
    if known.config:
        config = load_config(known.config)
        for p in subparsers.values():
            p.set_defaults(**config)
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise InputValidationError("a command is required")
    return args


def _configure_logging(verbosity):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv=None):
    try:
        args = parse_args(argv)
        _configure_logging(args.verbose)
        return args.handler(args)
    except InputValidationError as exc:
        print(f"noisyperm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"noisyperm: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NoisyPermError as exc:
        # singular matrices, degenerate radii and marginals outside the channel image are bad input
        print(f"noisyperm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
