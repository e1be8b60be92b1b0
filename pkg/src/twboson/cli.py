"""Command-line interface: ``twboson <command> ...``.

Exit codes: 0 success, 2 usage error, 3 unreadable or malformed input,
4 oracle or collision cap exceeded, 5 numerical failure.  Errors are reported
as a single JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .approx import (
    approx_gbs_sample_batch,
    approx_spbs_sample_batch,
    covariance_distance,
    covariance_distance_bound,
    extend_to_unitary,
    gbs_tvd_bound,
    spbs_tvd_bound,
    truncate_unitary,
)
from .bench import fit_exponent, fit_log2_slope, run_bench
from .gaussian import NumericalError
from .graphs import band_decomposition, build_bipartite_graph, build_symmetric_graph, tree_decompose
from .io import decode_complex, dump_json
from .lattice import Circuit, CircuitSpec, build_local_haar_circuit
from .likelihood import GBSModel, SPBSModel, ZeroProbabilityError, log_likelihood_ratio, model_from_dict
from .oracles import OracleBudgetError
from .samplers import (
    Distribution,
    SamplerConfig,
    empirical_tvd,
    gbs_exact_distribution,
    gbs_sample_batch,
    read_samples,
    spbs_exact_distribution,
    spbs_sample_batch,
    write_samples,
)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_CAP, EXIT_NUMERICAL = 0, 2, 3, 4, 5
WORKERS_ENV = "TWBOSON_WORKERS"


class InputError(Exception):
    """Malformed or unreadable input file."""


def _int_list(text: str) -> list:
    try:
        out = []
        for part in text.split(","):
            part = part.strip()
            if ":" in part:
                lo, hi, *step = (int(v) for v in part.split(":"))
                out.extend(range(lo, hi + 1, step[0] if step else 1))
            elif part:
                out.append(int(part))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 1,2,5 or 8:24:2, got {text!r}")


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def load_circuit(path: str):
    """Return (U, sources, circuit or None) from a circuit or plain-matrix file."""
    data = _read_json(path)
    try:
        if "spec" in data:
            circuit = Circuit.from_dict(data)
            return circuit.U, list(circuit.sources), circuit
        U = decode_complex(data["U"])
        sources = [int(s) for s in data["sources"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not a circuit file ({exc})") from exc
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise InputError(f"{path}: U must be square")
    return U, sources, None


def _workers(args) -> int | None:
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get(WORKERS_ENV)
    return int(env) if env else None


# ---------------------------------------------------------------------------
# Commands


def cmd_gen_circuit(args) -> int:
    spec = CircuitSpec(args.dim, args.modes, args.sources, depth=args.depth, seed=args.seed,
                       metric=args.metric)
    circuit = build_local_haar_circuit(spec)
    _write(dump_json(circuit.to_dict(with_unitary=args.with_unitary), sort_keys=True), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    U, sources, circuit = load_circuit(args.circuit)
    config = SamplerConfig(engine=args.engine, strategy=args.strategy, seed=args.seed,
                           m_max=args.m_max, cap=args.cap, epsilon=args.epsilon,
                           track_truncation=not args.no_track)
    workers = _workers(args)
    report: dict = {"kind": args.kind, "n": args.n, "seed": args.seed, "engine": args.engine}
    if args.approx_kappa is not None:
        if circuit is None:
            raise InputError("--approx-kappa needs a lattice circuit file")
        tr = truncate_unitary(U, sources, circuit, args.approx_kappa)
        approx = extend_to_unitary(tr.U_tilde, U, clamp=args.clamp)
        N = len(sources)
        report.update(kappa=args.approx_kappa, dU_norm=approx.dU_norm, dW_norm=approx.dW_norm,
                      mu=approx.mu)
        if args.kind == "spbs":
            records = approx_spbs_sample_batch(approx, sources, args.n, config, workers=workers)
            report["tvd_bound"] = spbs_tvd_bound(N, approx.dW_norm)
        else:
            records = approx_gbs_sample_batch(approx, sources, args.squeezing, args.n, config,
                                              workers=workers)
            dV = covariance_distance(approx, sources, args.squeezing)
            report.update(covariance_distance=dV,
                          covariance_distance_bound=covariance_distance_bound(
                              approx.dW_norm, approx.M, N, args.squeezing),
                          tvd_bound=gbs_tvd_bound(N, args.squeezing, dV))
        report["out_rate"] = float(np.mean([r.flag == "out" for r in records]))
    elif args.kind == "spbs":
        records = spbs_sample_batch(U, sources, args.n, config, workers=workers)
    else:
        records = gbs_sample_batch(U, sources, args.squeezing, args.n, config, workers=workers)
    if args.kind == "gbs":
        report["overload_rate"] = float(f"{np.mean([r.truncated_mass for r in records]):.12g}")
    if args.out in (None, "-"):
        for rec in records:
            sys.stdout.write(rec.to_json() + "\n")
        sys.stderr.write(json.dumps(report) + "\n")
    else:
        write_samples(args.out, records)
        _write(json.dumps(report), None)
    return EXIT_OK


def cmd_exact_dist(args) -> int:
    U, sources, _ = load_circuit(args.circuit)
    if args.kind == "spbs":
        dist = spbs_exact_distribution(U, sources)
    else:
        dist = gbs_exact_distribution(U, sources, args.squeezing, args.m_max)
    data = dist.to_dict()
    data["kind"] = args.kind
    _write(json.dumps(data), args.out)
    return EXIT_OK


def cmd_tvd(args) -> int:
    try:
        samples = read_samples(args.samples)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"{args.samples}: {exc}") from exc
    data = _read_json(args.dist)
    try:
        dist = Distribution.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.dist}: not a distribution file ({exc})") from exc
    _write(repr(empirical_tvd(samples, dist)), None)
    return EXIT_OK


def _load_outcome(path: str, M: int) -> list:
    try:
        with open(path) as fh:
            text = fh.read().strip()
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        # A sample file: use its first record.
        try:
            data = json.loads(text.splitlines()[0])
        except (json.JSONDecodeError, IndexError) as exc:
            raise InputError(f"{path}: {exc}") from exc
    m = data.get("m") if isinstance(data, dict) else data
    if not isinstance(m, list) or len(m) != M:
        raise InputError(f"{path}: expected an occupation vector of length {M}")
    return [int(v) for v in m]


def cmd_treewidth(args) -> int:
    U, sources, circuit = load_circuit(args.circuit)
    M = U.shape[0]
    if args.worst_band:
        if circuit is None:
            raise InputError("--worst-band needs a lattice circuit file")
        outcome = [1] * M
    elif args.outcome:
        outcome = _load_outcome(args.outcome, M)
    else:
        raise InputError("give --outcome FILE or --worst-band")
    rows = [i for i, v in enumerate(outcome) for _ in range(v)]
    if args.kappa is not None or args.worst_band:
        if circuit is None:
            raise InputError("--kappa needs a lattice circuit file")
        kappa = 1.0 if args.kappa is None else args.kappa
        td = band_decomposition(circuit.spec, outcome, kappa, kind=args.kind)
    else:
        occupied = sorted(set(rows))
        if args.kind == "bipartite":
            graph = build_bipartite_graph(U, occupied, sources, args.zero_tol)
        else:
            B = U[:, sources] @ U[:, sources].T
            graph = build_symmetric_graph(B[np.ix_(occupied, occupied)], labels=occupied,
                                          zero_tol=args.zero_tol)
        td = tree_decompose(graph, args.strategy)
    _write(json.dumps({"width": td.width, "kind": args.kind, "decomposition": td.to_dict()}), args.out)
    return EXIT_OK


def cmd_likelihood(args) -> int:
    try:
        a = read_samples(args.samples_a)
        b = read_samples(args.samples_b)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(str(exc)) from exc
    data = _read_json(args.model)
    try:
        if "kind" in data and data["kind"] in ("gbs", "spbs") and "U" in data:
            model = model_from_dict(data, args.engine)
        else:
            U, sources, _ = load_circuit(args.model)
            kind = args.kind or "gbs"
            model = GBSModel(U, sources, args.squeezing, args.engine) if kind == "gbs" \
                else SPBSModel(U, sources, args.engine)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{args.model}: not a model file ({exc})") from exc
    report = log_likelihood_ratio(a, b, model, args.marginal_modes, normalize=args.normalize,
                                  floor=args.floor)
    _write(json.dumps(report.to_dict()), args.out)
    if args.running:
        _write(report.running_text(), args.running)
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = run_bench(args.family, args.sizes, args.engine, args.bandwidth, args.repeats, args.seed)
    lines = ["family n width seconds"]
    lines += [f"{r.family} {r.n} {r.width} {r.seconds:.6g}" for r in rows]
    if len(rows) >= 2:
        lines.append(f"# log-log exponent {fit_exponent(rows):.4f}")
        lines.append(f"# log2-linear slope {fit_log2_slope(rows):.4f}")
    _write("\n".join(lines), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors are one JSON line on stderr."""

    def error(self, message: str):
        sys.stderr.write(json.dumps({"error": "usage", "message": f"{self.prog}: {message}",
                                     "exit": EXIT_USAGE}) + "\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twboson",
                                     description="Treewidth-based boson sampling simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-circuit", help="generate a local Haar-random lattice circuit")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--modes", type=int, required=True)
    p.add_argument("--sources", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric", choices=["linf", "l1"], default="linf")
    p.add_argument("--with-unitary", action="store_true", help="also store U as [re, im] pairs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_circuit)

    p = sub.add_parser("sample", help="draw samples (JSON lines)")
    p.add_argument("--circuit", required=True)
    p.add_argument("--kind", choices=["spbs", "gbs"], required=True)
    p.add_argument("--engine", choices=["treedp", "oracle"], default="treedp")
    p.add_argument("--strategy", choices=["min_fill", "min_degree"], default="min_fill")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--squeezing", "--r", dest="squeezing", type=float, default=0.5)
    p.add_argument("--m-max", type=int)
    p.add_argument("--cap", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--no-track", action="store_true", help="skip the truncation-loss computation")
    p.add_argument("--approx-kappa", type=float)
    p.add_argument("--clamp", action="store_true", help="clamp singular values instead of rescaling")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("exact-dist", help="exact output distribution (oracle scale)")
    p.add_argument("--circuit", required=True)
    p.add_argument("--kind", choices=["spbs", "gbs"], required=True)
    p.add_argument("--squeezing", "--r", dest="squeezing", type=float, default=0.5)
    p.add_argument("--m-max", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact_dist)

    p = sub.add_parser("tvd", help="empirical total variation distance")
    p.add_argument("--samples", required=True)
    p.add_argument("--dist", required=True)
    p.set_defaults(func=cmd_tvd)

    p = sub.add_parser("treewidth", help="decomposition width for an outcome")
    p.add_argument("--circuit", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--outcome")
    g.add_argument("--worst-band", action="store_true")
    p.add_argument("--kind", choices=["bipartite", "symmetric"], default="symmetric")
    p.add_argument("--kappa", type=float, help="use the lattice band decomposition")
    p.add_argument("--strategy", choices=["min_fill", "min_degree"], default="min_fill")
    p.add_argument("--zero-tol", type=float, default=1e-12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_treewidth)

    p = sub.add_parser("likelihood", help="log-likelihood ratio of two sample files")
    p.add_argument("--samples-a", required=True)
    p.add_argument("--samples-b", required=True)
    p.add_argument("--model", required=True, help="model file or circuit file")
    p.add_argument("--kind", choices=["spbs", "gbs"])
    p.add_argument("--squeezing", "--r", dest="squeezing", type=float, default=0.5)
    p.add_argument("--engine", choices=["treedp", "oracle"], default="treedp")
    p.add_argument("--marginal-modes", type=_int_list)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--floor", type=float)
    p.add_argument("--running", help="write the running partial sums here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_likelihood)

    p = sub.add_parser("bench", help="permanent runtime scaling table")
    p.add_argument("--family", choices=["banded", "dense"], required=True)
    p.add_argument("--sizes", type=_int_list, required=True)
    p.add_argument("--engine", choices=["treedp", "ryser"], default="treedp")
    p.add_argument("--bandwidth", type=int, default=3)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def _fail(code: int, kind: str, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc), "exit": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except InputError as exc:
        return _fail(EXIT_PARSE, "parse", exc)
    except OracleBudgetError as exc:
        return _fail(EXIT_CAP, "cap", exc)
    except (NumericalError, ZeroProbabilityError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)
    except ValueError as exc:
        if "cap" in str(exc) or "budget" in str(exc):
            return _fail(EXIT_CAP, "cap", exc)
        return _fail(EXIT_USAGE, "usage", exc)


if __name__ == "__main__":
    sys.exit(main())
