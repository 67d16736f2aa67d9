"""Command-line interface.

Subcommands:
  analyze   spectral equivalent of a matrix series (or GKF form) from JSON
  kernel    flat-limit spectral equivalent of a kernel matrix on a node set
  verify    run a pipeline, then check it against the numerical oracle
  sweep     eigenvalue curves over an eps grid as CSV (flat-limit figure data)

Exit codes: 0 complete / all verifiable groups pass, 2 truncated expansion,
1 malformed input or invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .ase import Ase, eigen_readout
from .gkf import ase_from_gkf
from .kernels import NodeSet, generate_nodes, kernel_ase, kernel_model
from .oracle import eigen_sweep, match_ase
from .pipeline import analyze_series
from . import serialize
from .serialize import InputError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_TRUNCATED = 2


def _parse_eps_grid(spec: str) -> np.ndarray:
    """'start:stop:points' -> decreasing log-spaced grid, e.g. '1e-4:1e-1:37'."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise InputError("--eps-grid must look like start:stop:points")
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InputError("--eps-grid fields must be numeric") from exc
    if start <= 0 or stop <= 0 or points < 4:
        raise InputError("--eps-grid needs positive endpoints and at least 4 points")
    lo, hi = min(start, stop), max(start, stop)
    return np.geomspace(lo, hi, points)[::-1]


DEFAULT_GRID = "1e-4:1e-1:37"  # 12 points per decade over [1e-4, 1e-1]


def _add_common(p):
    p.add_argument("--input", help="matrix-series (or GKF) JSON file")
    p.add_argument("--nodes", help="node CSV path, or generator spec like 'uniform:10'")
    p.add_argument("--kernel", choices=("gaussian", "exponential", "matern2", "custom"))
    p.add_argument("--psi", help="JSON list of psi coefficients for --kernel custom")
    p.add_argument("--dim", type=int, default=2, help="dimension for generated nodes")
    p.add_argument("--mode", choices=("scaled", "gkf", "iterative", "auto"), default="auto")
    p.add_argument("--rank-tol", type=float, default=None)
    p.add_argument("--eps-grid", default=DEFAULT_GRID)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="write the main result here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asymspec",
        description="Limiting eigenvalues and eigenvectors of symmetric "
        "analytic matrix perturbations and kernel matrices in the flat limit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("analyze", "spectral equivalent of a matrix series from JSON"),
        ("kernel", "flat-limit spectral equivalent of a kernel matrix"),
        ("verify", "pipeline result checked against a numerical eigen-sweep"),
        ("sweep", "eigenvalue curves over an eps grid as CSV"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        if name == "verify":
            p.add_argument("--tol-coeff", type=float, default=1e-2)
            p.add_argument("--tol-angle", type=float, default=1e-2)
            p.add_argument(
                "--perturb-lambda",
                type=float,
                default=None,
                help="test hook: scale predicted leading coefficients before checking",
            )
        if name == "sweep":
            p.add_argument("--track-vector", type=int, default=None, metavar="K")
    return parser


def _emit(text: str, output):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _load_nodes(args) -> NodeSet:
    if not args.nodes:
        raise InputError("this command needs --nodes")
    if ":" in args.nodes:
        return generate_nodes(args.nodes, d=args.dim, seed=args.seed)
    import os

    if not os.path.exists(args.nodes):
        raise InputError(f"node file {args.nodes} does not exist")
    return serialize.read_nodes_csv(args.nodes)


def _load_kernel(args):
    if not args.kernel:
        raise InputError("this command needs --kernel")
    psi = None
    if args.psi is not None:
        try:
            psi = json.loads(args.psi)
        except json.JSONDecodeError as exc:
            raise InputError(f"--psi: {exc.msg}") from exc
    try:
        return kernel_model(args.kernel, psi_coefficients=psi)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _series_rank_tol(args) -> float:
    return args.rank_tol if args.rank_tol is not None else 1e-10


def _kernel_rank_tol(args) -> float:
    return args.rank_tol if args.rank_tol is not None else 1e-9


def _series_ase(args) -> Ase:
    if not args.input:
        raise InputError("this command needs --input")
    obj = _load_json(args.input)
    if args.mode == "gkf":
        form = serialize.gkf_from_json(obj)
        return ase_from_gkf(form, _series_rank_tol(args))
    series = serialize.matrix_series_from_json(obj)
    if not series.symmetric:
        raise InputError("field 'symmetric': analysis requires a symmetric series")
    return analyze_series(series, args.mode, _series_rank_tol(args))


def _pipeline_ase_and_source(args):
    """The (prediction, sweep source) pair for verify/sweep."""
    if args.input:
        ase = _series_ase(args)
        obj = _load_json(args.input)
        if args.mode == "gkf":
            form = serialize.gkf_from_json(obj)
            return ase, form.evaluate
        return ase, serialize.matrix_series_from_json(obj)
    kernel = _load_kernel(args)
    nodes = _load_nodes(args)
    ase, _ = kernel_ase(kernel, nodes, _kernel_rank_tol(args))
    return ase, (kernel, nodes)


def cmd_analyze(args) -> int:
    if args.format == "csv":
        raise InputError("analyze emits JSON; use --format json")
    ase = _series_ase(args)
    _emit(serialize.dumps(serialize.ase_to_json(ase)), args.output)
    return EXIT_OK if ase.complete else EXIT_TRUNCATED


def cmd_kernel(args) -> int:
    if args.format == "csv":
        raise InputError("kernel emits JSON (plus the group table); use --format json")
    kernel = _load_kernel(args)
    nodes = _load_nodes(args)
    ase, report = kernel_ase(kernel, nodes, _kernel_rank_tol(args))
    table = ["valuation,count,lambda_leading"]
    for row in report:
        lead = ";".join(f"{x:.12g}" for x in row.leading_values)
        table.append(f"{row.valuation},{row.count},{lead}")
    sys.stdout.write("\n".join(table) + "\n")
    _emit(serialize.dumps(serialize.ase_to_json(ase)), args.output)
    return EXIT_OK if ase.complete else EXIT_TRUNCATED


def cmd_verify(args) -> int:
    ase, source = _pipeline_ase_and_source(args)
    if args.perturb_lambda is not None:
        ase = Ase(
            ase.n,
            [(alpha, args.perturb_lambda * term) for alpha, term in ase.groups],
            ase.truncated_at,
        )
    grid = _parse_eps_grid(args.eps_grid)
    sweep = eigen_sweep(source, grid)
    report = match_ase(ase, sweep, args.tol_coeff, args.tol_angle)
    _emit(serialize.dumps(serialize.match_report_to_json(report)), args.output)
    return EXIT_OK if report.passed else EXIT_TRUNCATED


def cmd_sweep(args) -> int:
    if args.format == "json":
        raise InputError("sweep emits CSV; use --format csv")
    ase, source = _pipeline_ase_and_source(args)
    grid = _parse_eps_grid(args.eps_grid)
    sweep = eigen_sweep(source, grid)
    predicted = None
    if args.track_vector is not None:
        predicted = _predicted_vector(ase, args.track_vector)
    lines = serialize.sweep_csv_lines(sweep, args.track_vector, predicted)
    _emit("\n".join(lines), args.output)
    return EXIT_OK


def _predicted_vector(ase: Ase, k: int) -> np.ndarray:
    """Predicted limiting eigenvector for the k-th largest eigenvalue (1-based)."""
    if k < 1:
        raise InputError("--track-vector index must be >= 1")
    position = k - 1
    for group in eigen_readout(ase):
        if position < group.count:
            if group.ambiguous:
                raise InputError(
                    f"eigenvector {k} is not identified: its group at valuation "
                    f"{group.valuation} has coinciding leading coefficients"
                )
            return group.vectors[:, position]
        position -= group.count
    raise InputError(
        f"eigenvector {k} is beyond the resolved groups "
        f"(expansion truncated at {ase.truncated_at})"
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "analyze": cmd_analyze,
        "kernel": cmd_kernel,
        "verify": cmd_verify,
        "sweep": cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
