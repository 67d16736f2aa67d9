"""File formats: matrix-series / GKF / scaling / ASE JSON, node CSV, sweep CSV.

All emitters are deterministic (fixed key order, repr-exact floats in JSON,
17-significant-digit floats in CSV) so repeated runs produce byte-identical
output.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .series import Exponent, MatrixSeries
from .scaling import DiagonalScaling
from .ase import Ase, eigen_readout
from .gkf import GkfForm
from .kernels import NodeSet

__all__ = [
    "InputError",
    "exponent_to_json",
    "exponent_from_json",
    "matrix_series_to_json",
    "matrix_series_from_json",
    "scaling_to_json",
    "scaling_from_json",
    "gkf_from_json",
    "ase_to_json",
    "ase_from_json",
    "read_nodes_csv",
    "write_nodes_csv",
    "sweep_csv_lines",
    "match_report_to_json",
]


class InputError(ValueError):
    """Malformed input file; the message names the offending field."""


def exponent_to_json(e: Exponent):
    if e.is_infinite:
        return None
    return {"num": e.num, "den": e.den}


def exponent_from_json(obj, where: str) -> Exponent:
    if isinstance(obj, bool):
        raise InputError(f"{where}: expected an exponent, got a boolean")
    if isinstance(obj, int):
        return Exponent(obj)
    if isinstance(obj, dict):
        try:
            num = obj["num"]
            den = obj.get("den", 1)
        except KeyError as exc:
            raise InputError(f"{where}: exponent object needs 'num'") from exc
        if not isinstance(num, int) or not isinstance(den, int) or den < 1:
            raise InputError(f"{where}: exponent num/den must be integers with den >= 1")
        return Exponent(num, den)
    raise InputError(f"{where}: expected an integer or {{'num','den'}} object")


def _matrix_from_json(obj, n: int, where: str) -> np.ndarray:
    try:
        mat = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: matrix must be an array of arrays of numbers") from exc
    if mat.shape != (n, n):
        raise InputError(f"{where}: matrix shape {mat.shape} != ({n}, {n})")
    if not np.all(np.isfinite(mat)):
        raise InputError(f"{where}: matrix entries must be finite")
    return mat


def matrix_series_to_json(k: MatrixSeries) -> dict:
    return {
        "n": k.shape[0],
        "symmetric": bool(k.symmetric),
        "trunc_order": exponent_to_json(k.trunc_order),
        "terms": [
            {"exponent": exponent_to_json(e), "matrix": m.tolist()} for e, m in k.terms
        ],
    }


def matrix_series_from_json(obj) -> MatrixSeries:
    if not isinstance(obj, dict):
        raise InputError("top level: expected a JSON object")
    try:
        n = obj["n"]
    except KeyError as exc:
        raise InputError("top level: missing field 'n'") from exc
    if not isinstance(n, int) or n < 1:
        raise InputError("field 'n': must be a positive integer")
    symmetric = obj.get("symmetric", True)
    if not isinstance(symmetric, bool):
        raise InputError("field 'symmetric': must be a boolean")
    trunc_raw = obj.get("trunc_order")
    trunc = (
        None if trunc_raw is None else exponent_from_json(trunc_raw, "field 'trunc_order'")
    )
    terms_raw = obj.get("terms")
    if not isinstance(terms_raw, list):
        raise InputError("field 'terms': must be a list")
    terms = []
    for idx, t in enumerate(terms_raw):
        where = f"terms[{idx}]"
        if not isinstance(t, dict):
            raise InputError(f"{where}: expected an object")
        if "exponent" not in t or "matrix" not in t:
            raise InputError(f"{where}: needs 'exponent' and 'matrix'")
        e = exponent_from_json(t["exponent"], f"{where}.exponent")
        m = _matrix_from_json(t["matrix"], n, f"{where}.matrix")
        if symmetric and not np.allclose(m, m.T, atol=0.0):
            raise InputError(f"{where}.matrix: declared symmetric but is not")
        terms.append((e, m))
    return MatrixSeries(n, terms, trunc, symmetric=symmetric)


def scaling_to_json(scaling: DiagonalScaling) -> dict:
    return {
        "valuations": [
            {"nu": exponent_to_json(nu), "mult": mult} for nu, mult in scaling.valuations
        ]
    }


def scaling_from_json(obj, where: str = "scaling") -> DiagonalScaling:
    if isinstance(obj, dict):
        obj = obj.get("valuations")
    if not isinstance(obj, list):
        raise InputError(f"{where}: expected a list of {{'nu','mult'}} blocks")
    blocks = []
    for idx, b in enumerate(obj):
        if not isinstance(b, dict) or "nu" not in b:
            raise InputError(f"{where}[{idx}]: needs 'nu' (and optional 'mult')")
        nu = exponent_from_json(b["nu"], f"{where}[{idx}].nu")
        mult = b.get("mult", 1)
        if not isinstance(mult, int) or mult < 1:
            raise InputError(f"{where}[{idx}].mult: must be a positive integer")
        blocks.append((nu, mult))
    return DiagonalScaling(tuple(blocks))


def gkf_from_json(obj) -> GkfForm:
    if not isinstance(obj, dict):
        raise InputError("top level: expected a JSON object")
    for key in ("V", "W", "valuations"):
        if key not in obj:
            raise InputError(f"top level: missing field '{key}'")
    try:
        v = np.asarray(obj["V"], dtype=float)
        w = np.asarray(obj["W"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError("fields 'V'/'W': must be numeric arrays") from exc
    if v.ndim != 2 or w.ndim != 2:
        raise InputError("fields 'V'/'W': must be two-dimensional")
    scaling = scaling_from_json(obj["valuations"], "field 'valuations'")
    return GkfForm(v, scaling, w)


def ase_to_json(ase: Ase) -> dict:
    groups = []
    for g in eigen_readout(ase):
        groups.append(
            {
                "valuation": exponent_to_json(g.valuation),
                "lambda": [float(x) for x in g.leading_values],
                "ambiguous": bool(g.ambiguous),
                "vectors": [g.vectors[:, k].tolist() for k in range(g.vectors.shape[1])],
            }
        )
    return {
        "n": ase.n,
        "truncated_at": None if ase.truncated_at is None else exponent_to_json(ase.truncated_at),
        "groups": groups,
    }


def ase_from_json(obj) -> Ase:
    """Rebuild an Ase from its JSON form (terms from lambda + vectors)."""
    if not isinstance(obj, dict) or "n" not in obj or "groups" not in obj:
        raise InputError("ASE JSON needs 'n' and 'groups'")
    n = obj["n"]
    groups = []
    for idx, g in enumerate(obj["groups"]):
        where = f"groups[{idx}]"
        alpha = exponent_from_json(g["valuation"], f"{where}.valuation")
        lams = g.get("lambda")
        vecs = g.get("vectors")
        if not isinstance(lams, list) or vecs is None:
            raise InputError(f"{where}: needs 'lambda' and 'vectors'")
        u = np.asarray(vecs, dtype=float).T  # columns are vectors
        if u.shape != (n, len(lams)):
            raise InputError(f"{where}.vectors: shape mismatch")
        term = (u * np.asarray(lams)) @ u.T
        groups.append((alpha, 0.5 * (term + term.T)))
    trunc_raw = obj.get("truncated_at")
    trunc = None if trunc_raw is None else exponent_from_json(trunc_raw, "truncated_at")
    return Ase(n, groups, trunc)


def match_report_to_json(report) -> dict:
    return {
        "passed": bool(report.passed),
        "precision_ceiling": report.precision_ceiling,
        "note": report.note,
        "groups": [
            {
                "valuation": g.valuation,
                "count": g.count,
                "verifiable": bool(g.verifiable),
                "eps_star": g.eps_star,
                "slopes": [None if not math.isfinite(s) else s for s in g.slopes],
                "slope_ok": g.slope_ok,
                "coeff_rel_errors": list(g.coeff_rel_errors),
                "coeff_ok": g.coeff_ok,
                "angle": g.angle,
                "angle_ok": g.angle_ok,
                "passed": g.passed,
            }
            for g in report.groups
        ],
    }


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def read_nodes_csv(path) -> NodeSet:
    """One node per line, comma-separated doubles; optional '# d=<int>' header."""
    d = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("d="):
                    try:
                        d = int(body[2:])
                    except ValueError as exc:
                        raise InputError(f"line {lineno}: bad dimension header") from exc
                continue
            try:
                vals = [float(x) for x in line.split(",")]
            except ValueError as exc:
                raise InputError(f"line {lineno}: non-numeric coordinate") from exc
            rows.append(vals)
    if not rows:
        raise InputError("node file contains no nodes")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InputError("node rows have inconsistent lengths")
    width = widths.pop()
    if d is not None and d != width:
        raise InputError(f"header says d={d} but rows have {width} coordinates")
    try:
        return NodeSet(np.asarray(rows, dtype=float))
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def write_nodes_csv(path, nodes: NodeSet):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# d={nodes.d}\n")
        for row in nodes.points:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def sweep_csv_lines(sweep, track_vector=None, predicted_limit=None):
    """Eigenvalue-curve CSV: header eps,lambda_1..lambda_n, one row per grid point.

    With ``track_vector`` = k (1-based) a second block follows after a blank
    line: per-eps components of the k-th eigenvector (signs pinned) and a
    final 'limit' row holding the predicted limiting vector.
    """
    n = sweep.n
    lines = ["eps," + ",".join(f"lambda_{k}" for k in range(1, n + 1))]
    for i, eps in enumerate(sweep.eps_grid):
        vals = ",".join(_fmt(x) for x in sweep.eigenvalues[i])
        lines.append(f"{_fmt(eps)},{vals}")
    if track_vector is not None:
        k = int(track_vector)
        if not 1 <= k <= n:
            raise InputError(f"--track-vector index {k} out of range 1..{n}")
        lines.append("")
        lines.append("eps," + ",".join(f"u{k}_{i}" for i in range(1, n + 1)))
        for i, eps in enumerate(sweep.eps_grid):
            vec = _signed(sweep.eigenvectors[i][:, k - 1])
            lines.append(f"{_fmt(eps)}," + ",".join(_fmt(x) for x in vec))
        if predicted_limit is not None:
            vec = _signed(np.asarray(predicted_limit))
            lines.append("limit," + ",".join(_fmt(x) for x in vec))
    return lines


def _signed(vec: np.ndarray) -> np.ndarray:
    big = np.abs(vec).max()
    if big == 0.0:
        return vec
    idx = np.argmax(np.abs(vec) > 1e-12 * big)
    return -vec if vec[idx] < 0 else vec


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False)
