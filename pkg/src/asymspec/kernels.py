"""Radial-kernel flat-limit pipeline.

A radial kernel k(x, y) = psi(||x - y||) with psi analytic at 0 yields kernel
matrices K(eps) = [psi(eps ||x_i - x_j||)] that become singular in the flat
limit eps -> 0.  Writing the even part of psi through multivariate monomials
produces a generalized kernel form V Delta (W + o(1)) Delta V^T whose V is a
multivariate Vandermonde matrix and whose W is the kernel's Wronskian (the
scaled derivative table at the origin).  The first odd psi coefficient
psi_{2r-1} (the regularity index r) decides between the completely smooth
pipeline and the finitely smooth one, which adds a distance-matrix block at
the fractional exponent r - 1/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .series import Exponent, ScalarSeries
from .scaling import DiagonalScaling
from .ase import Ase, eigen_readout, fix_column_signs, schur_chain, _clean_rank
from .gkf import GkfForm, ase_from_gkf

__all__ = [
    "KernelModel",
    "kernel_model",
    "regularity_index",
    "NodeSet",
    "MonomialBasis",
    "num_monomials_upto",
    "num_monomials_exact",
    "monomials_of_degree",
    "vandermonde",
    "wronskian",
    "distance_matrix",
    "smooth_flat_limit",
    "finite_smooth_flat_limit",
    "FinitelySmoothError",
    "kernel_ase",
    "kernel_matrix",
    "generate_nodes",
]

INFINITE = math.inf

KERNEL_NAMES = ("gaussian", "exponential", "matern2", "custom")


class FinitelySmoothError(Exception):
    """No degree q <= r-1 makes the Vandermonde matrix full row rank."""


def _psi_coefficient(name: str, k: int) -> Fraction:
    if name == "gaussian":
        # exp(-s^2)
        if k % 2:
            return Fraction(0)
        m = k // 2
        return Fraction((-1) ** m, math.factorial(m))
    if name == "exponential":
        # exp(-s)
        return Fraction((-1) ** k, math.factorial(k))
    if name == "matern2":
        # (1 + s) exp(-s)
        return Fraction((-1) ** k * (1 - k), math.factorial(k))
    raise ValueError(f"unknown kernel {name!r}")


@dataclass(frozen=True)
class KernelModel:
    """A radial kernel: its name, psi expansion at 0 and regularity index."""

    name: str
    psi: ScalarSeries
    regularity: float  # positive integer, or math.inf for completely smooth

    def psi_coeff(self, k: int) -> float:
        """k-th Taylor coefficient of psi; the horizon must cover k."""
        if Exponent(k) >= self.psi.trunc_order:
            raise ValueError(
                f"psi horizon {self.psi.trunc_order} too small for degree {k}"
            )
        return self.psi.coefficient(k)

    @property
    def horizon(self) -> int:
        return int(float(self.psi.trunc_order)) - 1


def kernel_model(name: str, psi_coefficients=None, horizon: int = 64) -> KernelModel:
    """Build a named kernel (psi generated exactly) or a custom one from coefficients."""
    if name not in KERNEL_NAMES:
        raise ValueError(f"kernel must be one of {KERNEL_NAMES}, got {name!r}")
    if name == "custom":
        if psi_coefficients is None:
            raise ValueError("custom kernels require psi coefficients")
        coeffs = [float(c) for c in psi_coefficients]
        psi = ScalarSeries({k: c for k, c in enumerate(coeffs)}, trunc_order=len(coeffs))
        horizon = len(coeffs) - 1
    else:
        if psi_coefficients is not None:
            raise ValueError("psi coefficients are only accepted for custom kernels")
        psi = ScalarSeries(
            {k: float(_psi_coefficient(name, k)) for k in range(horizon + 1)},
            trunc_order=horizon + 1,
        )
    return KernelModel(name, psi, regularity_index(psi, horizon))


def regularity_index(psi: ScalarSeries, horizon: int):
    """Smallest r with psi_{2r-1} != 0; INFINITE if no odd term up to the horizon.

    An INFINITE answer for a custom kernel only certifies r > horizon/2; the
    stored horizon travels with the model so callers can tell.
    """
    k = 1
    while k <= horizon:
        if psi.coefficient(k) != 0.0:
            return (k + 1) // 2
        k += 2
    return INFINITE


# ---------------------------------------------------------------------------
# nodes and monomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeSet:
    """n points in R^d, pairwise distinct (exact comparison)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError("points must be an n x d array")
        seen = set()
        for row in pts:
            key = tuple(row.tolist())
            if key in seen:
                raise ValueError(f"duplicate node {key}")
            seen.add(key)
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def num_monomials_upto(s: int, d: int) -> int:
    """Number of monomials of degree <= s in d variables."""
    return math.comb(s + d, d)


def num_monomials_exact(t: int, d: int) -> int:
    """Number of monomials of degree exactly t in d variables."""
    return math.comb(t + d - 1, d - 1)


def monomials_of_degree(d: int, t: int):
    """Multi-indices of degree t, graded-lex (leading exponent decreasing)."""
    if d == 1:
        return [(t,)]
    out = []
    for first in range(t, -1, -1):
        for rest in monomials_of_degree(d - 1, t - first):
            out.append((first,) + rest)
    return out


@dataclass(frozen=True)
class MonomialBasis:
    """All multi-indices up to max_degree, grouped by degree, in a fixed order."""

    d: int
    max_degree: int

    @property
    def by_degree(self):
        return [monomials_of_degree(self.d, t) for t in range(self.max_degree + 1)]

    @property
    def flat(self):
        return [a for grp in self.by_degree for a in grp]

    @property
    def size(self) -> int:
        return num_monomials_upto(self.max_degree, self.d)

    @property
    def block_widths(self):
        return tuple(num_monomials_exact(t, self.d) for t in range(self.max_degree + 1))


def vandermonde(nodes: NodeSet, s: int) -> np.ndarray:
    """Multivariate Vandermonde matrix [x_i^alpha] for |alpha| <= s.

    Columns are grouped by degree (widths ``num_monomials_exact(t, d)``) in
    graded-lex order; the degree-0 block is the all-ones column.
    """
    if s < 0:
        raise ValueError("degree must be nonnegative")
    basis = MonomialBasis(nodes.d, s)
    cols = []
    for alpha in basis.flat:
        col = np.ones(nodes.n)
        for coord, power in enumerate(alpha):
            if power:
                col = col * nodes.points[:, coord] ** power
        cols.append(col)
    return np.column_stack(cols)


def _wronskian_entry_coeff(alpha, beta) -> int:
    """Integer coefficient of x^alpha y^beta in (||x-y||^2)^l, l = (|a|+|b|)/2.

    Zero unless alpha_i + beta_i is even in every coordinate.
    """
    if any((a + b) % 2 for a, b in zip(alpha, beta)):
        return 0
    m = [(a + b) // 2 for a, b in zip(alpha, beta)]
    l = sum(m)
    multinom = math.factorial(l)
    for mi in m:
        multinom //= math.factorial(mi)
    prod = 1
    for mi, ai in zip(m, alpha):
        prod *= math.comb(2 * mi, ai)
    return multinom * prod * (-1) ** sum(beta)


def wronskian(kernel: KernelModel, d: int, max_deg: int) -> np.ndarray:
    """Stacked Wronskian W_{<=max_deg, <=max_deg}: scaled kernel derivatives at 0.

    Entry (alpha, beta) is the coefficient of x^alpha y^beta in the even part
    sum_l psi_{2l} (||x-y||^2)^l, computed by exact multinomial expansion, so
    custom kernels work from their psi series alone.  For finite regularity r
    the definition only holds for max_deg <= r - 1.
    """
    r = kernel.regularity
    if r != INFINITE and max_deg > r - 1:
        raise ValueError(
            f"Wronskian blocks need degree <= r-1 = {int(r) - 1}, got {max_deg}"
        )
    basis = MonomialBasis(d, max_deg).flat
    p = len(basis)
    w = np.zeros((p, p))
    for i, alpha in enumerate(basis):
        for j, beta in enumerate(basis):
            if j < i:
                w[i, j] = w[j, i]
                continue
            total = sum(alpha) + sum(beta)
            if total % 2:
                continue
            coeff = _wronskian_entry_coeff(alpha, beta)
            if coeff:
                w[i, j] = kernel.psi_coeff(total) * coeff
            if j > i:
                w[j, i] = w[i, j]
    return w


def distance_matrix(nodes: NodeSet, q: int) -> np.ndarray:
    """Entry-wise Euclidean distance to the power q; symmetric, zero diagonal."""
    diff = nodes.points[:, None, :] - nodes.points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return dist**q


# ---------------------------------------------------------------------------
# flat-limit forms
# ---------------------------------------------------------------------------


def _block_qr_increments(nodes: NodeSet, max_deg: int, rank_tol: float):
    """Incremental orthonormalization of Vandermonde degree blocks.

    Returns (q_blocks, r_diag, ranks, stalled): per-degree new orthonormal
    directions, the diagonal R blocks, numerical rank increments, and whether
    some block contributed nothing at tolerance before rank n was reached.
    """
    v = vandermonde(nodes, max_deg)
    widths = MonomialBasis(nodes.d, max_deg).block_widths
    sigma_max = np.linalg.svd(v, compute_uv=False)[0]
    thresh = rank_tol * sigma_max
    q_blocks = []
    r_diag = []
    ranks = []
    col = 0
    total = 0
    stalled = False
    for w in widths:
        block = v[:, col : col + w]
        col += w
        resid = block.copy()
        for q in q_blocks:
            resid -= q @ (q.T @ resid)
        for q in q_blocks:
            resid -= q @ (q.T @ resid)
        u, s, _ = np.linalg.svd(resid, full_matrices=False)
        b = int(np.sum(s > thresh))
        if b == 0:
            stalled = True
            break
        qi = fix_column_signs(u[:, :b])
        q_blocks.append(qi)
        r_diag.append(qi.T @ block)
        ranks.append(b)
        total += b
        if total == nodes.n:
            break
    return q_blocks, r_diag, ranks, stalled


def smooth_flat_limit(kernel: KernelModel, nodes: NodeSet, rank_tol: float = 1e-9) -> GkfForm:
    """Flat-limit form for the completely smooth regime.

    Finds the smallest degree q with rank V_{<=q} = n (q <= r-1 required) and
    returns (V_{<=q}, Delta with nu_j = j and block widths H_{j,d}, W_{<=q}).
    Raises FinitelySmoothError when no such degree exists within smoothness.
    """
    r = kernel.regularity
    q = _smooth_degree(nodes, r, rank_tol)
    if q is None:
        raise FinitelySmoothError(
            "Vandermonde rank stays below n within the kernel's smoothness; "
            "use finite_smooth_flat_limit"
        )
    v = vandermonde(nodes, q)
    widths = MonomialBasis(nodes.d, q).block_widths
    scaling = DiagonalScaling(tuple((Exponent(t), widths[t]) for t in range(q + 1)))
    w = wronskian(kernel, nodes.d, q)
    return GkfForm(v, scaling, w)


def _smooth_degree(nodes: NodeSet, r, rank_tol: float):
    """Smallest degree q <= r-1 with numerical rank V_{<=q} = n, else None."""
    max_q = nodes.n - 1 if r == INFINITE else min(int(r) - 1, nodes.n - 1)
    for q in range(max_q + 1):
        v = vandermonde(nodes, q)
        sv = np.linalg.svd(v, compute_uv=False)
        if int(np.sum(sv > rank_tol * sv[0])) == nodes.n:
            return q
    return None


def finite_smooth_flat_limit(
    kernel: KernelModel, nodes: NodeSet, rank_tol: float = 1e-9
) -> GkfForm:
    """Flat-limit form for a finitely smooth kernel with rank V_{<=r-1} < n.

    V is extended by an orthonormal basis A of the complement of
    range(V_{<=r-1}); the scaling gains a final block at the fractional
    exponent r - 1/2 and W a distance-matrix block psi_{2r-1} A^T D^(2r-1) A.
    """
    r = kernel.regularity
    if r == INFINITE:
        raise ValueError("finitely smooth pipeline requires finite regularity")
    r = int(r)
    v_main = vandermonde(nodes, r - 1)
    u, sv, _ = np.linalg.svd(v_main, full_matrices=True)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    if rank == nodes.n:
        raise ValueError("V_{<=r-1} has full row rank; the smooth pipeline applies")
    a = fix_column_signs(u[:, rank:])
    c = nodes.n - rank
    widths = MonomialBasis(nodes.d, r - 1).block_widths
    blocks = [(Exponent(t), widths[t]) for t in range(r)]
    blocks.append((Exponent(2 * r - 1, 2), c))
    scaling = DiagonalScaling(tuple(blocks))
    w_top = wronskian(kernel, nodes.d, r - 1)
    d_odd = distance_matrix(nodes, 2 * r - 1)
    w_bot = kernel.psi_coeff(2 * r - 1) * (a.T @ d_odd @ a)
    p = w_top.shape[0]
    w = np.zeros((p + c, p + c))
    w[:p, :p] = w_top
    w[p:, p:] = 0.5 * (w_bot + w_bot.T)
    v = np.hstack([v_main, a])
    return GkfForm(v, scaling, w)


@dataclass
class KernelGroupInfo:
    """One row of the group report: valuation, multiplicity, leading values."""

    valuation: Exponent
    count: int
    leading_values: list


def kernel_ase(kernel: KernelModel, nodes: NodeSet, rank_tol: float = 1e-9):
    """ASE of the kernel matrix on a node set, plus a per-group report.

    Dispatches between the smooth and finitely smooth pipelines.  When double
    precision cannot certify further rank growth of the Vandermonde blocks
    (deep smooth expansions), the ASE is truncated at the last certified
    group rather than silently mis-ranked.
    """
    r = kernel.regularity
    try:
        form = smooth_flat_limit(kernel, nodes, rank_tol)
        ase = ase_from_gkf(form, rank_tol)
    except FinitelySmoothError:
        if r != INFINITE:
            v_rank = np.linalg.matrix_rank(
                vandermonde(nodes, int(r) - 1), rank_tol
            )
            if v_rank < nodes.n:
                form = finite_smooth_flat_limit(kernel, nodes, rank_tol)
                ase = ase_from_gkf(form, rank_tol)
            else:  # pragma: no cover - excluded by _smooth_degree
                raise
        else:
            ase = _stalled_smooth_ase(kernel, nodes, rank_tol)
    report = [
        KernelGroupInfo(g.valuation, g.count, g.leading_values)
        for g in eigen_readout(ase)
    ]
    return ase, report


def _stalled_smooth_ase(kernel: KernelModel, nodes: NodeSet, rank_tol: float) -> Ase:
    """Partial smooth-regime ASE when rank growth stalls numerically.

    Uses the degree blocks whose rank increments are certified at tolerance
    and truncates the expansion at the first uncertain group.
    """
    max_deg = nodes.n - 1
    q_blocks, r_diag, ranks, _ = _block_qr_increments(nodes, max_deg, rank_tol)
    used = len(ranks)
    if used == 0:
        raise ValueError("no Vandermonde block has certified rank at tolerance")
    w = wronskian(kernel, nodes.d, used - 1)
    widths = MonomialBasis(nodes.d, used - 1).block_widths
    n = nodes.n
    d = np.zeros((sum(ranks), sum(widths)))
    roff = coff = 0
    for rb, b, wd in zip(r_diag, ranks, widths):
        d[roff : roff + b, coff : coff + wd] = rb
        roff += b
        coff += wd
    h = d @ w @ d.T
    chain = schur_chain(0.5 * (h + h.T), ranks, rank_tol)
    # always truncated: degrees past the certified ones are invisible at
    # working precision, so the expansion stops at the last computed group
    truncated_at = Exponent(2 * (len(chain.complements) - 1))
    groups = []
    for i, s in enumerate(chain.complements):
        if chain.stopped_early and i == len(chain.complements) - 1:
            s = _clean_rank(s, rank_tol)
        if np.abs(s).max() == 0.0:
            continue
        q = q_blocks[i]
        term = q @ s @ q.T
        groups.append((Exponent(2 * i), 0.5 * (term + term.T)))
    return Ase(n, groups, truncated_at)


def kernel_matrix(kernel: KernelModel, nodes: NodeSet, eps: float) -> np.ndarray:
    """The kernel matrix [psi(eps ||x_i - x_j||)] at a concrete eps.

    Named kernels use their closed form; custom kernels sum the stored psi
    series and warn when eps times the largest distance leaves the unit
    disk, where the truncated series is no longer trustworthy.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    dist = distance_matrix(nodes, 1)
    s = eps * dist
    if kernel.name == "gaussian":
        return np.exp(-(s**2))
    if kernel.name == "exponential":
        return np.exp(-s)
    if kernel.name == "matern2":
        return (1.0 + s) * np.exp(-s)
    if s.max() > 1.0:
        warnings.warn(
            "custom kernel evaluated beyond its certified horizon "
            f"(eps*max distance = {s.max():.3g} > 1); truncated psi series "
            "may be inaccurate",
            stacklevel=2,
        )
    out = np.zeros_like(s)
    for k, c in kernel.psi.terms:
        out += c * s ** float(k)
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------------------
# node-set generators (seeded inputs for the worked figures and tests)
# ---------------------------------------------------------------------------


def generate_nodes(spec: str, d: int = 2, seed: int = 0) -> NodeSet:
    """Named node-set generators: 'equispaced:N', 'uniform:N', 'circle:N', 'cubic:N'.

    equispaced: N points on [0, 1] (d = 1).
    uniform:    N i.i.d. points in the unit cube of dimension d.
    circle:     N points on the unit circle (d = 2, non-unisolvent at degree 2).
    cubic:      N points on the curve x2^2 = x1^3 - x1 (d = 2, non-unisolvent
                at degree 3).
    """
    kind, _, count = spec.partition(":")
    if not count:
        raise ValueError(f"node spec {spec!r} must look like 'uniform:10'")
    n = int(count)
    rng = np.random.default_rng(seed)
    if kind == "equispaced":
        return NodeSet(np.linspace(0.0, 1.0, n)[:, None])
    if kind == "uniform":
        return NodeSet(rng.uniform(0.0, 1.0, size=(n, d)))
    if kind == "circle":
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        return NodeSet(np.column_stack([np.cos(theta), np.sin(theta)]))
    if kind == "cubic":
        x1 = rng.uniform(-1.0, 0.0, size=n)
        sign = rng.choice([-1.0, 1.0], size=n)
        x2 = sign * np.sqrt(np.maximum(x1**3 - x1, 0.0))
        return NodeSet(np.column_stack([x1, x2]))
    raise ValueError(f"unknown node generator {kind!r}")
