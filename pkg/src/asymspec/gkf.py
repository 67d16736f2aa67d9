"""Generalized kernel form K(eps) = V Delta (W + o(1)) Delta V^T.

A block rank-revealing QR of V converts this form into a diagonally scaled
one: with Q_i the new orthonormal directions contributed by the i-th column
block and R_ii the corresponding diagonal QR blocks,
``H = blockdiag(R_ii) W blockdiag(R_ii)^T`` is diagonally scaled by the same
exponents, and the ASE terms are Q_i S_i Q_i^T over the Schur chain of H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scaling import DiagonalScaling
from .ase import Ase, fix_column_signs, schur_chain, _clean_rank

__all__ = ["GkfForm", "BlockQr", "block_rrqr", "build_H", "ase_from_gkf", "simplified_schur"]


@dataclass(frozen=True)
class GkfForm:
    """(V, scaling, W) with block widths matching the scaling multiplicities."""

    V: np.ndarray
    scaling: DiagonalScaling
    W: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.V, dtype=float)
        w = np.asarray(self.W, dtype=float)
        m = self.scaling.n
        if v.shape[1] != m:
            raise ValueError("V column count does not match the scaling size")
        if w.shape != (m, m):
            raise ValueError("W shape does not match the scaling size")
        if not np.array_equal(w, w.T):
            w = 0.5 * (w + w.T)
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "V", v)
        object.__setattr__(self, "W", w)

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def widths(self):
        return self.scaling.block_sizes

    def evaluate(self, eps: float) -> np.ndarray:
        d = np.array([float(eps) ** float(e) for e in self.scaling.exponents()])
        return (self.V * d) @ self.W @ (self.V * d).T


@dataclass
class BlockQr:
    """Block QR of V: orthonormal Q_i blocks and block upper-triangular R."""

    q_blocks: list
    R: np.ndarray
    ranks: tuple
    widths: tuple

    @property
    def Q(self) -> np.ndarray:
        return np.hstack(self.q_blocks)

    def r_diag_block(self, i: int) -> np.ndarray:
        r0 = sum(self.ranks[:i])
        c0 = sum(self.widths[:i])
        return self.R[r0 : r0 + self.ranks[i], c0 : c0 + self.widths[i]]


def block_rrqr(v: np.ndarray, widths, rank_tol: float = 1e-10) -> BlockQr:
    """Left-to-right block QR with a rank-revealing (SVD) step per block.

    Each block of V is orthogonalized against the previously found basis and
    the residual's numerical rank b_i is decided against
    ``rank_tol * sigma_max(V)``.  Requires every block to contribute at least
    one new dimension and rank(V) = n overall, so that Q is square.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    widths = tuple(int(w) for w in widths)
    if sum(widths) != v.shape[1]:
        raise ValueError("widths must sum to the number of columns of V")
    sigma_max = np.linalg.svd(v, compute_uv=False)[0]
    thresh = rank_tol * sigma_max
    q_blocks = []
    ranks = []
    col = 0
    for i, w in enumerate(widths):
        block = v[:, col : col + w]
        col += w
        resid = block.copy()
        for q in q_blocks:
            resid -= q @ (q.T @ resid)
        for q in q_blocks:  # second pass for orthogonality at working precision
            resid -= q @ (q.T @ resid)
        u, s, _ = np.linalg.svd(resid, full_matrices=False)
        b = int(np.sum(s > thresh))
        if b == 0:
            raise ValueError(
                f"column block {i} introduces no new dimensions at tolerance"
            )
        q_blocks.append(fix_column_signs(u[:, :b]))
        ranks.append(b)
    if sum(ranks) != n:
        raise ValueError(f"rank(V) = {sum(ranks)} < n = {n} at tolerance")
    q = np.hstack(q_blocks)
    r = q.T @ v
    # zero the structurally-lower blocks exactly
    roff = 0
    coff = 0
    for i, b in enumerate(ranks):
        r[roff + b :, coff : coff + widths[i]] = 0.0
        roff += b
        coff += widths[i]
    return BlockQr(q_blocks, r, tuple(ranks), widths)


def build_H(qr: BlockQr, w: np.ndarray):
    """H = blockdiag(R_ii) W blockdiag(R_ii)^T with row blocks of sizes b_i."""
    w = np.asarray(w, dtype=float)
    n = sum(qr.ranks)
    m = sum(qr.widths)
    if w.shape != (m, m):
        raise ValueError("W shape does not match the QR widths")
    d = np.zeros((n, m))
    roff = 0
    coff = 0
    for i in range(len(qr.ranks)):
        rb = qr.r_diag_block(i)
        d[roff : roff + qr.ranks[i], coff : coff + qr.widths[i]] = rb
        roff += qr.ranks[i]
        coff += qr.widths[i]
    h = d @ w @ d.T
    return 0.5 * (h + h.T), list(qr.ranks)


def ase_from_gkf(form: GkfForm, rank_tol: float = 1e-10) -> Ase:
    """ASE of a generalized kernel form: groups eps^{2 nu_i} Q_i S_i Q_i^T.

    Requires W invertible at tolerance; a Schur-chain early stop (possible for
    indefinite W with rank-deficient V blocks) propagates as truncation.
    """
    sv = np.linalg.svd(form.W, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= rank_tol * sv[0]:
        raise ValueError("W is singular at tolerance; the generalized kernel "
                         "form does not determine the full ASE")
    qr = block_rrqr(form.V, form.widths, rank_tol)
    h, sizes = build_H(qr, form.W)
    chain = schur_chain(h, sizes, rank_tol)
    nus = form.scaling.nus
    n = form.n
    groups = []
    truncated_at = None
    for i, s in enumerate(chain.complements):
        last = i == len(chain.complements) - 1
        if chain.stopped_early and last:
            s = _clean_rank(s, rank_tol)
            truncated_at = 2 * nus[i]
        if np.abs(s).max() == 0.0:
            continue
        q = qr.q_blocks[i]
        term = q @ s @ q.T
        groups.append((2 * nus[i], 0.5 * (term + term.T)))
    return Ase(n, groups, truncated_at)


def simplified_schur(w: np.ndarray, qr: BlockQr, j: int) -> np.ndarray:
    """S_j via Schur complements of W: R_jj (W_jj - W_{j,<j} W_{<j,<j}^{-1} W_{<j,j}) R_jj^T.

    Valid when V_{<=j-1} has full column rank, i.e. all R_ii with i < j are
    square.
    """
    w = np.asarray(w, dtype=float)
    for i in range(j):
        if qr.ranks[i] != qr.widths[i]:
            raise ValueError(
                f"R_{i},{i} is not square (rank {qr.ranks[i]} < width {qr.widths[i]}); "
                "use the general Schur chain instead"
            )
    rjj = qr.r_diag_block(j)
    c0 = sum(qr.widths[:j])
    c1 = c0 + qr.widths[j]
    wjj = w[c0:c1, c0:c1]
    if j == 0:
        core = wjj
    else:
        wlt = w[:c0, :c0]
        wjl = w[c0:c1, :c0]
        core = wjj - wjl @ np.linalg.solve(wlt, wjl.T)
    s = rjj @ core @ rjj.T
    return 0.5 * (s + s.T)
