"""Tensor-train decomposition of weight matrices and TT-format forward pass.

A weight matrix W (M x N, M = prod(m_k), N = prod(n_k)) is tensorized to an
order-d tensor whose k-th mode merges the pair (i_k, j_k) of mixed-radix
digits of the row and column indices (most-significant digit first, row-major
layout). The tensor is then factored into a chain of order-4 cores
G_k of shape (r_{k-1}, m_k, n_k, r_k) with boundary ranks r_0 = r_d = 1, so
that entry (i, j) of W is the product of the matching core slices. Cores are
produced by left-to-right sequential truncated SVD of successive unfoldings.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidRankChain, ShapeMismatch
from .linalg import truncated_svd


@dataclass(frozen=True)
class Tensorization:
    """Factorizations of the row and column dimensions of a weight matrix."""

    row_factors: tuple[int, ...]
    col_factors: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "row_factors", tuple(int(m) for m in self.row_factors))
        object.__setattr__(self, "col_factors", tuple(int(n) for n in self.col_factors))
        if len(self.row_factors) != len(self.col_factors):
            raise ShapeMismatch(
                f"row factors {self.row_factors} and col factors {self.col_factors} "
                "must have equal length"
            )
        if self.order < 2:
            raise ShapeMismatch("tensorization needs at least 2 modes")
        if any(m < 1 for m in self.row_factors + self.col_factors):
            raise ShapeMismatch("all factors must be >= 1")

    @property
    def order(self) -> int:
        return len(self.row_factors)

    @property
    def rows(self) -> int:
        return int(np.prod(self.row_factors))

    @property
    def cols(self) -> int:
        return int(np.prod(self.col_factors))

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return tuple(m * n for m, n in zip(self.row_factors, self.col_factors))


@dataclass(frozen=True)
class TTCores:
    """Chain of order-4 cores; core k has shape (r_{k-1}, m_k, n_k, r_k)."""

    cores: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "cores", tuple(self.cores))
        if not self.cores:
            raise InvalidRankChain("empty core list")
        ranks = self.ranks
        if ranks[0] != 1 or ranks[-1] != 1:
            raise InvalidRankChain(f"boundary ranks must be 1, got chain {ranks}")
        for k in range(len(self.cores) - 1):
            if self.cores[k].shape[3] != self.cores[k + 1].shape[0]:
                raise InvalidRankChain(
                    f"cores {k} and {k + 1} disagree on the shared rank: "
                    f"{self.cores[k].shape} vs {self.cores[k + 1].shape}"
                )
        for g in self.cores:
            if g.ndim != 4:
                raise ShapeMismatch(f"cores must be order-4, got shape {g.shape}")

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(g.shape[0] for g in self.cores) + (self.cores[-1].shape[3],)

    @property
    def tensorization(self) -> Tensorization:
        return Tensorization(
            tuple(g.shape[1] for g in self.cores),
            tuple(g.shape[2] for g in self.cores),
        )


def tensorize_matrix(w: np.ndarray, t: Tensorization) -> np.ndarray:
    """Map an M x N matrix to the order-d tensor with merged (i_k, j_k) modes."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (t.rows, t.cols):
        raise ShapeMismatch(f"matrix shape {w.shape} does not match tensorization "
                            f"({t.rows}, {t.cols})")
    d = t.order
    x = w.reshape(t.row_factors + t.col_factors)
    interleave = [ax for k in range(d) for ax in (k, d + k)]
    return np.ascontiguousarray(x.transpose(interleave)).reshape(t.mode_sizes)


def detensorize_matrix(x: np.ndarray, t: Tensorization) -> np.ndarray:
    """Inverse of :func:`tensorize_matrix`."""
    d = t.order
    pairs = [e for mn in zip(t.row_factors, t.col_factors) for e in mn]
    x = np.asarray(x).reshape(pairs)
    deinterleave = [2 * k for k in range(d)] + [2 * k + 1 for k in range(d)]
    return np.ascontiguousarray(x.transpose(deinterleave)).reshape(t.rows, t.cols)


def max_rank_chain(t: Tensorization) -> list[int]:
    """Largest feasible rank chain for an exact decomposition."""
    sizes = t.mode_sizes
    d = len(sizes)
    return [
        min(int(np.prod(sizes[:k])), int(np.prod(sizes[k:])))
        for k in range(d + 1)
    ]


def _validated_ranks(t: Tensorization, ranks) -> list[int]:
    ranks = [int(r) for r in ranks]
    d = t.order
    if len(ranks) != d + 1:
        raise InvalidRankChain(f"rank chain must have {d + 1} entries, got {len(ranks)}")
    if ranks[0] != 1 or ranks[-1] != 1:
        raise InvalidRankChain(f"boundary ranks must be 1, got {ranks}")
    if any(r < 1 for r in ranks):
        raise InvalidRankChain(f"ranks must be positive, got {ranks}")
    caps = max_rank_chain(t)
    clamped = [min(r, c) for r, c in zip(ranks, caps)]
    if clamped != ranks:
        warnings.warn(
            f"rank chain {ranks} clamped to feasible {clamped}", stacklevel=3
        )
    return clamped


def tt_svd(w: np.ndarray, t: Tensorization, ranks) -> TTCores:
    """Decompose a matrix into TT cores by sequential truncated SVD.

    With maximal ranks the reconstruction is exact up to roundoff; smaller
    ranks give the standard sequential-SVD truncation. Infeasible ranks are
    clamped with a warning (experiment configs sweep rank chains freely).
    """
    ranks = _validated_ranks(t, ranks)
    sizes = t.mode_sizes
    d = t.order
    c = tensorize_matrix(w, t)
    cores: list[np.ndarray] = []
    r_prev = 1
    for k in range(d - 1):
        mat = c.reshape(r_prev * sizes[k], -1)
        r_k = min(ranks[k + 1], min(mat.shape))
        svd = truncated_svd(mat, r_k) if np.any(mat) else None
        if svd is None:
            # all-zero remainder: keep zero cores with the requested ranks
            cores.append(np.zeros((r_prev, sizes[k], r_k)))
            c = np.zeros((r_k,) + tuple(sizes[k + 1:]))
            r_prev = r_k
            continue
        cores.append(svd.left_vectors.reshape(r_prev, sizes[k], r_k))
        c = (svd.singular_values[:, None] * svd.right_vectors).reshape(
            (r_k,) + tuple(sizes[k + 1:])
        )
        r_prev = r_k
    cores.append(c.reshape(r_prev, sizes[d - 1], 1))
    shaped = [
        g.reshape(g.shape[0], t.row_factors[k], t.col_factors[k], g.shape[2])
        for k, g in enumerate(cores)
    ]
    return TTCores(tuple(shaped))


def tt_reconstruct(cores: TTCores, t: Tensorization | None = None) -> np.ndarray:
    """Contract the core chain back to the dense M x N matrix."""
    t = t or cores.tensorization
    if (t.row_factors, t.col_factors) != (
        cores.tensorization.row_factors,
        cores.tensorization.col_factors,
    ):
        raise ShapeMismatch("tensorization does not match core shapes")
    d = cores.order
    merged = cores.cores[0].reshape(1, t.mode_sizes[0], -1)[0]  # (s_1, r_1)
    for k in range(1, d):
        g = cores.cores[k].reshape(cores.cores[k].shape[0], t.mode_sizes[k], -1)
        merged = np.einsum("pa,aqb->pqb", merged, g).reshape(-1, g.shape[2])
    tensor = merged.reshape(t.mode_sizes)
    return detensorize_matrix(tensor, t)


def tt_forward(cores: TTCores, x: np.ndarray) -> np.ndarray:
    """Multiply the represented M x N matrix by a batch N x n, core by core.

    Equivalent to tt_reconstruct(cores) @ x but never materializes the dense
    weight; the contraction sweeps the chain right to left.
    """
    t = cores.tensorization
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] != t.cols:
        raise ShapeMismatch(f"input has {x.shape[0]} rows, expected {t.cols}")
    batch = x.shape[1]
    d = t.order
    # z carries axes (j_1..j_k, a_k, m_tail, batch); start with a_d = 1, empty tail
    z = x.reshape(t.col_factors + (1, 1, batch))
    for k in range(d - 1, -1, -1):
        g = cores.cores[k]  # (a_{k-1}, m_k, j_k, a_k)
        z = np.tensordot(g, z, axes=([2, 3], [k, k + 1]))
        # -> (a_{k-1}, m_k, j_1..j_{k-1}, m_tail, batch)
        z = np.moveaxis(z, (0, 1), (k, k + 1))
        # -> (j_1..j_{k-1}, a_{k-1}, m_k, m_tail, batch); merge m_k into tail
        z = z.reshape(z.shape[:k + 1] + (-1, batch))
    out = z.reshape(t.rows, batch)
    return out[:, 0] if squeeze else out


def tt_param_count(cores: TTCores) -> int:
    """Total number of stored core entries."""
    return int(sum(g.size for g in cores.cores))
