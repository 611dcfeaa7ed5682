"""Dense numeric substrate: SPD solves, truncated SVD, im2col, reshaping.

All arrays are row-major (C order) float64 throughout the package; the
tensorization used by the tensor-train code depends on that entry ordering,
so it is part of the contract, not an implementation detail.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import KernelTooLarge, NotPositiveDefinite, RankTooLarge, ShapeMismatch

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class SvdResult:
    """Rank-r factorization M ~ left_vectors @ diag(singular_values) @ right_vectors."""

    left_vectors: np.ndarray      # (m, r), orthonormal columns
    singular_values: np.ndarray   # (r,), non-increasing, >= 0
    right_vectors: np.ndarray     # (r, n), orthonormal rows

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive-definite A via Cholesky.

    Retries once with a diagonal jitter of 1e-10 * trace(A)/n before giving
    up; all systems in this package are small and conditioned by explicit
    +tau*I / +gamma*I terms, so an iterative solver is unnecessary.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"expected square matrix, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ShapeMismatch(f"A is {a.shape} but B has {b.shape[0]} rows")
    asym = np.abs(a - a.T).max(initial=0.0)
    if asym > SYMMETRY_TOL * max(1.0, np.abs(a).max(initial=0.0)):
        raise ShapeMismatch(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    try:
        c, low = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(a) / a.shape[0]
        try:
            c, low = scipy.linalg.cho_factor(
                a + jitter * np.eye(a.shape[0]), lower=True, check_finite=False
            )
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(
                f"Cholesky failed even after jitter {jitter:.3e}"
            ) from exc
    return scipy.linalg.cho_solve((c, low), b, check_finite=False)


def truncated_svd(m: np.ndarray, rank: int) -> SvdResult:
    """Best rank-r approximation factors of a matrix.

    Sign convention: within each left singular vector the entry of largest
    magnitude is made non-negative (flipping the paired right vector along
    with it), so factorizations are deterministic across runs.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch(f"expected matrix, got shape {m.shape}")
    if not 1 <= rank <= min(m.shape):
        raise RankTooLarge(f"rank {rank} not in [1, {min(m.shape)}] for shape {m.shape}")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    u, s, vt = u[:, :rank], s[:rank], vt[:rank]
    pivot = np.abs(u).argmax(axis=0)
    signs = np.sign(u[pivot, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return SvdResult(u * signs, s, vt * signs[:, None])


def im2col(x: np.ndarray, kernel_size: int) -> np.ndarray:
    """Unfold the l*l*C patches of a W*H*C tensor into matrix rows.

    Row k holds the patch that produces output position k (row-major over
    output coordinates), flattened in (i, j, c) order so that the matrix
    product with a kernel reshaped to (l*l*C, S) equals the valid
    cross-correlation
        Y(x, y, s) = sum_{i,j,c} K(i, j, c, s) X(x+i-1, y+j-1, c).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected W*H*C tensor, got shape {x.shape}")
    w, h, c = x.shape
    l = kernel_size
    if l < 1 or l > min(w, h):
        raise KernelTooLarge(f"kernel size {l} exceeds input extent {min(w, h)}")
    wo, ho = w - l + 1, h - l + 1
    patches = np.lib.stride_tricks.sliding_window_view(x, (l, l), axis=(0, 1))
    # patches: (wo, ho, c, l, l) -> rows over (x, y), columns over (i, j, c)
    return np.ascontiguousarray(patches.transpose(0, 1, 3, 4, 2)).reshape(wo * ho, l * l * c)


def reshape(x: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Row-major reshape; element count must be preserved."""
    x = np.asarray(x)
    if np.prod(shape, dtype=int) != x.size:
        raise ShapeMismatch(f"cannot reshape {x.shape} ({x.size} entries) to {shape}")
    return x.reshape(shape)


def permute(x: np.ndarray, order: tuple[int, ...]) -> np.ndarray:
    """Axis permutation; `order` must be a permutation of range(ndim)."""
    x = np.asarray(x)
    if sorted(order) != list(range(x.ndim)):
        raise ShapeMismatch(f"{order} is not a permutation of axes of shape {x.shape}")
    return np.transpose(x, order)
