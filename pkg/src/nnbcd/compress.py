"""Compressed-weight block updates, projections, and compression metrics.

The compressed block solves, per layer,
    min_m  r(m) + (tau/2)||w - m||^2 + (alpha/2)||m - m_prev||^2
subject to the layer's structural constraint. Every flavor reduces to an
operation on the blend z = (tau*w + alpha*m_prev) / (tau + alpha):
soft/hard thresholding, top-k projection, or a tensor-train re-truncation.

The published top-k reformulation writes the optimization variable inside
its own projection target; that is read here as the current uncompressed
weight (w), which makes the projection well defined and consistent with the
surrounding quadratic. The tensor-train sub-problem has no closed form over
cores with a core-space proximal term; the implemented surrogate is a TT-SVD
of the tensor-space blend, which reduces to plain TT-SVD of w as alpha -> 0.
Descent diagnostics flag iterations where the surrogate breaks the
sufficient-decrease inequality.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BetaOutOfRange, InvalidRankChain, ShapeMismatch
from .prox import hard_threshold, project_topk, soft_threshold
from .tt import Tensorization, TTCores, tt_param_count, tt_reconstruct, tt_svd

KINDS = ("none", "tt", "l0_constrained", "l0_reg", "l1_reg")


@dataclass(frozen=True)
class CompressionSpec:
    kind: str = "none"
    tensorization: Tensorization | None = None
    ranks: tuple[int, ...] | None = None
    beta: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown compression kind {self.kind!r}")
        if self.kind == "tt":
            if self.tensorization is None or self.ranks is None:
                raise InvalidRankChain("tt compression needs a tensorization and ranks")
            object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if self.kind == "l0_constrained":
            if self.beta is None or self.beta < 1:
                raise BetaOutOfRange(f"l0_constrained needs beta >= 1, got {self.beta}")

    def validate_shape(self, shape: tuple[int, int]) -> None:
        count = int(np.prod(shape))
        if self.kind == "l0_constrained" and self.beta > count:
            raise BetaOutOfRange(f"beta {self.beta} exceeds weight count {count}")
        if self.kind == "tt" and (self.tensorization.rows, self.tensorization.cols) != shape:
            raise ShapeMismatch(
                f"tensorization ({self.tensorization.rows}, {self.tensorization.cols}) "
                f"does not match weight shape {shape}"
            )


def _blend(w_k: np.ndarray, w_prev: np.ndarray, tau: float, alpha: float) -> np.ndarray:
    return (tau * w_k + alpha * w_prev) / (tau + alpha)


def update_mc(w_k: np.ndarray, mc_prev_dense: np.ndarray, mc_prev_native,
              spec: CompressionSpec | None, hp) -> tuple[np.ndarray, object]:
    """One compressed-weight block update.

    Returns (dense view, native form); the native form is a TTCores chain
    for tensor-train layers and None otherwise. Accepts alpha == 0 for the
    pure-projection path used by one-shot compression.
    """
    w_k = np.asarray(w_k, dtype=np.float64)
    tau, alpha, lam = hp.tau, hp.alpha, getattr(hp, "lambda_reg", 0.0)
    if spec is None or spec.kind == "none":
        return _blend(w_k, mc_prev_dense, tau, alpha), None
    spec.validate_shape(w_k.shape)
    if spec.kind == "tt":
        if alpha == 0:
            z = w_k
        else:
            z = _blend(w_k, tt_reconstruct(mc_prev_native), tau, alpha)
        cores = tt_svd(z, spec.tensorization, spec.ranks)
        return tt_reconstruct(cores), cores
    z = _blend(w_k, mc_prev_dense, tau, alpha)
    if spec.kind == "l1_reg":
        return soft_threshold(z, lam / (tau + alpha)), None
    if spec.kind == "l0_reg":
        return hard_threshold(z, np.sqrt(2.0 * lam / (tau + alpha))), None
    # l0_constrained
    return project_topk(z, spec.beta), None


def project(w: np.ndarray, spec: CompressionSpec | None) -> tuple[np.ndarray, object]:
    """Pure projection of a weight onto its compression constraint (alpha=0)."""

    class _P:
        tau, alpha, lambda_reg = 1.0, 0.0, 0.0

    if spec is not None and spec.kind in ("l0_reg", "l1_reg"):
        # with alpha=0 and no regularizer weight these reduce to the identity
        return np.asarray(w, dtype=np.float64).copy(), None
    dense, native = update_mc(w, np.asarray(w, dtype=np.float64), None, spec, _P)
    return dense, native


def constraint_violation(dense: np.ndarray, native, spec: CompressionSpec | None) -> str | None:
    """Return a description of a violated structural constraint, or None."""
    if spec is None or spec.kind in ("none", "l0_reg", "l1_reg"):
        return None
    if spec.kind == "l0_constrained":
        nnz = int(np.count_nonzero(dense))
        if nnz > spec.beta:
            return f"{nnz} nonzeros exceed the allowed {spec.beta}"
        return None
    # tt
    if not isinstance(native, TTCores):
        return "tensor-train layer holds no core chain"
    if any(r > cap for r, cap in zip(native.ranks, spec.ranks)):
        return f"core ranks {native.ranks} exceed the specified chain {spec.ranks}"
    err = float(np.max(np.abs(dense - tt_reconstruct(native)), initial=0.0))
    if err > 1e-8:
        return f"dense view drifted {err:.3e} from the core reconstruction"
    return None


def compressed_param_count(spec: CompressionSpec | None, shape: tuple[int, int],
                           native=None) -> int:
    count = int(np.prod(shape))
    if spec is None or spec.kind in ("none", "l0_reg", "l1_reg"):
        return count
    if spec.kind == "l0_constrained":
        return int(spec.beta)
    if native is not None:
        return tt_param_count(native)
    return tt_param_count(tt_svd(np.zeros(shape), spec.tensorization, spec.ranks))


def compression_ratio(specs, shapes, natives=None) -> float:
    """(sum of compressed parameter counts) / (sum of uncompressed counts)."""
    natives = natives or [None] * len(shapes)
    total = sum(int(np.prod(s)) for s in shapes)
    kept = sum(
        compressed_param_count(spec, shape, native)
        for spec, shape, native in zip(specs, shapes, natives)
    )
    return kept / total


def sparsity(w_mc_list) -> float:
    """Fraction of exactly-zero entries over all compressed weights."""
    total = sum(a.size for a in w_mc_list)
    zeros = sum(a.size - int(np.count_nonzero(a)) for a in w_mc_list)
    return zeros / total
