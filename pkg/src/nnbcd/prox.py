"""Closed-form scalar/elementwise proximal operators.

These are the building blocks of every gradient-free block update: the
ReLU and hinge one-dimensional proximal maps, soft/hard thresholding, and
the Euclidean projection onto a top-k support. All operators accept
scalars or arrays and broadcast elementwise.
"""
from __future__ import annotations

import numpy as np

from .errors import BetaOutOfRange, NonPositiveGamma


def _check_gamma(g: float) -> float:
    g = float(g)
    if not g > 0:
        raise NonPositiveGamma(f"proximal weight must be positive, got {g}")
    return g


def prox_relu(a, b, g):
    """argmin_u 0.5*(max(0,u) - a)^2 + (g/2)*(u - b)^2.

    Four-case closed form. With s = sqrt(g*(g+1)) - g:
      u = (a+g*b)/(1+g)   if a+g*b >= 0 and b >= 0,
      u = (a+g*b)/(1+g)   if -s*a <= g*b < 0,
      u = b               if -a <= g*b <= -s*a < 0,
      u = min(b, 0)       if a+g*b < 0.
    """
    g = _check_gamma(g)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    s = np.sqrt(g * (g + 1.0)) - g
    pos_branch = (a + g * b) / (1.0 + g)
    out = np.where(
        a + g * b < 0,
        np.minimum(b, 0.0),
        np.where((b >= 0) | (g * b >= -s * a), pos_branch, b),
    )
    return out if out.ndim else float(out)


def prox_leaky_relu(a, b, g, slope: float):
    """argmin_u 0.5*(sigma(u) - a)^2 + (g/2)*(u - b)^2 for sigma(u) = max(u, slope*u).

    No published four-case form for 0 < slope < 1; the minimizer is found by
    comparing the clipped minimizers of the two quadratic branches.
    """
    g = _check_gamma(g)
    if not 0 < slope < 1:
        raise ValueError(f"leaky slope must be in (0, 1), got {slope}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    up = np.maximum((a + g * b) / (1.0 + g), 0.0)
    un = np.minimum((slope * a + g * b) / (slope**2 + g), 0.0)

    def f(u):
        return 0.5 * (np.maximum(u, slope * u) - a) ** 2 + 0.5 * g * (u - b) ** 2

    out = np.where(f(up) <= f(un), up, un)
    return out if out.ndim else float(out)


def prox_hinge(a, b, g):
    """argmin_u max(0, 1 - a*u) + (g/2)*(u - b)^2.

    Closed form:
      u = b              if a == 0,
      u = b + a/g        if a != 0 and a*b <= 1 - a^2/g,
      u = 1/a            if a != 0 and 1 - a^2/g < a*b < 1,
      u = b              if a != 0 and a*b >= 1.
    """
    g = _check_gamma(g)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv_a = np.where(a != 0, 1.0 / np.where(a != 0, a, 1.0), 0.0)
    ab = a * b
    out = np.where(
        (a == 0) | (ab >= 1),
        b,
        np.where(ab <= 1 - a * a / g, b + a / g, inv_a),
    )
    return out if out.ndim else float(out)


def soft_threshold(z, t):
    """sign(z) * max(|z| - t, 0); the l1-regularized proximal map."""
    if np.any(np.asarray(t) < 0):
        raise ValueError(f"threshold must be non-negative, got {t}")
    z = np.asarray(z, dtype=np.float64)
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return out if out.ndim else float(out)


def hard_threshold(z, t):
    """z where |z| > t, else 0; the boundary |z| == t maps to 0.

    At |z| == t the kept and zeroed objective values tie exactly; zero is
    chosen for determinism and sparsity.
    """
    if np.any(np.asarray(t) < 0):
        raise ValueError(f"threshold must be non-negative, got {t}")
    z = np.asarray(z, dtype=np.float64)
    out = np.where(np.abs(z) > t, z, 0.0)
    return out if out.ndim else float(out)


def project_topk(z: np.ndarray, beta: int) -> np.ndarray:
    """Euclidean projection onto {x : at most beta nonzero entries}.

    Keeps the beta entries of largest magnitude (ties broken by lowest flat
    index via a stable sort) and zeroes the rest.
    """
    z = np.asarray(z, dtype=np.float64)
    flat = z.reshape(-1)
    if not 1 <= beta <= flat.size:
        raise BetaOutOfRange(f"beta {beta} not in [1, {flat.size}]")
    order = np.argsort(-np.abs(flat), kind="stable")
    out = np.zeros_like(flat)
    keep = order[:beta]
    out[keep] = flat[keep]
    return out.reshape(z.shape)
