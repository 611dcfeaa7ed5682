"""The backward Gauss-Seidel sweep and the full-batch training loop.

One sweep updates, in order, V_N, U_N, W_N, W_N^mc, then for
i = N-1, .., 1: V_i, U_i, W_i, W_i^mc. Because the sweep runs backward,
reading "the current value" of a block reproduces the update schedule
exactly: whenever a sub-problem references a layer-(i-1) block or the
block being overwritten, that value has not yet been touched this sweep.
The per-sweep sufficient-decrease guarantee depends on this schedule, so
no update may be reordered or given fresher inputs.
"""
from __future__ import annotations

import time

import numpy as np

from .compress import update_mc
from .errors import ShapeMismatch, UnsupportedActivation, UnsupportedLoss
from .linalg import solve_spd
from .model import BlockState, Hyperparams, NetworkSpec
from .prox import prox_hinge, prox_leaky_relu, prox_relu


def update_v_last(spec: NetworkSpec, state: BlockState, y: np.ndarray,
                  hp: Hyperparams) -> np.ndarray:
    """Exact output-block update for the squared or scalar hinge loss."""
    u, v_prev = state.u[-1], state.v[-1]
    n = y.shape[1]
    if spec.loss == "squared":
        return ((2.0 / n) * y + hp.gamma * u + hp.alpha * v_prev) / (
            2.0 / n + hp.gamma + hp.alpha
        )
    if v_prev.shape[0] != 1:
        raise UnsupportedLoss("hinge loss supports scalar-output binary tasks only")
    # (1/n) max(0, 1 - y v) + (gamma/2)(v-u)^2 + (alpha/2)(v-v_prev)^2
    b_bar = (hp.gamma * u + hp.alpha * v_prev) / (hp.gamma + hp.alpha)
    return np.asarray(prox_hinge(y, b_bar, n * (hp.gamma + hp.alpha)))


def update_v_last_proxlinear(state: BlockState, hp: Hyperparams,
                             grad: np.ndarray) -> np.ndarray:
    """Linearized output update for smooth losses: minimize
    <grad, v - v_prev> + (gamma/2)||v - u||^2 + (alpha/2)||v - v_prev||^2."""
    u, v_prev = state.u[-1], state.v[-1]
    return (hp.gamma * u + hp.alpha * v_prev - grad) / (hp.gamma + hp.alpha)


def update_v_mid(i: int, spec: NetworkSpec, state: BlockState,
                 hp: Hyperparams) -> np.ndarray:
    """Solve (gamma I + rho W'W) V = gamma sigma(U_i) + rho W'U_{i+1} for V_i,
    where W and U_{i+1} are the layer-(i+1) blocks already updated this sweep."""
    w_next, u_next = state.w[i], state.u[i]
    if state.b is not None:
        u_next = u_next - state.b[i][:, None]
    sig = spec.activations[i - 1].apply(state.u[i - 1])
    rhs = hp.gamma * sig + hp.rho * w_next.T @ u_next
    a = hp.gamma * np.eye(w_next.shape[1]) + hp.rho * w_next.T @ w_next
    return solve_spd(a, rhs)


def update_u_last(state: BlockState, hp: Hyperparams) -> np.ndarray:
    """Output pre-activation: blend of the fresh V_N and the stale W_N V_{N-1}."""
    wv = state.w[-1] @ state.v[-2]
    if state.b is not None:
        wv = wv + state.b[-1][:, None]
    return (hp.gamma * state.v[-1] + hp.rho * wv) / (hp.gamma + hp.rho)


def update_u_mid(i: int, spec: NetworkSpec, state: BlockState,
                 hp: Hyperparams) -> np.ndarray:
    """Elementwise nonsmooth update through the activation's proximal map.

    The two quadratic pulls (toward the stale linear output c = W_i V_{i-1}
    and the previous U_i) merge into a single one centered at
    b = (rho c + alpha u_prev) / (rho + alpha) with weight (rho+alpha)/gamma.
    """
    act = spec.activations[i - 1]
    c = state.w[i - 1] @ state.v[i - 1]
    if state.b is not None:
        c = c + state.b[i - 1][:, None]
    u_prev = state.u[i - 1]
    b_bar = (hp.rho * c + hp.alpha * u_prev) / (hp.rho + hp.alpha)
    g = (hp.rho + hp.alpha) / hp.gamma
    if act.kind == "relu":
        return np.asarray(prox_relu(state.v[i], b_bar, g))
    if act.kind == "leaky_relu":
        return np.asarray(prox_leaky_relu(state.v[i], b_bar, g, act.slope))
    raise UnsupportedActivation(
        f"no closed-form hidden update for activation {act.kind!r}"
    )


def update_w(i: int, state: BlockState, hp: Hyperparams) -> np.ndarray:
    """Ridge-like solve W (rho V V' + tau I) = rho U V' + tau W^mc, using the
    fresh U_i and the stale (pre-sweep) V_{i-1} and compressed weight."""
    v_in = state.v[i - 1]
    u = state.u[i - 1]
    if state.b is not None:
        u = u - state.b[i - 1][:, None]
    a = hp.rho * v_in @ v_in.T + hp.tau * np.eye(v_in.shape[0])
    rhs = hp.rho * u @ v_in.T + hp.tau * state.w_mc[i - 1]
    return solve_spd(a, rhs.T).T


def update_kernel(x_mat: np.ndarray, u: np.ndarray, k_mc: np.ndarray,
                  hp: Hyperparams) -> np.ndarray:
    """Convolution-kernel update on the im2col form: solve
    (rho X'X + tau I) K = rho X'U + tau K^mc for the (l*l*C, S) kernel matrix."""
    if x_mat.shape[0] != u.shape[0]:
        raise ShapeMismatch(f"im2col matrix has {x_mat.shape[0]} rows but the "
                            f"pre-activation has {u.shape[0]}")
    a = hp.rho * x_mat.T @ x_mat + hp.tau * np.eye(x_mat.shape[1])
    rhs = hp.rho * x_mat.T @ u + hp.tau * k_mc
    return solve_spd(a, rhs)


def update_bias(i: int, state: BlockState, hp: Hyperparams) -> np.ndarray:
    """Least-squares bias: row mean of the coupling residual U_i - W_i V_{i-1}."""
    res = state.u[i - 1] - state.w[i - 1] @ state.v[i - 1]
    return res.mean(axis=1)


def sweep(spec: NetworkSpec, state: BlockState, y: np.ndarray,
          hp: Hyperparams) -> dict[str, float]:
    """One full backward pass over all blocks, mutating `state` in place.

    Any sub-update failure restores the pre-sweep state before re-raising.
    Returns accumulated per-block-kind wall times in seconds.
    """
    snapshot = state.copy()
    timings = {"v": 0.0, "u": 0.0, "w": 0.0, "w_mc": 0.0, "b": 0.0}

    def timed(key, fn):
        t0 = time.perf_counter()
        out = fn()
        timings[key] += time.perf_counter() - t0
        return out

    n = state.n_layers
    try:
        for i in range(n, 0, -1):
            if i == n:
                state.v[n] = timed("v", lambda: update_v_last(spec, state, y, hp))
                state.u[n - 1] = timed("u", lambda: update_u_last(state, hp))
            else:
                state.v[i] = timed("v", lambda: update_v_mid(i, spec, state, hp))
                state.u[i - 1] = timed("u", lambda: update_u_mid(i, spec, state, hp))
            state.w[i - 1] = timed("w", lambda: update_w(i, state, hp))
            if state.b is not None:
                state.b[i - 1] = timed("b", lambda: update_bias(i, state, hp))
            dense, native = timed(
                "w_mc",
                lambda: update_mc(state.w[i - 1], state.w_mc[i - 1],
                                  state.mc_native[i - 1], spec.compression_for(i), hp),
            )
            state.w_mc[i - 1] = dense
            state.mc_native[i - 1] = native
    except Exception:
        state.w, state.u, state.v = snapshot.w, snapshot.u, snapshot.v
        state.w_mc, state.mc_native, state.b = snapshot.w_mc, snapshot.mc_native, snapshot.b
        raise
    return timings


def check_memory_budget(spec: NetworkSpec, n_samples: int,
                        budget_gib: float = 4.0) -> None:
    """Refuse configurations whose split variables would exceed the budget.

    The state holds two n-column matrices (U, V) per layer plus weights, and
    the engine keeps one full copy for step norms.
    """
    floats = 2 * sum(d * n_samples for d in spec.layer_dims[1:])
    floats += 3 * sum(a * b for a, b in
                      (spec.weight_shape(i) for i in range(1, spec.n_layers + 1)))
    needed_gib = 2 * floats * 8 / 2**30
    if needed_gib > budget_gib:
        raise MemoryError(
            f"configuration needs about {needed_gib:.1f} GiB of state, over the "
            f"{budget_gib:.1f} GiB budget; reduce the sample count or widths"
        )
