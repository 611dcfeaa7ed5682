"""Runtime verification of the convergence guarantees.

Every sweep of the engine must decrease the objective by at least
lambda * ||step||_F^2 with lambda = min{alpha, gamma+rho, tau}/2, provided
all sub-problems are solved exactly. Telescoping that inequality bounds the
cumulative squared step norm by (L(P0) - L(PK)) / lambda, which is what
drives the O(1/K) decay of the averaged step. These facts are checked here
at run time rather than assumed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BlockState, Hyperparams, NetworkSpec


@dataclass
class IterationRecord:
    k: int
    l_total: float
    l_risk: float
    l_coupling_rho: float
    l_coupling_gamma: float
    l_mc_tau: float
    step_norm_sq: float
    descent_ok: bool
    lambda_used: float
    train_metric: float
    test_metric: float
    wall_time: float


def sufficient_decrease_coefficient(hp: Hyperparams) -> float:
    """The guaranteed per-sweep decrease weight min{alpha, gamma+rho, tau}/2."""
    return min(hp.alpha, hp.gamma + hp.rho, hp.tau) / 2.0


def check_descent(prev_l: float, curr_l: float, step_norm_sq: float,
                  hp: Hyperparams, rel_tol: float = 1e-8) -> tuple[bool, float]:
    """Check curr <= prev - lambda*step^2 up to a relative float tolerance.

    Returns (ok, slack) with slack = prev - curr - lambda*step^2; the
    tolerance is relative (rel_tol * max(1, prev)) to absorb accumulation
    error across large matrices.
    """
    lam = sufficient_decrease_coefficient(hp)
    slack = prev_l - curr_l - lam * step_norm_sq
    return slack >= -rel_tol * max(1.0, prev_l), slack


def rate_summary(l_initial: float, records: list[IterationRecord],
                 hp: Hyperparams, tol: float = 1e-9) -> dict[str, float]:
    """Telescoped decrease bound and the averaged squared step norm.

    Asserts cum_step_sq <= (L(P0) - L(PK)) / lambda (up to tol), the direct
    consequence of per-sweep sufficient decrease.
    """
    if not records:
        raise ValueError("need at least one iteration record")
    lam = sufficient_decrease_coefficient(hp)
    cum = float(sum(r.step_norm_sq for r in records))
    bound = (l_initial - records[-1].l_total) / lam
    assert cum <= bound + tol * max(1.0, abs(bound)), (
        f"telescoping bound violated: cumulative step {cum:.6e} > bound {bound:.6e}"
    )
    return {
        "cum_step_sq": cum,
        "bound": bound,
        "avg_step_sq": cum / len(records),
    }


def stationarity_estimate(prev: BlockState, curr: BlockState, spec: NetworkSpec,
                          hp: Hyperparams) -> float:
    """Computable upper-bound surrogate for the distance of 0 to the
    objective's subdifferential at the current iterate.

    Uses the subgradient bound delta_bar * ||step||_F with
    delta = max{gamma, alpha + rho*B, alpha + gamma*L, 2*rho*B + 2*rho*B^2,
    alpha + tau}, B the largest block Frobenius norm observed and L the
    activation Lipschitz constant. This is a monitor of an upper bound, not
    an exact subgradient norm.
    """
    step = np.sqrt(curr.step_norm_sq(prev))
    b_norm = max(
        (float(np.linalg.norm(blk)) for blk in prev.blocks() + curr.blocks()),
        default=0.0,
    )
    l_act = max(a.lipschitz for a in spec.activations)
    delta = max(
        hp.gamma,
        hp.alpha + hp.rho * b_norm,
        hp.alpha + hp.gamma * l_act,
        2.0 * hp.rho * b_norm + 2.0 * hp.rho * b_norm**2,
        hp.alpha + hp.tau,
    )
    return delta * np.sqrt(4.0 * curr.n_layers) * step
