"""Full-batch training driver: runs sweeps, records metrics per iteration."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import bcd
from .data import Dataset
from .diagnostics import IterationRecord, check_descent, sufficient_decrease_coefficient
from .model import (
    BlockState,
    Hyperparams,
    NetworkSpec,
    forward,
    init_state,
    objective,
)


def accuracy(spec: NetworkSpec, weights, dataset: Dataset, biases=None) -> float:
    """Fraction of argmax-correct columns (ties go to the lowest class index)."""
    preds = forward(spec, weights, dataset.x, biases).argmax(axis=0)
    return float(np.mean(preds == dataset.labels()))


def balanced_accuracy(spec: NetworkSpec, weights, dataset: Dataset,
                      biases=None, positive_class: int = 1) -> float:
    """Mean of true-positive and true-negative rates for a binary task."""
    preds = forward(spec, weights, dataset.x, biases).argmax(axis=0)
    truth = dataset.labels()
    pos, neg = truth == positive_class, truth != positive_class
    tpr = float(np.mean(preds[pos] == positive_class)) if pos.any() else 0.0
    tnr = float(np.mean(preds[neg] != positive_class)) if neg.any() else 0.0
    return 0.5 * (tpr + tnr)


@dataclass
class TrainResult:
    records: list[IterationRecord]
    state: BlockState
    l_initial: float
    descent_violations: int


def run_training(spec: NetworkSpec, hp: Hyperparams, train_ds: Dataset,
                 test_ds: Dataset | None = None, iterations: int = 100,
                 seed: int = 0, init_scheme: str = "gaussian",
                 record_time: bool = True,
                 memory_budget_gib: float = 4.0) -> TrainResult:
    """Run the backward block sweep for a fixed number of iterations.

    Classification metrics are evaluated with the compressed weights (the
    trained output of the algorithm); regression datasets record NaN.
    """
    bcd.check_memory_budget(spec, train_ds.n_samples, memory_budget_gib)
    state = init_state(spec, train_ds.x, seed, init_scheme)
    l_prev = objective(spec, state, train_ds.y, hp).total
    l_initial = l_prev
    records: list[IterationRecord] = []
    violations = 0
    for k in range(1, iterations + 1):
        t0 = time.perf_counter()
        prev = state.copy()
        bcd.sweep(spec, state, train_ds.y, hp)
        step_sq = state.step_norm_sq(prev)
        br = objective(spec, state, train_ds.y, hp)
        ok, _ = check_descent(l_prev, br.total, step_sq, hp)
        violations += not ok
        train_m = accuracy(spec, state.w_mc, train_ds, state.b) \
            if train_ds.one_hot else float("nan")
        test_m = accuracy(spec, state.w_mc, test_ds, state.b) \
            if (test_ds is not None and test_ds.one_hot) else float("nan")
        wall = time.perf_counter() - t0 if record_time else 0.0
        records.append(IterationRecord(
            k=k, l_total=br.total, l_risk=br.risk,
            l_coupling_rho=br.coupling_rho, l_coupling_gamma=br.coupling_gamma,
            l_mc_tau=br.mc_tau, step_norm_sq=step_sq, descent_ok=ok,
            lambda_used=sufficient_decrease_coefficient(hp),
            train_metric=train_m, test_metric=test_m, wall_time=wall,
        ))
        l_prev = br.total
    return TrainResult(records, state, l_initial, violations)
