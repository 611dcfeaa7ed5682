"""Batch command-line surface: train, eval, compress.

Config files are JSON with sections {network, hyperparams, compression,
data, run}. Exit codes: 0 success, 2 config error, 3 data error,
4 numerical failure. Error messages name the offending config key.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import compress as compress_mod
from .data import Dataset, load_csv, load_idx, make_synthetic
from .errors import (
    ConfigError,
    DataError,
    HashMismatch,
    InfeasibleCompressedWeight,
    NNBCDError,
    NotPositiveDefinite,
)
from .model import Activation, Hyperparams, NetworkSpec, forward
from .train import accuracy, balanced_accuracy, run_training
from .tt import Tensorization, TTCores

METRICS_COLUMNS = [
    "k", "L_total", "L_risk", "L_coupling_rho", "L_coupling_gamma",
    "L_mc_tau", "step_norm_sq", "descent_ok", "train_acc", "test_acc",
    "wall_time_s",
]


# ---------------------------------------------------------------------------
# config parsing

def _activation_from(obj) -> Activation:
    if isinstance(obj, str):
        return Activation(obj)
    return Activation(obj["kind"], obj.get("slope", 0.01))


def _compression_from(obj) -> compress_mod.CompressionSpec:
    kind = obj.get("kind", "none")
    if kind == "tt":
        t = Tensorization(tuple(obj["row_factors"]), tuple(obj["col_factors"]))
        return compress_mod.CompressionSpec(kind="tt", tensorization=t,
                                            ranks=tuple(obj["ranks"]))
    if kind == "l0_constrained":
        return compress_mod.CompressionSpec(kind=kind, beta=int(obj["beta"]))
    return compress_mod.CompressionSpec(kind=kind)


def _compression_to(spec: compress_mod.CompressionSpec | None) -> dict:
    if spec is None or spec.kind == "none":
        return {"kind": "none"}
    if spec.kind == "tt":
        return {"kind": "tt",
                "row_factors": list(spec.tensorization.row_factors),
                "col_factors": list(spec.tensorization.col_factors),
                "ranks": list(spec.ranks)}
    if spec.kind == "l0_constrained":
        return {"kind": spec.kind, "beta": spec.beta}
    return {"kind": spec.kind}


def spec_from_config(cfg: dict) -> NetworkSpec:
    try:
        net = cfg["network"]
        dims = tuple(net["layer_dims"])
        acts = tuple(_activation_from(a) for a in net["activations"])
        comp_cfg = cfg.get("compression") or [{"kind": "none"}] * (len(dims) - 1)
        comp = tuple(_compression_from(c) for c in comp_cfg)
        return NetworkSpec(layer_dims=dims, activations=acts,
                           loss=net.get("loss", "squared"), compression=comp,
                           use_bias=bool(net.get("use_bias", False)))
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc}") from exc
    except (NNBCDError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid network/compression section: {exc}") from exc


def spec_to_config(spec: NetworkSpec) -> dict:
    return {
        "network": {
            "layer_dims": list(spec.layer_dims),
            "activations": [
                {"kind": a.kind, "slope": a.slope} if a.kind == "leaky_relu" else a.kind
                for a in spec.activations
            ],
            "loss": spec.loss,
            "use_bias": spec.use_bias,
        },
        "compression": [_compression_to(c) for c in
                        (spec.compression or (None,) * spec.n_layers)],
    }


def hp_from_config(cfg: dict) -> Hyperparams:
    h = cfg.get("hyperparams", {})
    for key in ("gamma", "rho", "tau", "alpha"):
        if key not in h:
            raise ConfigError(f"hyperparams.{key} is required")
        if not float(h[key]) > 0:
            raise ConfigError(
                f"hyperparams.{key} must be strictly positive (the sufficient-"
                f"decrease guarantee requires alpha, gamma, rho, tau > 0), "
                f"got {h[key]}"
            )
    return Hyperparams(gamma=float(h["gamma"]), rho=float(h["rho"]),
                       tau=float(h["tau"]), alpha=float(h["alpha"]),
                       lambda_reg=float(h.get("lambda_reg", 0.0)))


def load_datasets(cfg: dict) -> tuple[Dataset, Dataset | None]:
    d = cfg.get("data")
    if not d:
        raise ConfigError("data section is required")
    kind = d.get("kind")
    if kind == "synthetic":
        sizes = d["sizes"]
        train = make_synthetic(d["synthetic_kind"], sizes, int(d["n_train"]),
                               seed=int(d.get("seed", 0)),
                               **d.get("options", {}))
        test = None
        if d.get("n_test"):
            test = make_synthetic(d["synthetic_kind"], sizes, int(d["n_test"]),
                                  seed=int(d.get("seed", 0)) + 1, split="test",
                                  **d.get("options", {}))
        return train, test
    if kind == "idx":
        train = load_idx(d["train_images"], d["train_labels"])
        subset = d.get("n_train_subset")
        if subset:
            train = Dataset(train.x[:, :int(subset)], train.y[:, :int(subset)],
                            split="train", class_names=train.class_names,
                            one_hot=True)
        test = None
        if d.get("test_images"):
            test = load_idx(d["test_images"], d["test_labels"], split="test")
        return train, test
    if kind == "csv":
        train = load_csv(d["train_path"], d["label_column"],
                         standardize=d.get("standardize", True))
        test = None
        if d.get("test_path"):
            test = load_csv(d["test_path"], d["label_column"],
                            standardize=d.get("standardize", True), split="test")
        return train, test
    if kind == "npz":
        train = Dataset.load(d["train_path"])
        test = Dataset.load(d["test_path"]) if d.get("test_path") else None
        return train, test
    raise ConfigError(f"data.kind must be synthetic|idx|csv|npz, got {kind!r}")


# ---------------------------------------------------------------------------
# checkpoints

def spec_hash(spec: NetworkSpec) -> str:
    blob = json.dumps(spec_to_config(spec), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(path, spec: NetworkSpec, hp: Hyperparams, state) -> None:
    arrays = {"spec_json": np.array(json.dumps(spec_to_config(spec))),
              "spec_hash": np.array(spec_hash(spec)),
              "hp_json": np.array(json.dumps(vars(hp)))}
    for i in range(state.n_layers):
        arrays[f"w_{i}"] = state.w[i]
        arrays[f"u_{i}"] = state.u[i]
        arrays[f"v_{i + 1}"] = state.v[i + 1]
        arrays[f"wmc_{i}"] = state.w_mc[i]
        if isinstance(state.mc_native[i], TTCores):
            for k, g in enumerate(state.mc_native[i].cores):
                arrays[f"cores_{i}_{k}"] = g
        if state.b is not None:
            arrays[f"b_{i}"] = state.b[i]
    arrays["v_0"] = state.v[0]
    np.savez(path, **arrays)


def load_checkpoint(path):
    from .model import BlockState

    with np.load(path, allow_pickle=False) as z:
        cfg = json.loads(str(z["spec_json"]))
        spec = spec_from_config(cfg)
        if str(z["spec_hash"]) != spec_hash(spec):
            raise HashMismatch(f"{path}: stored spec hash does not match its contents")
        hp = Hyperparams(**json.loads(str(z["hp_json"])))
        n = spec.n_layers
        use_b = spec.use_bias and "b_0" in z
        mc_native = []
        for i in range(n):
            cores = []
            k = 0
            while f"cores_{i}_{k}" in z:
                cores.append(z[f"cores_{i}_{k}"])
                k += 1
            mc_native.append(TTCores(tuple(cores)) if cores else None)
        state = BlockState(
            w=[z[f"w_{i}"] for i in range(n)],
            u=[z[f"u_{i}"] for i in range(n)],
            v=[z["v_0"]] + [z[f"v_{i + 1}"] for i in range(n)],
            w_mc=[z[f"wmc_{i}"] for i in range(n)],
            mc_native=mc_native,
            b=[z[f"b_{i}"] for i in range(n)] if use_b else None,
        )
    return spec, hp, state


# ---------------------------------------------------------------------------
# metrics

def _fmt(value) -> str:
    if isinstance(value, bool) or isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_metrics(path, records) -> None:
    lines = [",".join(METRICS_COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt(v) for v in (
            r.k, r.l_total, r.l_risk, r.l_coupling_rho, r.l_coupling_gamma,
            r.l_mc_tau, r.step_norm_sq, r.descent_ok, r.train_metric,
            r.test_metric, r.wall_time,
        )))
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics(path):
    """Parse metrics.csv rows back into IterationRecord objects."""
    from .diagnostics import IterationRecord

    lines = Path(path).read_text().strip().splitlines()
    if lines[0] != ",".join(METRICS_COLUMNS):
        raise DataError(f"{path}: unexpected metrics header")
    out = []
    for line in lines[1:]:
        c = line.split(",")
        out.append(IterationRecord(
            k=int(c[0]), l_total=float(c[1]), l_risk=float(c[2]),
            l_coupling_rho=float(c[3]), l_coupling_gamma=float(c[4]),
            l_mc_tau=float(c[5]), step_norm_sq=float(c[6]),
            descent_ok=bool(int(c[7])), lambda_used=float("nan"),
            train_metric=float(c[8]), test_metric=float(c[9]),
            wall_time=float(c[10]),
        ))
    return out


# ---------------------------------------------------------------------------
# commands

def _limit_threads() -> None:
    cap = os.environ.get("NNBCD_THREADS")
    if not cap:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(int(cap))
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = cap


def cmd_train(config_path, out_dir) -> dict:
    with open(config_path) as f:
        cfg = json.load(f)
    spec = spec_from_config(cfg)
    hp = hp_from_config(cfg)
    train_ds, test_ds = load_datasets(cfg)
    run = cfg.get("run", {})
    result = run_training(
        spec, hp, train_ds, test_ds,
        iterations=int(run.get("iterations", 100)),
        seed=int(run.get("seed", 0)),
        init_scheme=run.get("init", "gaussian"),
        record_time=bool(run.get("record_wall_time", True)),
        memory_budget_gib=float(run.get("max_memory_gib", 4.0)),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / "metrics.csv", result.records)
    save_checkpoint(out / "checkpoint.npz", spec, hp, result.state)
    shapes = [spec.weight_shape(i) for i in range(1, spec.n_layers + 1)]
    summary = {
        "final_objective": result.records[-1].l_total,
        "initial_objective": result.l_initial,
        "iterations": len(result.records),
        "descent_violations": result.descent_violations,
        "compression_ratio": compress_mod.compression_ratio(
            spec.compression or [None] * spec.n_layers, shapes,
            result.state.mc_native),
        "sparsity": compress_mod.sparsity(result.state.w_mc),
        "train_accuracy": result.records[-1].train_metric,
        "test_accuracy": result.records[-1].test_metric,
    }
    if train_ds.one_hot and train_ds.y.shape[0] == 2:
        summary["train_bacc"] = balanced_accuracy(
            spec, result.state.w_mc, train_ds, result.state.b)
        if test_ds is not None:
            summary["test_bacc"] = balanced_accuracy(
                spec, result.state.w_mc, test_ds, result.state.b)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def _load_eval_dataset(path) -> Dataset:
    path = str(path)
    if path.endswith(".json"):
        with open(path) as f:
            train, test = load_datasets({"data": json.load(f)})
        return test or train
    return Dataset.load(path)


def cmd_eval(checkpoint_path, data_path) -> dict:
    spec, hp, state = load_checkpoint(checkpoint_path)
    for i in range(1, spec.n_layers + 1):
        msg = compress_mod.constraint_violation(
            state.w_mc[i - 1], state.mc_native[i - 1], spec.compression_for(i))
        if msg:
            raise InfeasibleCompressedWeight(
                f"checkpoint layer {i} violates its compression constraint: {msg}")
    ds = _load_eval_dataset(data_path)
    metrics = {"accuracy": accuracy(spec, state.w_mc, ds, state.b)}
    if ds.one_hot and ds.y.shape[0] == 2:
        metrics["bacc"] = balanced_accuracy(spec, state.w_mc, ds, state.b)
    return metrics


def cmd_compress(checkpoint_path, spec_path, out_path=None) -> dict:
    spec, hp, state = load_checkpoint(checkpoint_path)
    with open(spec_path) as f:
        comp_cfg = json.load(f)
    if isinstance(comp_cfg, dict):
        comp_cfg = comp_cfg.get("compression", [comp_cfg] * spec.n_layers)
    new_comp = tuple(_compression_from(c) for c in comp_cfg)
    if len(new_comp) != spec.n_layers:
        raise ConfigError(f"compression needs {spec.n_layers} per-layer entries, "
                          f"got {len(new_comp)}")
    report = {"per_layer_error": [], "per_layer_kind": []}
    for i in range(spec.n_layers):
        dense, native = compress_mod.project(state.w[i], new_comp[i])
        report["per_layer_error"].append(
            float(np.linalg.norm(state.w[i] - dense)))
        report["per_layer_kind"].append(new_comp[i].kind)
        state.w_mc[i] = dense
        state.mc_native[i] = native
    shapes = [spec.weight_shape(i) for i in range(1, spec.n_layers + 1)]
    report["compression_ratio"] = compress_mod.compression_ratio(
        new_comp, shapes, state.mc_native)
    report["sparsity"] = compress_mod.sparsity(state.w_mc)
    new_spec = NetworkSpec(spec.layer_dims, spec.activations, spec.loss,
                           new_comp, spec.use_bias)
    if out_path:
        save_checkpoint(out_path, new_spec, hp, state)
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nnbcd",
        description="Gradient-free block-coordinate training with built-in "
                    "low-rank and pruning compression",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_train = sub.add_parser("train", help="run a training config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_eval = sub.add_parser("eval", help="evaluate a checkpoint's compressed weights")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_comp = sub.add_parser("compress", help="one-shot compression of a checkpoint")
    p_comp.add_argument("--checkpoint", required=True)
    p_comp.add_argument("--spec", required=True)
    p_comp.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    _limit_threads()
    try:
        if args.command == "train":
            summary = cmd_train(args.config, args.out)
            print(json.dumps(summary, indent=2))
        elif args.command == "eval":
            print(json.dumps(cmd_eval(args.checkpoint, args.data), indent=2))
        else:
            print(json.dumps(cmd_compress(args.checkpoint, args.spec, args.out),
                             indent=2))
    except (ConfigError, HashMismatch, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NotPositiveDefinite, InfeasibleCompressedWeight, MemoryError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
