"""Network specification, the split-variable training state, and the
penalized objective.

Training never touches gradients of the network: each layer i carries four
blocks (W_i, U_i, V_i, W_i^mc) tied together by quadratic penalties
    (rho/2)||U_i - W_i V_{i-1}||^2     linear-coupling residual,
    (gamma/2)||V_i - sigma_i(U_i)||^2  activation residual,
    (tau/2)||W_i - W_i^mc||^2          compression residual,
with V_0 := X held as an immutable data reference.

Loss convention: the squared loss is ||v - y||_2^2 with no 1/2 factor, and
the empirical risk carries the 1/n. The closed-form constants of the output
block update depend on this scaling, so it is fixed here once.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleCompressedWeight, ShapeMismatch, UnsupportedActivation
from .tt import TTCores, tt_reconstruct


@dataclass(frozen=True)
class Activation:
    kind: str  # relu | leaky_relu | identity
    slope: float = 0.01

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu", "identity"):
            raise UnsupportedActivation(f"unknown activation {self.kind!r}")
        if self.kind == "leaky_relu" and not 0 < self.slope < 1:
            raise UnsupportedActivation(f"leaky slope must be in (0, 1), got {self.slope}")

    def apply(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "relu":
            return np.maximum(u, 0.0)
        if self.kind == "leaky_relu":
            return np.where(u >= 0, u, self.slope * u)
        return u

    @property
    def lipschitz(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Hyperparams:
    """Penalty weights of the objective; all four must be strictly positive
    for the per-sweep sufficient-decrease guarantee."""

    gamma: float
    rho: float
    tau: float
    alpha: float
    lambda_reg: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "rho", "tau", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.lambda_reg < 0:
            raise ValueError(f"lambda_reg must be >= 0, got {self.lambda_reg}")


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths, activations, loss kind and per-layer compression."""

    layer_dims: tuple[int, ...]           # [n_0 .. n_N]
    activations: tuple[Activation, ...]   # for layers 1..N; last is identity
    loss: str = "squared"                 # squared | hinge
    compression: tuple = ()               # CompressionSpec per layer, or empty
    use_bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        object.__setattr__(self, "activations", tuple(self.activations))
        object.__setattr__(self, "compression", tuple(self.compression))
        if len(self.layer_dims) < 2 or any(d < 1 for d in self.layer_dims):
            raise ShapeMismatch(f"need layer_dims [n_0..n_N] with N >= 1, all >= 1, "
                                f"got {self.layer_dims}")
        if len(self.activations) != self.n_layers:
            raise ShapeMismatch(f"{self.n_layers} layers need {self.n_layers} "
                                f"activations, got {len(self.activations)}")
        if self.activations[-1].kind != "identity":
            raise UnsupportedActivation("the output activation must be the identity")
        if self.loss not in ("squared", "hinge"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.compression and len(self.compression) != self.n_layers:
            raise ShapeMismatch("compression specs must be given per layer")

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def weight_shape(self, i: int) -> tuple[int, int]:
        """Shape of W_i, 1-based layer index."""
        return (self.layer_dims[i], self.layer_dims[i - 1])

    def compression_for(self, i: int):
        if not self.compression:
            return None
        return self.compression[i - 1]


@dataclass
class BlockState:
    """The full iterate: per-layer W, U, V, compressed weight, optional bias.

    Lists are 0-indexed by layer - 1; v[0] aliases the data matrix X and is
    never mutated. For tensor-train layers mc_native[i] holds the cores and
    w_mc[i] their dense reconstruction.
    """

    w: list[np.ndarray]
    u: list[np.ndarray]
    v: list[np.ndarray]          # v[0] = X, v[i] for layer i
    w_mc: list[np.ndarray]       # dense view of the compressed weights
    mc_native: list               # TTCores or None per layer
    b: list | None = None        # per-layer bias vectors, or None

    @property
    def n_layers(self) -> int:
        return len(self.w)

    @property
    def x(self) -> np.ndarray:
        return self.v[0]

    def copy(self) -> "BlockState":
        return BlockState(
            w=[a.copy() for a in self.w],
            u=[a.copy() for a in self.u],
            v=[self.v[0]] + [a.copy() for a in self.v[1:]],
            w_mc=[a.copy() for a in self.w_mc],
            mc_native=list(self.mc_native),
            b=None if self.b is None else [a.copy() for a in self.b],
        )

    def blocks(self):
        """All optimization blocks, in a fixed order (excludes X)."""
        out = list(self.w) + list(self.u) + list(self.v[1:]) + list(self.w_mc)
        if self.b is not None:
            out += list(self.b)
        return out

    def step_norm_sq(self, other: "BlockState") -> float:
        """Squared Frobenius distance between two iterates, block by block."""
        return float(
            sum(np.sum((a - b) ** 2) for a, b in zip(self.blocks(), other.blocks()))
        )


def forward(spec: NetworkSpec, weights, x: np.ndarray, biases=None) -> np.ndarray:
    """Plain feed-forward pass with the given weights only (no split blocks)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != spec.layer_dims[0]:
        raise ShapeMismatch(f"input has {x.shape[0]} rows, expected {spec.layer_dims[0]}")
    v = x
    for i, act in enumerate(spec.activations):
        u = weights[i] @ v
        if biases is not None:
            u = u + biases[i][:, None]
        v = act.apply(u)
    return v


def empirical_risk(spec: NetworkSpec, v_last: np.ndarray, y: np.ndarray) -> float:
    """(1/n) sum_j loss(v_j, y_j) with the package's squared-loss scaling."""
    n = y.shape[1]
    if spec.loss == "squared":
        return float(np.sum((v_last - y) ** 2) / n)
    # hinge: scalar-output binary labels in {-1, +1}
    if v_last.shape[0] != 1:
        raise ShapeMismatch("hinge loss requires a scalar output layer")
    return float(np.sum(np.maximum(0.0, 1.0 - y * v_last)) / n)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    risk: float
    coupling_rho: float
    coupling_gamma: float
    mc_tau: float
    reg_w: float
    reg_v: float

    @property
    def total(self) -> float:
        return (self.risk + self.coupling_rho + self.coupling_gamma
                + self.mc_tau + self.reg_w + self.reg_v)


def _check_mc_feasible(spec: NetworkSpec, state: BlockState) -> None:
    from .compress import constraint_violation  # local import to avoid a cycle

    for i in range(1, state.n_layers + 1):
        cspec = spec.compression_for(i)
        msg = constraint_violation(state.w_mc[i - 1], state.mc_native[i - 1], cspec)
        if msg:
            raise InfeasibleCompressedWeight(f"layer {i}: {msg}")


def objective(spec: NetworkSpec, state: BlockState, y: np.ndarray,
              hp: Hyperparams, check_feasibility: bool = True) -> ObjectiveBreakdown:
    """Evaluate the penalized objective and its components at the iterate."""
    if check_feasibility:
        _check_mc_feasible(spec, state)
    risk = empirical_risk(spec, state.v[-1], y)
    c_rho = c_gamma = c_tau = reg_w = 0.0
    for i in range(1, state.n_layers + 1):
        w, u, v_in = state.w[i - 1], state.u[i - 1], state.v[i - 1]
        wv = w @ v_in
        if state.b is not None:
            wv = wv + state.b[i - 1][:, None]
        c_rho += 0.5 * hp.rho * float(np.sum((u - wv) ** 2))
        sig = spec.activations[i - 1].apply(u)
        c_gamma += 0.5 * hp.gamma * float(np.sum((state.v[i] - sig) ** 2))
        c_tau += 0.5 * hp.tau * float(np.sum((w - state.w_mc[i - 1]) ** 2))
        cspec = spec.compression_for(i)
        if cspec is not None and cspec.kind == "l1_reg":
            reg_w += hp.lambda_reg * float(np.sum(np.abs(state.w_mc[i - 1])))
        elif cspec is not None and cspec.kind == "l0_reg":
            reg_w += hp.lambda_reg * float(np.count_nonzero(state.w_mc[i - 1]))
    return ObjectiveBreakdown(risk, c_rho, c_gamma, c_tau, reg_w, 0.0)


def init_state(spec: NetworkSpec, x: np.ndarray, seed: int,
               scheme: str = "gaussian") -> BlockState:
    """Draw weights, then fill U, V by one forward sweep and project W^mc.

    Default scheme draws each W_i from N(0, 0.01^2); 'zero' gives the
    all-zero state used by fixed-point tests.
    """
    from .compress import project  # local import to avoid a cycle

    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != spec.layer_dims[0]:
        raise ShapeMismatch(f"data must be ({spec.layer_dims[0]}, n), got {x.shape}")
    rng = np.random.default_rng(seed)
    w, u, w_mc, mc_native = [], [], [], []
    biases = [] if spec.use_bias else None
    v_list = [x]
    for i in range(1, spec.n_layers + 1):
        shape = spec.weight_shape(i)
        if scheme == "gaussian":
            wi = 0.01 * rng.standard_normal(shape)
        elif scheme == "zero":
            wi = np.zeros(shape)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        w.append(wi)
        if spec.use_bias:
            biases.append(np.zeros(shape[0]))
        ui = wi @ v_list[-1]
        u.append(ui)
        v_list.append(spec.activations[i - 1].apply(ui))
        dense, native = project(wi, spec.compression_for(i))
        w_mc.append(dense)
        mc_native.append(native)
    return BlockState(w=w, u=u, v=v_list, w_mc=w_mc, mc_native=mc_native, b=biases)


def weights_of(state: BlockState) -> list[np.ndarray]:
    """The uncompressed weight set."""
    return list(state.w)


def compressed_weights_of(state: BlockState) -> list[np.ndarray]:
    """The compressed weight set (dense views); this is the trained output."""
    return list(state.w_mc)
