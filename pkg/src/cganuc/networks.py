"""Generator, feature network and projection discriminator.

Parameters live in one flat ``dict[str, ndarray]`` keyed by dotted names
(``gen.0.w``, ``disc.feat.1.b``, ``disc.w_o`` ...).  Forward functions take a
mapping of the same names to autodiff nodes so that training and inference
share a single code path.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from cganuc import autodiff as ad
from cganuc.autodiff import Node

ACTIVATIONS = ("identity", "relu", "leaky-relu", "tanh", "softmax")
LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class MlpSpec:
    dims: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        if len(self.dims) < 2:
            raise ValueError("an MLP needs at least input and output dims")
        if any(d <= 0 for d in self.dims):
            raise ValueError(f"dimensions must be positive: {self.dims}")
        if len(self.activations) != len(self.dims) - 1:
            raise ValueError("one activation per layer required")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    def shapes(self, prefix: str) -> dict[str, tuple[int, ...]]:
        out = {}
        for i, (fan_in, fan_out) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            out[f"{prefix}.{i}.w"] = (fan_in, fan_out)
            out[f"{prefix}.{i}.b"] = (1, fan_out)
        return out


def hidden_mlp(in_dim: int, hidden: tuple[int, ...], out_dim: int, act: str) -> MlpSpec:
    dims = (in_dim, *hidden, out_dim)
    return MlpSpec(dims, (act,) * len(hidden) + ("identity",))


@dataclass(frozen=True)
class GeneratorSpec:
    noise_dim: int
    cond_dim: int
    out_dim: int
    hidden: tuple[int, ...] = (64, 64)
    output_activation: str = "identity"  # "softmax" for classification

    def __post_init__(self):
        if self.output_activation not in ("identity", "softmax"):
            raise ValueError("generator output must be identity or softmax")

    @property
    def trunk(self) -> MlpSpec:
        return hidden_mlp(self.noise_dim + self.cond_dim, self.hidden, self.out_dim, "relu")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return self.trunk.shapes("gen")


@dataclass(frozen=True)
class DiscriminatorSpec:
    x_dim: int
    q: int
    u: int = 16
    hidden: tuple[int, ...] = (64, 64)
    mode: str = "regression"
    phi_hidden: tuple[int, ...] | None = None  # None: same widths as the feature net

    def __post_init__(self):
        if self.mode not in ("regression", "classification"):
            raise ValueError(f"unknown discriminator mode {self.mode!r}")

    @property
    def feature(self) -> MlpSpec:
        return hidden_mlp(self.x_dim, self.hidden, self.u, "leaky-relu")

    @property
    def phi(self) -> MlpSpec:
        widths = self.hidden if self.phi_hidden is None else self.phi_hidden
        return hidden_mlp(self.q, widths, self.u, "leaky-relu")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        out = dict(self.feature.shapes("disc.feat"))
        if self.mode == "regression":
            out.update(self.phi.shapes("disc.phi"))
        else:
            out["disc.w_phi"] = (self.q, self.u)
        # W_o is stored transposed, as a [u x 1] column.
        out["disc.w_o"] = (self.u, 1)
        return out


def init_params(shapes: Mapping[str, tuple[int, ...]], seed: int) -> dict[str, np.ndarray]:
    """He-style uniform init (std sqrt(2/fan_in)), zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    params = {}
    for name in sorted(shapes):
        shape = shapes[name]
        if any(d <= 0 for d in shape):
            raise ValueError(f"zero dimension in {name}: {shape}")
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / shape[0])
            params[name] = rng.uniform(-limit, limit, size=shape)
    return params


def _activate(x: Node, act: str) -> Node:
    if act == "identity":
        return x
    if act == "relu":
        return ad.relu(x)
    if act == "leaky-relu":
        return ad.leaky_relu(x, LEAKY_SLOPE)
    if act == "tanh":
        return ad.tanh(x)
    return ad.softmax(x)


def mlp_graph(spec: MlpSpec, p: Mapping[str, Node], prefix: str, x: Node) -> Node:
    if x.shape[1] != spec.input_dim:
        raise ad.ShapeError(f"{prefix}: expected input dim {spec.input_dim}, got {x.shape[1]}")
    h = x
    for i, act in enumerate(spec.activations):
        h = _activate(ad.add(ad.matmul(h, p[f"{prefix}.{i}.w"]), p[f"{prefix}.{i}.b"]), act)
    return h


def generator_graph(spec: GeneratorSpec, p: Mapping[str, Node], z: Node, cond: Node) -> Node:
    if z.shape[1] != spec.noise_dim or cond.shape[1] != spec.cond_dim:
        raise ad.ShapeError(
            f"generator expects noise {spec.noise_dim} / condition {spec.cond_dim}, "
            f"got {z.shape[1]} / {cond.shape[1]}"
        )
    out = mlp_graph(spec.trunk, p, "gen", ad.concat([z, cond]))
    if spec.output_activation == "softmax":
        out = ad.softmax(out)
    return out


def feature_graph(spec: DiscriminatorSpec, p: Mapping[str, Node], x: Node) -> Node:
    return mlp_graph(spec.feature, p, "disc.feat", x)


def embed_label_graph(spec: DiscriminatorSpec, p: Mapping[str, Node], y: Node) -> Node:
    """The label embedding: MLP for regression, ``y @ W_phi`` for classification."""
    if y.shape[1] != spec.q:
        raise ad.ShapeError(f"label dim {y.shape[1]} != {spec.q}")
    if spec.mode == "regression":
        return mlp_graph(spec.phi, p, "disc.phi", y)
    return ad.matmul(y, p["disc.w_phi"])


def projection_score(features: Node, embedded: Node, w_o: Node) -> Node:
    """Row-wise ``W_o . e + f^T e`` as an [n x 1] column."""
    return ad.add(ad.matmul(embedded, w_o), ad.sum(ad.mul(features, embedded), axis=1))


def discriminator_graph(spec: DiscriminatorSpec, p: Mapping[str, Node], x: Node, y: Node) -> Node:
    return projection_score(feature_graph(spec, p, x), embed_label_graph(spec, p, y), p["disc.w_o"])


def _leaves(params: Mapping[str, np.ndarray]) -> dict[str, Node]:
    return {k: ad.leaf(v) for k, v in params.items()}


def _rows(a, width: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if width is not None and a.shape[1] != width:
        raise ad.ShapeError(f"expected width {width}, got {a.shape[1]}")
    return a


def generator_forward(spec: GeneratorSpec, params, z, cond) -> np.ndarray:
    """Generator output for numpy inputs; 1-D inputs give a 1-D output."""
    single = np.ndim(z) == 1 and np.ndim(cond) == 1
    out = generator_graph(spec, _leaves(params), ad.leaf(_rows(z)), ad.leaf(_rows(cond))).value
    return out[0] if single else out


def feature_forward(spec: DiscriminatorSpec, params, x) -> np.ndarray:
    single = np.ndim(x) == 1
    out = feature_graph(spec, _leaves(params), ad.leaf(_rows(x, spec.x_dim))).value
    return out[0] if single else out


def discriminator_forward_regression(spec: DiscriminatorSpec, params, x, y) -> np.ndarray:
    if spec.mode != "regression":
        raise ValueError("discriminator is not in regression mode")
    return _score(spec, params, x, y)


def is_one_hot(y: np.ndarray) -> bool:
    y = _rows(y)
    return bool(np.all((y == 0) | (y == 1)) and np.all(y.sum(axis=1) == 1))


def discriminator_forward_classification(spec: DiscriminatorSpec, params, x, y_onehot) -> np.ndarray:
    if spec.mode != "classification":
        raise ValueError("discriminator is not in classification mode")
    if not is_one_hot(y_onehot):
        raise ValueError("classification discriminator requires one-hot labels")
    return _score(spec, params, x, y_onehot)


def _score(spec, params, x, y) -> np.ndarray:
    single = np.ndim(x) == 1
    node = discriminator_graph(
        spec, _leaves(params), ad.leaf(_rows(x, spec.x_dim)), ad.leaf(_rows(y, spec.q))
    )
    out = node.value[:, 0]
    return float(out[0]) if single else out


@dataclass
class ModelBundle:
    """Everything needed to run a trained model.

    ``condition`` is ``"raw"`` (generator sees X) or ``"features"`` (generator
    sees the discriminator's M_F(X)).  ``target_range`` holds the (lo, hi)
    span of the training targets, used as fixed histogram support.
    """

    task: str
    generator: GeneratorSpec
    discriminator: DiscriminatorSpec
    params: dict[str, np.ndarray]
    condition: str = "raw"
    target_range: list[tuple[float, float]] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.condition not in ("raw", "features"):
            raise ValueError(f"unknown condition mode {self.condition!r}")

    def condition_values(self, x: np.ndarray) -> np.ndarray:
        x = _rows(x, self.discriminator.x_dim)
        if self.condition == "raw":
            return x
        return feature_forward(self.discriminator, self.params, x)

    def header(self) -> dict:
        return {
            "task": self.task,
            "condition": self.condition,
            "generator": asdict(self.generator),
            "discriminator": asdict(self.discriminator),
            "target_range": [list(r) for r in self.target_range],
            "config": self.config,
        }


def build_model(
    task: str,
    x_dim: int,
    q: int,
    *,
    noise_dim: int = 8,
    u: int = 16,
    hidden: tuple[int, ...] = (64, 64),
    condition: str | None = None,
    seed: int = 0,
) -> ModelBundle:
    """Fresh model with the default architecture for ``task``."""
    if condition is None:
        condition = "raw" if task == "regression" else "features"
    cond_dim = x_dim if condition == "raw" else u
    gen = GeneratorSpec(
        noise_dim, cond_dim, q, tuple(hidden), "identity" if task == "regression" else "softmax"
    )
    disc = DiscriminatorSpec(x_dim, q, u, tuple(hidden), task)
    params = init_params({**gen.shapes(), **disc.shapes()}, seed)
    return ModelBundle(task, gen, disc, params, condition)
