"""Adversarial training: hinge discriminator loss, -mean(score) generator loss, Adam."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Mapping

import numpy as np

from cganuc import autodiff as ad
from cganuc.networks import (
    ModelBundle,
    build_model,
    discriminator_graph,
    feature_forward,
    generator_graph,
)

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


class TrainingDivergence(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 2000
    batch_size: int = 100
    lr_gen: float = 2e-4
    lr_disc: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    disc_steps: int = 1
    noise_dim: int = 8
    seed: int = 0
    task: str = "regression"
    hidden: tuple[int, ...] = (64, 64)
    u: int = 16
    condition: str | None = None  # None -> raw for regression, features for classification

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_gen < 0 or self.lr_disc < 0:
            raise ValueError("learning rates must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.disc_steps < 1:
            raise ValueError("disc_steps must be >= 1")
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


@dataclass
class EpochRecord:
    epoch: int
    d_loss: float
    g_loss: float
    seconds: float = 0.0


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    disc_updates: int = 0
    gen_updates: int = 0

    def lines(self) -> list[str]:
        """Line-delimited (epoch, d_loss, g_loss) records; no timings, so reruns diff clean."""
        return [f"{r.epoch},{r.d_loss!r},{r.g_loss!r}" for r in self.epochs]


def _check_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise ValueError("empty score vector")
    return s


def disc_hinge_loss(real_scores, fake_scores) -> float:
    """``mean(max(0, 1 - real)) + mean(max(0, 1 + fake))``."""
    real, fake = _check_scores(real_scores), _check_scores(fake_scores)
    return float(np.maximum(0.0, 1.0 - real).mean() + np.maximum(0.0, 1.0 + fake).mean())


def gen_hinge_loss(fake_scores) -> float:
    return float(-_check_scores(fake_scores).mean())


def disc_hinge_graph(real: ad.Node, fake: ad.Node) -> ad.Node:
    return ad.add(ad.mean(ad.hinge(real)), ad.mean(ad.hinge(ad.scale(fake, -1.0))))


def gen_hinge_graph(fake: ad.Node) -> ad.Node:
    return ad.scale(ad.mean(fake), -1.0)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.5, 0.999),
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new params and state, inputs untouched."""
    b1, b2 = betas
    t = state.step + 1
    new_params, m, v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ad.ShapeError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        if not np.all(np.isfinite(g)):
            raise ad.NonFiniteError(f"non-finite gradient for {name}")
        m[name] = b1 * state.m[name] + (1 - b1) * g
        v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = m[name] / (1 - b1**t)
        v_hat = v[name] / (1 - b2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


def _subset(params: Mapping[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    return {k: v for k, v in params.items() if k.startswith(prefix)}


def _guard(value: float, what: str, epoch: int) -> float:
    if not math.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
        raise TrainingDivergence(f"{what} = {value!r} at epoch {epoch}; training diverged")
    return value


class Trainer:
    """Holds model + optimiser state; :meth:`step` does one discriminator update
    and, every ``disc_steps`` calls, one generator update."""

    def __init__(self, model: ModelBundle, config: TrainConfig):
        self.model = model
        self.config = config
        self.disc_state = AdamState.zeros_like(_subset(model.params, "disc."))
        self.gen_state = AdamState.zeros_like(_subset(model.params, "gen."))
        self.disc_updates = 0
        self.gen_updates = 0
        self._pending_gen = 0

    def _condition(self, x: np.ndarray) -> np.ndarray:
        # Generator never back-propagates into the feature network.
        if self.model.condition == "raw":
            return x
        return feature_forward(self.model.discriminator, self.model.params, x)

    def disc_loss_and_grads(self, x, y, z):
        m = self.model
        fake = generator_graph(
            m.generator, {k: ad.constant(v) for k, v in _subset(m.params, "gen.").items()},
            ad.constant(z), ad.constant(self._condition(x)),
        ).value
        xs = ad.constant(x)

        def loss(p):
            real_s = discriminator_graph(m.discriminator, p, xs, ad.constant(y))
            fake_s = discriminator_graph(m.discriminator, p, xs, ad.constant(fake))
            return disc_hinge_graph(real_s, fake_s)

        return ad.grad_of(loss, _subset(m.params, "disc."))

    def gen_loss_and_grads(self, x, z):
        m = self.model
        disc = {k: ad.constant(v) for k, v in _subset(m.params, "disc.").items()}
        cond = ad.constant(self._condition(x))
        xs = ad.constant(x)

        def loss(p):
            fake = generator_graph(m.generator, p, ad.constant(z), cond)
            return gen_hinge_graph(discriminator_graph(m.discriminator, disc, xs, fake))

        return ad.grad_of(loss, _subset(m.params, "gen."))

    def step(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator, epoch: int):
        cfg = self.config
        betas = (cfg.beta1, cfg.beta2)
        z = rng.standard_normal((x.shape[0], self.model.generator.noise_dim))
        d_loss, d_grads = self.disc_loss_and_grads(x, y, z)
        _guard(d_loss, "discriminator loss", epoch)
        new, self.disc_state = adam_step(
            _subset(self.model.params, "disc."), d_grads, self.disc_state, cfg.lr_disc, betas, cfg.eps
        )
        self.model.params.update(new)
        self.disc_updates += 1
        self._pending_gen += 1
        g_loss = None
        if self._pending_gen >= cfg.disc_steps:
            self._pending_gen = 0
            z = rng.standard_normal((x.shape[0], self.model.generator.noise_dim))
            g_loss, g_grads = self.gen_loss_and_grads(x, z)
            _guard(g_loss, "generator loss", epoch)
            new, self.gen_state = adam_step(
                _subset(self.model.params, "gen."), g_grads, self.gen_state, cfg.lr_gen, betas, cfg.eps
            )
            self.model.params.update(new)
            self.gen_updates += 1
        return d_loss, g_loss


def target_ranges(targets: np.ndarray, pad_frac: float = 0.05) -> list[tuple[float, float]]:
    out = []
    for col in np.asarray(targets, dtype=np.float64).T:
        lo, hi = float(col.min()), float(col.max())
        pad = (hi - lo) * pad_frac if hi > lo else 1e-6
        out.append((lo - pad, hi + pad))
    return out


def train(
    dataset,
    config: TrainConfig,
    *,
    model: ModelBundle | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> tuple[ModelBundle, TrainReport]:
    """Train a cGAN predictor on ``dataset`` (anything with ``inputs``/``targets`` arrays).

    Minibatch order for epoch ``e`` comes from ``default_rng([seed, e])`` so a
    run is reproducible from the master seed alone.
    """
    x_all = np.asarray(dataset.inputs, dtype=np.float64)
    y_all = np.asarray(dataset.targets, dtype=np.float64)
    if x_all.shape[0] == 0:
        raise ValueError("empty dataset")
    if x_all.shape[0] != y_all.shape[0]:
        raise ValueError("inputs and targets have different row counts")
    if model is None:
        model = build_model(
            config.task, x_all.shape[1], y_all.shape[1],
            noise_dim=config.noise_dim, u=config.u, hidden=config.hidden,
            condition=config.condition, seed=config.seed,
        )
    if model.task != config.task:
        raise ValueError(f"model task {model.task!r} != config task {config.task!r}")
    if model.discriminator.x_dim != x_all.shape[1] or model.discriminator.q != y_all.shape[1]:
        raise ValueError("dataset dimensions do not match the model")
    if config.task == "regression":
        model.target_range = target_ranges(y_all)
    model.config = config.to_dict()

    trainer = Trainer(model, config)
    report = TrainReport()
    n = x_all.shape[0]
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(n)
        d_losses, g_losses = [], []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            d, g = trainer.step(x_all[idx], y_all[idx], rng, epoch)
            d_losses.append(d)
            if g is not None:
                g_losses.append(g)
        rec = EpochRecord(
            epoch,
            float(np.mean(d_losses)),
            float(np.mean(g_losses)) if g_losses else float("nan"),
            time.perf_counter() - t0,
        )
        report.epochs.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if epoch % 100 == 0 or epoch == config.epochs - 1:
            log.debug("epoch %d d=%.4f g=%.4f", epoch, rec.d_loss, rec.g_loss)
    report.disc_updates = trainer.disc_updates
    report.gen_updates = trainer.gen_updates
    return model, report
