import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cganuc import autodiff as ad
from cganuc.data import SupervisedDataset, synth_heteroscedastic
from cganuc.networks import build_model, discriminator_graph, generator_graph
from cganuc.training import (
    AdamState,
    TrainConfig,
    Trainer,
    TrainingDivergence,
    adam_step,
    disc_hinge_graph,
    disc_hinge_loss,
    gen_hinge_graph,
    gen_hinge_loss,
    train,
)


@pytest.mark.parametrize("real,fake,expect", [
    ([2.0], [-2.0], 0.0),
    ([0.0], [0.0], 2.0),
    ([0.5, 1.5], [-0.5], 0.75),
])
def test_disc_hinge_examples(real, fake, expect):
    assert disc_hinge_loss(real, fake) == pytest.approx(expect, abs=1e-15)


@pytest.mark.parametrize("fake,expect", [([1.0, -1.0], 0.0), ([3.0], -3.0), ([0.2, 0.4, 0.6], -0.4)])
def test_gen_hinge_examples(fake, expect):
    assert gen_hinge_loss(fake) == pytest.approx(expect, abs=1e-15)


def test_losses_reject_empty():
    with pytest.raises(ValueError):
        disc_hinge_loss([], [1.0])
    with pytest.raises(ValueError):
        gen_hinge_loss([])


def test_graph_losses_agree_with_numpy():
    rng = np.random.default_rng(0)
    real, fake = rng.normal(size=(7, 1)), rng.normal(size=(7, 1))
    assert disc_hinge_graph(ad.leaf(real), ad.leaf(fake)).item() == pytest.approx(disc_hinge_loss(real, fake))
    assert gen_hinge_graph(ad.leaf(fake)).item() == pytest.approx(gen_hinge_loss(fake))


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.array([[1.0, -2.0]])}
    new, state = adam_step(params, {"w": np.zeros((1, 2))}, AdamState.zeros_like(params), 0.1)
    np.testing.assert_array_equal(new["w"], params["w"])
    assert state.step == 1


def test_adam_first_step_without_momentum():
    params = {"w": np.array([[1.0, -2.0, 0.5]])}
    g = np.array([[0.3, -4.0, 1e-3]])
    lr, eps = 0.01, 1e-8
    new, _ = adam_step(params, {"w": g}, AdamState.zeros_like(params), lr, (0.0, 0.0), eps)
    np.testing.assert_allclose(new["w"], params["w"] - lr * g / (np.abs(g) + eps), rtol=0, atol=1e-15)


def test_adam_bias_correction_second_step():
    # Independent recomputation of two Adam steps with the textbook recursion.
    p0 = np.array([[0.2]])
    g1, g2 = 0.5, -0.25
    lr, b1, b2, eps = 0.1, 0.9, 0.99, 1e-8
    m = v = 0.0
    p = 0.2
    for t, g in ((1, g1), (2, g2)):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    params, state = {"w": p0}, AdamState.zeros_like({"w": p0})
    for g in (g1, g2):
        params, state = adam_step(params, {"w": np.array([[g]])}, state, lr, (b1, b2), eps)
    assert params["w"][0, 0] == pytest.approx(p, abs=1e-15)
    assert state.step == 2


def test_adam_is_pure_and_deterministic():
    params = {"w": np.array([[1.0, 2.0]])}
    grads = {"w": np.array([[0.1, -0.2]])}
    state = AdamState.zeros_like(params)
    a = adam_step(params, grads, state, 0.01)
    b = adam_step(params, grads, state, 0.01)
    np.testing.assert_array_equal(a[0]["w"], b[0]["w"])
    assert state.step == 0 and np.all(state.m["w"] == 0)


def test_adam_errors():
    params = {"w": np.zeros((1, 2))}
    with pytest.raises(ad.ShapeError):
        adam_step(params, {"w": np.zeros((2, 1))}, AdamState.zeros_like(params), 0.1)
    with pytest.raises(ad.NonFiniteError):
        adam_step(params, {"w": np.array([[np.inf, 0.0]])}, AdamState.zeros_like(params), 0.1)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(beta1=1.0)
    with pytest.raises(ValueError):
        TrainConfig(task="ranking")
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"epoch": 3})
    cfg = TrainConfig(epochs=3, hidden=(4,))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def _tiny(n=10, seed=0):
    return synth_heteroscedastic(n, seed)


def test_update_counts():
    _, report = train(_tiny(10), TrainConfig(epochs=1, batch_size=5, hidden=(4,), u=3))
    assert report.disc_updates == 2
    assert report.gen_updates == 2
    assert len(report.epochs) == 1


def test_disc_steps_ratio():
    _, report = train(_tiny(20), TrainConfig(epochs=1, batch_size=5, hidden=(4,), u=3, disc_steps=2))
    assert report.disc_updates == 4
    assert report.gen_updates == 2


def test_training_is_deterministic():
    cfg = TrainConfig(epochs=3, batch_size=8, hidden=(6,), u=4, seed=11)
    m1, r1 = train(_tiny(30), cfg)
    m2, r2 = train(_tiny(30), cfg)
    assert r1.lines() == r2.lines()
    for k in m1.params:
        assert m1.params[k].tobytes() == m2.params[k].tobytes()


def test_classification_training_runs():
    y = np.eye(3)[np.arange(12) % 3]
    x = np.random.default_rng(0).normal(size=(12, 2))
    model, report = train(SupervisedDataset(x, y), TrainConfig(task="classification", epochs=2, batch_size=4,
                                                               hidden=(5,), u=3))
    assert model.condition == "features"
    assert all(np.isfinite([r.d_loss, r.g_loss]).all() for r in report.epochs)


def test_zero_learning_rate_leaves_params_bit_identical():
    ds = _tiny(10)
    cfg = TrainConfig(epochs=1, batch_size=5, hidden=(4,), u=3, lr_gen=0.0, lr_disc=0.0)
    model = build_model("regression", 1, 1, hidden=(4,), u=3, seed=2)
    before = {k: v.copy() for k, v in model.params.items()}
    train(ds, cfg, model=model)
    for k, v in before.items():
        assert model.params[k].tobytes() == v.tobytes()


def test_divergence_guard():
    ds = SupervisedDataset(np.zeros((4, 1)), np.full((4, 1), 1e7))
    with pytest.raises(TrainingDivergence):
        train(ds, TrainConfig(epochs=1, batch_size=4, hidden=(3,), u=2))


def test_dimension_mismatch():
    model = build_model("regression", 2, 1, hidden=(3,), u=2)
    with pytest.raises(ValueError):
        train(_tiny(4), TrainConfig(epochs=1, hidden=(3,), u=2), model=model)


def test_empty_dataset_rejected():
    ds = SupervisedDataset(np.zeros((1, 1)), np.zeros((1, 1)))
    ds.inputs, ds.targets = np.zeros((0, 1)), np.zeros((0, 1))
    with pytest.raises(ValueError):
        train(ds, TrainConfig(epochs=1))


def test_target_range_recorded():
    ds = _tiny(50)
    model, _ = train(ds, TrainConfig(epochs=1, hidden=(3,), u=2))
    lo, hi = model.target_range[0]
    span = ds.targets.max() - ds.targets.min()
    assert lo == pytest.approx(ds.targets.min() - 0.05 * span)
    assert hi == pytest.approx(ds.targets.max() + 0.05 * span)


@pytest.mark.parametrize("task", ["regression", "classification"])
def test_loss_gradients_match_finite_differences(task):
    rng = np.random.default_rng(5)
    if task == "regression":
        x, y = rng.normal(size=(6, 2)), rng.normal(size=(6, 1))
        model = build_model(task, 2, 1, noise_dim=3, hidden=(5,), u=4, seed=5)
    else:
        x, y = rng.normal(size=(6, 2)), np.eye(3)[rng.integers(0, 3, 6)]
        model = build_model(task, 2, 3, noise_dim=3, hidden=(5,), u=4, seed=5)
    trainer = Trainer(model, TrainConfig(task=task, hidden=(5,), u=4, noise_dim=3))
    z = rng.normal(size=(6, 3))
    fake = generator_graph(model.generator, {k: ad.constant(v) for k, v in model.params.items()},
                           ad.constant(z), ad.constant(trainer._condition(x))).value
    disc_params = {k: v for k, v in model.params.items() if k.startswith("disc.")}
    gen_params = {k: v for k, v in model.params.items() if k.startswith("gen.")}

    def d_loss(p):
        real = discriminator_graph(model.discriminator, p, ad.constant(x), ad.constant(y))
        return disc_hinge_graph(real, discriminator_graph(model.discriminator, p, ad.constant(x), ad.constant(fake)))

    frozen = {k: ad.constant(v) for k, v in disc_params.items()}
    cond = ad.constant(trainer._condition(x))

    def g_loss(p):
        out = generator_graph(model.generator, p, ad.constant(z), cond)
        return gen_hinge_graph(discriminator_graph(model.discriminator, frozen, ad.constant(x), out))

    assert ad.finite_diff_check(d_loss, disc_params) < 1e-4
    assert ad.finite_diff_check(g_loss, gen_params) < 1e-4
    # and the trainer's own gradient paths agree with these losses
    loss, grads = trainer.gen_loss_and_grads(x, z)
    assert loss == pytest.approx(g_loss({k: ad.leaf(v) for k, v in gen_params.items()}).item(), abs=1e-14)
    assert set(grads) == set(gen_params)


@settings(max_examples=100, deadline=None)
@given(real=st.lists(st.floats(-5, 5), min_size=1, max_size=8),
       fake=st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_disc_hinge_nonnegative_and_zero_iff_margins(real, fake):
    loss = disc_hinge_loss(real, fake)
    assert loss >= 0
    margins = min(real) >= 1 and max(fake) <= -1
    assert (loss == 0) == margins
