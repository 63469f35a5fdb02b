import numpy as np
import pytest

from dool import oracles, spectral
from dool.errors import ConfigurationError, NumericalFailure
from dool.models import ModelSpec
from dool.nn.autodiff import value
from dool.nn.mlp import value_and_grad
from dool.operator import NetFluxMap, build_operator_net, eval_flux, load_operator, save_operator
from dool.trainer import (SupervisedConfig, SpaceTimeOperator, TrainConfig, build_loss_graph, loss_floor,
                          per_row_losses, prepare_batch, train_dool, train_supervised, training_states)

from conftest import fd_gradient, rel_err


def heat_config(**kw):
    b = spectral.BasisSpec("fourier", 1, np.pi, 1, (64,))
    m = ModelSpec("heat", b)
    s = spectral.SamplingSpec.geometric(b, 2.0, 1.2, positivity_floor=0.1)
    base = dict(n_samples=10, depth=2, width=12, p=16, epochs=150, lr=2e-3, log_every=50)
    return TrainConfig(m, s, **{**base, **kw})


def test_loss_graph_gradient():
    cfg = heat_config()
    states = training_states(cfg)
    batch = prepare_batch(cfg.model, states)
    net = build_operator_net([batch.branch_inputs[0].shape[1]], 1, 2, 5, 4, seed=1)
    _, g = value_and_grad(lambda n: build_loss_graph(cfg.model, n, batch), net)
    num = fd_gradient(lambda n: float(value(build_loss_graph(cfg.model, n, batch))), net)
    assert rel_err(g.arrays(), num) < 1e-6


def test_training_decreases_loss_and_stays_above_floor():
    rep = train_dool(heat_config())
    losses = rep.losses()
    assert losses[-1] < losses[0]
    assert rep.final_loss >= rep.floor - 1e-12
    assert [e for e, _ in rep.loss_history] == [0, 50, 100, 149]


def test_training_is_seed_reproducible():
    a = train_dool(heat_config(epochs=20))
    b = train_dool(heat_config(epochs=20))
    c = train_dool(heat_config(epochs=20, seed=1))
    assert all(np.array_equal(x, y) for x, y in zip(a.final_params.arrays(), b.final_params.arrays()))
    assert a.final_loss != c.final_loss


def test_nonfinite_loss_names_epoch():
    cfg = heat_config(epochs=5)
    net = build_operator_net([3], 1, 2, 12, 16, seed=0)
    arrays = net.arrays()
    arrays[0] = arrays[0].copy()
    arrays[0][0, 0] = np.nan
    with pytest.raises(NumericalFailure, match="epoch 0"):
        train_dool(cfg, net.with_arrays(arrays))


def test_per_row_mean_equals_graph():
    cfg = heat_config()
    batch = prepare_batch(cfg.model, training_states(cfg))
    net = build_operator_net([batch.branch_inputs[0].shape[1]], 1, 2, 5, 4, seed=2)
    assert per_row_losses(cfg.model, net, batch).mean() == pytest.approx(
        float(value(build_loss_graph(cfg.model, net, batch))), rel=1e-12)
    assert loss_floor(batch) <= per_row_losses(cfg.model, net, batch).mean()


def test_multi_input_rows_are_outer_product():
    b = spectral.BasisSpec("fourier", 1, 1.0, 1, (32,))
    m = ModelSpec("cahn_hilliard_1d", b)
    states = np.stack([oracles.initial_condition("cahn_hilliard_1d", b)] * 2)
    states[1] *= 0.5
    batch = prepare_batch(m, states, [0.01, 0.05, 0.1])
    assert batch.rows == 6
    single = prepare_batch(m, states[1:], [0.05])
    assert np.allclose(batch.A[4], single.A[0])
    net = build_operator_net([3, 1], 1, 2, 5, 4, seed=0)
    out = eval_flux(net, batch.branch_inputs, b.points(), outer=True)
    assert out.shape == (6, 1, 32)
    paired = eval_flux(net, [batch.branch_inputs[0][1:], [[0.05]]], b.points())
    assert np.allclose(out[4], paired[0])


def test_config_validation():
    with pytest.raises(ConfigurationError):
        heat_config(gamma_range=(0.01, 0.1), n_gammas=3)
    with pytest.raises(ConfigurationError):
        heat_config(activation="relu")


def test_checkpoint_roundtrip(tmp_path):
    net = build_operator_net([3, 1], 2, 2, 6, 5, n_flux=2, seed=4)
    save_operator(net, tmp_path / "n.json", {"note": 1})
    back, doc = load_operator(tmp_path / "n.json")
    assert doc["note"] == 1
    assert all(np.array_equal(x, y) for x, y in zip(net.arrays(), back.arrays()))


def test_flux_map_matches_direct_evaluation():
    b = spectral.BasisSpec("fourier", 1, np.pi, 1, (64,))
    net = build_operator_net([3], 1, 2, 6, 5, seed=0)
    u = oracles.initial_condition("heat", b)
    c = spectral.project(b, u)
    direct = eval_flux(net, [spectral.encode(b, c)[None]], b.points())[0]
    assert np.allclose(NetFluxMap(net, b)(u), direct)


def test_supervised_baseline_fits_exact_labels():
    b = spectral.BasisSpec("fourier", 1, np.pi, 1, (16,))
    times = np.linspace(0, 0.2, 5)
    parts, enc = [], []
    for i, amp in enumerate([0.5, 1.0, 1.5]):
        parts.append(oracles.generate_labels(lambda x, t, a=amp: a * np.exp(-t) * np.sin(x) + 2, b, times, i))
        enc.append([2.0, 0.0, -amp / 2])
    data = oracles.LabeledDataset.concat(parts)
    rep = train_supervised(SupervisedConfig(2, 16, 8, epochs=400, lr=3e-3), data, [np.array(enc)])
    assert rep.losses()[-1] < 0.05 * rep.losses()[0]
    pred = SpaceTimeOperator(rep.final_params, b).predict([np.array([enc[1]])], times)
    assert pred.states.shape == (5, 16)
