import numpy as np
import pytest

from dialshape.rnn import (CellKind, DivergenceError, RnnModel, TrainConfig, dialogue_loss,
                           gradient, rmse, sgd_step, train)
from oracles import max_relative_error, numeric_gradient, scalar_cell_outputs

CELLS = list(CellKind)


@pytest.mark.parametrize("cell", CELLS)
def test_forward_matches_hand_equations(cell):
    rng = np.random.default_rng(0)
    model = RnnModel.init(cell, 1, 1, rng, scale=0.9)
    model.params["b_out"] = np.array(0.3)
    xs = rng.normal(size=6)
    expected = scalar_cell_outputs(cell, model.params, xs)
    assert np.allclose(model.outputs(xs[:, None]), expected, atol=1e-12)


@pytest.mark.parametrize("cell", CELLS)
def test_step_agrees_with_batch(cell, rng):
    model = RnnModel.init(cell, 5, 4, rng)
    seq = rng.normal(size=(7, 5))
    state, outs = model.initial_state(), []
    for f in seq:
        state, r = model.step(state, f)
        outs.append(r)
    assert np.allclose(outs, model.outputs(seq))
    assert state.t == 7


@pytest.mark.parametrize("cell", CELLS)
@pytest.mark.parametrize("seed", range(3))
def test_bptt_matches_finite_differences(cell, seed):
    rng = np.random.default_rng(seed)
    model = RnnModel.init(cell, int(rng.integers(1, 6)), int(rng.integers(1, 6)), rng, scale=0.5)
    seq = rng.normal(size=(int(rng.integers(1, 7)), model.input_dim))
    R = float(rng.normal() * 5)
    loss, grads = gradient(model, seq, R)
    assert loss == pytest.approx(dialogue_loss(model, seq, R))
    assert max_relative_error(grads, numeric_gradient(model, seq, R)) < 1e-4


def test_lstm_forget_bias(rng):
    model = RnnModel.init("lstm", 3, 4, rng)
    b = model.params["b_h"]
    assert np.all(b[4:8] == 1.0) and np.all(b[:4] == 0.0) and np.all(b[8:] == 0.0)


@pytest.mark.parametrize("cell", CELLS)
def test_single_dialogue_overfit(cell, rng):
    model = RnnModel.init(cell, 4, 8, rng)
    seq, R = rng.uniform(size=(5, 4)), 14.0
    for _ in range(500):
        sgd_step(model, seq, R, 0.01, 5.0)
    assert abs(model.outputs(seq).sum() - R) < 0.01


def test_clipping_bounds_step(rng):
    model = RnnModel.init("gru", 3, 4, rng)
    before = {k: v.copy() for k, v in model.params.items()}
    sgd_step(model, rng.normal(size=(4, 3)), 1e6, 1.0, 5.0)
    moved = np.sqrt(sum(np.sum((model.params[k] - before[k]) ** 2) for k in before))
    assert moved == pytest.approx(5.0)


def test_rmse_of_silent_model():
    model = RnnModel("basic", 2, 3)
    corpus = [(np.ones((3, 2)), 14.0), (np.ones((30, 2)), -30.0)]
    assert rmse(model, corpus) == pytest.approx(np.sqrt((14 ** 2 + 30 ** 2) / 2))


def test_train_improves_and_snapshots(rng):
    data = []
    for _ in range(40):
        T = int(rng.integers(2, 8))
        seq = rng.uniform(size=(T, 3))
        data.append((seq, float(-T + 10 * seq[:, 0].sum())))
    model, hist = train(data[:30], data[30:], TrainConfig(cell="gru", hidden_dim=6, epochs=15, seed=1))
    assert hist.rows[-1]["val_rmse"] < hist.rows[0]["val_rmse"]
    assert rmse(model, data[30:]) == pytest.approx(hist.best_rmse)
    assert hist.best_rmse == min(r["val_rmse"] for r in hist.rows)


def test_train_is_deterministic(rng):
    data = [(rng.uniform(size=(3, 2)), float(i % 5)) for i in range(12)]
    cfg = TrainConfig(cell="lstm", hidden_dim=3, epochs=3, seed=4)
    a, ha = train(data, data, cfg)
    b, hb = train(data, data, cfg)
    assert ha.rows == hb.rows
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(rng):
    data = [(rng.uniform(size=(3, 2)) * 1e3, 1e300) for _ in range(3)]
    with pytest.raises((DivergenceError, FloatingPointError)):
        train(data, data, TrainConfig(cell="basic", hidden_dim=2, epochs=2, lr=1e10, clip=None))


def test_dimension_errors(rng):
    model = RnnModel.init("gru", 4, 3, rng)
    with pytest.raises(ValueError, match="4"):
        model.outputs(np.zeros((2, 5)))
    with pytest.raises(ValueError):
        model.step(model.initial_state(), np.zeros(3))
    with pytest.raises(ValueError):
        RnnModel("gru", 4, 3, {"W_ih": np.zeros((1, 1))})


@pytest.mark.parametrize("cell", CELLS)
def test_save_load_round_trip(cell, rng, tmp_path):
    model = RnnModel.init(cell, 4, 3, rng)
    model.save(tmp_path / "m.json")
    back = RnnModel.load(tmp_path / "m.json")
    seq = rng.normal(size=(5, 4))
    assert np.array_equal(back.outputs(seq), model.outputs(seq))
    assert back.cell is model.cell


def test_target_scaling_returns_model_in_return_units(rng):
    data = [(rng.uniform(size=(4, 3)), float(10 * i - 20)) for i in range(6)]
    cfg = TrainConfig(cell="gru", hidden_dim=4, epochs=3, seed=2)
    plain, _ = train(data, data, cfg)
    scaled, hist = train(data, data, TrainConfig(**{**cfg.__dict__, "target_scale": 20.0}))
    assert rmse(scaled, data) == pytest.approx(hist.best_rmse)
    # a different optimisation problem, but predictions stay on the return scale
    assert not np.allclose(plain.params["W_ih"], scaled.params["W_ih"])
    with pytest.raises(ValueError):
        train(data, data, TrainConfig(target_scale=0.0))


@pytest.mark.parametrize("cell", CELLS)
def test_online_potential_equals_offline_outputs(cell, rng):
    from dialshape.rnn import potential
    model = RnnModel.init(cell, 6, 5, rng)
    seq = rng.normal(size=(9, 6))
    state, stream = model.initial_state(), []
    for f in seq:
        state, phi = potential(model, state, f)
        stream.append(phi)
    assert np.max(np.abs(np.array(stream) - model.outputs(seq))) < 1e-12
    # a fresh state makes the first potential independent of earlier dialogues
    assert potential(model, model.initial_state(), seq[0])[1] == stream[0]


def test_loss_zero_iff_sum_matches(rng):
    model = RnnModel.init("lstm", 2, 3, rng)
    seq = rng.normal(size=(4, 2))
    total = model.outputs(seq).sum()
    assert dialogue_loss(model, seq, total) == pytest.approx(0.0, abs=1e-20)
    assert dialogue_loss(model, seq, total + 1.0) == pytest.approx(1.0)


def test_rmse_order_invariant(rng):
    model = RnnModel.init("basic", 2, 3, rng)
    corpus = [(rng.normal(size=(3, 2)), float(i)) for i in range(8)]
    assert rmse(model, corpus) == pytest.approx(rmse(model, corpus[::-1]))
