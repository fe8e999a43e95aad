import numpy as np
import pytest

from gradcheck import max_relative_error
from lsmkit.learners import TrainedModel, load_model, save_model
from lsmkit.learners.base import sigmoid
from lsmkit.neural import CnnModel, LstmModel, forward_with_trace, replay, train_cnn, train_lstm
from lsmkit.neural.common import secant


@pytest.fixture
def data(rng):
    X = rng.standard_normal((60, 5))
    y = (X[:, 0] * X[:, 2] + X[:, 4] > 0).astype(int)
    return X, y


@pytest.mark.parametrize("activation", ["relu", "tanh", "elu"])
def test_cnn_gradients(data, activation):
    X, y = data
    m = train_cnn(X, y, filters=3, kernel_width=2, pool_width=2, epochs=1, activation=activation, seed=1)
    assert max_relative_error(m, X[:8], y[:8]) < 1e-4
    mask = (np.random.default_rng(0).random((8, m.dense_w.size)) < 0.7) / 0.7
    assert max_relative_error(m, X[:8], y[:8], mask) < 1e-4


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_lstm_gradients(data, activation):
    X, y = data
    m = train_lstm(X, y, units=3, epochs=1, activation=activation, seed=2)
    assert max_relative_error(m, X[:8], y[:8]) < 1e-4


def test_cnn_forward_matches_torch(data):
    torch = pytest.importorskip("torch")
    X, y = data
    m = train_cnn(X, y, filters=4, kernel_width=3, pool_width=2, epochs=2, seed=3)
    conv = torch.nn.Conv1d(1, 4, 3)
    conv.weight.data = torch.tensor(m.conv_w[:, None, :])
    conv.bias.data = torch.tensor(m.conv_b)
    with torch.no_grad():
        a = torch.relu(conv(torch.tensor(X[:, None, :])))          # (n, F, L)
        pooled = torch.nn.functional.max_pool1d(a, 2)               # (n, F, P)
        flat = pooled.permute(0, 2, 1).reshape(len(X), -1)          # position-major
        logit = flat @ torch.tensor(m.dense_w) + float(m.dense_b[0])
    np.testing.assert_allclose(m.decision_function(X), logit.numpy(), atol=1e-12)


def test_lstm_forward_matches_torch(data):
    torch = pytest.importorskip("torch")
    X, y = data
    m = train_lstm(X, y, units=4, epochs=2, seed=4)
    H = 4
    # torch gate order is i, f, g, o; ours is i, f, o, g
    perm = np.r_[0:H, H:2 * H, 3 * H:4 * H, 2 * H:3 * H]
    lstm = torch.nn.LSTM(1, H, batch_first=True).double()
    lstm.weight_ih_l0.data = torch.tensor(m.W[perm][:, None])
    lstm.weight_hh_l0.data = torch.tensor(m.U[:, perm].T.copy())
    lstm.bias_ih_l0.data = torch.tensor(m.b[perm])
    lstm.bias_hh_l0.data = torch.zeros(4 * H, dtype=torch.float64)
    with torch.no_grad():
        out, _ = lstm(torch.tensor(X[:, :, None]))
        logit = out[:, -1, :] @ torch.tensor(m.dense_w) + float(m.dense_b[0])
    np.testing.assert_allclose(m.decision_function(X), logit.numpy(), atol=1e-12)


def test_global_pool_and_wide_kernel(data):
    X, y = data
    m = train_cnn(X, y, filters=2, kernel_width=5, pool_width=0, epochs=1)
    assert m.pool_shape() == (1, 1)
    with pytest.raises(ValueError, match="exceeds"):
        train_cnn(X, y, kernel_width=6)


def test_training_reduces_loss_and_is_seeded(data):
    X, y = data
    a = train_cnn(X, y, filters=8, epochs=40, learning_rate=0.05, seed=5)
    b = train_cnn(X, y, filters=8, epochs=40, learning_rate=0.05, seed=5)
    np.testing.assert_array_equal(a.conv_w, b.conv_w)
    assert np.mean(a.history[-10:]) < np.mean(a.history[:10])


def test_forget_bias_initialisation(data):
    X, y = data
    m = train_lstm(X, y, units=3, epochs=1, learning_rate=1e-12, forget_bias=1.0)
    np.testing.assert_allclose(m.b[3:6], 1.0, atol=1e-9)


def test_invalid_hyperparameters(data):
    X, y = data
    with pytest.raises(ValueError):
        train_cnn(X, y, dropout=1.0)
    with pytest.raises(ValueError):
        train_lstm(X, y, units=0)
    with pytest.raises(ValueError):
        train_cnn(X, y, activation="swish")


@pytest.mark.parametrize("net", ["cnn", "lstm"])
def test_trace_replay_and_round_trip(tmp_path, data, net):
    X, y = data
    est = (train_cnn(X, y, filters=3, epochs=2) if net == "cnn" else train_lstm(X, y, units=3, epochs=2))
    mean, sd = X.mean(axis=0), X.std(axis=0)
    from lsmkit.data import Scaler
    model = TrainedModel(est, tuple(f"F{i}" for i in range(5)), Scaler(tuple(f"F{i}" for i in range(5)), mean, sd))
    score, trace = forward_with_trace(model, X[0])
    assert score == pytest.approx(model.predict_proba(X[:1])[0], abs=1e-15)
    again = replay(model, trace)
    for a, b in zip(trace.layers, again.layers):
        np.testing.assert_array_equal(a.post, b.post)
    save_model(model, tmp_path / "n.json")
    back = load_model(tmp_path / "n.json")
    np.testing.assert_array_equal(back.predict_proba(X), model.predict_proba(X))
    with pytest.raises(KeyError):
        trace.layer("nope")


def test_trace_needs_a_network(toy_table):
    from lsmkit.learners import train_logistic
    m = TrainedModel(train_logistic(toy_table.rows, toy_table.labels), toy_table.names)
    with pytest.raises(TypeError, match="no activation trace"):
        forward_with_trace(m, toy_table.rows[0])


def test_secant_falls_back_to_derivative():
    z = np.array([0.3, 2.0])
    np.testing.assert_allclose(secant("sigmoid", z, z), sigmoid(z) * (1 - sigmoid(z)))
    s = secant("tanh", np.array([1.0]), np.array([0.0]))
    assert s[0] == pytest.approx(np.tanh(1.0))
