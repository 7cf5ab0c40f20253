import math

import numpy as np
import pytest

from datakit.dataset import Dataset, LabeledSequence
from policy.checkpoint import CheckpointFormatError, dump_checkpoint, load_checkpoint, parse_checkpoint, save_checkpoint
from policy.lstm import (
    LSTMState,
    PolicyConfig,
    PolicyFault,
    backward,
    forward,
    init_params,
    loss,
    loss_gradient,
    predict_step,
)
from policy.optim import Adam, clip_gradients, global_norm
from policy.train import TrainConfig, make_batches, pad_batch, train


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


@pytest.fixture
def small_config():
    return PolicyConfig(input_dim=3, output_dim=2, num_lstm_layers=2, hidden_units=4, window=5, batch_size=2)


@pytest.fixture
def learnable_dataset(identity_norm):
    rng = np.random.default_rng(0)
    sequences = []
    for i in range(4):
        inputs = rng.normal(size=(20, 4))
        targets = 0.5 * inputs[:, [0, 1, 2, 3, 0, 1]]
        sequences.append(LabeledSequence(inputs, targets, f"t{i}", 1.0, 0, 1.0))
    return Dataset("pick", 1, identity_norm(n_joints=1), sequences)


def test_backward_matches_finite_differences(small_config):
    rng = np.random.default_rng(1)
    params = init_params(small_config, seed=2)
    inputs = rng.normal(size=(2, 6, 3))
    targets = rng.normal(size=(2, 6, 2))
    mask = np.ones((2, 6))
    mask[1, -2:] = 0.0
    start = LSTMState([rng.normal(size=(2, 4)) for _ in range(2)], [rng.normal(size=(2, 4)) for _ in range(2)])

    def objective():
        outputs, _, _ = forward(params, inputs, start)
        return loss(outputs, targets, mask)

    outputs, _, cache = forward(params, inputs, start, keep_cache=True)
    grads = backward(params, cache, loss_gradient(outputs, targets, mask))
    eps = 1e-6
    for name, tensor in params.tensors().items():
        numeric = np.zeros_like(tensor)
        for index in np.ndindex(tensor.shape):
            original = tensor[index]
            tensor[index] = original + eps
            upper = objective()
            tensor[index] = original - eps
            lower = objective()
            tensor[index] = original
            numeric[index] = (upper - lower) / (2 * eps)
        np.testing.assert_allclose(grads[name], numeric, rtol=1e-5, atol=1e-8, err_msg=name)


def test_single_unit_forward_matches_hand_computation():
    cfg = PolicyConfig(input_dim=1, output_dim=1, num_lstm_layers=1, hidden_units=1, window=2, batch_size=1)
    params = init_params(cfg, seed=0)
    params.W[0][:] = [[0.5, -0.3], [0.2, 0.1], [1.0, 0.4], [-0.7, 0.6]]
    params.b[0][:] = [0.1, 1.0, 0.0, -0.2]
    params.Wy[:] = [[2.0]]
    params.by[:] = [0.5]
    h = c = 0.0
    expected = []
    for x in (1.0, -2.0):
        i = sigmoid(0.5 * x - 0.3 * h + 0.1)
        f = sigmoid(0.2 * x + 0.1 * h + 1.0)
        g = math.tanh(1.0 * x + 0.4 * h)
        o = sigmoid(-0.7 * x + 0.6 * h - 0.2)
        c = f * c + i * g
        h = o * math.tanh(c)
        expected.append(2.0 * h + 0.5)
    outputs, state, _ = forward(params, np.array([[1.0], [-2.0]]))
    np.testing.assert_allclose(outputs[:, 0], expected, rtol=1e-12)
    assert state.h[0][0, 0] == pytest.approx(h, rel=1e-12)


def test_chained_windows_equal_single_pass(small_config):
    params = init_params(small_config, seed=3)
    inputs = np.random.default_rng(4).normal(size=(12, 3))
    whole, whole_state, _ = forward(params, inputs)
    first, state, _ = forward(params, inputs[:5])
    second, state, _ = forward(params, inputs[5:], state)
    np.testing.assert_allclose(np.vstack([first, second]), whole, atol=1e-12)
    np.testing.assert_allclose(state.c[1], whole_state.c[1], atol=1e-12)


def test_predict_step_matches_sequence_forward(small_config):
    params = init_params(small_config, seed=5)
    inputs = np.random.default_rng(6).normal(size=(8, 3))
    whole, _, _ = forward(params, inputs)
    hidden, stepped = None, []
    for x in inputs:
        y, hidden = predict_step(params, hidden, x)
        stepped.append(y)
    np.testing.assert_allclose(np.array(stepped), whole, atol=1e-12)


def test_predict_step_rejects_bad_input(small_config):
    params = init_params(small_config, seed=0)
    with pytest.raises(PolicyFault):
        predict_step(params, None, np.zeros(4))
    with pytest.raises(PolicyFault):
        predict_step(params, None, np.array([0.0, np.nan, 0.0]))


def test_init_params_forget_bias_and_determinism(small_config):
    params = init_params(small_config, seed=7)
    np.testing.assert_array_equal(params.b[0][4:8], 1.0)
    np.testing.assert_array_equal(params.b[1][:4], 0.0)
    assert np.abs(params.W[0]).max() <= 1.0 / math.sqrt(7)
    np.testing.assert_array_equal(init_params(small_config, seed=7).W[1], params.W[1])


def test_masked_loss_ignores_padding():
    outputs = np.zeros((1, 3, 2))
    targets = np.array([[[1.0, 1.0], [1.0, 1.0], [9.0, 9.0]]])
    assert loss(outputs, targets, np.array([[1.0, 1.0, 0.0]])) == pytest.approx(1.0)
    assert loss(outputs, targets, np.zeros((1, 3))) == 0.0


def test_clip_gradients_scales_jointly():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    clipped, norm = clip_gradients(grads, 1.0)
    assert norm == pytest.approx(5.0)
    assert global_norm(clipped) == pytest.approx(1.0)
    assert clipped["a"][0] / clipped["b"][0] == pytest.approx(0.75)
    assert clip_gradients(grads, 10.0)[0] is grads


def test_adam_first_step_moves_by_learning_rate():
    params = {"w": np.array([1.0, -1.0])}
    Adam(lr=0.1).step(params, {"w": np.array([0.5, -2.0])})
    np.testing.assert_allclose(params["w"], [0.9, -0.9], atol=1e-6)


def test_padding_and_batching(learnable_dataset):
    sequences = learnable_dataset.sequences[:2]
    sequences[1] = LabeledSequence(sequences[1].inputs[:12], sequences[1].targets[:12], "short", 1.0, 0, 1.0)
    batch = pad_batch(sequences)
    assert batch.inputs.shape == (2, 20, 4)
    assert batch.mask[1].sum() == 12
    assert len(make_batches(learnable_dataset.sequences, 3)) == 2


def test_zero_learning_rate_leaves_parameters_unchanged(learnable_dataset):
    cfg = PolicyConfig(4, 6, num_lstm_layers=1, hidden_units=4, window=10, batch_size=4)
    result = train(learnable_dataset, cfg, TrainConfig(learning_rate=0.0, epochs=2, seed=3))
    start = init_params(cfg, 3)
    for name, value in result.final.tensors().items():
        np.testing.assert_array_equal(value, start.tensors()[name])
    assert len(result.train_loss) == 2


def test_training_reduces_loss(learnable_dataset):
    cfg = PolicyConfig(4, 6, num_lstm_layers=1, hidden_units=8, window=10, batch_size=4)
    result = train(learnable_dataset, cfg, TrainConfig(learning_rate=1e-2, epochs=200, seed=0, log_every=100))
    assert result.train_loss[-1] < 0.5 * result.train_loss[0]
    assert result.best_epoch == int(np.argmin(result.train_loss)) + 1
    assert math.isnan(result.validation_loss[0])
    assert result.best.meta["epoch"] == result.best_epoch
    assert result.loss_frame().shape == (200, 3)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        PolicyConfig(10, 18, window=1)


def test_checkpoint_round_trip_is_bit_exact(small_config, identity_norm, tmp_path):
    params = init_params(small_config, seed=9, norm=identity_norm(n_joints=1))
    params.meta.update({"seed": 9, "epoch": 12})
    loaded = load_checkpoint(save_checkpoint(params, tmp_path / "policy.ckpt"))
    assert loaded.config == small_config
    assert loaded.meta == {"seed": 9, "epoch": 12}
    for name, value in params.tensors().items():
        np.testing.assert_array_equal(loaded.tensors()[name], value)
    np.testing.assert_array_equal(loaded.norm.input_std, params.norm.input_std)


def test_checkpoint_keeps_optimizer_state(small_config):
    params = init_params(small_config, seed=1)
    optimizer = Adam(lr=1e-3)
    optimizer.step(params.tensors(), {name: np.ones_like(value) for name, value in params.tensors().items()})
    _, restored = parse_checkpoint(dump_checkpoint(params, optimizer))
    assert restored.t == 1
    np.testing.assert_array_equal(restored.m["out.W"], optimizer.m["out.W"])
    np.testing.assert_array_equal(restored.v["lstm1.b"], optimizer.v["lstm1.b"])


def test_corrupt_checkpoints_are_rejected(small_config):
    data = dump_checkpoint(init_params(small_config, seed=1))
    with pytest.raises(CheckpointFormatError, match="truncated"):
        parse_checkpoint(data[:-8])
    with pytest.raises(CheckpointFormatError, match="trailing"):
        parse_checkpoint(data + b"\x00" * 8)
    with pytest.raises(CheckpointFormatError, match="not a policy checkpoint"):
        parse_checkpoint(b"PK\x03\x04" + data)
    with pytest.raises(CheckpointFormatError, match="version"):
        parse_checkpoint(data.replace(b"WBCKPT 1", b"WBCKPT 7", 1))
