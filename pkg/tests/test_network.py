import hashlib

import numpy as np
import pytest

from oralscan.network import (
    CLASS_NAMES,
    ClassLabel,
    ConfigError,
    Model,
    ModelConfig,
    backward,
    build,
    forward,
    predict,
)
from oralscan.tensor_ops import (
    ShapeError,
    conv2d_forward,
    cross_entropy,
    dense_forward,
    maxpool2_forward,
    relu_forward,
    softmax,
)

TINY = ModelConfig(input_size=8, conv_stages=((2, 3),), hidden_units=4, seed=3)


def param_checksum(model):
    h = hashlib.sha256()
    for name, arr in model.parameters():
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return h.hexdigest()


def as_float64(model):
    """Double-precision twin for gradient checks (ops preserve dtype)."""
    m = build(model.config)
    for k_src, k_dst in zip(model.stages, m.stages):
        k_dst.weights = k_src.weights.astype(np.float64)
        k_dst.bias = k_src.bias.astype(np.float64)
    m.fc1_weight = model.fc1_weight.astype(np.float64)
    m.fc1_bias = model.fc1_bias.astype(np.float64)
    m.fc2_weight = model.fc2_weight.astype(np.float64)
    m.fc2_bias = model.fc2_bias.astype(np.float64)
    return m


def randomize(model, seed):
    """Seeded noise on every parameter so no gradient path is degenerate."""
    rng = np.random.default_rng(seed)
    for _, arr in model.parameters():
        arr += rng.normal(0, 0.3, arr.shape).astype(arr.dtype)
    return model


# ----------------------------------------------------------------- config


def test_config_rejects_bad_divisibility():
    with pytest.raises(ConfigError):
        ModelConfig(input_size=12, conv_stages=((4, 3), (8, 3), (8, 3)))


def test_config_rejects_even_kernel_and_zero_filters():
    with pytest.raises(ConfigError):
        ModelConfig(input_size=8, conv_stages=((4, 2),))
    with pytest.raises(ConfigError):
        ModelConfig(input_size=8, conv_stages=((0, 3),))


def test_config_rejects_non_three_classes():
    with pytest.raises(ConfigError):
        ModelConfig(input_size=8, conv_stages=((2, 3),), num_classes=4)


def test_class_label_wire_names():
    assert CLASS_NAMES == ("cancerous", "non_cancerous", "negative")
    assert ClassLabel.from_wire("negative") is ClassLabel.NEGATIVE
    assert ClassLabel.CANCEROUS.wire_name == "cancerous"
    with pytest.raises(ValueError):
        ClassLabel.from_wire("benign")


# ------------------------------------------------------------------ build


def test_build_deterministic_per_seed():
    cfg = ModelConfig(seed=42)
    assert param_checksum(build(cfg)) == param_checksum(build(cfg))


def test_build_seed_sensitivity():
    assert param_checksum(build(ModelConfig(seed=42))) != param_checksum(
        build(ModelConfig(seed=43))
    )


def test_default_config_param_count():
    # Recomputed from the shape rules: conv stages (16,32,64 filters of 3x3),
    # three poolings 128->16, hidden 128, 3 outputs.
    expected = (
        (16 * 3 * 9 + 16)
        + (32 * 16 * 9 + 32)
        + (64 * 32 * 9 + 64)
        + (128 * (64 * 16 * 16) + 128)
        + (3 * 128 + 3)
    )
    assert expected == 2_121_251
    cfg = ModelConfig()
    assert cfg.param_count() == expected
    assert build(cfg).param_count() == expected


def test_param_count_formula_matches_allocation_for_arbitrary_configs():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n_stages = int(rng.integers(1, 4))
        stages = tuple(
            (int(rng.integers(1, 9)), int(rng.choice([1, 3, 5]))) for _ in range(n_stages)
        )
        size = (2 ** n_stages) * int(rng.integers(1, 5))
        cfg = ModelConfig(
            input_size=size,
            conv_stages=stages,
            hidden_units=int(rng.integers(1, 17)),
            seed=int(rng.integers(0, 100)),
        )
        assert build(cfg).param_count() == cfg.param_count()


# ---------------------------------------------------------------- forward


def test_forward_zero_model_zero_input_gives_zero_logits():
    model = build(TINY)
    for _, arr in model.parameters():
        arr[...] = 0
    logits, _ = forward(model, np.zeros((3, 8, 8), dtype=np.float32))
    np.testing.assert_array_equal(logits, np.zeros(3, dtype=np.float32))


def test_forward_shape_contract_and_finite():
    model = randomize(build(TINY), 1)
    x = np.random.default_rng(2).random((3, 8, 8)).astype(np.float32)
    logits, _ = forward(model, x)
    assert logits.shape == (3,)
    assert np.isfinite(logits).all()


def test_forward_rejects_wrong_shape():
    model = build(TINY)
    with pytest.raises(ShapeError):
        forward(model, np.zeros((3, 4, 4), dtype=np.float32))


def test_forward_equals_manual_layer_composition():
    model = randomize(build(TINY), 5)
    x = np.random.default_rng(6).random((3, 8, 8)).astype(np.float32)
    h = x
    for k in model.stages:
        h, _ = maxpool2_forward(relu_forward(conv2d_forward(h, k)))
    h = h.reshape(-1)
    h = relu_forward(dense_forward(h, model.fc1_weight, model.fc1_bias))
    want = dense_forward(h, model.fc2_weight, model.fc2_bias)
    got, _ = forward(model, x)
    np.testing.assert_array_equal(got, want)


def test_forward_repeated_calls_bitwise_identical():
    model = randomize(build(TINY), 8)
    x = np.random.default_rng(9).random((3, 8, 8)).astype(np.float32)
    a, _ = forward(model, x)
    b, _ = forward(model, x)
    assert np.array_equal(a, b)


# --------------------------------------------------------------- backward


def test_backward_zero_grad_logits():
    model = randomize(build(TINY), 10)
    x = np.random.default_rng(11).random((3, 8, 8)).astype(np.float32)
    _, cache = forward(model, x)
    grads = backward(model, cache, np.zeros(3, dtype=np.float32))
    assert all(not g.any() for g in grads)


def test_backward_deterministic():
    model = randomize(build(TINY), 12)
    x = np.random.default_rng(13).random((3, 8, 8)).astype(np.float32)
    g = np.array([0.3, -0.7, 0.4], dtype=np.float32)
    _, cache1 = forward(model, x)
    _, cache2 = forward(model, x)
    for a, b in zip(backward(model, cache1, g), backward(model, cache2, g)):
        assert np.array_equal(a, b)


def test_backward_rejects_foreign_cache():
    m1 = randomize(build(TINY), 14)
    m2 = randomize(build(TINY), 15)
    x = np.random.default_rng(16).random((3, 8, 8)).astype(np.float32)
    _, cache = forward(m1, x)
    with pytest.raises(ValueError):
        backward(m2, cache, np.zeros(3, dtype=np.float32))


def full_model_gradcheck(seed, eps=1e-3, rtol=1e-3):
    """Float64 finite-difference check of every parameter; returns worst error."""
    model = as_float64(randomize(build(TINY), seed))
    rng = np.random.default_rng(seed + 100)
    x = rng.random((3, 8, 8))
    target = 1

    def loss():
        logits, _ = forward(model, x)
        return cross_entropy(softmax(logits), target)[0]

    # keep pre-activations clear of ReLU kinks so differences are valid
    _, cache = forward(model, x)
    assert min(np.abs(co).min() for co in cache.conv_outs) > 1e-2
    assert np.abs(cache.fc1_out).min() > 1e-2

    logits, cache = forward(model, x)
    _, grad_logits = cross_entropy(softmax(logits), target)
    analytic = backward(model, cache, grad_logits)

    worst = 0.0
    checked = 0
    for (name, arr), g in zip(model.parameters(), analytic):
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = loss()
            flat[i] = orig - eps
            fm = loss()
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            denom = max(abs(num), abs(gflat[i]), 1e-6)
            worst = max(worst, abs(num - gflat[i]) / denom)
            checked += 1
    assert checked == model.param_count()
    return worst


def test_full_model_finite_difference_check():
    # seed chosen so every pre-activation clears the ReLU kink margin
    assert full_model_gradcheck(seed=31) < 1e-3


# ---------------------------------------------------------------- predict


def head_only_model(logit_bias):
    """Zeroed model whose logits equal fc2_bias: exercises the softmax head."""
    model = build(TINY)
    for _, arr in model.parameters():
        arr[...] = 0
    model.fc2_bias[...] = np.asarray(logit_bias, dtype=np.float32)
    return model


def test_predict_ranked_logits():
    model = head_only_model([2.0, 1.0, 0.0])
    pred = predict(model, np.zeros((3, 8, 8), dtype=np.float32))
    assert pred.label is ClassLabel.CANCEROUS
    # closed form: e^2 / (e^2 + e^1 + e^0)
    want = np.exp(2.0) / (np.exp(2.0) + np.exp(1.0) + 1.0)
    assert abs(pred.confidence - want) < 1e-6
    assert abs(pred.confidence - 0.6652) < 5e-5


def test_predict_tie_breaks_to_lowest_index():
    model = head_only_model([0.7, 0.7, 0.7])
    pred = predict(model, np.zeros((3, 8, 8), dtype=np.float32))
    assert pred.label is ClassLabel.CANCEROUS
    assert abs(pred.confidence - 1 / 3) < 1e-9


def test_predict_distribution_sums_to_one():
    rng = np.random.default_rng(22)
    model = randomize(build(TINY), 23)
    for _ in range(10):
        pred = predict(model, rng.random((3, 8, 8)).astype(np.float32))
        assert abs(sum(pred.distribution) - 1.0) < 1e-6
        assert 1 / 3 - 1e-6 <= pred.confidence <= 1.0


def test_predict_label_invariant_under_logit_shift():
    for shift in (-3.0, 0.0, 5.0):
        model = head_only_model(np.array([0.2, 1.4, -0.5]) + shift)
        pred = predict(model, np.zeros((3, 8, 8), dtype=np.float32))
        assert pred.label is ClassLabel.NON_CANCEROUS
