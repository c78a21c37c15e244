import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models.classifier import (
    STANDARD,
    Architecture,
    BiasReversal,
    Classifier,
    ClassificationHead,
    FeatureExtractor,
    HingeBound,
    backward,
    batch_loss,
    bias_gradient,
    ce_loss,
    forward,
    hinge_penalty,
    init_classifier,
    predict,
    sgd_step,
)
from models.data import Batch, ClassSplit, Dataset
from services.training import train_epochs
from utils.errors import InvalidInputError, NumericError, ShapeError
from utils.numerics import make_rng, softmax


def _linear(bias, weight=None):
    """Identity extractor over 1-D zero inputs, so logits equal the head bias."""
    bias = np.asarray(bias, dtype=float)
    weight = np.zeros((bias.size, 1)) if weight is None else np.asarray(weight, dtype=float)
    return Classifier(FeatureExtractor(weight.shape[1], []), ClassificationHead(weight, bias.copy()))


def _random_problem(seed):
    rng = make_rng(seed)
    dim = int(rng.integers(2, 9))
    classes = int(rng.integers(2, 6))
    layers = tuple(int(w) for w in rng.integers(2, 9, size=int(rng.integers(0, 3))))
    model = init_classifier(Architecture(dim, classes, layers), rng)
    model.head.bias[:] = rng.normal(0.0, 1.0, classes)
    n = int(rng.integers(1, 6))
    batch = Batch(rng.normal(0.0, 1.0, (n, dim)), rng.integers(0, classes, n))
    return model, batch, rng


def _parameters(model):
    layers = model.extractor.layers
    return [*(l.weight for l in layers), *(l.bias for l in layers), model.head.weight, model.head.bias]


def _numeric_gradients(model, batch, mode, h=1e-6):
    grads = []
    for param in _parameters(model):
        grad = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            saved = param[idx]
            param[idx] = saved + h
            up = batch_loss(model, batch, mode)
            param[idx] = saved - h
            down = batch_loss(model, batch, mode)
            param[idx] = saved
            grad[idx] = (up - down) / (2 * h)
        grads.append(grad)
    return grads


def test_forward_identity_extractor():
    model = Classifier(FeatureExtractor(2, []), ClassificationHead(np.eye(2), np.zeros(2)))
    assert_allclose(forward(model, [1.0, 2.0]), [1.0, 2.0])
    model.head.bias[:] = [10.0, -10.0]
    assert_allclose(forward(model, [1.0, 2.0]), [11.0, -8.0])


def test_forward_is_deterministic_and_checks_shape(model):
    x = np.linspace(-1, 1, model.input_dim)
    assert_array_equal(forward(model, x), forward(model, x))
    with pytest.raises(ShapeError):
        forward(model, np.zeros(model.input_dim + 1))


def test_predict_tie_break():
    assert predict([0.1, 0.9, 0.3]) == 1
    assert predict([0.5, 0.5]) == 0
    with pytest.raises(InvalidInputError):
        predict([])


def test_large_negative_shift_never_predicted():
    rng = make_rng(5)
    for _ in range(200):
        z = rng.normal(0.0, 3.0, 6)
        c = int(rng.integers(0, 6))
        z[c] -= 1e3
        assert predict(z) != c


def test_ce_loss_values():
    assert_allclose(ce_loss([0.0, 0.0], 0), np.log(2.0))
    assert_allclose(ce_loss([0.0, 0.0, 0.0, 0.0], 3), np.log(4.0))
    assert 0.0 <= ce_loss([1000.0, 0.0], 0) < 1e-12
    with pytest.raises(InvalidInputError):
        ce_loss([0.0, 0.0], 2)


def test_bias_gradient_values():
    assert_allclose(bias_gradient([0.5, 0.5], 0), [-0.5, 0.5])
    assert_allclose(bias_gradient([0.9, 0.05, 0.05], 0), [-0.1, 0.05, 0.05], atol=1e-15)
    with pytest.raises(InvalidInputError):
        bias_gradient([0.5, 0.6], 0)


def test_bias_gradient_sign_law():
    violations = 0
    for trial in range(1000):
        model, batch, _ = _random_problem(trial)
        x, y = batch.features[0], int(batch.labels[0])
        g = bias_gradient(softmax(forward(model, x)), y)
        others = np.delete(g, y)
        if not (g[y] < 0 and np.all(others > 0)):
            violations += 1
        assert abs(g.sum()) < 1e-12
    assert violations == 0


def test_backward_matches_bias_gradient_for_one_sample(model):
    x = np.linspace(-1, 1, model.input_dim)
    grads = backward(model, [(x, 2)])
    assert_allclose(grads.head_bias, bias_gradient(softmax(forward(model, x)), 2), atol=1e-15)


def test_backward_standard_matches_finite_differences():
    for seed in range(100):
        model, batch, _ = _random_problem(seed)
        analytic = backward(model, batch, STANDARD)
        numeric = _numeric_gradients(model, batch, STANDARD)
        for a, n in zip(analytic.arrays(), numeric):
            assert_allclose(a, n, rtol=1e-5, atol=1e-8)


def test_backward_hinge_matches_finite_differences():
    for seed in range(100):
        model, batch, rng = _random_problem(seed)
        forgotten = [int(rng.integers(0, model.class_count))]
        mode = HingeBound(0.5, float(rng.uniform(0.1, 2.0)), ClassSplit.from_forgotten(forgotten, model.class_count))
        analytic = backward(model, batch, mode)
        numeric = _numeric_gradients(model, batch, mode)
        assert_allclose(analytic.loss, batch_loss(model, batch, mode))
        for a, n in zip(analytic.arrays(), numeric):
            assert_allclose(a, n, rtol=1e-5, atol=1e-8)


def test_bias_reversal_only_negates_forgotten_bias_entries():
    for seed in range(20):
        model, batch, rng = _random_problem(seed)
        split = ClassSplit.from_forgotten([0], model.class_count)
        standard = backward(model, batch)
        reversed_ = backward(model, batch, BiasReversal(split))
        for a, b in zip(standard.arrays()[:-1], reversed_.arrays()[:-1]):
            assert_array_equal(a, b)
        assert reversed_.head_bias[0] == -standard.head_bias[0]
        assert_array_equal(reversed_.head_bias[1:], standard.head_bias[1:])


def test_bias_reversal_gradient_is_positive_for_forgotten_label():
    model = _linear(np.log([0.8, 0.15, 0.05]))
    split = ClassSplit.from_forgotten([0], 3)
    grads = backward(model, [(np.zeros(1), 0)], BiasReversal(split))
    assert_allclose(grads.head_bias[0], 1.0 - 0.8)


def test_hinge_penalty_branches():
    value, grad = hinge_penalty(np.array([-2.0, 0.0]), -1.0, 0.5, np.array([0]))
    assert_allclose(grad, [-1.0, 0.0])
    assert_allclose(value, 0.5)
    value, grad = hinge_penalty(np.array([-0.5, 0.0]), -1.0, 0.5, np.array([0]))
    assert value == 0.0
    assert_array_equal(grad, [0.0, 0.0])


def test_hinge_bound_validation():
    split = ClassSplit.from_forgotten([0], 2)
    with pytest.raises(InvalidInputError):
        HingeBound(0.0, -1.0, split)
    with pytest.raises(InvalidInputError):
        HingeBound(np.inf, 1.0, split)


def test_hinge_step_pulls_forgotten_bias_up():
    split = ClassSplit.from_forgotten([0], 3)
    batch = [(np.zeros(1), 1)]
    standard = _linear([-2.0, 0.3, 0.1])
    hinged = standard.clone()
    sgd_step(standard, backward(standard, batch), 0.1)
    sgd_step(hinged, backward(hinged, batch, HingeBound(-1.0, 0.5, split)), 0.1)
    assert_allclose(hinged.head.bias[0] - standard.head.bias[0], 0.1)
    assert_allclose(hinged.head.bias[1:], standard.head.bias[1:])


def test_sgd_step_raises_true_label_bias():
    model = _linear([0.2, -0.1, 0.4])
    before = model.head.bias.copy()
    sgd_step(model, backward(model, [(np.zeros(1), 1)]), 0.1)
    assert model.head.bias[1] > before[1]
    assert np.all(model.head.bias[[0, 2]] < before[[0, 2]])


def test_reversed_destroy_step_deltas():
    model = _linear(np.log([0.8, 0.15, 0.05]))
    before = model.head.bias.copy()
    split = ClassSplit.from_forgotten([0], 3)
    sgd_step(model, backward(model, [(np.zeros(1), 0)], BiasReversal(split)), 0.1)
    delta = model.head.bias - before
    assert_allclose(delta[0], -0.02)
    assert_allclose(delta[2], -0.005)


def test_absent_classes_are_suppressed_by_one_epoch():
    violations = 0
    for trial in range(100):
        rng = make_rng([trial, 9])
        model = init_classifier(Architecture(4, 5, (6,)), rng)
        forgotten = sorted(rng.choice(5, size=2, replace=False).tolist())
        retained = [c for c in range(5) if c not in forgotten]
        labels = rng.choice(retained, size=12)
        data = Dataset(rng.normal(0.0, 1.0, (12, 4)), labels, 5)
        before = model.head.bias[forgotten].copy()
        train_epochs(model, data, 1, 0.1, rng, 4)
        if not np.all(model.head.bias[forgotten] < before):
            violations += 1
    assert violations == 0


def test_frozen_extractor_is_bit_identical(model, rng):
    model = model.frozen_copy()
    saved = [(l.weight.copy(), l.bias.copy()) for l in model.extractor.layers]
    for _ in range(10):
        batch = Batch(rng.normal(0.0, 1.0, (4, model.input_dim)), rng.integers(0, model.class_count, 4))
        grads = backward(model, batch)
        assert all(not np.any(g) for g in grads.layer_weights + grads.layer_biases)
        sgd_step(model, grads, 0.5)
    for layer, (weight, bias) in zip(model.extractor.layers, saved):
        assert_array_equal(layer.weight, weight)
        assert_array_equal(layer.bias, bias)


def test_sgd_step_rejects_non_finite_gradients(model):
    grads = backward(model, [(np.zeros(model.input_dim), 0)])
    grads.head_bias[0] = np.nan
    before = model.head.bias.copy()
    with pytest.raises(NumericError):
        sgd_step(model, grads, 0.1)
    assert_array_equal(model.head.bias, before)


def test_backward_rejects_bad_batches(model):
    with pytest.raises(InvalidInputError):
        backward(model, [])
    with pytest.raises(InvalidInputError):
        backward(model, [(np.zeros(model.input_dim), model.class_count)])
    with pytest.raises(ShapeError):
        backward(model, [(np.zeros(model.input_dim + 2), 0)])


def test_architecture_from_widths():
    assert Architecture.from_widths(6, 3, 8, 4).layer_dims == (8, 4)
    assert Architecture.from_widths(6, 3, 0, 4).layer_dims == (4,)
    identity = Architecture.from_widths(6, 3, 0, 0)
    assert identity.layer_dims == () and identity.feature_dim == 6
    with pytest.raises(InvalidInputError):
        Architecture.from_widths(6, 3, 8, 0)


def test_model_architecture_round_trip(arch, model):
    assert model.architecture == arch
    assert model.clone().head.bias is not model.head.bias
