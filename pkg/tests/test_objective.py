import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ctxnet.core.exceptions import ValidationError
from ctxnet.core.tensors import EventPanel, PanelKind
from ctxnet.service.objective_service import (
    alr_inverse,
    bernoulli_loss,
    combined_objective,
    ln_gaussian_loglik,
    ln_squared_loss,
    log_ratio_transform,
    multinomial_link,
    multinomial_link_grad,
    multinomial_loss,
    multinomial_node_terms,
    objective_service,
)


def directional_fd(loss, X, D, h=1e-6):
    return (loss(X + h * D) - loss(X - h * D)) / (2 * h)


def test_link_is_stable():
    assert multinomial_link([1000.0]) == pytest.approx(1000.0)
    assert multinomial_link([-1000.0]) == pytest.approx(0.0, abs=1e-12)
    assert multinomial_link([0.0, 0.0]) == pytest.approx(np.log(3.0))


@given(arrays(np.float64, 4, elements=st.floats(-50, 50, allow_nan=False)))
def test_link_bounds(x):
    lower = max(x.max(), 0.0)
    value = multinomial_link(x)
    assert lower - 1e-9 <= value <= lower + np.log(5.0) + 1e-9


def test_link_gradient_matches_softmax():
    x = np.array([0.5, -1.0, 2.0])
    grad = multinomial_link_grad(x)
    assert np.allclose(grad, np.exp(x) / (np.exp(x).sum() + 1))
    assert grad.sum() < 1.0


def test_alr_inverse_inverts_log_ratios():
    z = np.array([0.2, 0.3, 0.5])
    y = np.log(z[:-1] / z[-1])
    assert np.allclose(alr_inverse(y), z)
    assert np.allclose(alr_inverse([0.0, 0.0]), 1 / 3)


def test_multinomial_loss_at_zero(tiny_categorical):
    value, grad = multinomial_loss(np.zeros((2, 2, 2, 2)), np.zeros((2, 2)), tiny_categorical)
    # cada término vale f(0) = log 3 y hay M términos por instante
    assert value == pytest.approx(2 * np.log(3.0))
    assert grad.shape == (2, 2, 2, 2)


def test_multinomial_loss_requires_categorical_panel(ln_panel):
    with pytest.raises(ValidationError):
        multinomial_loss(np.zeros((3, 3, 3, 3)), np.zeros((3, 3)), ln_panel)


def test_multinomial_gradient_matches_finite_differences(mn_panel, rng):
    A = 0.3 * rng.normal(size=(3, 2, 3, 2))
    nu = rng.normal(size=(3, 2))
    D = rng.normal(size=A.shape)
    _, grad = multinomial_loss(A, nu, mn_panel)
    fd = directional_fd(lambda X: multinomial_loss(X, nu, mn_panel)[0], A, D)
    assert np.sum(grad * D) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_ln_gradient_matches_finite_differences(ln_panel, rng):
    lrpanel = log_ratio_transform(ln_panel)
    A = 0.3 * rng.normal(size=(3, 2, 3, 3))
    nu = rng.normal(size=(3, 2))
    D = rng.normal(size=A.shape)
    _, grad = ln_squared_loss(A, nu, lrpanel, ln_panel)
    fd = directional_fd(lambda X: ln_squared_loss(X, nu, lrpanel, ln_panel)[0], A, D)
    assert np.sum(grad * D) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_bernoulli_gradient_matches_finite_differences(ln_panel, rng):
    B = 0.3 * rng.normal(size=(3, 1, 3, 3))
    eta = rng.normal(size=3)
    D = rng.normal(size=B.shape)
    _, grad = bernoulli_loss(B, eta, ln_panel)
    fd = directional_fd(lambda X: bernoulli_loss(X, eta, ln_panel)[0], B, D)
    assert np.sum(grad * D) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_combined_objective_at_alpha_one_is_ln_loss(ln_panel, rng):
    A = rng.normal(size=(3, 2, 3, 3))
    B = rng.normal(size=(3, 1, 3, 3))
    nu, eta = np.zeros((3, 2)), np.zeros(3)
    value, (gA, gB) = combined_objective(A, B, 1.0, nu, eta, ln_panel)
    expected, grad = ln_squared_loss(A, nu, log_ratio_transform(ln_panel), ln_panel)
    assert value == pytest.approx(expected)
    assert np.allclose(gA, grad)
    assert not gB.any()
    with pytest.raises(ValidationError):
        combined_objective(A, B, -0.1, nu, eta, ln_panel)


def test_loss_is_sum_of_node_terms(mn_panel, rng):
    A = rng.normal(size=(3, 2, 3, 2))
    nu = rng.normal(size=(3, 2))
    total, _ = multinomial_loss(A, nu, mn_panel)
    W = A.reshape(3, 2, 6)
    parts = [multinomial_node_terms(W[[m]], nu[[m]], mn_panel, [m])[0][0] for m in range(3)]
    assert sum(parts) == pytest.approx(total)


class TestLogRatioTransform:
    @pytest.fixture
    def boundary_panel(self):
        data = np.zeros((3, 2, 3))
        data[1, 0] = [0.5, 0.0, 0.5]
        data[2, 1] = [0.2, 0.3, 0.5]
        return EventPanel(data=data, kind=PanelKind.COMPOSITIONAL, allow_boundary=True)

    def test_zero_entry_needs_clipping(self, boundary_panel):
        with pytest.raises(ValidationError):
            log_ratio_transform(boundary_panel)

    def test_clipping_renormalizes_rows(self, boundary_panel):
        lr = log_ratio_transform(boundary_panel, clip_eps=0.01)
        assert lr.mask.tolist() == [[False, False], [True, False], [False, True]]
        assert np.isfinite(lr.Y).all()
        assert lr.Y[1, 0, 0] == pytest.approx(0.0)
        assert lr.Y[1, 0, 1] == pytest.approx(np.log(0.01 / 0.5))
        assert np.allclose(lr.Y[2, 1], np.log([0.2 / 0.5, 0.3 / 0.5]))
        assert not lr.Y[0].any()

    def test_negative_clip_rejected(self, boundary_panel):
        with pytest.raises(ValidationError):
            log_ratio_transform(boundary_panel, clip_eps=-1.0)


def test_gaussian_loglik_with_zero_network(ln_panel):
    lrpanel = log_ratio_transform(ln_panel)
    loglik = ln_gaussian_loglik(np.zeros((3, 2, 3, 3)), np.zeros((3, 2)), np.eye(2), lrpanel, ln_panel)
    Y = lrpanel.Y[1:][lrpanel.mask[1:]]
    expected = -0.5 * np.square(Y).sum() - Y.shape[0] * np.log(2 * np.pi)
    assert loglik == pytest.approx(expected)


def test_held_out_loss_dispatch(mn_panel):
    A, nu = np.zeros((3, 2, 3, 2)), np.zeros((3, 2))
    assert objective_service.held_out_loss("mn", mn_panel, A, nu) == pytest.approx(
        multinomial_loss(A, nu, mn_panel)[0]
    )
    with pytest.raises(ValidationError):
        objective_service.held_out_loss("poisson", mn_panel, A, nu)


@pytest.mark.parametrize("family", ["mn", "ln", "bern"])
def test_losses_are_midpoint_convex(family, mn_panel, ln_panel, rng):
    lrpanel = log_ratio_transform(ln_panel)
    losses = {
        "mn": (lambda X: multinomial_loss(X, np.zeros((3, 2)), mn_panel)[0], (3, 2, 3, 2)),
        "ln": (lambda X: ln_squared_loss(X, np.zeros((3, 2)), lrpanel, ln_panel)[0], (3, 2, 3, 3)),
        "bern": (lambda X: bernoulli_loss(X, np.zeros(3), ln_panel)[0], (3, 1, 3, 3)),
    }
    loss, shape = losses[family]
    for _ in range(100):
        a, b = rng.normal(size=shape), rng.normal(size=shape)
        fa, fb = loss(a), loss(b)
        assert loss(0.5 * (a + b)) <= 0.5 * (fa + fb) + 1e-10 * (1 + abs(fa) + abs(fb))
