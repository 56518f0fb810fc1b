import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import multivariate_normal

from ctxnet.core.exceptions import EstimationError, ValidationError
from ctxnet.core.tensors import EventPanel, PanelKind
from ctxnet.models.inference import BaselineKind, EdgeMode, EdgeSign
from ctxnet.models.network import ConstantQ, LogisticNormalModel, MultinomialModel
from ctxnet.service.objective_service import alr_inverse
from ctxnet.service.inference_service import (
    absolute_to_relative,
    edge_scores,
    extract_edges,
    fit_baseline,
    network_for_mode,
    predict_logistic_normal,
    predict_multinomial,
    prediction_error,
    rebase,
    rebase_matrix,
    inference_service,
)


def empty_panel(T=5, M=2, K=2):
    return EventPanel(data=np.zeros((T + 1, M, K)), kind=PanelKind.CATEGORICAL)


class TestPrediction:
    def test_multinomial_argmax(self):
        model = MultinomialModel(A=np.zeros((1, 2, 1, 2)), nu=[[np.log(2.0), 0.0]])
        p, x_hat = predict_multinomial(model, np.zeros((1, 2)))
        assert np.allclose(p, [[0.25, 0.5, 0.25]])
        assert x_hat.tolist() == [[1.0, 0.0]]

    def test_multinomial_tie_goes_to_no_event(self):
        model = MultinomialModel(A=np.zeros((1, 2, 1, 2)), nu=[[0.0, 0.0]])
        _, x_hat = predict_multinomial(model, np.zeros((1, 2)))
        assert not x_hat.any()

    def test_logistic_normal_rows_sum_to_q(self, constq_model, constq_panel):
        x_hat = predict_logistic_normal(constq_model, constq_panel.data[5])
        assert np.allclose(x_hat.sum(axis=1), 0.8)
        custom = predict_logistic_normal(constq_model, constq_panel.data[5], q_hat=[1.0, 0.5, 0.0])
        assert np.allclose(custom.sum(axis=1), [1.0, 0.5, 0.0])

    def test_logistic_normal_prediction_beats_rescaled_ones(self, rng):
        model = LogisticNormalModel(
            A=0.3 * rng.normal(size=(2, 2, 2, 3)), nu=[[0.5, -0.2], [0.0, 0.3]],
            Sigma=0.01 * np.eye(2), occurrence=ConstantQ(q=[0.7, 0.7]),
        )
        x_prev = np.array([[0.2, 0.3, 0.5], [0.0, 0.0, 0.0]])
        x_hat = predict_logistic_normal(model, x_prev)

        mu = np.einsum("mkpq,pq->mk", model.A.data, x_prev) + model.nu
        n = 20000
        Y = mu + rng.multivariate_normal(np.zeros(2), model.Sigma, size=(n, 2))
        occurs = rng.random((n, 2, 1)) < 0.7
        X = occurs * alr_inverse(Y)

        def mse(pred):
            return np.mean(np.sum((X - pred) ** 2, axis=(1, 2)))

        assert mse(x_hat) < mse(x_hat * (0.9 / 0.7))
        assert mse(x_hat) < mse(x_hat * (0.5 / 0.7))

    def test_state_shape_is_checked(self, constq_model):
        with pytest.raises(ValidationError):
            predict_logistic_normal(constq_model, np.zeros((2, 3)))


class TestPredictionError:
    def test_quiet_model_on_quiet_panel(self):
        model = MultinomialModel(A=np.zeros((2, 2, 2, 2)), nu=np.full((2, 2), -10.0))
        assert prediction_error(empty_panel(), model, "mn") == 0.0

    def test_eager_model_on_quiet_panel(self):
        model = MultinomialModel(A=np.zeros((2, 2, 2, 2)), nu=[[10.0, -10.0], [10.0, -10.0]])
        assert prediction_error(empty_panel(), model, "mn") == pytest.approx(1.0)

    def test_family_mismatch(self, mn_model, mn_panel):
        with pytest.raises(ValidationError):
            prediction_error(mn_panel, mn_model, "ln")

    def test_true_model_beats_constant_baseline(self, mn_model, mn_panel):
        baseline = fit_baseline(mn_panel, BaselineKind.CONSTANT_PROCESS, "mn")
        assert prediction_error(mn_panel, mn_model, "mn") < prediction_error(mn_panel, baseline, "mn")

    def test_evaluate_checks_holdout_start(self, mn_model, mn_panel):
        with pytest.raises(ValidationError):
            inference_service.evaluate(mn_model, mn_panel, 300, "mn")
        assert inference_service.evaluate(mn_model, mn_panel, 200, "mn") >= 0.0


class TestBaselines:
    def test_constant_process(self, mn_panel):
        baseline = fit_baseline(mn_panel, "constant", "mn")
        assert np.allclose(baseline.occurrence_q, mn_panel.event_frequencies)
        assert np.allclose(baseline.category_probs.sum(axis=1), 1.0)

    def test_context_independent(self, ln_panel):
        baseline = fit_baseline(ln_panel, "context-independent", "ln")
        assert baseline.occurrence_B.shape == (3, 3)
        assert baseline.mean_log_ratio.shape == (3, 2)
        assert prediction_error(ln_panel, baseline, "ln") >= 0.0

    def test_empty_panel(self):
        with pytest.raises(EstimationError):
            fit_baseline(empty_panel(), "constant", "mn")


class TestRebase:
    def test_matrix_maps_log_ratios(self):
        z = np.array([0.1, 0.2, 0.3, 0.4])
        Y = np.log(z[:-1] / z[-1])
        L, labels = rebase_matrix(4, 1)
        assert labels == [0, 2, 3, 1]
        expected = np.log(z[labels[:-1]] / z[labels[-1]])
        assert np.allclose(L @ Y, expected)

    @pytest.mark.parametrize("K,l", [(1, 0), (3, 2), (3, 5), (3, -1)])
    def test_invalid_base(self, K, l):
        with pytest.raises(ValidationError):
            rebase_matrix(K, l)

    def test_intensities_transform_linearly(self, ln_model, rng):
        A, nu = ln_model.A.data, ln_model.nu
        A_new, nu_new, _, _ = rebase(A, nu, 0)
        L, _ = rebase_matrix(3, 0)
        x = rng.random((3, 3))
        mu = np.einsum("mkpq,pq->mk", A, x) + nu
        mu_new = np.einsum("mkpq,pq->mk", A_new, x) + nu_new
        assert np.allclose(mu_new, mu @ L.T)

    def test_round_trip_recovers_original_up_to_relabeling(self, rng):
        A = rng.normal(size=(2, 3, 2, 4))
        nu = rng.normal(size=(2, 3))
        A1, nu1, _, first = rebase(A, nu, 1)
        A2, nu2, _, second = rebase(A1, nu1, first.index(3))
        order = [first[i] for i in second]
        assert order[-1] == 3
        assert np.allclose(A2, A[:, order[:-1]])
        assert np.allclose(nu2, nu[:, order[:-1]])

    def test_likelihood_is_invariant(self, rng):
        Sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
        _, _, Sigma_new, _ = rebase(np.zeros((1, 2, 1, 3)), np.zeros((1, 2)), 1, Sigma)
        L, _ = rebase_matrix(3, 1)
        r = rng.normal(size=2)
        assert multivariate_normal(cov=Sigma_new).logpdf(L @ r) == pytest.approx(
            multivariate_normal(cov=Sigma).logpdf(r)
        )


def test_absolute_to_relative_ignores_common_shift(rng):
    A = rng.normal(size=(2, 3, 2, 3))
    shifted = A + rng.normal(size=(2, 1, 2, 3))
    rel = absolute_to_relative(A)
    assert rel.shape == (2, 2, 2, 3)
    assert np.allclose(rel, absolute_to_relative(shifted))
    with pytest.raises(ValidationError):
        absolute_to_relative(np.zeros((2, 1, 2, 1)))


class TestEdges:
    @pytest.fixture
    def net(self):
        A = np.zeros((2, 1, 2, 2))
        A[0, 0, 1, 0] = 2.0
        A[1, 0, 0, 1] = -1.0
        A[1, 0, 1, 1] = 0.1
        return A

    def test_thresholds(self, net):
        edges = extract_edges(net, 0.1, "rel")
        assert edges.scale == 2.0
        assert edges.support() == {(1, 0, 0, 0), (0, 1, 1, 0)}
        assert [e.sign for e in edges.edges] == [EdgeSign.STIMULATORY, EdgeSign.INHIBITORY]
        assert len(extract_edges(net, 0.6, "rel")) == 1
        assert len(extract_edges(net, 0.0, "rel")) == 3

    def test_scale_invariance(self, net):
        base = extract_edges(net, 0.2, "rel")
        scaled = extract_edges(8.0 * net, 0.2, "rel")
        assert base.support() == scaled.support()
        assert [e.weight for e in base.edges] == [e.weight for e in scaled.edges]

    @given(
        arrays(np.float64, (2, 1, 2, 2), elements=st.floats(-5, 5, allow_nan=False, allow_subnormal=False)),
        st.integers(-6, 6),
        st.floats(0, 0.99),
    )
    def test_scale_invariance_property(self, A, power, threshold):
        base = extract_edges(A, threshold, "rel")
        scaled = extract_edges(2.0 ** power * A, threshold, "rel")
        assert base.support() == scaled.support()

    def test_zero_network(self):
        edges = extract_edges(np.zeros((2, 1, 2, 2)), 0.1, "occ")
        assert len(edges) == 0
        assert edges.scale == 0.0

    def test_occurrence_edges_have_no_output_category(self, net):
        edges = extract_edges(net, 0.1, EdgeMode.OCCURRENCE)
        assert all(e.k_out is None for e in edges.edges)

    def test_invalid_threshold(self, net):
        with pytest.raises(ValidationError):
            extract_edges(net, 1.0, "rel")

    def test_exports(self, net):
        edges = extract_edges(net, 0.1, "rel")
        assert "digraph" in inference_service.export(edges, "dot")
        assert '"edges"' in inference_service.export(edges, "json")
        with pytest.raises(ValidationError):
            inference_service.export(edges, "graphml")


class TestEdgeScores:
    def test_both_empty(self):
        score = edge_scores(set(), set())
        assert (score.precision, score.recall, score.f1) == (1.0, 1.0, 1.0)

    def test_no_predictions(self):
        score = edge_scores(set(), {(0, 1, 0, 0)})
        assert (score.precision, score.recall, score.f1) == (0.0, 0.0, 0.0)

    def test_no_truth(self):
        score = edge_scores({(0, 1, 0, 0)}, set())
        assert (score.precision, score.recall) == (0.0, 1.0)

    def test_partial_overlap_and_targets(self):
        est = {(0, 1, 0, 0), (1, 0, 0, 0)}
        true = {(0, 1, 0, 0), (2, 1, 0, 0)}
        score = edge_scores(est, true)
        assert score.precision == pytest.approx(0.5)
        assert score.recall == pytest.approx(0.5)
        only_zero = edge_scores(est, true, targets={0})
        assert (only_zero.n_true, only_zero.n_predicted) == (0, 1)


def test_network_for_mode(mn_model, ln_model, constq_model):
    assert network_for_mode(mn_model, "abs").shape == (3, 2, 3, 2)
    assert network_for_mode(mn_model, "rel").shape == (3, 1, 3, 2)
    assert network_for_mode(ln_model, "occ").shape == (3, 1, 3, 3)
    with pytest.raises(ValidationError):
        network_for_mode(ln_model, "abs")
    with pytest.raises(ValidationError):
        network_for_mode(constq_model, "occ")
    edges = inference_service.edges(ln_model, "rel", 0.1)
    assert edges.mode == EdgeMode.RELATIVE
