import numpy as np
import pytest

from ctxnet.core.exceptions import NotFoundError, ValidationError
from ctxnet.core.tensors import EventPanel, PanelKind
from ctxnet.models.mixture import MixtureSpec
from ctxnet.models.network import ConstantQ, DynamicOccurrence, InitSpec, LogisticNormalModel, MultinomialModel
from ctxnet.service.objective_service import alr_inverse
from ctxnet.service.simulation_service import (
    Purpose,
    SeedStream,
    build_preset,
    round_to_categorical,
    sample_joint_network,
    sample_logistic_normal,
    sample_support,
    simulate_bernoulli_autoregressive,
    simulate_logistic_normal,
    simulate_mixture,
    simulate_multinomial,
    simulation_service,
)


def test_seed_stream_substreams_are_reproducible():
    a = SeedStream(7).step(3, Purpose.NOISE).random(5)
    b = SeedStream(7).step(3, Purpose.NOISE).random(5)
    c = SeedStream(7).step(3, Purpose.OCCURRENCE).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_spawned_seeds_are_distinct():
    seeds = SeedStream.spawn_seeds(0, 10)
    assert len(set(seeds)) == 10
    assert seeds == SeedStream.spawn_seeds(0, 10)


def test_same_seed_same_panel(mn_model):
    a = simulate_multinomial(mn_model, T=50, seed=11)
    b = simulate_multinomial(mn_model, T=50, seed=11)
    c = simulate_multinomial(mn_model, T=50, seed=12)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_multinomial_panel_is_categorical(mn_panel):
    assert mn_panel.kind == PanelKind.CATEGORICAL
    rows = mn_panel.data.reshape(-1, mn_panel.K)
    assert set(rows.sum(axis=1).tolist()) <= {0.0, 1.0}
    assert mn_panel.T == 300


def test_multinomial_without_events():
    model = MultinomialModel(A=np.zeros((2, 2, 2, 2)), nu=np.full((2, 2), -60.0))
    panel = simulate_multinomial(model, T=20, seed=0)
    assert not panel.occurred[1:].any()


def test_initial_state_respects_p0(mn_model):
    panel = simulate_multinomial(mn_model, T=1, init=InitSpec(p0=0.0), seed=0)
    assert not panel.occurred[0].any()


def test_logistic_normal_noiseless_rows_follow_intensity():
    rng = np.random.default_rng(1)
    A = rng.uniform(-1, 1, size=(2, 2, 2, 3))
    nu = rng.normal(size=(2, 2))
    model = LogisticNormalModel(A=A, nu=nu, Sigma=np.eye(2), occurrence=ConstantQ(q=np.ones(2)))
    panel = simulate_logistic_normal(model, T=10, init=InitSpec(p0=1.0), seed=3, noiseless=True)
    assert panel.occurred.all()
    for t in range(10):
        mu = (A.reshape(4, 6) @ panel.data[t].ravel()).reshape(2, 2) + nu
        assert np.allclose(panel.data[t + 1], alr_inverse(mu))


def test_logistic_normal_rows_on_simplex(ln_panel):
    # X^0 es one-hot; las respuestas t ≥ 1 son interiores al símplex
    rows = ln_panel.data[1:][ln_panel.occurred[1:]]
    assert (rows > 0).all()
    assert np.allclose(rows.sum(axis=1), 1.0)


def test_logistic_normal_requires_sigma():
    model = LogisticNormalModel(
        A=np.zeros((1, 1, 1, 2)), nu=np.zeros((1, 1)), occurrence=ConstantQ(q=[0.5])
    )
    with pytest.raises(ValidationError):
        simulate_logistic_normal(model, T=5)


def test_sample_logistic_normal():
    z = sample_logistic_normal(np.zeros((100, 2)), np.eye(2), seed=0)
    assert z.shape == (100, 3)
    assert np.allclose(z.sum(axis=1), 1.0)
    exact = sample_logistic_normal([0.0, 0.0], np.eye(2), noiseless=True)
    assert np.allclose(exact, 1 / 3)


def test_sample_logistic_normal_rejects_indefinite_covariance():
    with pytest.raises(ValidationError):
        sample_logistic_normal([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], seed=0)


def test_horizon_must_be_positive(mn_model):
    with pytest.raises(ValidationError):
        simulate_multinomial(mn_model, T=0)


def test_support_spreads_remainder_to_first_nodes():
    support = sample_support(4, 6, np.random.default_rng(0))
    assert support.sum(axis=1).tolist() == [2, 2, 1, 1]


def test_support_size_out_of_range():
    with pytest.raises(ValidationError):
        sample_support(2, 5, np.random.default_rng(0))


def test_joint_network_shares_support():
    A, B = sample_joint_network(5, 3, 7, rng=np.random.default_rng(2))
    support_A = np.abs(A).sum(axis=(1, 3)) > 0
    support_B = np.abs(B).sum(axis=(1, 3)) > 0
    assert np.array_equal(support_A, support_B)
    assert support_A.sum() == 7


def test_presets():
    mn = build_preset("mn-4.1.1", M=4, s=5, K=3, seed=0)
    assert np.allclose(mn.nu, np.log(4 / 3))
    ln = build_preset("ln-dyn-4.1.3", M=4, s=5, K=2, seed=0)
    assert np.allclose(ln.occurrence.eta, np.log(4.0))
    constq = build_preset("ln-constq-4.1.2", M=4, s=5, K=2, seed=0)
    assert np.allclose(constq.occurrence.q, 0.8)
    with pytest.raises(NotFoundError):
        build_preset("hawkes", M=4, s=5)


def test_bernoulli_autoregressive_indicators():
    panel = simulate_bernoulli_autoregressive(np.zeros((3, 3)), np.full(3, 40.0), T=15, seed=0)
    assert panel.K == 1
    assert panel.occurred[1:].all()


def test_round_to_categorical():
    data = np.zeros((2, 2, 3))
    data[1, 0] = [0.2, 0.5, 0.3]
    data[1, 1] = [0.4, 0.4, 0.2]
    rounded = round_to_categorical(EventPanel(data=data, kind=PanelKind.COMPOSITIONAL))
    assert rounded.data[1, 0].tolist() == [0.0, 1.0, 0.0]
    assert rounded.data[1, 1].tolist() == [1.0, 0.0, 0.0]
    assert not rounded.occurred[0].any()


def test_mixture_reference_spec():
    spec = MixtureSpec.reference_default()
    assert (spec.M, spec.K) == (17, 5)
    diagonal = np.stack([spec.A_ln[:, k, :, k] for k in range(4)], axis=-1)
    assert np.array_equal(spec.B[:, 0, :, :4], diagonal)
    assert not spec.B[..., 4].any()
    panel, truth = simulate_mixture(spec, T=30, seed=0)
    assert panel.kind == PanelKind.COMPOSITIONAL
    assert panel.M == 17 and panel.T == 30
    assert truth is spec


def test_mixture_spec_partition_is_checked():
    spec = MixtureSpec.reference_default()
    with pytest.raises(ValidationError):
        MixtureSpec(**{**spec.__dict__, "m2": list(range(4, 17))})


def test_service_preset_returns_truth():
    panel, truth = simulation_service.simulate_preset("mn-4.1.1", T=20, seed=1, M=3, s=2, K=2)
    assert panel.T == 20
    assert isinstance(truth["model"], MultinomialModel)
    with pytest.raises(NotFoundError):
        simulation_service.simulate_preset("unknown", T=20, seed=1)


@pytest.mark.parametrize("name", ["ln-constq-4.1.2", "ln-dyn-4.1.3", "mixture-appB"])
def test_compositional_presets_start_from_default_init(name):
    panel, truth = simulation_service.simulate_preset(name, T=50, seed=7, M=4, s=4, K=3)
    assert panel.kind == PanelKind.COMPOSITIONAL
    assert panel.occurred[0].any()
    assert set(panel.data[0].sum(axis=1).tolist()) <= {0.0, 1.0}
    assert (panel.data[1:][panel.occurred[1:]] > 0).all()
    assert isinstance(truth["model"], LogisticNormalModel)


def test_mixture_truth_as_logistic_normal():
    spec = MixtureSpec.reference_default()
    model = spec.as_logistic_normal()
    assert (model.M, model.K) == (17, 5)
    assert np.array_equal(model.A.data, spec.true_relative_network())
    assert np.allclose(model.nu[spec.m1], spec.nu_ln[spec.m1])
    assert np.allclose(model.nu[5], spec.nu_mn[5, :-1] - spec.nu_mn[5, -1])
    assert not model.occurrence.B.data[spec.m2].any()
    # ocurrencia de un nodo M2 con X = 0: 1 − 1 / (1 + Σ_k e^{ν_k})
    p = 1 - 1 / (1 + np.exp(spec.nu_mn[5]).sum())
    assert 1 / (1 + np.exp(-model.occurrence.eta[5])) == pytest.approx(p)


@pytest.mark.parametrize("occurrence", [
    ConstantQ(q=np.full(3, 0.8)),
    DynamicOccurrence(B=np.zeros((3, 1, 3, 2)), eta=np.full(3, np.log(4.0))),
])
def test_occurrence_frequency_matches_base_probability(occurrence):
    model = LogisticNormalModel(A=np.zeros((3, 1, 3, 2)), nu=np.zeros((3, 1)), Sigma=np.eye(1), occurrence=occurrence)
    T = 20000
    panel = simulate_logistic_normal(model, T=T, seed=8)
    se = np.sqrt(0.8 * 0.2 / T)
    assert np.all(np.abs(panel.event_frequencies - 0.8) < 4 * se)
