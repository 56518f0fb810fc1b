import numpy as np
import pytest

from ctxnet.core.tensors import EventPanel, PanelKind
from ctxnet.models.network import ConstantQ, LogisticNormalModel
from ctxnet.service.simulation_service import (
    build_preset,
    sample_group_sparse_network,
    simulate_logistic_normal,
    simulate_multinomial,
)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def mn_model():
    return build_preset("mn-4.1.1", M=3, s=3, K=2, seed=1)


@pytest.fixture
def mn_panel(mn_model):
    return simulate_multinomial(mn_model, T=300, seed=2)


@pytest.fixture
def ln_model():
    return build_preset("ln-dyn-4.1.3", M=3, s=3, K=3, seed=3)


@pytest.fixture
def ln_panel(ln_model):
    return simulate_logistic_normal(ln_model, T=300, seed=4)


@pytest.fixture
def constq_model(rng):
    A = sample_group_sparse_network(3, 2, 3, 3, -1.0, 1.0, rng)
    return LogisticNormalModel(
        A=A, nu=np.zeros((3, 2)), Sigma=0.5 * np.eye(2), occurrence=ConstantQ(q=np.full(3, 0.8))
    )


@pytest.fixture
def constq_panel(constq_model):
    return simulate_logistic_normal(constq_model, T=300, seed=5)


@pytest.fixture
def tiny_categorical():
    """Panel M=2, K=2, T=3 escrito a mano"""
    data = np.zeros((4, 2, 2))
    data[0, 0, 0] = 1.0
    data[1, 1, 1] = 1.0
    data[2, 0, 1] = 1.0
    data[2, 1, 0] = 1.0
    data[3, 0, 0] = 1.0
    return EventPanel(data=data, kind=PanelKind.CATEGORICAL)
