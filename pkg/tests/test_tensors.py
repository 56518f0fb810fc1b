import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ctxnet.core.exceptions import DimensionError, ValidationError
from ctxnet.core.tensors import (
    EventPanel,
    GroupIndex,
    InfluenceTensor,
    Intercepts,
    PanelKind,
    fibers_to_tensor,
    find_panel_violations,
    frobenius_sq_diff,
    group_norm_R,
    group_norm_R_alpha,
    tensor_fibers,
)

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
tensors = arrays(np.float64, (3, 2, 3, 2), elements=finite)


def test_group_norm_of_single_fiber():
    A = np.zeros((2, 2, 2, 2))
    A[1, :, 0, 0] = [3.0, 4.0]
    assert group_norm_R(A) == pytest.approx(5.0)


def test_group_norm_sums_over_pairs():
    A = np.ones((2, 1, 2, 4))
    # cada fibra tiene 4 unos: norma 2, y hay 4 grupos
    assert group_norm_R(A) == pytest.approx(8.0)


@given(tensors, st.floats(min_value=-5, max_value=5, allow_nan=False))
def test_group_norm_homogeneous(A, c):
    assert group_norm_R(c * A) == pytest.approx(abs(c) * group_norm_R(A), rel=1e-9, abs=1e-9)


@given(tensors, tensors)
def test_group_norm_triangle_inequality(A, B):
    assert group_norm_R(A + B) <= group_norm_R(A) + group_norm_R(B) + 1e-9


@given(tensors)
@settings(max_examples=30)
def test_fibers_round_trip(A):
    assert np.array_equal(fibers_to_tensor(tensor_fibers(A), 2, 2), A)


def test_joint_norm_reduces_to_single_block_at_extremes(rng):
    A = rng.normal(size=(3, 1, 3, 2))
    B = rng.normal(size=(3, 1, 3, 2))
    assert group_norm_R_alpha(A, B, 1.0) == pytest.approx(group_norm_R(A))
    assert group_norm_R_alpha(A, B, 0.0) == pytest.approx(group_norm_R(B))


def test_joint_norm_combines_fibers():
    A = np.zeros((1, 1, 1, 2))
    B = np.zeros((1, 1, 1, 2))
    A[0, 0, 0] = [3.0, 0.0]
    B[0, 0, 0] = [0.0, 4.0]
    assert group_norm_R_alpha(A, B, 0.5) == pytest.approx(np.sqrt(0.5 * 9 + 0.5 * 16))


def test_joint_norm_rejects_alpha_outside_unit_interval(rng):
    A = rng.normal(size=(2, 1, 2, 2))
    B = rng.normal(size=(2, 1, 2, 2))
    with pytest.raises(ValidationError):
        group_norm_R_alpha(A, B, 1.5)


def test_joint_norm_checks_shapes(rng):
    with pytest.raises(DimensionError):
        group_norm_R_alpha(rng.normal(size=(2, 2, 2, 2)), rng.normal(size=(2, 1, 2, 2)), 0.5)


def test_frobenius_sq_diff():
    assert frobenius_sq_diff(np.ones((2, 2)), np.zeros((2, 2))) == pytest.approx(4.0)
    with pytest.raises(DimensionError):
        frobenius_sq_diff(np.ones((2, 2)), np.ones((2, 3)))


def test_group_index_concatenates_fibers(rng):
    A = rng.normal(size=(2, 1, 2, 2))
    B = rng.normal(size=(2, 1, 2, 2))
    fibers = GroupIndex.for_nodes(2).fibers(A, B)
    assert fibers.shape == (2, 2, 4)
    assert np.allclose(fibers[1, 0], np.r_[A[1, :, 0, :].ravel(), B[1, :, 0, :].ravel()])


def test_influence_tensor_validation():
    with pytest.raises(ValidationError):
        InfluenceTensor(data=np.zeros((2, 2, 2)))
    with pytest.raises(DimensionError):
        InfluenceTensor(data=np.zeros((2, 2, 3, 2)))
    with pytest.raises(ValidationError):
        InfluenceTensor(data=np.full((1, 1, 1, 1), np.nan))
    assert InfluenceTensor.zeros(2, 1, 3).data.shape == (2, 1, 2, 3)


def test_intercepts_eta_length():
    with pytest.raises(DimensionError):
        Intercepts(nu=np.zeros((3, 2)), eta=np.zeros(2))
    assert Intercepts.zeros(3, 2, with_eta=True).eta.shape == (3,)


class TestEventPanel:
    def test_dimensions_and_counts(self, tiny_categorical):
        panel = tiny_categorical
        assert (panel.T, panel.M, panel.K) == (3, 2, 2)
        assert panel.event_counts.tolist() == [2, 2]
        assert np.allclose(panel.event_frequencies, [2 / 3, 2 / 3])
        assert panel.covariates().shape == (3, 4)
        assert panel.targets().shape == (3, 2, 2)

    def test_rejects_non_one_hot_rows(self):
        data = np.zeros((2, 1, 2))
        data[1, 0] = [0.5, 0.5]
        with pytest.raises(ValidationError):
            EventPanel(data=data, kind=PanelKind.CATEGORICAL)

    def test_rejects_negative_entries(self):
        data = np.zeros((2, 1, 2))
        data[1, 0] = [1.5, -0.5]
        with pytest.raises(ValidationError):
            EventPanel(data=data, kind=PanelKind.COMPOSITIONAL)

    def test_compositional_rows_are_renormalized(self):
        data = np.zeros((2, 1, 3))
        data[1, 0] = [0.2, 0.3, 0.5 + 1e-12]
        panel = EventPanel(data=data, kind=PanelKind.COMPOSITIONAL)
        assert panel.data[1, 0].sum() == pytest.approx(1.0, abs=1e-12)

    def test_boundary_rows_need_flag(self):
        data = np.zeros((2, 1, 3))
        data[1, 0] = [0.5, 0.5, 0.0]
        with pytest.raises(ValidationError):
            EventPanel(data=data, kind=PanelKind.COMPOSITIONAL)
        panel = EventPanel(data=data, kind=PanelKind.COMPOSITIONAL, allow_boundary=True)
        assert panel.allow_boundary

    def test_initial_row_may_sit_on_the_boundary(self):
        data = np.zeros((2, 1, 3))
        data[0, 0] = [0.0, 1.0, 0.0]
        data[1, 0] = [0.2, 0.3, 0.5]
        panel = EventPanel(data=data, kind=PanelKind.COMPOSITIONAL)
        assert panel.occurred[0, 0]
        data[1, 0] = [0.0, 1.0, 0.0]
        with pytest.raises(ValidationError):
            EventPanel(data=data, kind=PanelKind.COMPOSITIONAL)
        assert [(t, m) for t, m, _ in find_panel_violations(data, PanelKind.COMPOSITIONAL)] == [(1, 0)]

    def test_window(self, tiny_categorical):
        window = tiny_categorical.window(1, 3)
        assert window.T == 2
        assert np.array_equal(window.data, tiny_categorical.data[1:])
        with pytest.raises(ValidationError):
            tiny_categorical.window(2, 5)

    def test_data_is_read_only(self, tiny_categorical):
        with pytest.raises(ValueError):
            tiny_categorical.data[0, 0, 0] = 0.0

    def test_find_violations_does_not_raise(self):
        data = np.zeros((3, 2, 2))
        data[1, 0] = [1.0, 1.0]
        data[2, 1] = [0.3, 0.3]
        violations = find_panel_violations(data, PanelKind.CATEGORICAL)
        assert [(t, m) for t, m, _ in violations] == [(1, 0), (2, 1)]
