import numpy as np
import pydantic
import pytest

from ctxnet.core.exceptions import EstimationError, NotFoundError, ValidationError
from ctxnet.models.experiment import (
    AlphaSweepConfig,
    AlphaSweepResult,
    AlphaSweepRow,
    MixtureStudyConfig,
    ModelKind,
    ScalingConfig,
)
from ctxnet.models.fit_config import FitConfig
from ctxnet.models.mixture import MixtureSpec
from ctxnet.service.experiment_service import (
    ExperimentService,
    choose_penalty,
    fit_loglog_slope,
    mean_and_se,
    run_alpha_sweep,
    run_mixture_study,
    run_scaling,
    score_mixture_estimates,
)
from ctxnet.service.solver_service import penalty_rule


def test_mean_and_se():
    mean, se = mean_and_se([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0)
    assert se == pytest.approx(1 / np.sqrt(3))
    assert mean_and_se([4.0]) == (4.0, 0.0)
    with pytest.raises(EstimationError):
        mean_and_se([])


def test_loglog_slope_recovers_power_law():
    points = [(T, 5.0 / T) for T in (500, 1000, 2000, 4000)]
    assert fit_loglog_slope(points) == pytest.approx(-1.0)


def test_loglog_slope_input_checks():
    with pytest.raises(ValidationError):
        fit_loglog_slope([(500, 1.0), (1000, 0.5)])
    with pytest.raises(EstimationError):
        fit_loglog_slope([(500, 1.0), (1000, 0.0), (2000, 0.2)])


def test_scaling_config_checks_cells():
    with pytest.raises(pydantic.ValidationError):
        ScalingConfig(model_kind="mn", cells=[(2, 5)])
    with pytest.raises(pydantic.ValidationError):
        ScalingConfig(model_kind="ln-constq", K=1)
    assert ScalingConfig(model_kind="mn", T_grid=[400, 100]).T_grid == [100, 400]


def test_small_scaling_run():
    cfg = ScalingConfig(model_kind=ModelKind.MULTINOMIAL, cells=[(3, 2)], T_grid=[100, 200, 400], trials=2, seed=0)
    result = run_scaling(cfg, threads=1)
    assert [c.T for c in result.series(3, 2)] == [100, 200, 400]
    assert all(c.trials == 2 for c in result.cells)
    assert "M=3,s=2" in result.slopes
    frame = result.to_frame()
    assert list(frame.columns[:3]) == ["M", "s", "T"]
    assert len(frame) == 3


def test_scaling_is_reproducible():
    cfg = ScalingConfig(model_kind=ModelKind.MULTINOMIAL, cells=[(2, 1)], T_grid=[50], trials=2, seed=4)
    a = run_scaling(cfg, threads=1)
    b = run_scaling(cfg, threads=2)
    assert a.cells[0].mean_mse == b.cells[0].mean_mse


def test_true_network_scores_perfectly():
    spec = MixtureSpec.reference_default()
    truth = spec.true_relative_network()
    scores = score_mixture_estimates(spec, truth, truth, 0.1)
    assert set(scores) == {"ln_m1", "ln_m2", "mn_m1", "mn_m2"}
    assert all(score.f1 == 1.0 for score in scores.values())


def test_alpha_sweep_dominance():
    rows = [
        AlphaSweepRow(sigma2=1.0, alpha=a, mean_mse_A=mse_A, se_mse_A=0.0,
                      mean_mse_B=mse_B, se_mse_B=0.0, mean_lambda=0.1)
        for a, mse_A, mse_B in ((0.0, 9.0, 2.0), (0.5, 1.0, 1.0), (1.0, 3.0, 9.0))
    ]
    result = AlphaSweepResult(config=AlphaSweepConfig(alpha_grid=[0.0, 0.5, 1.0]), rows=rows, trials=[])
    assert result.interior_dominates(1.0) == [0.5]
    assert result.best_alpha_for_A(1.0) == 0.5
    assert list(result.to_frame().columns) == ["sigma2", "alpha", "mean_A", "se_A", "mean_B", "se_B", "mean_lambda"]


class TestExperimentService:
    def test_unknown_experiment(self):
        service = ExperimentService()
        with pytest.raises(NotFoundError):
            service.config_for("hawkes")
        with pytest.raises(NotFoundError):
            service.config_for("scaling-poisson")

    def test_configs(self):
        service = ExperimentService()
        assert service.config_for("scaling-ln-joint", seed=3).seed == 3
        assert service.config_for("scaling-mn", full=True).trials == 50
        assert service.config_for("mixture", seed=10).seeds == [10, 11, 12, 13, 14]
        full_mixture = service.config_for("mixture", full=True, seed=10)
        assert full_mixture.seeds == list(range(10, 20))
        assert full_mixture.cv_folds == 5
        assert isinstance(service.config_for("alpha-sweep"), AlphaSweepConfig)


@pytest.mark.slow
def test_alpha_sweep_interior_beats_separate_estimation():
    cfg = AlphaSweepConfig(T=1000, M=10, s=10, sigma2_values=[1.0], alpha_grid=[0.0, 0.4, 1.0], trials=3)
    result = run_alpha_sweep(cfg)
    assert 0.4 in result.interior_dominates(1.0)


@pytest.mark.slow
def test_mixture_study_favours_matching_family():
    report = run_mixture_study(MixtureStudyConfig(T=10000, seeds=[0, 1, 2]))
    assert report.ln_wins_m1() >= 2
    assert report.mn_wins_m2() >= 2
    assert len(report.to_frame()) == 12


class TestMixturePenalty:
    def test_cross_validation_is_the_default(self):
        cfg = MixtureStudyConfig()
        assert cfg.cv_lambda_coefs and cfg.cv_alpha_grid

    def test_joint_model_tunes_lambda_and_alpha(self, ln_panel):
        cfg = MixtureStudyConfig(cv_lambda_coefs=[0.02, 0.2], cv_alpha_grid=[0.3, 0.7], cv_folds=2)
        template = FitConfig(fit_intercepts=True, max_iters=200, threads=1)
        lam, alpha = choose_penalty("ln-joint", ln_panel, cfg, template)
        grid = [penalty_rule(c, ln_panel.K, ln_panel.M, ln_panel.T) for c in (0.02, 0.2)]
        assert lam in grid
        assert alpha in (0.3, 0.7)

    def test_multinomial_keeps_configured_alpha(self, mn_panel):
        cfg = MixtureStudyConfig(cv_lambda_coefs=[0.02, 0.2], cv_folds=2, alpha=0.5)
        lam, alpha = choose_penalty("mn", mn_panel, cfg, FitConfig(max_iters=200, threads=1))
        assert alpha == 0.5
        assert lam > 0

    def test_fixed_coefficients_without_grid(self, mn_panel):
        cfg = MixtureStudyConfig(cv_lambda_coefs=None, lambda_coef_mn=0.12)
        lam, alpha = choose_penalty("mn", mn_panel, cfg, FitConfig())
        assert lam == pytest.approx(penalty_rule(0.12, mn_panel.K, mn_panel.M, mn_panel.T))
        assert alpha == cfg.alpha

    def test_grids_are_validated(self):
        with pytest.raises(pydantic.ValidationError):
            MixtureStudyConfig(cv_alpha_grid=[1.5])
        with pytest.raises(pydantic.ValidationError):
            MixtureStudyConfig(cv_lambda_coefs=[])
