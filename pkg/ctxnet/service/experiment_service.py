"""
Servicio de Experimentos - Estudios sintéticos reproducibles

- Escalamiento del error ‖Â − A‖_F² con T para cada familia de modelo
- Barrido de α del ajuste conjunto con λ elegido por validación cruzada
- Comparación de aristas logístico-normal vs multinomial en el modelo de mezcla
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from ctxnet.core.base_repository import TableRepository
from ctxnet.core.base_service import BaseService, run_parallel, service_operation
from ctxnet.core.exceptions import EstimationError, NotFoundError, ValidationError
from ctxnet.core.tensors import frobenius_sq_diff
from ctxnet.models.experiment import (
    AlphaSweepConfig,
    AlphaSweepResult,
    AlphaSweepRow,
    AlphaTrial,
    MixtureReport,
    MixtureSeedReport,
    MixtureStudyConfig,
    ModelKind,
    ScalingCell,
    ScalingConfig,
    ScalingResult,
)
from ctxnet.models.fit_config import CvConfig, CvCriterion, FitConfig
from ctxnet.models.inference import EdgeMode
from ctxnet.models.mixture import MixtureSpec
from ctxnet.models.network import DynamicOccurrence
from ctxnet.service.inference_service import absolute_to_relative, edge_scores, extract_edges
from ctxnet.service.simulation_service import (
    SeedStream,
    build_preset,
    round_to_categorical,
    simulate_logistic_normal,
    simulate_mixture,
    simulate_multinomial,
)
from ctxnet.service.solver_service import fit_model, penalty_rule, solver_service

logger = logging.getLogger(__name__)

EXPERIMENTS = ("scaling-mn", "scaling-ln-constq", "scaling-ln-joint", "alpha-sweep", "mixture")

_PRESET_FOR_KIND = {
    ModelKind.MULTINOMIAL: "mn-4.1.1",
    ModelKind.LN_CONSTANT_Q: "ln-constq-4.1.2",
    ModelKind.LN_JOINT: "ln-dyn-4.1.3",
}


# ============================================================================
# Estadísticos
# ============================================================================

def mean_and_se(values: Sequence[float]) -> Tuple[float, float]:
    """Media y error estándar (desviación típica muestral / √n; 0 con n = 1)"""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EstimationError("No hay valores para promediar")
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def fit_loglog_slope(points: Sequence[Tuple[float, float]]) -> float:
    """
    Pendiente por mínimos cuadrados de log(MSE) frente a log(T).

    Args:
        points: Pares (T, MSE)

    Raises:
        ValidationError: Menos de 3 puntos
        EstimationError: Valores no positivos
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValidationError("Se requieren al menos 3 pares (T, MSE)", "points")
    if (pts <= 0).any():
        raise EstimationError("La pendiente log-log requiere T y MSE positivos")
    slope, _ = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
    return float(slope)


# ============================================================================
# Escalamiento
# ============================================================================

def _scaling_trial(kind: ModelKind, M: int, s: int, T: int, K: int, lam: float, alpha: float, seed: int):
    """Simula, ajusta con los interceptos verdaderos y devuelve (mse_A, mse_B, convergió)"""
    model = build_preset(_PRESET_FOR_KIND[kind], M, s, K, seed)
    cfg = FitConfig(lambda_=lam, alpha=alpha)
    if kind == ModelKind.MULTINOMIAL:
        panel = simulate_multinomial(model, T, seed=seed)
        fit = fit_model(kind.value, panel, cfg, model.nu)
        return frobenius_sq_diff(fit.A, model.A.data), None, fit.converged
    panel = simulate_logistic_normal(model, T, seed=seed)
    occ = model.occurrence
    eta = occ.eta if isinstance(occ, DynamicOccurrence) else None
    fit = fit_model(kind.value, panel, cfg, model.nu, eta)
    mse_B = frobenius_sq_diff(fit.B, occ.B.data) if kind == ModelKind.LN_JOINT else None
    return frobenius_sq_diff(fit.A, model.A.data), mse_B, fit.converged


def run_scaling(cfg: ScalingConfig, threads: Optional[int] = None) -> ScalingResult:
    """
    Error de estimación en la malla (M, s) × T con λ = c·K·√(log M / T).

    Cada (celda, T, repetición) recibe su propia semilla hija de cfg.seed, así
    que el resultado no depende del orden de ejecución.
    """
    jobs = [
        (M, s, T, trial)
        for M, s in cfg.cells
        for T in cfg.T_grid
        for trial in range(cfg.trials)
    ]
    seeds = SeedStream.spawn_seeds(cfg.seed, len(jobs))
    logger.info(f"Escalamiento {cfg.model_kind.value}: {len(jobs)} ajustes")

    def run(i: int):
        M, s, T, _ = jobs[i]
        lam = penalty_rule(cfg.coef, cfg.K, M, T)
        return _scaling_trial(cfg.model_kind, M, s, T, cfg.K, lam, cfg.alpha, seeds[i])

    outcomes = run_parallel(run, range(len(jobs)), threads)

    cells: List[ScalingCell] = []
    for M, s in cfg.cells:
        for T in cfg.T_grid:
            rows = [outcomes[i] for i, job in enumerate(jobs) if job[:3] == (M, s, T)]
            mean, se = mean_and_se([r[0] for r in rows])
            mean_B = se_B = None
            if cfg.model_kind == ModelKind.LN_JOINT:
                mean_B, se_B = mean_and_se([r[1] for r in rows])
            cells.append(ScalingCell(
                M=M, s=s, T=T,
                lambda_=penalty_rule(cfg.coef, cfg.K, M, T),
                trials=len(rows),
                mean_mse=mean, se_mse=se,
                normalized=mean / (s * np.log(M)) if s > 0 and M > 1 else None,
                mean_mse_B=mean_B, se_mse_B=se_B,
                converged_fraction=float(np.mean([r[2] for r in rows])),
            ))

    result = ScalingResult(config=cfg, cells=cells)
    for M, s in cfg.cells:
        series = result.series(M, s)
        label = ScalingResult.cell_label(M, s)
        for attr, target in (("mean_mse", result.slopes), ("mean_mse_B", result.slopes_B)):
            points = [(c.T, getattr(c, attr)) for c in series if getattr(c, attr) is not None]
            if len(points) >= 3 and all(v > 0 for _, v in points):
                target[label] = fit_loglog_slope(points)
    return result


# ============================================================================
# Barrido de α
# ============================================================================

def _alpha_trial(cfg: AlphaSweepConfig, sigma2: float, trial: int, seed: int) -> List[AlphaTrial]:
    """Una repetición: simula, elige λ por validación cruzada para cada α y ajusta"""
    model = build_preset("ln-dyn-4.1.3", cfg.M, cfg.s, cfg.K, seed, sigma2=sigma2, low=-1.0, high=1.0)
    panel = simulate_logistic_normal(model, cfg.T, seed=seed)
    occ = model.occurrence
    lambdas = [penalty_rule(c, cfg.K, cfg.M, cfg.T) for c in cfg.lambda_coefs]
    template = FitConfig(threads=1)
    records = []
    for alpha in cfg.alpha_grid:
        cv = CvConfig(lambda_grid=lambdas, alpha_grid=[alpha], folds=cfg.folds)
        chosen = solver_service.cross_validate("ln-joint", panel, cv, template, model.nu, occ.eta, threads=1)
        fit = fit_model("ln-joint", panel, template.with_lambda(chosen.best_lambda, alpha), model.nu, occ.eta)
        records.append(AlphaTrial(
            sigma2=sigma2, trial=trial, alpha=alpha, lambda_=chosen.best_lambda,
            mse_A=frobenius_sq_diff(fit.A, model.A.data),
            mse_B=frobenius_sq_diff(fit.B, occ.B.data),
        ))
    return records


def run_alpha_sweep(cfg: AlphaSweepConfig, threads: Optional[int] = None) -> AlphaSweepResult:
    """
    MSE de Â y B̂ por α con λ elegido por validación cruzada en cada repetición.

    En α = 0 (resp. 1) el bloque A (resp. B) se queda en su inicialización
    nula, de modo que su MSE es ‖A‖_F² (resp. ‖B‖_F²).
    """
    jobs = [(sigma2, trial) for sigma2 in cfg.sigma2_values for trial in range(cfg.trials)]
    seeds = SeedStream.spawn_seeds(cfg.seed, cfg.trials)
    logger.info(f"Barrido de α: {len(jobs)} repeticiones × {len(cfg.alpha_grid)} valores de α")

    def run(i: int):
        sigma2, trial = jobs[i]
        return _alpha_trial(cfg, sigma2, trial, seeds[trial])

    batches = run_parallel(run, range(len(jobs)), threads)
    trials = [record for batch in batches for record in batch]

    rows: List[AlphaSweepRow] = []
    for sigma2 in cfg.sigma2_values:
        for alpha in cfg.alpha_grid:
            group = [t for t in trials if t.sigma2 == sigma2 and t.alpha == alpha]
            mean_A, se_A = mean_and_se([t.mse_A for t in group])
            mean_B, se_B = mean_and_se([t.mse_B for t in group])
            rows.append(AlphaSweepRow(
                sigma2=sigma2, alpha=alpha,
                mean_mse_A=mean_A, se_mse_A=se_A, mean_mse_B=mean_B, se_mse_B=se_B,
                mean_lambda=float(np.mean([t.lambda_ for t in group])),
            ))
    return AlphaSweepResult(config=cfg, rows=rows, trials=trials)


# ============================================================================
# Modelo de mezcla
# ============================================================================

def score_mixture_estimates(
    spec: MixtureSpec, ln_relative: np.ndarray, mn_relative: np.ndarray, threshold: float
) -> Dict[str, object]:
    """
    Compara los soportes relativos estimados con el verdadero por grupo de destinos.

    Returns:
        Diccionario con las claves ln_m1, ln_m2, mn_m1, mn_m2 (EdgeScore)
    """
    truth = extract_edges(spec.true_relative_network(), threshold, EdgeMode.RELATIVE)
    ln_edges = extract_edges(ln_relative, threshold, EdgeMode.RELATIVE)
    mn_edges = extract_edges(mn_relative, threshold, EdgeMode.RELATIVE)
    m1, m2 = set(spec.m1), set(spec.m2)
    return {
        "ln_m1": edge_scores(ln_edges, truth, m1),
        "ln_m2": edge_scores(ln_edges, truth, m2),
        "mn_m1": edge_scores(mn_edges, truth, m1),
        "mn_m2": edge_scores(mn_edges, truth, m2),
    }


def choose_penalty(kind: str, panel, cfg: MixtureStudyConfig, template: FitConfig) -> Tuple[float, float]:
    """
    λ (y α para el ajuste conjunto) de una familia en el estudio de mezcla.

    Con cfg.cv_lambda_coefs se eligen por validación cruzada con el error de
    predicción; sin malla se usan los coeficientes fijos de la configuración.

    Returns:
        (λ, α)
    """
    M, K, T = panel.M, panel.K, panel.T
    coef = cfg.lambda_coef_mn if kind == "mn" else cfg.lambda_coef_ln
    if not cfg.cv_lambda_coefs:
        return penalty_rule(coef, K, M, T), cfg.alpha
    lambdas = [penalty_rule(c, K, M, T) for c in cfg.cv_lambda_coefs]
    alphas = cfg.cv_alpha_grid if kind == "ln-joint" else None
    cv = CvConfig(
        lambda_grid=lambdas, alpha_grid=alphas, folds=cfg.cv_folds, criterion=CvCriterion.PREDICTION_ERROR
    )
    result = solver_service.cross_validate(kind, panel, cv, template, threads=1)
    alpha = result.best_alpha if result.best_alpha is not None else cfg.alpha
    return result.best_lambda, alpha


def _mixture_seed(cfg: MixtureStudyConfig, spec: MixtureSpec, seed: int) -> MixtureSeedReport:
    panel, _ = simulate_mixture(spec, cfg.T, seed)
    rounded = round_to_categorical(panel)
    base = FitConfig(alpha=cfg.alpha, fit_intercepts=cfg.fit_intercepts, threads=1)

    lam_ln, alpha_ln = choose_penalty("ln-joint", panel, cfg, base)
    lam_mn, _ = choose_penalty("mn", rounded, cfg, base)
    ln_fit = fit_model("ln-joint", panel, base.with_lambda(lam_ln, alpha_ln))
    mn_fit = fit_model("mn", rounded, base.with_lambda(lam_mn))

    scores = score_mixture_estimates(spec, ln_fit.A, absolute_to_relative(mn_fit.A), cfg.threshold)
    logger.info(
        f"Mezcla seed={seed}: F1 LN (M1={scores['ln_m1'].f1:.3f}, M2={scores['ln_m2'].f1:.3f}), "
        f"F1 MN (M1={scores['mn_m1'].f1:.3f}, M2={scores['mn_m2'].f1:.3f})"
    )
    return MixtureSeedReport(seed=seed, lambda_ln=lam_ln, alpha_ln=alpha_ln, lambda_mn=lam_mn, **scores)


def run_mixture_study(cfg: MixtureStudyConfig, threads: Optional[int] = None) -> MixtureReport:
    """
    Ajuste conjunto logístico-normal sobre el panel crudo y multinomial sobre el
    panel redondeado, comparados por F1 de aristas relativas en M1 y M2.
    """
    spec = cfg.resolved_spec()
    reports = run_parallel(lambda seed: _mixture_seed(cfg, spec, seed), cfg.seeds, threads)
    report = MixtureReport(config=cfg, seeds=reports)
    logger.info(
        f"Mezcla: LN gana en M1 en {report.ln_wins_m1()}/{len(reports)} semillas, "
        f"MN gana en M2 en {report.mn_wins_m2()}/{len(reports)}"
    )
    return report


class ExperimentService(BaseService):
    """
    Servicio de Experimentos.

    Ejecuta un estudio por nombre y escribe sus tablas CSV en el directorio de salida.
    """

    def __init__(self):
        super().__init__(entity_name="Experimento")
        self.tables = TableRepository()

    def config_for(self, name: str, full: bool = False, seed: Optional[int] = None):
        """Configuración de escritorio (o completa con full) de un experimento"""
        extra = {} if seed is None else {"seed": seed}
        if name.startswith("scaling-"):
            try:
                kind = ModelKind(name[len("scaling-"):])
            except ValueError:
                raise NotFoundError("Experimento", name)
            return ScalingConfig.full(kind, seed) if full else ScalingConfig(model_kind=kind, **extra)
        if name == "alpha-sweep":
            return AlphaSweepConfig.full(seed) if full else AlphaSweepConfig(**extra)
        if name == "mixture":
            if full:
                return MixtureStudyConfig.full(seed)
            return MixtureStudyConfig() if seed is None else MixtureStudyConfig(seeds=[seed + i for i in range(5)])
        raise NotFoundError("Experimento", name)

    @service_operation("ejecutar el experimento")
    def run(self, name: str, out_dir: Path, full: bool = False, seed: Optional[int] = None) -> Tuple[dict, List[Path]]:
        """
        Ejecuta el experimento y escribe sus resultados.

        Returns:
            (configuración serializada, rutas escritas)
        """
        cfg = self.config_for(name, full, seed)
        out_dir = Path(out_dir)
        logger.info(f"Ejecutando experimento '{name}' ({'completo' if full else 'escritorio'})")
        if isinstance(cfg, ScalingConfig):
            result = run_scaling(cfg, self.threads)
            outputs = [self.tables.save(result.to_frame(), out_dir / f"{name}.csv")]
            slopes = [
                {"cell": label, "slope": value, "slope_B": result.slopes_B.get(label)}
                for label, value in result.slopes.items()
            ]
            if slopes:
                outputs.append(self.tables.save(pd.DataFrame(slopes), out_dir / f"{name}-slopes.csv"))
        elif isinstance(cfg, AlphaSweepConfig):
            result = run_alpha_sweep(cfg, self.threads)
            outputs = [self.tables.save(result.to_frame(), out_dir / "alpha-sweep.csv")]
            for sigma2 in cfg.sigma2_values:
                logger.info(f"σ²={sigma2}: α interiores que dominan a la estimación separada {result.interior_dominates(sigma2)}")
        else:
            result = run_mixture_study(cfg, self.threads)
            outputs = [self.tables.save(result.to_frame(), out_dir / "mixture.csv")]
        return cfg.model_dump(mode="json"), outputs


# Instancia global del servicio
experiment_service = ExperimentService()
