"""
Router para el ajuste penalizado y la validación cruzada
"""
from pathlib import Path
from typing import Optional, Tuple
import logging

import click
import pandas as pd

from ctxnet.core.base_repository import JsonRepository
from ctxnet.core.service_factory import ServiceFactory
from ctxnet.core.tensors import PanelKind
from ctxnet.models.fit_config import BacktrackingStep, CvConfig, CvCriterion, FitConfig, FixedStep
from ctxnet.models.fit_result import CvResult, FitReport
from ctxnet.routers.common import RunRecorder, manifest_path, parse_floats
from ctxnet.service.inference_service import fitted_model
from ctxnet.service.solver_service import MODEL_KINDS, penalty_rule, rate_penalty

logger = logging.getLogger(__name__)


def _panel_options(func):
    """Opciones de entrada comunes a fit y cv"""
    options = [
        click.option("--panel", "panel_path", required=True, type=click.Path(dir_okay=False), help="Panel CSV"),
        click.option("--model-kind", "kind", type=click.Choice(MODEL_KINDS), required=True, help="Familia del modelo"),
        click.option("--nu", "nu_path", type=click.Path(dir_okay=False), help="Interceptos ν (JSON)"),
        click.option("--eta", "eta_path", type=click.Path(dir_okay=False), help="Desplazamientos η (JSON, ln-joint)"),
        click.option("--fit-intercepts", is_flag=True, help="Ajusta ν (y η) sin penalizar"),
        click.option("--alpha", type=click.FloatRange(0, 1), default=0.4, show_default=True, help="Peso α (ln-joint)"),
        click.option("--max-iters", type=click.IntRange(min=1), default=None, help="Iteraciones máximas"),
        click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None, help="Tolerancia relativa"),
        click.option("--step-size", type=click.FloatRange(min=0, min_open=True), default=None,
                     help="Paso fijo (por defecto búsqueda hacia atrás)"),
        click.option("--clip-eps", type=click.FloatRange(min=0), default=0.0, show_default=True,
                     help="Recorte de composiciones con ceros"),
        click.option("--allow-boundary", is_flag=True, help="Acepta filas composicionales con ceros"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def load_inputs(panel_path: str, kind: str, nu_path: Optional[str], eta_path: Optional[str], allow_boundary: bool):
    """Panel (con el tipo que exige la familia) e interceptos opcionales"""
    panel_kind = PanelKind.CATEGORICAL if kind == "mn" else PanelKind.COMPOSITIONAL
    panel = ServiceFactory.get_panel_repository().load(panel_path, kind=panel_kind, allow_boundary=allow_boundary)
    arrays = ServiceFactory.get_array_repository()
    nu = arrays.load(nu_path, key="nu") if nu_path else None
    eta = arrays.load(eta_path, key="eta") if eta_path else None
    return panel, nu, eta


def build_config(alpha: float, max_iters: Optional[int], tol: Optional[float], step_size: Optional[float],
                 fit_intercepts: bool, clip_eps: float, lam: float = 0.0) -> FitConfig:
    values = {"lambda_": lam, "alpha": alpha, "fit_intercepts": fit_intercepts, "clip_eps": clip_eps, "threads": 0}
    if max_iters is not None:
        values["max_iters"] = max_iters
    if tol is not None:
        values["tol"] = tol
    values["step"] = FixedStep(eta=step_size) if step_size is not None else BacktrackingStep()
    return FitConfig(**values)


def cv_frame(result: CvResult) -> pd.DataFrame:
    """Tabla de la validación cruzada: una fila por punto de la malla"""
    rows = []
    for row in result.table:
        record = {"lambda": row.lambda_, "alpha": row.alpha, "mean": row.mean_score, "folds_used": row.folds_used}
        for i, score in enumerate(row.fold_scores, start=1):
            record[f"fold_{i}"] = score
        rows.append(record)
    return pd.DataFrame(rows)


@click.command("fit")
@_panel_options
@click.option("--lambda", "lam", type=click.FloatRange(min=0), default=None, help="Penalización λ")
@click.option("--lambda-coef", type=click.FloatRange(min=0), default=None, help="c de la regla de λ")
@click.option("--lambda-rule", type=click.Choice(["empirical", "rate"]), default="empirical", show_default=True,
              help="empirical: c·K·√(log M/T); rate: c·K·√(max T_m·log M)/T")
@click.option("--nodes", type=int, multiple=True, help="Nodos destino a ajustar (repetible)")
@click.option("--audit", is_flag=True, help="Certificado KKT del ajuste")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Modelo JSON de salida")
def fit(panel_path, kind, nu_path, eta_path, fit_intercepts, alpha, max_iters, tol, step_size, clip_eps,
        allow_boundary, lam, lambda_coef, lambda_rule, nodes: Tuple[int, ...], audit: bool, out: str):
    """Ajustar un modelo penalizado sobre un panel"""
    if (lam is None) == (lambda_coef is None):
        raise click.UsageError("Indique exactamente una de --lambda o --lambda-coef")
    recorder = RunRecorder()
    panel, nu, eta = load_inputs(panel_path, kind, nu_path, eta_path, allow_boundary)
    if lam is None:
        lam = (penalty_rule(lambda_coef, panel.K, panel.M, panel.T) if lambda_rule == "empirical"
               else rate_penalty(lambda_coef, panel))
    cfg = build_config(alpha, max_iters, tol, step_size, fit_intercepts, clip_eps, lam)

    solver_service = ServiceFactory.get_solver_service()
    result = solver_service.fit(kind, panel, cfg, nu=nu, eta=eta, nodes=list(nodes) or None)
    kkt = solver_service.audit(kind, panel, result, clip_eps=clip_eps) if audit else None

    out = Path(out)
    model = fitted_model(kind, result, panel)
    outputs = [
        ServiceFactory.get_model_repository().save_model(model, out),
        JsonRepository("Informe de ajuste", FitReport).save(
            FitReport.from_fit(kind, result, kkt), out.with_name(f"{out.stem}.fit.json")
        ),
    ]
    click.echo(f"lambda={lam:.6g} converged={result.converged} iterations={result.iterations}")
    if kkt is not None:
        click.echo(f"kkt_max_violation={kkt.max_violation:.3g} passed={kkt.passed}")
    inputs = [Path(p) for p in (panel_path, nu_path, eta_path) if p]
    recorder.finish(manifest_path(out), cfg.model_dump(mode="json", by_alias=True) | {"kind": kind}, None,
                    inputs, outputs)


@click.command("cv")
@_panel_options
@click.option("--lambda-grid", default=None, help="Valores de λ separados por comas")
@click.option("--lambda-coefs", default=None, help="Coeficientes c de λ = c·K·√(log M/T), separados por comas")
@click.option("--alpha-grid", default=None, help="Valores de α separados por comas (ln-joint)")
@click.option("--folds", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--window-frac", type=click.FloatRange(0, 1, min_open=True), default=0.8, show_default=True)
@click.option("--offset-frac", type=click.FloatRange(min=0), default=0.05, show_default=True)
@click.option("--criterion", type=click.Choice([c.value for c in CvCriterion]), default="loss", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Tabla CSV de la validación cruzada")
def cv(panel_path, kind, nu_path, eta_path, fit_intercepts, alpha, max_iters, tol, step_size, clip_eps,
       allow_boundary, lambda_grid, lambda_coefs, alpha_grid, folds, window_frac, offset_frac, criterion, out):
    """Elegir λ (y α) por validación cruzada con ventanas consecutivas"""
    lambdas = parse_floats(lambda_grid, "--lambda-grid")
    coefs = parse_floats(lambda_coefs, "--lambda-coefs")
    if (lambdas is None) == (coefs is None):
        raise click.UsageError("Indique exactamente una de --lambda-grid o --lambda-coefs")
    recorder = RunRecorder()
    panel, nu, eta = load_inputs(panel_path, kind, nu_path, eta_path, allow_boundary)
    if lambdas is None:
        lambdas = [penalty_rule(c, panel.K, panel.M, panel.T) for c in coefs]
    cv_config = CvConfig(
        lambda_grid=lambdas, alpha_grid=parse_floats(alpha_grid, "--alpha-grid"), folds=folds,
        window_frac=window_frac, offset_frac=offset_frac, criterion=CvCriterion(criterion),
    )
    cfg = build_config(alpha, max_iters, tol, step_size, fit_intercepts, clip_eps)

    result = ServiceFactory.get_solver_service().cross_validate(kind, panel, cv_config, cfg, nu=nu, eta=eta)
    out = Path(out)
    outputs = [ServiceFactory.get_table_repository().save(cv_frame(result), out)]
    click.echo(f"best_lambda={result.best_lambda:.6g} best_alpha={result.best_alpha}")
    config = {"kind": kind, "cv": cv_config.model_dump(mode="json"), "fit": cfg.model_dump(mode="json", by_alias=True)}
    inputs = [Path(p) for p in (panel_path, nu_path, eta_path) if p]
    recorder.finish(manifest_path(out), config, None, inputs, outputs)


commands = [fit, cv]
