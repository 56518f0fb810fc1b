"""
Router para la evaluación de predicciones y la exportación de redes
"""
from pathlib import Path
from typing import Optional
import logging

import click

from ctxnet.core.base_repository import BaseRepository, JsonRepository
from ctxnet.core.exceptions import ValidationError
from ctxnet.core.service_factory import ServiceFactory
from ctxnet.core.tensors import PanelKind
from ctxnet.models.inference import BaselineKind, EdgeMode, PredictionReport
from ctxnet.models.network import MultinomialModel
from ctxnet.routers.common import RunRecorder, manifest_path

logger = logging.getLogger(__name__)

BASELINES = ("none",) + tuple(k.value for k in BaselineKind)


def _manifest_target(out: Optional[str], command: str) -> Path:
    """Junto a --out si se indica; si no, en el directorio actual"""
    return manifest_path(Path(out)) if out else Path(f"{command}.manifest.json")


@click.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False), help="Modelo JSON ajustado")
@click.option("--panel", "panel_path", required=True, type=click.Path(dir_okay=False), help="Panel CSV")
@click.option("--holdout-start", type=click.IntRange(min=0), required=True,
              help="Primer t de las transiciones evaluadas")
@click.option("--metric", type=click.Choice(["mn", "ln"]), default=None,
              help="Familia de la métrica (por defecto la del modelo)")
@click.option("--baseline", type=click.Choice(BASELINES), default="none", show_default=True,
              help="Evalúa también un modelo de referencia ajustado sobre el prefijo")
@click.option("--allow-boundary", is_flag=True, help="Acepta filas composicionales con ceros")
@click.option("--clip-eps", type=click.FloatRange(min=0), default=0.0, show_default=True,
              help="Recorte para el modelo de referencia composicional")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="JSON con los errores")
def predict(model_path: str, panel_path: str, holdout_start: int, metric: Optional[str], baseline: str,
            allow_boundary: bool, clip_eps: float, out: Optional[str]):
    """Error de predicción un paso adelante sobre el tramo final de un panel"""
    recorder = RunRecorder()
    model = ServiceFactory.get_model_repository().load_model(model_path)
    family = "mn" if isinstance(model, MultinomialModel) else "ln"
    metric = metric or family
    kind = PanelKind.CATEGORICAL if family == "mn" else None
    panel = ServiceFactory.get_panel_repository().load(panel_path, kind=kind, allow_boundary=allow_boundary)

    inference_service = ServiceFactory.get_inference_service()
    error = inference_service.evaluate(model, panel, holdout_start, metric)
    click.echo(f"prediction_error={error:.6g}")
    report = PredictionReport(metric=metric, holdout_start=holdout_start, prediction_error=error)
    if baseline != "none":
        if holdout_start < 1:
            raise ValidationError("El modelo de referencia necesita holdout_start ≥ 1", "holdout_start")
        reference = inference_service.baseline(panel.window(0, holdout_start), baseline, metric, clip_eps=clip_eps)
        baseline_error = inference_service.evaluate(reference, panel, holdout_start, metric)
        click.echo(f"baseline_error={baseline_error:.6g}")
        report = report.model_copy(update={"baseline": baseline, "baseline_error": baseline_error})

    outputs = []
    if out:
        outputs.append(JsonRepository("Evaluación", PredictionReport).save(report, out))
    config = report.model_dump(mode="json") | {"clip_eps": clip_eps}
    recorder.finish(_manifest_target(out, "predict"), config, None, [Path(model_path), Path(panel_path)], outputs)


@click.command("export")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False), help="Modelo JSON")
@click.option("--mode", type=click.Choice([m.value for m in EdgeMode]), default="abs", show_default=True,
              help="abs: red absoluta; rel: red relativa; occ: red de ocurrencia")
@click.option("--threshold", type=click.FloatRange(0, 1, max_open=True), default=0.1, show_default=True,
              help="Umbral sobre |peso normalizado|")
@click.option("--format", "fmt", type=click.Choice(["json", "dot"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Archivo de salida (por defecto stdout)")
def export(model_path: str, mode: str, threshold: float, fmt: str, out: Optional[str]):
    """Exportar las aristas de un modelo como JSON o DOT"""
    recorder = RunRecorder()
    model = ServiceFactory.get_model_repository().load_model(model_path)
    inference_service = ServiceFactory.get_inference_service()
    edges = inference_service.edges(model, mode, threshold)
    text = inference_service.export(edges, fmt)

    outputs = []
    if out:
        outputs.append(BaseRepository("Aristas", f".{fmt}").write_text(text, out))
        click.echo(f"{len(edges)} aristas escritas en {out}")
    else:
        click.echo(text)
    config = {"mode": mode, "threshold": threshold, "format": fmt}
    recorder.finish(_manifest_target(out, "export"), config, None, [Path(model_path)], outputs)


commands = [predict, export]
