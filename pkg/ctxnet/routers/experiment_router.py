"""
Router para los experimentos sintéticos y la validación de paneles
"""
from pathlib import Path
from typing import Optional
import logging

import click

from ctxnet.core.exceptions import ValidationError
from ctxnet.core.service_factory import ServiceFactory
from ctxnet.core.tensors import PanelKind
from ctxnet.routers.common import RunRecorder, resolve_seed
from ctxnet.service.experiment_service import EXPERIMENTS
from ctxnet.service.solver_service import MODEL_KINDS

logger = logging.getLogger(__name__)


@click.command("experiment")
@click.option("--name", type=click.Choice(EXPERIMENTS), required=True, help="Experimento a ejecutar")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True, help="Directorio de resultados")
@click.option("--full", is_flag=True, help="Mallas completas (por defecto, versión de escritorio)")
@click.option("--seed", type=int, default=None, help="Semilla (por defecto la global)")
def experiment(name: str, out_dir: str, full: bool, seed: Optional[int]):
    """Ejecutar un experimento sintético y escribir sus tablas"""
    recorder = RunRecorder()
    seed = resolve_seed(seed)
    out_dir = Path(out_dir)
    config, outputs = ServiceFactory.get_experiment_service().run(name, out_dir, full=full, seed=seed)
    for path in outputs:
        click.echo(f"table={path}")
    recorder.finish(out_dir / f"{name}.manifest.json", config | {"full": full}, seed, outputs=outputs)


@click.command("validate")
@click.option("--panel", "panel_path", required=True, type=click.Path(dir_okay=False), help="Panel CSV")
@click.option("--model-kind", "kind", type=click.Choice(MODEL_KINDS), default=None,
              help="Familia con la que se usará (por defecto se infiere del panel)")
@click.option("--allow-boundary", is_flag=True, help="Acepta filas composicionales con ceros")
def validate(panel_path: str, kind: Optional[str], allow_boundary: bool):
    """Comprobar un panel CSV e informar de sus dimensiones y frecuencias"""
    panel_kind = None if kind is None else (PanelKind.CATEGORICAL if kind == "mn" else PanelKind.COMPOSITIONAL)
    report = ServiceFactory.get_panel_repository().validate_panel(panel_path, panel_kind, allow_boundary)
    click.echo(report.summary())
    if not report.ok:
        raise ValidationError(f"El panel tiene {len(report.violations)} filas inválidas", "panel")


commands = [experiment, validate]
