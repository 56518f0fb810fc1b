"""
Router para la simulación de paneles
"""
from pathlib import Path
from typing import Optional
import logging

import click

from ctxnet.core.base_repository import JsonRepository
from ctxnet.core.service_factory import ServiceFactory
from ctxnet.models.mixture import MixtureSpec
from ctxnet.routers.common import RunRecorder, manifest_path, resolve_seed
from ctxnet.service.simulation_service import PRESETS

logger = logging.getLogger(__name__)


def truth_path(out: Path) -> Path:
    """Modelo verdadero junto al panel: p.csv → p.truth.json"""
    return out.with_name(f"{out.stem}.truth.json")


def mixture_path(out: Path) -> Path:
    """Especificación completa de la mezcla: p.csv → p.mixture.json"""
    return out.with_name(f"{out.stem}.mixture.json")


@click.command("simulate")
@click.option("--model", "model_path", type=click.Path(dir_okay=False), help="Modelo JSON a simular")
@click.option("--preset", type=click.Choice(PRESETS), help="Escenario predefinido con red muestreada")
@click.option("--M", "M", type=click.IntRange(min=1), default=10, show_default=True, help="Nodos (presets)")
@click.option("--s", "s", type=click.IntRange(min=0), default=10, show_default=True, help="Grupos no nulos (presets)")
@click.option("--K", "K", type=click.IntRange(min=1), default=2, show_default=True, help="Categorías (presets)")
@click.option("--T", "T", type=click.IntRange(min=1), required=True, help="Horizonte")
@click.option("--seed", type=int, default=None, help="Semilla (por defecto la global)")
@click.option("--sigma-contam", type=click.FloatRange(min=0, min_open=True), default=0.2, show_default=True,
              help="Ruido de contaminación del preset de mezcla")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="CSV de salida")
def simulate(model_path: Optional[str], preset: Optional[str], M: int, s: int, K: int, T: int,
             seed: Optional[int], sigma_contam: float, out: str):
    """Simular un panel desde un modelo JSON o un preset"""
    if (model_path is None) == (preset is None):
        raise click.UsageError("Indique exactamente una de --model o --preset")
    recorder = RunRecorder()
    seed = resolve_seed(seed)
    out = Path(out)
    panels = ServiceFactory.get_panel_repository()
    simulation_service = ServiceFactory.get_simulation_service()

    inputs, outputs = [], []
    if model_path is not None:
        model = ServiceFactory.get_model_repository().load_model(model_path)
        panel = simulation_service.simulate_model(model, T, seed)
        inputs.append(Path(model_path))
    else:
        panel, truth = simulation_service.simulate_preset(preset, T, seed, M=M, s=s, K=K, sigma_contam=sigma_contam)
        outputs.append(ServiceFactory.get_model_repository().save_model(truth["model"], truth_path(out)))
        if "mixture" in truth:
            outputs.append(JsonRepository("Mezcla", MixtureSpec).save(truth["mixture"], mixture_path(out)))
    outputs.insert(0, panels.save(panel, out))

    click.echo(f"panel={out} T={panel.T} M={panel.M} K={panel.K} events={int(panel.event_counts.sum())}")
    config = {"model": model_path, "preset": preset, "M": M, "s": s, "K": K, "T": T, "sigma_contam": sigma_contam}
    recorder.finish(manifest_path(out), config, seed, inputs, outputs)


commands = [simulate]
