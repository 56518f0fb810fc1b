"""
Utilidades compartidas por los routers de la CLI: lectura de opciones comunes
y registro del manifiesto de cada ejecución
"""
from pathlib import Path
from typing import Iterable, List, Optional
import time

import click

from ctxnet.core.service_factory import ServiceFactory


def manifest_path(output: Path) -> Path:
    """Manifiesto junto a la salida principal: p.csv → p.manifest.json"""
    output = Path(output)
    return output.with_name(f"{output.stem}.manifest.json")


def resolve_seed(seed: Optional[int]) -> int:
    """Semilla del subcomando o, si falta, la global (--seed del grupo)"""
    if seed is not None:
        return seed
    return click.get_current_context().find_root().obj["seed"]


def parse_floats(text: Optional[str], name: str) -> Optional[List[float]]:
    """Lista separada por comas → floats (None si no se indica)"""
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"'{text}' no es una lista de números", param_hint=name)


class RunRecorder:
    """Mide el tiempo de un subcomando y escribe su manifiesto"""

    def __init__(self, command: Optional[str] = None):
        self.command = command or click.get_current_context().command_path
        self.started = time.perf_counter()

    def finish(
        self,
        target: Path,
        config: dict,
        seed: Optional[int],
        inputs: Iterable[Path] = (),
        outputs: Iterable[Path] = (),
    ) -> Path:
        wall_time = time.perf_counter() - self.started
        return ServiceFactory.get_manifest_repository().record(
            target,
            command=self.command,
            config=config,
            seed=seed,
            inputs=list(inputs),
            outputs=list(outputs),
            wall_time=wall_time,
        )
