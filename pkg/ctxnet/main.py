"""
Punto de entrada de la CLI de ctxnet
"""
from typing import List, Optional
import json
import logging
import sys

import click
import pydantic

from ctxnet import __version__
from ctxnet.core.config import configure_logging, settings
from ctxnet.core.exceptions import BaseServiceError
from ctxnet.core.service_factory import ServiceFactory
from ctxnet.routers import experiment_router, fit_router, inference_router, simulate_router

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


def load_config(ctx: click.Context, param: click.Parameter, value: Optional[str]):
    """
    Lee un archivo JSON de configuración como valores por defecto de la CLI.

    Las claves de primer nivel son opciones globales; los objetos anidados se
    aplican al subcomando del mismo nombre (p. ej. {"fit": {"max_iters": 200}}).
    """
    if value is None:
        return None
    try:
        with open(value, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise click.BadParameter(f"no se pudo leer {value}: {e}", ctx=ctx, param=param)
    if not isinstance(data, dict):
        raise click.BadParameter("el archivo debe contener un objeto JSON", ctx=ctx, param=param)
    ctx.default_map = {**(ctx.default_map or {}), **data}
    return value


@click.group(name="ctxnet", context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="ctxnet")
@click.option("--config", type=click.Path(dir_okay=False), callback=load_config, is_eager=True,
              expose_value=False, help="Archivo JSON con valores por defecto de las opciones")
@click.option("--threads", type=click.IntRange(min=0), default=None,
              help="Hilos de trabajo (0 o ausente: CTXNET_THREADS o todos los núcleos)")
@click.option("--seed", type=int, default=None, help="Semilla global (por defecto CTXNET_DEFAULT_SEED)")
@click.option("--quiet", is_flag=True, help="Solo avisos y errores en el log")
@click.pass_context
def cli(ctx: click.Context, threads: Optional[int], seed: Optional[int], quiet: bool):
    """Redes de influencia dependientes del contexto: simulación, ajuste e inferencia"""
    configure_logging(quiet=quiet)
    ServiceFactory.set_threads(threads)
    ctx.obj = {"seed": settings.DEFAULT_SEED if seed is None else seed, "threads": threads}


# Incluir routers
for module in (simulate_router, fit_router, inference_router, experiment_router):
    for command in module.commands:
        cli.add_command(command)


def parse_and_dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Ejecuta la CLI y devuelve el código de salida.

    Returns:
        0 si termina bien; 1 ante errores de uso; 2 ante errores de validación,
        de datos o de estimación
    """
    try:
        code = cli.main(args=argv, prog_name="ctxnet", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        if e.ctx is not None:
            click.echo(e.ctx.get_help(), err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        click.echo("Abortado", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_FAILURE
    except BaseServiceError as e:
        logger.debug("Detalle del error", exc_info=True)
        click.echo(f"Error: {e.message}", err=True)
        return EXIT_FAILURE
    except pydantic.ValidationError as e:
        click.echo(f"Error de validación: {e}", err=True)
        return EXIT_FAILURE
    return code if isinstance(code, int) else EXIT_OK


def run() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    run()
