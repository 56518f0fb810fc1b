import os
from importlib import metadata
import logging
from dotenv import load_dotenv

from ctxnet import __version__

# Cargar variables de entorno
load_dotenv()


class Settings:
    """Configuración global de ctxnet usando variables de entorno"""

    THREADS: int = int(os.getenv("CTXNET_THREADS", "0"))
    LOG_LEVEL: str = os.getenv("CTXNET_LOG_LEVEL", "INFO")
    DEFAULT_SEED: int = int(os.getenv("CTXNET_DEFAULT_SEED", "0"))
    SIMPLEX_TOL: float = float(os.getenv("CTXNET_SIMPLEX_TOL", "1e-9"))
    MAX_ITERS: int = int(os.getenv("CTXNET_MAX_ITERS", "5000"))
    TOL: float = float(os.getenv("CTXNET_TOL", "1e-8"))
    RESIDUAL_TOL: float = float(os.getenv("CTXNET_RESIDUAL_TOL", "1e-7"))

    @classmethod
    def resolve_threads(cls, threads: int | None = None) -> int:
        """
        Número de workers para joblib.

        Args:
            threads: Valor explícito (None o 0 usa la configuración)

        Returns:
            Número de hilos; -1 significa todos los núcleos de la máquina
        """
        value = threads if threads else cls.THREADS
        return value if value and value > 0 else -1


# Instancia global de configuración
settings = Settings()


def configure_logging(level: str | None = None, quiet: bool = False) -> None:
    """Configura el logging de la aplicación (nivel WARNING con --quiet)"""
    chosen = "WARNING" if quiet else (level or settings.LOG_LEVEL)
    logging.basicConfig(
        level=getattr(logging, chosen.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger().setLevel(getattr(logging, chosen.upper(), logging.INFO))


def package_versions(names=("ctxnet", "numpy", "scipy", "pandas", "pydantic", "joblib", "networkx", "click")) -> dict:
    """Versiones instaladas de ctxnet y su pila numérica ("unknown" si falta)"""
    versions = {}
    for name in names:
        if name == "ctxnet":
            versions[name] = __version__
            continue
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions
