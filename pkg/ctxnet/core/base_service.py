"""
Clase base para todos los servicios - Orquesta la lógica numérica
Traduce errores inesperados a excepciones de dominio y reparte trabajo en paralelo
"""
from functools import wraps
from typing import Any, Callable, Iterable, List, TypeVar
import logging

import pydantic
from joblib import Parallel, delayed

from ctxnet.core.config import settings
from ctxnet.core.exceptions import BaseServiceError, EstimationError, ValidationError

logger = logging.getLogger(__name__)

R = TypeVar("R")


def service_operation(action: str) -> Callable:
    """
    Decorador para métodos de servicio.

    Deja pasar las excepciones de dominio, convierte los errores de validación
    de pydantic en ValidationError y envuelve cualquier otro error en
    EstimationError después de registrarlo.

    Args:
        action: Descripción de la operación para los mensajes de log
    """
    def decorator(func: Callable[..., R]) -> Callable[..., R]:
        @wraps(func)
        def wrapper(self, *args, **kwargs) -> R:
            try:
                return func(self, *args, **kwargs)
            except BaseServiceError:
                raise
            except pydantic.ValidationError as e:
                logger.warning(f"Configuración inválida al {action} ({self.entity_name}): {e}")
                raise ValidationError(str(e))
            except Exception as e:
                logger.error(f"Error inesperado al {action} ({self.entity_name}): {e}")
                raise EstimationError(str(e))
        return wrapper
    return decorator


def run_parallel(func: Callable[[Any], R], items: Iterable[Any], threads: int | None = None) -> List[R]:
    """
    Ejecuta func sobre cada elemento con joblib (hilos), preservando el orden.

    Args:
        func: Función a aplicar
        items: Elementos de trabajo
        threads: Número de hilos (None/0 usa la configuración; 1 ejecuta en serie)

    Returns:
        Resultados en el orden de entrada
    """
    items = list(items)
    n_jobs = settings.resolve_threads(threads)
    if n_jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(func)(item) for item in items)


class BaseService:
    """
    Clase base para servicios de ctxnet.

    Responsabilidades:
    - Orquestación de operaciones numéricas
    - Registro (logging) de inicio y fin
    - Manejo de excepciones de dominio
    - NO lee ni escribe archivos directamente (usa Repository)
    """

    def __init__(self, entity_name: str, threads: int | None = None):
        """
        Inicializa el servicio base.

        Args:
            entity_name: Nombre para mensajes de log y error (ej: "Simulación")
            threads: Hilos por defecto para el trabajo paralelo
        """
        self.entity_name = entity_name
        self.threads = threads

    def set_threads(self, threads: int | None) -> None:
        """Fija el número de hilos (opción --threads de la CLI)"""
        self.threads = threads
