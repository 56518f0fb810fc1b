"""
Sistema centralizado de excepciones para toda la aplicación
"""
from typing import Optional, Sequence


class BaseServiceError(Exception):
    """Excepción base para todos los errores de servicio"""
    def __init__(self, message: str, entity: Optional[str] = None):
        self.message = message
        self.entity = entity
        super().__init__(self.message)


class NotFoundError(BaseServiceError):
    """Excepción cuando no se encuentra un recurso (archivo, preset, experimento)"""
    def __init__(self, entity: str, id_value: any):
        message = f"{entity} '{id_value}' no encontrado"
        super().__init__(message, entity)
        self.id_value = id_value


class ValidationError(BaseServiceError):
    """Excepción para errores de validación de invariantes"""
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class DimensionError(ValidationError):
    """Excepción cuando las dimensiones de tensores, paneles o interceptos no coinciden"""
    def __init__(self, field: str, expected: Sequence[int], actual: Sequence[int]):
        message = (
            f"Dimensiones incompatibles en {field}: "
            f"se esperaba {tuple(expected)} y se recibió {tuple(actual)}"
        )
        super().__init__(message, field)
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class DataFormatError(BaseServiceError):
    """Excepción para archivos de entrada mal formados (CSV/JSON)"""
    def __init__(self, detail: str):
        message = f"Formato de datos inválido: {detail}"
        super().__init__(message)
        self.detail = detail


class EstimationError(BaseServiceError):
    """Excepción para peticiones numéricamente imposibles"""
    def __init__(self, detail: str):
        message = f"Error de estimación: {detail}"
        super().__init__(message)
        self.detail = detail


def check_shape(field: str, actual: Sequence[int], expected: Sequence[int]) -> None:
    """Lanza DimensionError si la forma no coincide con la esperada"""
    if tuple(actual) != tuple(expected):
        raise DimensionError(field, expected, actual)
