from enum import Enum
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ctxnet.core.config import settings


class BacktrackingStep(BaseModel):
    """Paso con búsqueda hacia atrás (condición de descenso suficiente)"""
    kind: Literal["backtracking"] = "backtracking"
    init: float = Field(default=1.0, gt=0, description="Paso inicial")
    shrink: float = Field(default=0.5, gt=0, lt=1, description="Factor de reducción")
    min_step: float = Field(default=1e-12, gt=0, description="Paso mínimo")


class FixedStep(BaseModel):
    """Paso fijo η"""
    kind: Literal["fixed"] = "fixed"
    eta: float = Field(..., gt=0, description="Tamaño de paso")


class FitConfig(BaseModel):
    """Configuración de un ajuste penalizado"""
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    lambda_: float = Field(default=0.0, ge=0, alias="lambda", description="Penalización λ")
    alpha: float = Field(default=0.4, ge=0, le=1, description="Peso de L^LN en el ajuste conjunto")
    max_iters: int = Field(default_factory=lambda: settings.MAX_ITERS, ge=1, description="Iteraciones máximas")
    tol: float = Field(default_factory=lambda: settings.TOL, gt=0, description="Cambio relativo del objetivo para parar")
    residual_tol: float = Field(
        default_factory=lambda: settings.RESIDUAL_TOL, gt=0,
        description="Norma máxima ‖θ − prox(θ − t∇f)‖_∞ / t del gradiente proximal para parar"
    )
    step: Union[BacktrackingStep, FixedStep] = Field(default_factory=BacktrackingStep, discriminator="kind")
    fit_intercepts: bool = Field(default=False, description="Ajusta interceptos no penalizados")
    clip_eps: float = Field(default=0.0, ge=0, description="Recorte ε de filas composicionales con ceros")
    threads: int = Field(default=1, ge=0, description="Hilos para bloques de nodos (0 = configuración)")

    def with_lambda(self, lam: float, alpha: Optional[float] = None) -> "FitConfig":
        """Copia con otro λ (y opcionalmente otro α)"""
        update = {"lambda_": lam}
        if alpha is not None:
            update["alpha"] = alpha
        return self.model_copy(update=update)


class CvCriterion(str, Enum):
    HELD_OUT_LOSS = "loss"
    PREDICTION_ERROR = "pred"


class CvConfig(BaseModel):
    """Protocolo de validación cruzada por ventanas consecutivas"""
    model_config = ConfigDict(frozen=True)

    lambda_grid: List[float] = Field(..., min_length=1, description="Valores candidatos de λ")
    alpha_grid: Optional[List[float]] = Field(default=None, description="Valores candidatos de α (ajuste conjunto)")
    folds: int = Field(default=5, ge=1)
    window_frac: float = Field(default=0.8, gt=0, le=1, description="Fracción de datos de cada ventana")
    offset_frac: float = Field(default=0.05, ge=0, description="Desplazamiento entre ventanas")
    criterion: CvCriterion = Field(default=CvCriterion.HELD_OUT_LOSS)

    @field_validator("lambda_grid")
    @classmethod
    def nonnegative_lambdas(cls, v: List[float]) -> List[float]:
        if any(lam < 0 for lam in v):
            raise ValueError("Todos los λ deben ser no negativos")
        return v

    @field_validator("alpha_grid")
    @classmethod
    def alphas_in_unit_interval(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None:
            if not v:
                raise ValueError("La malla de α no puede estar vacía")
            if any(not 0 <= a <= 1 for a in v):
                raise ValueError("Todos los α deben estar en [0, 1]")
        return v

    @model_validator(mode="after")
    def windows_fit(self) -> "CvConfig":
        if self.window_frac + (self.folds - 1) * self.offset_frac > 1 + 1e-12:
            raise ValueError("window_frac + (folds - 1)·offset_frac debe ser ≤ 1")
        return self
