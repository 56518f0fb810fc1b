from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class NodeDiagnostics(BaseModel):
    """Diagnóstico del descenso proximal para un nodo destino"""
    node: int
    iterations: int
    converged: bool
    objective: float
    step: float
    residual: float = Field(default=0.0, ge=0, description="Norma ∞ del gradiente proximal en la última iteración")
    monotone: bool = Field(default=True, description="El objetivo compuesto nunca aumentó")
    history: List[float] = Field(default_factory=list, description="Objetivo compuesto por iteración")


class FitResult(BaseModel):
    """Resultado de un ajuste: redes estimadas, interceptos usados y diagnósticos"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    A: Optional[np.ndarray] = Field(default=None, description="Â (M, K_out, M, K)")
    B: Optional[np.ndarray] = Field(default=None, description="B̂ (M, 1, M, K)")
    nu: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    lambda_: float = 0.0
    alpha: Optional[float] = None
    diagnostics: List[NodeDiagnostics] = Field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(d.converged for d in self.diagnostics)

    @property
    def iterations(self) -> int:
        return max((d.iterations for d in self.diagnostics), default=0)


class KktReport(BaseModel):
    """Certificado numérico de optimalidad del programa convexo"""
    lambda_: float
    tol: float
    max_zero_violation: float = Field(..., description="max(‖g‖ − λ, 0) sobre grupos nulos")
    max_active_violation: float = Field(..., description="max ‖g + λ·θ/‖θ‖‖ sobre grupos activos")
    n_zero_groups: int
    n_active_groups: int
    flagged_groups: List[List[int]] = Field(default_factory=list, description="Grupos (m, m') que violan")

    @property
    def max_violation(self) -> float:
        return max(self.max_zero_violation, self.max_active_violation)

    @property
    def passed(self) -> bool:
        return not self.flagged_groups


class CvRow(BaseModel):
    """Puntuación de un punto de la malla"""
    lambda_: float
    alpha: Optional[float] = None
    fold_scores: List[Optional[float]]
    mean_score: Optional[float]
    folds_used: int


class CvResult(BaseModel):
    """Ganador y tabla completa de la validación cruzada"""
    best_lambda: float
    best_alpha: Optional[float] = None
    criterion: str
    table: List[CvRow]


class FitReport(BaseModel):
    """Resumen serializable de un ajuste (diagnósticos y certificado KKT)"""
    kind: str
    lambda_: float
    alpha: Optional[float] = None
    converged: bool
    iterations: int
    kkt: Optional[KktReport] = None
    diagnostics: List[NodeDiagnostics] = Field(default_factory=list)

    @classmethod
    def from_fit(cls, kind: str, fit: FitResult, kkt: Optional[KktReport] = None) -> "FitReport":
        return cls(
            kind=kind, lambda_=fit.lambda_, alpha=fit.alpha,
            converged=fit.converged, iterations=fit.iterations,
            kkt=kkt, diagnostics=fit.diagnostics,
        )
