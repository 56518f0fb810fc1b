"""
Configuraciones y resultados de los estudios sintéticos: escalamiento del error,
barrido de α y comparación en el modelo de mezcla.
"""
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ctxnet.core.config import settings
from ctxnet.models.inference import EdgeScore
from ctxnet.models.mixture import MixtureSpec


class ModelKind(str, Enum):
    """Familia de modelo que se simula y ajusta"""
    MULTINOMIAL = "mn"
    LN_CONSTANT_Q = "ln-constq"
    LN_JOINT = "ln-joint"


# Coeficiente c de λ = c·K·√(log M / T) elegido por validación cruzada para cada familia
DEFAULT_LAMBDA_COEF: Dict[ModelKind, float] = {
    ModelKind.MULTINOMIAL: 0.12,
    ModelKind.LN_CONSTANT_Q: 0.13,
    ModelKind.LN_JOINT: 0.08,
}


class ScalingConfig(BaseModel):
    """Malla (M, s, T) y protocolo de un experimento de escalamiento del error"""
    model_config = ConfigDict(frozen=True)

    model_kind: ModelKind
    cells: List[Tuple[int, int]] = Field(
        default_factory=lambda: [(10, 10), (10, 20), (20, 20), (20, 40)],
        description="Pares (M, s): nodos y número total de grupos no nulos",
    )
    T_grid: List[int] = Field(default_factory=lambda: [500, 1000, 2000, 4000], min_length=1)
    trials: int = Field(default=10, ge=1, description="Repeticiones por celda")
    K: int = Field(default=2, ge=1)
    lambda_coef: Optional[float] = Field(default=None, gt=0, description="c en λ = c·K·√(log M / T)")
    alpha: float = Field(default=0.4, ge=0, le=1, description="Peso α del ajuste conjunto")
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)

    @field_validator("cells")
    @classmethod
    def valid_cells(cls, v: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
        if not v:
            raise ValueError("La malla de celdas (M, s) no puede estar vacía")
        for M, s in v:
            if M < 1 or s < 0:
                raise ValueError(f"Celda inválida (M={M}, s={s})")
            if s > M * M:
                raise ValueError(f"s={s} excede el número de grupos M²={M * M}")
        return v

    @field_validator("T_grid")
    @classmethod
    def valid_T(cls, v: List[int]) -> List[int]:
        if any(T < 1 for T in v):
            raise ValueError("Todos los T deben ser ≥ 1")
        return sorted(v)

    @model_validator(mode="after")
    def check_K(self) -> "ScalingConfig":
        if self.model_kind != ModelKind.MULTINOMIAL and self.K < 2:
            raise ValueError("Los modelos logístico-normales requieren K ≥ 2")
        return self

    @property
    def coef(self) -> float:
        return self.lambda_coef if self.lambda_coef is not None else DEFAULT_LAMBDA_COEF[self.model_kind]

    @classmethod
    def full(cls, model_kind: ModelKind, seed: Optional[int] = None) -> "ScalingConfig":
        """Mallas de tamaño completo: 50 repeticiones y T hasta 8000"""
        return cls(
            model_kind=model_kind,
            cells=[(10, 10), (10, 20), (20, 20), (20, 40), (40, 40), (40, 80)],
            T_grid=[500, 1000, 2000, 4000, 8000],
            trials=50,
            seed=settings.DEFAULT_SEED if seed is None else seed,
        )


class ScalingCell(BaseModel):
    """Media y error estándar de ‖Â − A‖_F² (y ‖B̂ − B‖_F²) en una celda"""
    M: int
    s: int
    T: int
    lambda_: float
    trials: int
    mean_mse: float
    se_mse: float = Field(..., ge=0)
    normalized: Optional[float] = Field(default=None, description="MSE / (s·log M)")
    mean_mse_B: Optional[float] = None
    se_mse_B: Optional[float] = Field(default=None, ge=0)
    converged_fraction: float = Field(default=1.0, ge=0, le=1)


class ScalingResult(BaseModel):
    """Resultado de un experimento de escalamiento y pendientes log-log por (M, s)"""
    config: ScalingConfig
    cells: List[ScalingCell]
    slopes: Dict[str, float] = Field(default_factory=dict, description="Pendiente de A por 'M=..,s=..'")
    slopes_B: Dict[str, float] = Field(default_factory=dict, description="Pendiente de B por 'M=..,s=..'")

    @staticmethod
    def cell_label(M: int, s: int) -> str:
        return f"M={M},s={s}"

    def series(self, M: int, s: int) -> List[ScalingCell]:
        """Celdas de un par (M, s) ordenadas por T"""
        return sorted((c for c in self.cells if c.M == M and c.s == s), key=lambda c: c.T)

    def to_frame(self) -> pd.DataFrame:
        """Tabla con columnas M, s, T, mean, se, normalized (y B si aplica)"""
        rows = []
        for c in self.cells:
            row = {
                "M": c.M, "s": c.s, "T": c.T, "lambda": c.lambda_, "trials": c.trials,
                "mean": c.mean_mse, "se": c.se_mse, "normalized": c.normalized,
            }
            if c.mean_mse_B is not None:
                row["mean_B"] = c.mean_mse_B
                row["se_B"] = c.se_mse_B
            rows.append(row)
        return pd.DataFrame(rows)


class AlphaSweepConfig(BaseModel):
    """Barrido de α para el ajuste conjunto con λ elegido por validación cruzada"""
    model_config = ConfigDict(frozen=True)

    T: int = Field(default=1000, ge=2)
    M: int = Field(default=20, ge=1)
    s: int = Field(default=20, ge=0)
    K: int = Field(default=2, ge=2)
    sigma2_values: List[float] = Field(default_factory=lambda: [1.0, 2.0], min_length=1)
    alpha_grid: List[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)], min_length=1)
    lambda_coefs: List[float] = Field(
        default_factory=lambda: [0.04, 0.08, 0.16],
        min_length=1,
        description="Coeficientes c de la malla de λ = c·K·√(log M / T) para la validación cruzada",
    )
    trials: int = Field(default=10, ge=1)
    folds: int = Field(default=5, ge=1)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)

    @field_validator("alpha_grid")
    @classmethod
    def alphas_in_unit_interval(cls, v: List[float]) -> List[float]:
        if any(not 0 <= a <= 1 for a in v):
            raise ValueError("Todos los α deben estar en [0, 1]")
        return sorted(v)

    @field_validator("sigma2_values")
    @classmethod
    def positive_variances(cls, v: List[float]) -> List[float]:
        if any(x <= 0 for x in v):
            raise ValueError("Las varianzas σ² deben ser positivas")
        return v

    @model_validator(mode="after")
    def check_sparsity(self) -> "AlphaSweepConfig":
        if self.s > self.M * self.M:
            raise ValueError(f"s={self.s} excede el número de grupos M²={self.M * self.M}")
        return self

    @classmethod
    def full(cls, seed: Optional[int] = None) -> "AlphaSweepConfig":
        return cls(trials=20, lambda_coefs=[0.02, 0.04, 0.08, 0.16, 0.32],
                   seed=settings.DEFAULT_SEED if seed is None else seed)


class AlphaTrial(BaseModel):
    """Error de una repetición para un (σ², α)"""
    sigma2: float
    trial: int
    alpha: float
    lambda_: float
    mse_A: float
    mse_B: float


class AlphaSweepRow(BaseModel):
    sigma2: float
    alpha: float
    mean_mse_A: float
    se_mse_A: float
    mean_mse_B: float
    se_mse_B: float
    mean_lambda: float


class AlphaSweepResult(BaseModel):
    """Tabla por (σ², α) y registros por repetición"""
    config: AlphaSweepConfig
    rows: List[AlphaSweepRow]
    trials: List[AlphaTrial]

    def row(self, sigma2: float, alpha: float) -> AlphaSweepRow:
        for r in self.rows:
            if np.isclose(r.sigma2, sigma2) and np.isclose(r.alpha, alpha):
                return r
        raise KeyError(f"No hay fila para σ²={sigma2}, α={alpha}")

    def interior_dominates(self, sigma2: float) -> List[float]:
        """
        α interiores cuyo MSE medio de Â y de B̂ queda a la vez por debajo de las
        referencias de estimación separada (α = 1 para Â, α = 0 para B̂).
        """
        ref_A = self.row(sigma2, 1.0).mean_mse_A
        ref_B = self.row(sigma2, 0.0).mean_mse_B
        return [
            r.alpha for r in self.rows
            if np.isclose(r.sigma2, sigma2) and 0 < r.alpha < 1
            and r.mean_mse_A < ref_A and r.mean_mse_B < ref_B
        ]

    def best_alpha_for_A(self, sigma2: float, trial: Optional[int] = None) -> float:
        """α con menor MSE de Â (medio, o de una repetición concreta); empates hacia el menor α"""
        if trial is None:
            candidates = [(r.mean_mse_A, r.alpha) for r in self.rows if np.isclose(r.sigma2, sigma2)]
        else:
            candidates = [
                (t.mse_A, t.alpha) for t in self.trials
                if np.isclose(t.sigma2, sigma2) and t.trial == trial
            ]
        return min(candidates)[1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "sigma2": r.sigma2, "alpha": r.alpha,
                "mean_A": r.mean_mse_A, "se_A": r.se_mse_A,
                "mean_B": r.mean_mse_B, "se_B": r.se_mse_B,
                "mean_lambda": r.mean_lambda,
            }
            for r in self.rows
        ])


class MixtureStudyConfig(BaseModel):
    """Comparación de estimadores logístico-normal y multinomial en el modelo de mezcla"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    T: int = Field(default=10000, ge=2)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    threshold: float = Field(default=0.1, ge=0, lt=1)
    spec: Optional[MixtureSpec] = Field(default=None, description="Especificación; por defecto la de referencia")
    lambda_coef_ln: float = Field(default=0.08, gt=0, description="c fijo de λ^LN si no hay validación cruzada")
    lambda_coef_mn: float = Field(default=0.12, gt=0, description="c fijo de λ^MN si no hay validación cruzada")
    alpha: float = Field(default=0.4, ge=0, le=1, description="α fijo si no hay malla de α")
    fit_intercepts: bool = Field(default=True, description="Ajusta interceptos no penalizados")
    cv_lambda_coefs: Optional[List[float]] = Field(
        default_factory=lambda: [0.04, 0.08, 0.16],
        description="Malla de c para elegir λ por validación cruzada (error de predicción); None usa los c fijos",
    )
    cv_alpha_grid: Optional[List[float]] = Field(
        default_factory=lambda: [0.2, 0.4, 0.6],
        description="Malla de α del ajuste conjunto para la validación cruzada; None usa alpha",
    )
    cv_folds: int = Field(default=3, ge=1, description="Ventanas de la validación cruzada")

    @field_validator("cv_lambda_coefs")
    @classmethod
    def positive_coefs(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and (not v or any(c <= 0 for c in v)):
            raise ValueError("La malla de coeficientes de λ debe ser no vacía y positiva")
        return v

    @field_validator("cv_alpha_grid")
    @classmethod
    def alphas_in_unit_interval(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and (not v or any(not 0 <= a <= 1 for a in v)):
            raise ValueError("La malla de α debe ser no vacía y estar en [0, 1]")
        return v

    def resolved_spec(self) -> MixtureSpec:
        return self.spec if self.spec is not None else MixtureSpec.reference_default()

    @classmethod
    def full(cls, seed: Optional[int] = None) -> "MixtureStudyConfig":
        """Diez semillas, cinco ventanas y mallas más finas de λ y α"""
        first = settings.DEFAULT_SEED if seed is None else seed
        return cls(
            seeds=[first + i for i in range(10)],
            cv_lambda_coefs=[0.02, 0.04, 0.08, 0.16, 0.32],
            cv_alpha_grid=[0.2, 0.3, 0.4, 0.5, 0.6],
            cv_folds=5,
        )


class MixtureSeedReport(BaseModel):
    """Puntuaciones de aristas por semilla, separadas por grupo de nodos destino"""
    seed: int
    lambda_ln: float
    alpha_ln: float
    lambda_mn: float
    ln_m1: EdgeScore
    ln_m2: EdgeScore
    mn_m1: EdgeScore
    mn_m2: EdgeScore


class MixtureReport(BaseModel):
    config: MixtureStudyConfig
    seeds: List[MixtureSeedReport]

    def ln_wins_m1(self) -> int:
        """Semillas en que el F1 logístico-normal supera al multinomial en destinos M1"""
        return sum(r.ln_m1.f1 > r.mn_m1.f1 for r in self.seeds)

    def mn_wins_m2(self) -> int:
        """Semillas en que el F1 multinomial supera al logístico-normal en destinos M2"""
        return sum(r.mn_m2.f1 > r.ln_m2.f1 for r in self.seeds)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.seeds:
            for estimator, group, score, lam, alpha in (
                ("ln", "M1", r.ln_m1, r.lambda_ln, r.alpha_ln), ("ln", "M2", r.ln_m2, r.lambda_ln, r.alpha_ln),
                ("mn", "M1", r.mn_m1, r.lambda_mn, None), ("mn", "M2", r.mn_m2, r.lambda_mn, None),
            ):
                rows.append({
                    "seed": r.seed, "estimator": estimator, "targets": group, "lambda": lam, "alpha": alpha,
                    "precision": score.precision, "recall": score.recall, "f1": score.f1,
                    "n_true": score.n_true, "n_predicted": score.n_predicted,
                })
        return pd.DataFrame(rows)
