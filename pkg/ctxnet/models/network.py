"""
Modelos de red: multinomial, logístico-normal (con ocurrencia constante o dinámica)
y el documento JSON con que se persisten.
"""
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ctxnet.core.exceptions import ValidationError, check_shape
from ctxnet.core.tensors import InfluenceTensor, Intercepts, TensorRole


def _matrix(v, field: str, ndim: int) -> np.ndarray:
    """Helper para convertir a ndarray finito de solo lectura"""
    arr = np.array(v, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValidationError(f"{field} debe tener {ndim} dimensiones, tiene {arr.ndim}", field)
    if not np.isfinite(arr).all():
        raise ValidationError(f"{field} contiene valores no finitos", field)
    arr.setflags(write=False)
    return arr


def _tensor(v) -> InfluenceTensor:
    return v if isinstance(v, InfluenceTensor) else InfluenceTensor(data=v)


class InitSpec(BaseModel):
    """Distribución de X^0: e_k con probabilidad p0/K cada una, cero con 1 − p0"""
    p0: float = Field(default=0.8, ge=0, le=1, description="Probabilidad de evento inicial")


class MultinomialModel(BaseModel):
    """Modelo multinomial: A^MN (M, K, M, K) e interceptos ν^MN (M, K)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: InfluenceTensor
    nu: np.ndarray

    @field_validator("A", mode="before")
    @classmethod
    def to_tensor(cls, v):
        return _tensor(v)

    @field_validator("nu", mode="before")
    @classmethod
    def to_nu(cls, v):
        return _matrix(v, "nu", 2)

    @model_validator(mode="after")
    def check_dims(self) -> "MultinomialModel":
        self.A.check_role(TensorRole.MULTINOMIAL, self.A.K_in)
        check_shape("nu", self.nu.shape, (self.M, self.K))
        return self

    @property
    def M(self) -> int:
        return self.A.M

    @property
    def K(self) -> int:
        return self.A.K_in

    @property
    def intercepts(self) -> Intercepts:
        return Intercepts(nu=self.nu)


class ConstantQ(BaseModel):
    """Probabilidad de ocurrencia constante q_m ∈ (0, 1]"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: Literal["constant"] = "constant"
    q: np.ndarray

    @field_validator("q", mode="before")
    @classmethod
    def to_q(cls, v):
        arr = _matrix(np.reshape(v, -1), "q", 1)
        if (arr <= 0).any() or (arr > 1).any():
            raise ValidationError("Cada q_m debe estar en (0, 1]", "q")
        return arr


class DynamicOccurrence(BaseModel):
    """Ocurrencia q_m^{t+1} = logistic(⟨B_m, X^t⟩ + η_m)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: Literal["dynamic"] = "dynamic"
    B: InfluenceTensor
    eta: np.ndarray

    @field_validator("B", mode="before")
    @classmethod
    def to_tensor(cls, v):
        return _tensor(v)

    @field_validator("eta", mode="before")
    @classmethod
    def to_eta(cls, v):
        return _matrix(np.reshape(v, -1), "eta", 1)

    @model_validator(mode="after")
    def check_dims(self) -> "DynamicOccurrence":
        self.B.check_role(TensorRole.OCCURRENCE, self.B.K_in)
        check_shape("eta", self.eta.shape, (self.B.M,))
        return self


Occurrence = Union[ConstantQ, DynamicOccurrence]


class LogisticNormalModel(BaseModel):
    """
    Modelo logístico-normal: A^LN (M, K−1, M, K), ν^LN (M, K−1), covarianza Σ
    y modelo de ocurrencia (q constante o red B^Bern dinámica).

    Σ es un parámetro de ruido desconocido para los estimadores; puede ser None
    en modelos ajustados, pero es obligatorio para simular.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: InfluenceTensor
    nu: np.ndarray
    Sigma: Optional[np.ndarray] = None
    occurrence: Occurrence = Field(..., discriminator="kind")

    @field_validator("A", mode="before")
    @classmethod
    def to_tensor(cls, v):
        return _tensor(v)

    @field_validator("nu", mode="before")
    @classmethod
    def to_nu(cls, v):
        return _matrix(v, "nu", 2)

    @field_validator("Sigma", mode="before")
    @classmethod
    def to_sigma(cls, v):
        if v is None:
            return None
        arr = _matrix(np.atleast_2d(v), "Sigma", 2)
        if arr.shape[0] != arr.shape[1] or not np.allclose(arr, arr.T):
            raise ValidationError("Sigma debe ser una matriz cuadrada simétrica", "Sigma")
        if np.linalg.eigvalsh(arr).min() <= 0:
            raise ValidationError("Sigma debe ser definida positiva", "Sigma")
        return arr

    @model_validator(mode="after")
    def check_dims(self) -> "LogisticNormalModel":
        K = self.A.K_in
        if K < 2:
            raise ValidationError("El modelo logístico-normal requiere K ≥ 2", "A")
        self.A.check_role(TensorRole.LOGISTIC_NORMAL, K)
        check_shape("nu", self.nu.shape, (self.M, K - 1))
        if self.Sigma is not None:
            check_shape("Sigma", self.Sigma.shape, (K - 1, K - 1))
        if isinstance(self.occurrence, ConstantQ):
            check_shape("q", self.occurrence.q.shape, (self.M,))
        else:
            check_shape("B", self.occurrence.B.data.shape, (self.M, 1, self.M, K))
        return self

    @property
    def M(self) -> int:
        return self.A.M

    @property
    def K(self) -> int:
        return self.A.K_in

    @property
    def intercepts(self) -> Intercepts:
        eta = self.occurrence.eta if isinstance(self.occurrence, DynamicOccurrence) else None
        return Intercepts(nu=self.nu, eta=eta)


NetworkModel = Union[MultinomialModel, LogisticNormalModel]


class ModelDocument(BaseModel):
    """Documento JSON de un modelo; tensores aplanados en orden [m, k, m', k']"""
    kind: Literal["mn", "ln"] = Field(..., description="Familia del modelo")
    M: int = Field(..., ge=1)
    K: int = Field(..., ge=1)
    K_out: int = Field(..., ge=1)
    A: List[float]
    nu: List[float]
    eta: Optional[List[float]] = None
    Sigma: Optional[List[float]] = None
    q: Optional[List[float]] = None
    B: Optional[List[float]] = None

    @classmethod
    def from_model(cls, model: NetworkModel) -> "ModelDocument":
        """Construye el documento a partir de un modelo validado"""
        if isinstance(model, MultinomialModel):
            return cls(
                kind="mn", M=model.M, K=model.K, K_out=model.K,
                A=model.A.data.ravel().tolist(), nu=model.nu.ravel().tolist(),
            )
        occ = model.occurrence
        return cls(
            kind="ln", M=model.M, K=model.K, K_out=model.K - 1,
            A=model.A.data.ravel().tolist(),
            nu=model.nu.ravel().tolist(),
            Sigma=None if model.Sigma is None else model.Sigma.ravel().tolist(),
            q=occ.q.tolist() if isinstance(occ, ConstantQ) else None,
            eta=occ.eta.tolist() if isinstance(occ, DynamicOccurrence) else None,
            B=occ.B.data.ravel().tolist() if isinstance(occ, DynamicOccurrence) else None,
        )

    def to_model(self) -> NetworkModel:
        """Reconstruye el modelo validando todas las dimensiones"""
        M, K, K_out = self.M, self.K, self.K_out
        try:
            A = np.reshape(self.A, (M, K_out, M, K))
            nu = np.reshape(self.nu, (M, K_out))
            B = None if self.B is None else np.reshape(self.B, (M, 1, M, K))
            Sigma = None if self.Sigma is None else np.reshape(self.Sigma, (K - 1, K - 1))
        except ValueError as e:
            raise ValidationError(f"Longitudes inconsistentes en el documento del modelo: {e}", "A")
        if self.kind == "mn":
            return MultinomialModel(A=A, nu=nu)
        if B is not None:
            if self.eta is None:
                raise ValidationError("Un modelo con red de ocurrencia B requiere eta", "eta")
            occurrence = DynamicOccurrence(B=B, eta=self.eta)
        elif self.q is not None:
            occurrence = ConstantQ(q=self.q)
        else:
            raise ValidationError("Un modelo logístico-normal requiere q o (B, eta)", "q")
        return LogisticNormalModel(A=A, nu=nu, Sigma=Sigma, occurrence=occurrence)
