"""
Especificación del modelo de mezcla sintético: nodos de membresía mixta (M1,
logístico-normal con ocurrencia dinámica) y nodos de categoría foco (M2,
multinomial contaminado a logístico-normal).
"""
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator
from scipy.special import logsumexp

from ctxnet.core.exceptions import ValidationError, check_shape
from ctxnet.models.network import DynamicOccurrence, LogisticNormalModel

_ARRAY_FIELDS = ("A_ln", "B", "nu_ln", "eta", "A_mn", "nu_mn")


class MixtureSpec(BaseModel):
    """Parámetros verdaderos del modelo de mezcla (índices desde 0)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    M: int = Field(..., ge=1, description="Número de nodos")
    K: int = Field(..., ge=2, description="Número de categorías")
    m1: List[int] = Field(..., description="Nodos logístico-normales")
    m2: List[int] = Field(..., description="Nodos multinomiales contaminados")
    A_ln: np.ndarray = Field(..., description="A^LN (M, K-1, M, K); solo filas de M1")
    B: np.ndarray = Field(..., description="B^Bern (M, 1, M, K); solo filas de M1")
    nu_ln: np.ndarray = Field(..., description="ν^LN (M, K-1)")
    eta: np.ndarray = Field(..., description="η^Bern (M,)")
    A_mn: np.ndarray = Field(..., description="A^MN (M, K, M, K); solo filas de M2")
    nu_mn: np.ndarray = Field(..., description="ν^MN (M, K)")
    sigma_contam: float = Field(default=0.2, gt=0, description="Ruido de contaminación σ")
    sigma2_ln: float = Field(default=1.0, gt=0, description="Varianza σ² del ruido logístico-normal de M1 (Σ = σ²I)")

    @field_validator(*_ARRAY_FIELDS, mode="before")
    @classmethod
    def to_array(cls, v):
        arr = np.array(v, dtype=float, copy=True)
        if not np.isfinite(arr).all():
            raise ValidationError("La especificación de mezcla contiene valores no finitos")
        arr.setflags(write=False)
        return arr

    @field_serializer(*_ARRAY_FIELDS)
    def serialize_array(self, v: np.ndarray):
        return v.tolist()

    @model_validator(mode="after")
    def check_partition(self) -> "MixtureSpec":
        M, K = self.M, self.K
        s1, s2 = set(self.m1), set(self.m2)
        if s1 & s2:
            raise ValidationError("M1 y M2 deben ser disjuntos", "m1")
        if s1 | s2 != set(range(M)) or len(s1) + len(s2) != len(self.m1) + len(self.m2):
            raise ValidationError("M1 ∪ M2 debe cubrir exactamente los nodos 0..M-1", "m2")
        check_shape("A_ln", self.A_ln.shape, (M, K - 1, M, K))
        check_shape("B", self.B.shape, (M, 1, M, K))
        check_shape("nu_ln", self.nu_ln.shape, (M, K - 1))
        check_shape("eta", self.eta.shape, (M,))
        check_shape("A_mn", self.A_mn.shape, (M, K, M, K))
        check_shape("nu_mn", self.nu_mn.shape, (M, K))
        return self

    @classmethod
    def reference_default(cls, sigma_contam: float = 0.2) -> "MixtureSpec":
        """
        Valores de referencia: 17 nodos, 5 categorías; nodos 0-4 en M1 y 5-16 en M2
        (grupos de tres nodos por categoría foco). La última categoría es la base
        y no recibe ni ejerce influencia.
        """
        M, K = 17, 5
        A_ln = np.zeros((M, K - 1, M, K))
        A_mn = np.zeros((M, K, M, K))
        heads = [5, 8, 11, 14]
        for c, head in enumerate(heads):
            # el nodo 0 recibe de la cabeza de cada grupo foco, en su categoría
            A_ln[0, c, head, c] = 0.5
            # la cabeza de cada grupo recibe del nodo 0 en la categoría foco
            A_mn[head, c, 0, c] = 2.0
            # los otros dos nodos del grupo reciben de la cabeza
            A_mn[head + 1, c, head, c] = 0.7
            A_mn[head + 2, c, head, c] = 0.7
        for m in range(1, 5):
            for k in range(K - 1):
                A_ln[m, k, 0, k] = 1.0

        B = np.zeros((M, 1, M, K))
        for k in range(K - 1):
            B[:, 0, :, k] = A_ln[:, k, :, k]

        nu_ln = np.zeros((M, K - 1))
        nu_ln[:5] = 1.0
        eta = np.zeros(M)
        eta[:5] = np.log(4.0)
        nu_mn = np.zeros((M, K))
        for c, head in enumerate(heads):
            row = np.full(K, 0.5)
            row[c] = 1.0
            nu_mn[head:head + 3] = row

        return cls(
            M=M, K=K, m1=list(range(5)), m2=list(range(5, M)),
            A_ln=A_ln, B=B, nu_ln=nu_ln, eta=eta, A_mn=A_mn, nu_mn=nu_mn,
            sigma_contam=sigma_contam,
        )

    def true_relative_network(self) -> np.ndarray:
        """
        Red relativa verdadera (M, K-1, M, K): filas M1 de A^LN y filas M2 de la
        transformación absoluta→relativa de A^MN.
        """
        rel = np.zeros((self.M, self.K - 1, self.M, self.K))
        rel[self.m1] = self.A_ln[self.m1]
        mn_rel = self.A_mn[:, :-1] - self.A_mn[:, -1:]
        rel[self.m2] = mn_rel[self.m2]
        return rel

    def as_logistic_normal(self) -> LogisticNormalModel:
        """
        Modelo logístico-normal equivalente en formato de red relativa, apto para
        exportar y predecir. Las filas M2 usan los parámetros relativos de su
        multinomial; su ocurrencia se fija en la probabilidad de evento con X = 0
        (B nula, η = log Σ_k e^{ν_k}), pues la multinomial no es logística en X.
        """
        nu = np.array(self.nu_ln, dtype=float)
        nu[self.m2] = (self.nu_mn[:, :-1] - self.nu_mn[:, -1:])[self.m2]
        B = np.zeros_like(self.B)
        B[self.m1] = self.B[self.m1]
        eta = np.array(self.eta, dtype=float)
        eta[self.m2] = logsumexp(self.nu_mn[self.m2], axis=1)
        return LogisticNormalModel(
            A=self.true_relative_network(), nu=nu, Sigma=self.sigma2_ln * np.eye(self.K - 1),
            occurrence=DynamicOccurrence(B=B, eta=eta),
        )
