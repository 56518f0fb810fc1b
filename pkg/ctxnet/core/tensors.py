"""
Tipos de dominio compartidos por todos los módulos: panel de eventos,
tensores de influencia, índice de grupos e interceptos.

Convención de índices: los tensores se guardan en orden [m, k, m', k']
(fila mayor), de modo que la fibra A[m, ...] de cada nodo destino es contigua.
"""
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ctxnet.core.config import settings
from ctxnet.core.exceptions import ValidationError, DimensionError, check_shape

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence]


class PanelKind(str, Enum):
    """Tipo de dato observado en cada fila (t, m) con evento"""
    CATEGORICAL = "categorical"
    COMPOSITIONAL = "compositional"


class TensorRole(str, Enum):
    """Uso de un tensor de influencia; determina K_out"""
    MULTINOMIAL = "multinomial"
    LOGISTIC_NORMAL = "logistic_normal"
    OCCURRENCE = "occurrence"


# ============================================================================
# Validación de filas del panel
# ============================================================================

def find_panel_violations(
    data: np.ndarray,
    kind: PanelKind,
    tol: Optional[float] = None,
    allow_boundary: bool = False,
) -> List[Tuple[int, int, str]]:
    """
    Busca filas (t, m) que violan los invariantes del panel, sin lanzar excepciones.

    Args:
        data: Tensor [t, m, k]
        kind: Categórico o composicional
        tol: Tolerancia del símplex (por defecto la de configuración)
        allow_boundary: Si True, las filas composicionales pueden tener ceros
            (la fila t = 0 siempre puede tenerlos)

    Returns:
        Lista de (t, nodo, motivo)
    """
    tol = settings.SIMPLEX_TOL if tol is None else tol
    violations: List[Tuple[int, int, str]] = []

    bad_values = ~np.isfinite(data).all(axis=-1) | (np.nan_to_num(data, nan=-1.0) < 0).any(axis=-1)
    for t, m in zip(*np.nonzero(bad_values)):
        violations.append((int(t), int(m), "valores negativos o no finitos"))

    clean = np.where(bad_values[..., None], 0.0, data)
    sums = clean.sum(axis=-1)
    nonzero = (clean != 0).any(axis=-1) & ~bad_values

    if kind == PanelKind.CATEGORICAL:
        ones = (clean == 1.0).sum(axis=-1)
        nonzero_entries = (clean != 0).sum(axis=-1)
        bad = nonzero & ~((ones == 1) & (nonzero_entries == 1))
        for t, m in zip(*np.nonzero(bad)):
            violations.append((int(t), int(m), "la fila no es un vector one-hot"))
    else:
        off_simplex = nonzero & (np.abs(sums - 1.0) > tol)
        for t, m in zip(*np.nonzero(off_simplex)):
            violations.append((int(t), int(m), f"la fila suma {sums[t, m]:.12g} y no 1"))
        if not allow_boundary:
            # X^0 solo actúa como covariable: puede estar en la frontera del símplex
            has_zero = nonzero & ~off_simplex & (clean <= 0).any(axis=-1)
            has_zero[0] = False
            for t, m in zip(*np.nonzero(has_zero)):
                violations.append((int(t), int(m), "la fila composicional tiene entradas nulas"))

    violations.sort()
    return violations


class EventPanel(BaseModel):
    """Panel de observaciones X^t ∈ R^{M×K}, t = 0..T"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray = Field(..., description="Tensor real indexado [t, m, k]")
    kind: PanelKind = Field(..., description="Categórico (one-hot) o composicional (símplex)")
    allow_boundary: bool = Field(
        default=False,
        description="Permite entradas nulas en filas composicionales (datos ingeridos)"
    )

    @field_validator("data", mode="before")
    @classmethod
    def to_array(cls, v):
        """Convierte a ndarray float de 3 dimensiones (copia propia)"""
        arr = np.array(v, dtype=float, copy=True)
        if arr.ndim != 3:
            raise ValidationError(f"El panel debe tener 3 dimensiones [t, m, k], tiene {arr.ndim}", "data")
        if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValidationError(f"El panel no puede estar vacío: forma {arr.shape}", "data")
        return arr

    @model_validator(mode="after")
    def check_rows(self) -> "EventPanel":
        """Valida cada fila y renormaliza exactamente las filas composicionales"""
        violations = find_panel_violations(self.data, self.kind, allow_boundary=self.allow_boundary)
        if violations:
            t, m, reason = violations[0]
            raise ValidationError(
                f"{len(violations)} filas inválidas en el panel; primera (t={t}, nodo={m}): {reason}",
                "data",
            )
        if self.kind == PanelKind.COMPOSITIONAL:
            sums = self.data.sum(axis=-1, keepdims=True)
            np.divide(self.data, sums, out=self.data, where=sums > 0)
        self.data.setflags(write=False)
        return self

    @property
    def T(self) -> int:
        return self.data.shape[0] - 1

    @property
    def M(self) -> int:
        return self.data.shape[1]

    @property
    def K(self) -> int:
        return self.data.shape[2]

    @property
    def occurred(self) -> np.ndarray:
        """Indicador 1{X^t_m ≠ 0}, forma [t, m]"""
        return (self.data != 0).any(axis=-1)

    @property
    def event_counts(self) -> np.ndarray:
        """T_m = Σ_{t=1}^T 1{X^t_m ≠ 0}"""
        return self.occurred[1:].sum(axis=0)

    @property
    def event_frequencies(self) -> np.ndarray:
        """T_m / T por nodo"""
        return self.event_counts / max(self.T, 1)

    def covariates(self) -> np.ndarray:
        """X^t para t = 0..T-1 aplanado a [t, m'·K + k']"""
        return self.data[:-1].reshape(self.T, self.M * self.K)

    def targets(self) -> np.ndarray:
        """X^{t+1} para t = 0..T-1, forma [t, m, k]"""
        return self.data[1:]

    def window(self, start: int, stop: int) -> "EventPanel":
        """
        Sub-panel X^{start..stop} (ambos incluidos).

        Args:
            start: Primer paso de tiempo
            stop: Último paso de tiempo

        Returns:
            Panel con stop - start + 1 pasos
        """
        if not 0 <= start <= stop <= self.T:
            raise ValidationError(f"Ventana [{start}, {stop}] fuera del rango 0..{self.T}", "window")
        return EventPanel.model_construct(
            data=self.data[start:stop + 1],
            kind=self.kind,
            allow_boundary=self.allow_boundary,
        )


# ============================================================================
# Tensores de influencia, interceptos y grupos
# ============================================================================

class InfluenceTensor(BaseModel):
    """Tensor de influencia indexado [m, k, m', k'] (log-odds por unidad de evento)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray = Field(..., description="Tensor real (M, K_out, M, K_in)")

    @field_validator("data", mode="before")
    @classmethod
    def to_array(cls, v):
        arr = np.array(v, dtype=float, copy=True)
        if arr.ndim != 4:
            raise ValidationError(f"El tensor de influencia debe tener 4 dimensiones, tiene {arr.ndim}", "A")
        if arr.shape[0] != arr.shape[2]:
            raise DimensionError("A", (arr.shape[0], arr.shape[1], arr.shape[0], arr.shape[3]), arr.shape)
        if not np.isfinite(arr).all():
            raise ValidationError("El tensor de influencia contiene valores no finitos", "A")
        arr.setflags(write=False)
        return arr

    @property
    def M(self) -> int:
        return self.data.shape[0]

    @property
    def K_out(self) -> int:
        return self.data.shape[1]

    @property
    def K_in(self) -> int:
        return self.data.shape[3]

    @classmethod
    def zeros(cls, M: int, K_out: int, K_in: int) -> "InfluenceTensor":
        return cls(data=np.zeros((M, K_out, M, K_in)))

    def check_role(self, role: TensorRole, K: int) -> None:
        """Verifica que K_out corresponde al uso del tensor"""
        expected_out = {
            TensorRole.MULTINOMIAL: K,
            TensorRole.LOGISTIC_NORMAL: K - 1,
            TensorRole.OCCURRENCE: 1,
        }[role]
        check_shape(f"A ({role.value})", self.data.shape, (self.M, expected_out, self.M, K))


class Intercepts(BaseModel):
    """Interceptos ν [m, k] y desplazamientos η [m] de ocurrencia"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    nu: np.ndarray = Field(..., description="Matriz (M, K_out)")
    eta: Optional[np.ndarray] = Field(default=None, description="Vector (M,) o None")

    @field_validator("nu", mode="before")
    @classmethod
    def nu_matrix(cls, v):
        arr = np.array(v, dtype=float, copy=True)
        if arr.ndim != 2 or not np.isfinite(arr).all():
            raise ValidationError("nu debe ser una matriz finita (M, K_out)", "nu")
        arr.setflags(write=False)
        return arr

    @field_validator("eta", mode="before")
    @classmethod
    def eta_vector(cls, v):
        if v is None:
            return None
        arr = np.array(v, dtype=float, copy=True).reshape(-1)
        if not np.isfinite(arr).all():
            raise ValidationError("eta debe ser un vector finito", "eta")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_lengths(self) -> "Intercepts":
        if self.eta is not None:
            check_shape("eta", self.eta.shape, (self.nu.shape[0],))
        return self

    @classmethod
    def zeros(cls, M: int, K_out: int, with_eta: bool = False) -> "Intercepts":
        return cls(nu=np.zeros((M, K_out)), eta=np.zeros(M) if with_eta else None)


def _as_array(x) -> np.ndarray:
    """Acepta InfluenceTensor o array-like"""
    if isinstance(x, InfluenceTensor):
        return x.data
    return np.asarray(x, dtype=float)


def tensor_fibers(A) -> np.ndarray:
    """Vista por grupos [m, m', K_out·K_in] de un tensor [m, k, m', k']"""
    arr = _as_array(A)
    if arr.ndim != 4:
        raise ValidationError(f"Se esperaba un tensor de 4 dimensiones, tiene {arr.ndim}", "A")
    M, K_out, M2, K_in = arr.shape
    return arr.transpose(0, 2, 1, 3).reshape(M, M2, K_out * K_in)


def fibers_to_tensor(fibers: np.ndarray, K_out: int, K_in: int) -> np.ndarray:
    """Inversa de tensor_fibers: [r, m', K_out·K_in] -> [r, k, m', k']"""
    R, M = fibers.shape[:2]
    return fibers.reshape(R, M, K_out, K_in).transpose(0, 2, 1, 3)


class GroupIndex(BaseModel):
    """Partición de las entradas en grupos (m, m'): fibras A[m, :, m', :] (+ B[m, m', :])"""
    model_config = ConfigDict(frozen=True)

    M: int = Field(..., ge=1, description="Número de nodos")

    @classmethod
    def for_nodes(cls, M: int) -> "GroupIndex":
        return cls(M=M)

    def fibers(self, *tensors) -> np.ndarray:
        """
        Concatena las fibras de varios tensores por grupo.

        Returns:
            Array [m, m', d] con d la suma de K_out·K_in de cada tensor
        """
        parts = [tensor_fibers(t) for t in tensors]
        for part in parts:
            check_shape("grupos", part.shape[:2], (self.M, self.M))
        return np.concatenate(parts, axis=-1)


# ============================================================================
# Normas de grupo
# ============================================================================

def group_norm_R(A) -> float:
    """‖A‖_R = Σ_{m,m'} ‖A[m, :, m', :]‖_F"""
    return float(np.linalg.norm(tensor_fibers(A), axis=-1).sum())


def _check_joint_shapes(A: np.ndarray, B: np.ndarray) -> None:
    if A.ndim != 4 or B.ndim != 4:
        raise ValidationError("A y B deben ser tensores de 4 dimensiones", "A,B")
    M, _, _, K = B.shape
    check_shape("B", B.shape, (M, 1, M, K))
    check_shape("A", A.shape, (M, K - 1, M, K))


def group_norm_R_alpha(A, B, alpha: float) -> float:
    """
    R_α(A, B) = Σ_{m,m'} (α‖A[m,:,m',:]‖_F² + (1−α)‖B[m,m',:]‖_2²)^{1/2}.

    Args:
        A: Tensor (M, K-1, M, K)
        B: Tensor de ocurrencia (M, 1, M, K)
        alpha: Peso en [0, 1]
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha debe estar en [0, 1], se recibió {alpha}", "alpha")
    a, b = _as_array(A), _as_array(B)
    _check_joint_shapes(a, b)
    sq = alpha * np.square(tensor_fibers(a)).sum(axis=-1) + (1.0 - alpha) * np.square(tensor_fibers(b)).sum(axis=-1)
    return float(np.sqrt(sq).sum())


def frobenius_sq_diff(A, B) -> float:
    """‖A − B‖_F²"""
    a, b = _as_array(A), _as_array(B)
    check_shape("B", b.shape, a.shape)
    return float(np.square(a - b).sum())
