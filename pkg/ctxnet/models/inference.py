"""
Modelos de inferencia: listas de aristas extraídas de una red y modelos de referencia
(proceso constante y red independiente del contexto).
"""
from enum import Enum
from typing import List, Literal, Optional, Set, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ctxnet.core.exceptions import ValidationError

EdgeKey = Tuple[int, int, int, Optional[int]]


class EdgeMode(str, Enum):
    """Tipo de red de la que se extraen aristas"""
    ABSOLUTE = "abs"
    RELATIVE = "rel"
    OCCURRENCE = "occ"


class EdgeSign(str, Enum):
    STIMULATORY = "stimulatory"
    INHIBITORY = "inhibitory"


class Edge(BaseModel):
    """Arista dirigida source (m') → target (m) para el par de categorías (k_in, k_out)"""
    model_config = ConfigDict(frozen=True)

    source: int = Field(..., ge=0, description="Nodo origen m'")
    target: int = Field(..., ge=0, description="Nodo destino m")
    k_in: int = Field(..., ge=0, description="Categoría del evento origen k'")
    k_out: Optional[int] = Field(default=None, ge=0, description="Categoría afectada k (None para ocurrencia)")
    weight: float = Field(..., ge=-1.0, le=1.0, description="Peso normalizado")
    raw_weight: float = Field(..., description="Valor original del tensor")
    sign: EdgeSign

    @property
    def key(self) -> EdgeKey:
        return (self.source, self.target, self.k_in, self.k_out)


class EdgeList(BaseModel):
    """Aristas normalizadas por el máximo |valor| global y filtradas por umbral"""
    mode: EdgeMode
    threshold: float = Field(..., ge=0, lt=1, description="Umbral sobre |peso normalizado|")
    scale: float = Field(default=0.0, ge=0, description="Máximo |valor| usado para normalizar")
    edges: List[Edge] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_weights(self) -> "EdgeList":
        for edge in self.edges:
            if abs(edge.weight) <= self.threshold:
                raise ValidationError(
                    f"La arista {edge.key} tiene |peso| {abs(edge.weight):.6g} ≤ umbral {self.threshold}",
                    "edges",
                )
        if self.edges and not np.isclose(max(abs(e.weight) for e in self.edges), 1.0):
            raise ValidationError("El máximo |peso| de una lista no vacía debe ser 1", "edges")
        return self

    def __len__(self) -> int:
        return len(self.edges)

    def support(self, targets: Optional[Set[int]] = None) -> Set[EdgeKey]:
        """Conjunto de claves (source, target, k_in, k_out), opcionalmente restringido a ciertos destinos"""
        return {e.key for e in self.edges if targets is None or e.target in targets}

    def to_graph(self) -> nx.MultiDiGraph:
        """Grafo dirigido múltiple con una arista por par de categorías"""
        graph = nx.MultiDiGraph(mode=self.mode.value, threshold=self.threshold)
        for edge in self.edges:
            graph.add_node(f"n{edge.source}")
            graph.add_node(f"n{edge.target}")
            label = f"{edge.k_in}->{edge.k_out}" if edge.k_out is not None else f"{edge.k_in}->occ"
            graph.add_edge(
                f"n{edge.source}",
                f"n{edge.target}",
                label=label,
                weight=round(edge.weight, 6),
                raw_weight=round(edge.raw_weight, 6),
                style="solid" if edge.sign == EdgeSign.STIMULATORY else "dashed",
                penwidth=round(1.0 + 3.0 * abs(edge.weight), 3),
            )
        return graph

    def to_dot(self) -> str:
        """Texto DOT (pydot) con pesos crudos y normalizados como atributos"""
        graph = self.to_graph()
        graph.graph = {}
        return nx.nx_pydot.to_pydot(graph).to_string()


class EdgeScore(BaseModel):
    """Precisión, exhaustividad y F1 de un soporte estimado frente al verdadero"""
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    f1: float = Field(..., ge=0, le=1)
    n_true: int = Field(..., ge=0)
    n_predicted: int = Field(..., ge=0)
    n_hits: int = Field(..., ge=0)


class PredictionReport(BaseModel):
    """Errores de predicción un paso adelante sobre el tramo de evaluación"""
    metric: Literal["mn", "ln"]
    holdout_start: int = Field(..., ge=0)
    prediction_error: float = Field(..., ge=0)
    baseline: Optional[str] = None
    baseline_error: Optional[float] = Field(default=None, ge=0)


class BaselineKind(str, Enum):
    CONSTANT_PROCESS = "constant"
    CONTEXT_INDEPENDENT = "context-independent"


class BaselineModel(BaseModel):
    """
    Modelo de referencia sin red de contexto.

    - ConstantProcess: ocurrencia y distribución de categorías constantes en el tiempo.
    - ContextIndependent: ocurrencia por autorregresión de Bernoulli penalizada sobre
      los indicadores de evento, categorías constantes.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: BaselineKind
    family: Literal["mn", "ln"]
    occurrence_q: Optional[np.ndarray] = Field(default=None, description="q_m constante (M,)")
    occurrence_B: Optional[np.ndarray] = Field(default=None, description="Red de ocurrencia (M, M)")
    occurrence_eta: Optional[np.ndarray] = Field(default=None, description="Desplazamientos (M,)")
    category_probs: Optional[np.ndarray] = Field(default=None, description="P(categoría k | evento) (M, K)")
    mean_log_ratio: Optional[np.ndarray] = Field(default=None, description="Media de log-cocientes (M, K-1)")

    @field_validator(
        "occurrence_q", "occurrence_B", "occurrence_eta", "category_probs", "mean_log_ratio", mode="before"
    )
    @classmethod
    def to_array(cls, v):
        if v is None:
            return None
        arr = np.array(v, dtype=float, copy=True)
        if not np.isfinite(arr).all():
            raise ValidationError("Parámetros del modelo de referencia no finitos", "baseline")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_params(self) -> "BaselineModel":
        if self.kind == BaselineKind.CONSTANT_PROCESS and self.occurrence_q is None:
            raise ValidationError("El proceso constante requiere occurrence_q", "occurrence_q")
        if self.kind == BaselineKind.CONTEXT_INDEPENDENT and (
            self.occurrence_B is None or self.occurrence_eta is None
        ):
            raise ValidationError("La red independiente del contexto requiere occurrence_B y occurrence_eta", "occurrence_B")
        if self.occurrence_q is not None and ((self.occurrence_q < 0) | (self.occurrence_q > 1)).any():
            raise ValidationError("occurrence_q debe estar en [0, 1]", "occurrence_q")
        if self.family == "mn":
            if self.category_probs is None:
                raise ValidationError("La familia multinomial requiere category_probs", "category_probs")
            if (self.category_probs < 0).any() or not np.allclose(self.category_probs.sum(axis=1), 1.0):
                raise ValidationError("Cada fila de category_probs debe ser una distribución", "category_probs")
        elif self.mean_log_ratio is None:
            raise ValidationError("La familia logístico-normal requiere mean_log_ratio", "mean_log_ratio")
        return self

    @property
    def M(self) -> int:
        if self.occurrence_q is not None:
            return self.occurrence_q.shape[0]
        return self.occurrence_eta.shape[0]
