"""
Servicio de Objetivo - Funciones de pérdida, enlaces y gradientes analíticos
de los tres estimadores (multinomial, logístico-normal y Bernoulli)

Cada pérdida se evalúa por bloques de nodos destino (`*_node_terms`) y la
pérdida pública es la suma de los términos por nodo, en orden fijo.
"""
from typing import Optional, Sequence, Tuple
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit, logsumexp, softmax
from scipy.stats import multivariate_normal

from ctxnet.core.base_service import BaseService, service_operation
from ctxnet.core.exceptions import ValidationError, check_shape
from ctxnet.core.tensors import EventPanel, PanelKind

logger = logging.getLogger(__name__)

NodeTerms = Tuple[np.ndarray, np.ndarray, np.ndarray]


# ============================================================================
# Enlaces
# ============================================================================

def _append_zero(x: np.ndarray) -> np.ndarray:
    """Añade la coordenada implícita 0 (ranura sin evento / categoría base)"""
    x = np.asarray(x, dtype=float)
    return np.concatenate([x, np.zeros(x.shape[:-1] + (1,))], axis=-1)


def multinomial_link(x) -> float:
    """
    f(x) = log(Σ_i e^{x_i} + 1), estable frente a desbordamiento.

    Acepta también arreglos [..., K] y devuelve un valor por fila.
    """
    value = logsumexp(_append_zero(x), axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def multinomial_link_grad(x) -> np.ndarray:
    """∇f(x)_i = e^{x_i} / (Σ_j e^{x_j} + 1)"""
    return softmax(_append_zero(x), axis=-1)[..., :-1]


def alr_inverse(y) -> np.ndarray:
    """
    Transformación logística aditiva: log-cocientes (…, K−1) → símplex (…, K)
    con la última categoría como base.
    """
    return softmax(_append_zero(y), axis=-1)


# ============================================================================
# Panel de log-cocientes
# ============================================================================

class LogRatioPanel(BaseModel):
    """Y^t_{mk} = log(X^t_{mk} / X^t_{mK}) con máscara de ocurrencia"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    Y: np.ndarray = Field(..., description="Tensor [t, m, k], k < K-1")
    mask: np.ndarray = Field(..., description="Indicador de evento [t, m]")

    @model_validator(mode="after")
    def check_mask(self) -> "LogRatioPanel":
        check_shape("mask", self.mask.shape, self.Y.shape[:2])
        if np.any(self.Y[~self.mask] != 0):
            raise ValidationError("Y debe ser cero donde no hay evento", "Y")
        return self

    @property
    def T(self) -> int:
        return self.Y.shape[0] - 1


def log_ratio_transform(panel: EventPanel, clip_eps: float = 0.0) -> LogRatioPanel:
    """
    Calcula los log-cocientes respecto de la última categoría.

    Args:
        panel: Panel composicional
        clip_eps: Si > 0, las entradas menores se elevan a clip_eps y la fila se
            renormaliza antes de la transformación

    Returns:
        LogRatioPanel con filas nulas en cero y máscara falsa

    Raises:
        ValidationError: Entrada nula en una fila con evento y clip_eps = 0
    """
    if clip_eps < 0:
        raise ValidationError("clip_eps debe ser ≥ 0", "clip_eps")
    if panel.K < 2:
        raise ValidationError("La transformación de log-cocientes requiere K ≥ 2", "K")

    # solo las respuestas t ≥ 1 entran en las pérdidas; X^0 es covariable
    mask = panel.occurred.copy()
    mask[0] = False
    rows = panel.data[mask]
    if clip_eps > 0:
        clipped = rows < clip_eps
        if clipped.any():
            logger.warning(f"{int(clipped.sum())} entradas elevadas a clip_eps={clip_eps}")
        rows = np.maximum(rows, clip_eps)
        rows = rows / rows.sum(axis=1, keepdims=True)
    elif (rows <= 0).any():
        bad = np.argwhere(mask)[np.nonzero((rows <= 0).any(axis=1))[0][0]]
        raise ValidationError(
            f"Entrada nula en la fila con evento (t={bad[0]}, nodo={bad[1]}); use clip_eps > 0",
            "clip_eps",
        )

    Y = np.zeros(panel.data.shape[:2] + (panel.K - 1,))
    Y[mask] = np.log(rows[:, :-1]) - np.log(rows[:, -1:])
    return LogRatioPanel(Y=Y, mask=mask)


# ============================================================================
# Términos por nodo
# ============================================================================

def _node_list(M: int, nodes: Optional[Sequence[int]]) -> np.ndarray:
    return np.arange(M) if nodes is None else np.asarray(nodes, dtype=int)


def _intensities(W: np.ndarray, offsets: np.ndarray, Xprev: np.ndarray) -> np.ndarray:
    """⟨W_r, X^t⟩ + offset_r para todas las filas, forma (T, R, K_out)"""
    R, K_out, P = W.shape
    return (Xprev @ W.reshape(R * K_out, P).T).reshape(-1, R, K_out) + offsets[None]


def _outer_grad(resid: np.ndarray, Xprev: np.ndarray, T: int) -> np.ndarray:
    """(1/T) Σ_t resid^t ⊗ X^t, forma (R, K_out, P)"""
    _, R, K_out = resid.shape
    return (resid.reshape(-1, R * K_out).T @ Xprev).reshape(R, K_out, -1) / T


def multinomial_node_terms(
    W: np.ndarray, nu: np.ndarray, panel: EventPanel, nodes: Optional[Sequence[int]] = None
) -> NodeTerms:
    """
    Pérdida multinomial por nodo destino.

    Args:
        W: Filas A[m] aplanadas, forma (R, K, M·K)
        nu: Interceptos de esas filas (R, K)
        panel: Panel categórico
        nodes: Nodos destino de cada fila (por defecto 0..M-1)

    Returns:
        (valores (R,), gradientes (R, K, M·K), gradientes de interceptos (R, K))
    """
    idx = _node_list(panel.M, nodes)
    T = panel.T
    Xprev = panel.covariates()
    Xnext = panel.targets()[:, idx]
    mu = _intensities(W, nu, Xprev)
    extended = _append_zero(mu)
    values = (logsumexp(extended, axis=-1) - (mu * Xnext).sum(axis=-1)).sum(axis=0) / T
    resid = softmax(extended, axis=-1)[..., :-1] - Xnext
    return values, _outer_grad(resid, Xprev, T), resid.sum(axis=0) / T


def ln_node_terms(
    W: np.ndarray,
    nu: np.ndarray,
    lrpanel: LogRatioPanel,
    panel: EventPanel,
    nodes: Optional[Sequence[int]] = None,
) -> NodeTerms:
    """Pérdida cuadrática logístico-normal por nodo destino (W de forma (R, K-1, M·K))"""
    idx = _node_list(panel.M, nodes)
    T = panel.T
    Xprev = panel.covariates()
    Ynext = lrpanel.Y[1:, idx]
    mask = lrpanel.mask[1:, idx]
    mu = _intensities(W, nu, Xprev)
    resid = (Ynext - mu) * mask[..., None]
    values = 0.5 * np.square(resid).sum(axis=(0, 2)) / T
    return values, -_outer_grad(resid, Xprev, T), -resid.sum(axis=0) / T


def bernoulli_node_terms(
    V: np.ndarray, eta: np.ndarray, panel: EventPanel, nodes: Optional[Sequence[int]] = None
) -> NodeTerms:
    """Log-verosimilitud negativa de Bernoulli por nodo (V de forma (R, 1, M·K), eta (R, 1))"""
    idx = _node_list(panel.M, nodes)
    T = panel.T
    Xprev = panel.covariates()
    occ = panel.occurred[1:, idx].astype(float)[..., None]
    z = _intensities(V, eta, Xprev)
    values = (np.logaddexp(0.0, z) - z * occ).sum(axis=(0, 2)) / T
    resid = expit(z) - occ
    return values, _outer_grad(resid, Xprev, T), resid.sum(axis=0) / T


# ============================================================================
# Pérdidas públicas
# ============================================================================

def _rows(A: np.ndarray) -> np.ndarray:
    M, K_out, _, K_in = A.shape
    return A.reshape(M, K_out, M * K_in)


def _check_dims(A: np.ndarray, nu: np.ndarray, panel: EventPanel, K_out: int) -> None:
    M, K = panel.M, panel.K
    check_shape("A", A.shape, (M, K_out, M, K))
    check_shape("nu", nu.shape, (M, K_out))


def multinomial_loss(A, nu, panel: EventPanel) -> Tuple[float, np.ndarray]:
    """
    L^MN(A) = (1/T) Σ_t Σ_m [f(μ^{t+1}_m) − ⟨μ^{t+1}_m, X^{t+1}_m⟩].

    Args:
        A: Tensor (M, K, M, K)
        nu: Interceptos (M, K)
        panel: Panel categórico

    Returns:
        (valor, gradiente con la forma de A)

    Raises:
        DimensionError: Si las dimensiones no coinciden
    """
    A, nu = np.asarray(A, dtype=float), np.asarray(nu, dtype=float)
    if panel.kind != PanelKind.CATEGORICAL:
        raise ValidationError("La pérdida multinomial requiere un panel categórico", "panel")
    _check_dims(A, nu, panel, panel.K)
    values, grads, _ = multinomial_node_terms(_rows(A), nu, panel)
    return float(values.sum()), grads.reshape(A.shape)


def ln_squared_loss(A, nu, lrpanel: LogRatioPanel, panel: EventPanel) -> Tuple[float, np.ndarray]:
    """
    L^LN(A) = (1/2T) Σ_{t,m} 1{X^{t+1}_m ≠ 0} ‖Y^{t+1}_m − μ^{t+1}_m‖².

    Returns:
        (valor, gradiente con la forma de A)
    """
    A, nu = np.asarray(A, dtype=float), np.asarray(nu, dtype=float)
    _check_dims(A, nu, panel, panel.K - 1)
    check_shape("Y", lrpanel.Y.shape, panel.data.shape[:2] + (panel.K - 1,))
    values, grads, _ = ln_node_terms(_rows(A), nu, lrpanel, panel)
    return float(values.sum()), grads.reshape(A.shape)


def bernoulli_loss(B, eta, panel: EventPanel) -> Tuple[float, np.ndarray]:
    """L^Bern(B) = (1/T) Σ_{t,m} [log(1 + e^{z}) − z·1{X^{t+1}_m ≠ 0}], z = ⟨B_m, X^t⟩ + η_m"""
    B = np.asarray(B, dtype=float)
    eta = np.asarray(eta, dtype=float).reshape(-1)
    _check_dims(B, eta[:, None], panel, 1)
    values, grads, _ = bernoulli_node_terms(_rows(B), eta[:, None], panel)
    return float(values.sum()), grads.reshape(B.shape)


def combined_objective(
    A, B, alpha: float, nu, eta, panel: EventPanel, lrpanel: Optional[LogRatioPanel] = None
) -> Tuple[float, Tuple[np.ndarray, np.ndarray]]:
    """
    α·L^LN(A) + (1−α)·L^Bern(B) con los gradientes de cada bloque.

    Returns:
        (valor, (grad_A, grad_B))
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha debe estar en [0, 1], se recibió {alpha}", "alpha")
    lrpanel = log_ratio_transform(panel) if lrpanel is None else lrpanel
    value_ln, grad_A = ln_squared_loss(A, nu, lrpanel, panel)
    value_bern, grad_B = bernoulli_loss(B, eta, panel)
    value = alpha * value_ln + (1.0 - alpha) * value_bern
    return value, (alpha * grad_A, (1.0 - alpha) * grad_B)


def ln_gaussian_loglik(A, nu, Sigma, lrpanel: LogRatioPanel, panel: EventPanel) -> float:
    """
    Log-verosimilitud gaussiana completa de los log-cocientes observados,
    Σ_{t,m con evento} log N(Y^{t+1}_m; μ^{t+1}_m, Σ).
    """
    A, nu = np.asarray(A, dtype=float), np.asarray(nu, dtype=float)
    _check_dims(A, nu, panel, panel.K - 1)
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    check_shape("Sigma", Sigma.shape, (panel.K - 1, panel.K - 1))
    mu = _intensities(_rows(A), nu, panel.covariates())
    mask = lrpanel.mask[1:]
    resid = (lrpanel.Y[1:] - mu)[mask]
    if resid.shape[0] == 0:
        return 0.0
    dist = multivariate_normal(mean=np.zeros(panel.K - 1), cov=Sigma)
    return float(np.sum(dist.logpdf(resid)))


class ObjectiveService(BaseService):
    """
    Servicio de Objetivo.

    Evalúa la pérdida sin penalizar de un ajuste sobre un panel (usado en la
    validación cruzada y en los informes de la CLI).
    """

    def __init__(self):
        super().__init__(entity_name="Objetivo")

    @service_operation("evaluar la pérdida")
    def held_out_loss(
        self,
        kind: str,
        panel: EventPanel,
        A: np.ndarray,
        nu: np.ndarray,
        B: Optional[np.ndarray] = None,
        eta: Optional[np.ndarray] = None,
        alpha: float = 1.0,
        clip_eps: float = 0.0,
    ) -> float:
        """
        Pérdida sin penalizar de la familia indicada.

        Args:
            kind: "mn", "ln-constq" o "ln-joint"
            panel: Panel de evaluación
            A, nu: Red e interceptos
            B, eta: Red de ocurrencia (solo "ln-joint")
            alpha: Peso de L^LN en la pérdida conjunta
            clip_eps: Recorte para paneles composicionales con ceros
        """
        if kind == "mn":
            return multinomial_loss(A, nu, panel)[0]
        lrpanel = log_ratio_transform(panel, clip_eps)
        if kind == "ln-constq":
            return ln_squared_loss(A, nu, lrpanel, panel)[0]
        if kind == "ln-joint":
            return combined_objective(A, B, alpha, nu, eta, panel, lrpanel)[0]
        raise ValidationError(f"Familia de modelo desconocida: {kind}", "kind")


# Instancia global del servicio
objective_service = ObjectiveService()
