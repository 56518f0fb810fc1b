"""
Servicio de Inferencia - Predicción un paso adelante, modelos de referencia y
post-procesado de redes (transformación absoluta → relativa, cambio de
categoría base y extracción de aristas)
"""
from typing import List, Optional, Set, Tuple, Union
import logging

import numpy as np
from scipy.special import expit, softmax

from ctxnet.core.base_service import BaseService, service_operation
from ctxnet.core.exceptions import EstimationError, ValidationError, check_shape
from ctxnet.core.tensors import EventPanel, InfluenceTensor, PanelKind
from ctxnet.models.fit_config import FitConfig
from ctxnet.models.fit_result import FitResult
from ctxnet.models.inference import (
    BaselineKind,
    BaselineModel,
    Edge,
    EdgeKey,
    EdgeList,
    EdgeMode,
    EdgeScore,
    EdgeSign,
)
from ctxnet.models.network import (
    ConstantQ,
    DynamicOccurrence,
    LogisticNormalModel,
    MultinomialModel,
    NetworkModel,
)
from ctxnet.service.objective_service import _append_zero, alr_inverse, log_ratio_transform
from ctxnet.service.simulation_service import round_to_categorical
from ctxnet.service.solver_service import fit_bernoulli_autoregressive

logger = logging.getLogger(__name__)

Predictor = Union[MultinomialModel, LogisticNormalModel, BaselineModel]

# Piso de q̂_m = T_m / T para nodos sin eventos
Q_FLOOR = 1e-12


# ============================================================================
# Predicción
# ============================================================================

def _as_rows(x_prev, M: int, K: int) -> np.ndarray:
    """Acepta X^t (M, K) o un lote (n, M, K); devuelve (n, M·K)"""
    x = np.asarray(x_prev, dtype=float)
    if x.shape[-2:] != (M, K):
        raise ValidationError(f"x_prev debe terminar en ({M}, {K}), tiene {x.shape}", "x_prev")
    return x.reshape(-1, M * K)


def _intensity(A: np.ndarray, nu: np.ndarray, x_rows: np.ndarray) -> np.ndarray:
    """⟨A_m, X⟩ + ν_m para un lote de estados, forma (n, M, K_out)"""
    M, K_out = A.shape[:2]
    return (x_rows @ A.reshape(M * K_out, -1).T).reshape(-1, M, K_out) + nu


def _one_hot_from_probs(p: np.ndarray) -> np.ndarray:
    """
    Predicción por argmax sobre [sin evento, 1..K]; np.argmax devuelve el primer
    máximo, así que los empates van a "sin evento" y luego al menor índice.
    """
    slot = np.argmax(p, axis=-1)
    K = p.shape[-1] - 1
    x_hat = np.zeros(p.shape[:-1] + (K,))
    hit = slot > 0
    x_hat[hit, slot[hit] - 1] = 1.0
    return x_hat


def _multinomial_probs(model: MultinomialModel, x_rows: np.ndarray) -> np.ndarray:
    """Probabilidades [sin evento, 1..K] para un lote de estados, forma (n, M, K+1)"""
    mu = _intensity(model.A.data, model.nu, x_rows)
    return softmax(_append_zero(mu), axis=-1)[..., np.r_[-1, 0:model.K]]


def predict_multinomial(model: MultinomialModel, x_prev) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predicción multinomial un paso adelante.

    Args:
        model: Modelo multinomial
        x_prev: Estado X^t (M, K)

    Returns:
        (p (M, K+1) con la ranura 0 = sin evento, x̂ (M, K) one-hot o cero)
    """
    p = _multinomial_probs(model, _as_rows(x_prev, model.M, model.K))[0]
    return p, _one_hot_from_probs(p)


def _occurrence_probs(model: LogisticNormalModel, x_rows: np.ndarray) -> np.ndarray:
    occ = model.occurrence
    if isinstance(occ, ConstantQ):
        return np.broadcast_to(occ.q, (x_rows.shape[0], model.M))
    z = x_rows @ occ.B.data.reshape(model.M, -1).T + occ.eta
    return expit(z)


def predict_logistic_normal(model: LogisticNormalModel, x_prev, q_hat=None) -> np.ndarray:
    """
    Predicción logístico-normal x̂ = q̂·Ẑ, con Ẑ la inversa logística aditiva
    de los log-cocientes esperados.

    Args:
        model: Modelo logístico-normal
        x_prev: Estado X^t (M, K)
        q_hat: Probabilidad de ocurrencia (M,); por defecto la del modelo

    Returns:
        x̂ (M, K) con Σ_k x̂_k = q̂_m
    """
    x_rows = _as_rows(x_prev, model.M, model.K)
    q = _occurrence_probs(model, x_rows)[0] if q_hat is None else np.asarray(q_hat, dtype=float)
    check_shape("q_hat", q.shape, (model.M,))
    Z = alr_inverse(_intensity(model.A.data, model.nu, x_rows)[0])
    return q[:, None] * Z


def _baseline_predictions(baseline: BaselineModel, x_rows: np.ndarray, K: int) -> np.ndarray:
    n, M = x_rows.shape[0], baseline.M
    if baseline.kind == BaselineKind.CONSTANT_PROCESS:
        q = np.broadcast_to(baseline.occurrence_q, (n, M))
    else:
        indicators = (x_rows.reshape(n, M, K) != 0).any(axis=-1).astype(float)
        q = expit(indicators @ baseline.occurrence_B.T + baseline.occurrence_eta)
    if baseline.family == "mn":
        p = np.concatenate([(1.0 - q)[..., None], q[..., None] * baseline.category_probs], axis=-1)
        return _one_hot_from_probs(p)
    return q[..., None] * alr_inverse(baseline.mean_log_ratio)


def predict_panel(predictor: Predictor, panel: EventPanel) -> np.ndarray:
    """
    Predicciones X̂^{t+1} a partir del X^t observado, t = 0..T−1.

    Returns:
        Tensor (T, M, K)
    """
    x_rows = panel.covariates()
    if isinstance(predictor, BaselineModel):
        check_shape("panel", (panel.M,), (predictor.M,))
        return _baseline_predictions(predictor, x_rows, panel.K)
    check_shape("panel", (panel.M, panel.K), (predictor.M, predictor.K))
    if isinstance(predictor, MultinomialModel):
        return _one_hot_from_probs(_multinomial_probs(predictor, x_rows))
    q = _occurrence_probs(predictor, x_rows)
    Z = alr_inverse(_intensity(predictor.A.data, predictor.nu, x_rows))
    return q[..., None] * Z


def prediction_error(panel_holdout: EventPanel, predictor: Predictor, family: str) -> float:
    """
    Error de predicción un paso adelante (1/TM)·Σ_{t,m} ‖X^{t+1}_m − X̂^{t+1}_m‖².

    En la familia multinomial los datos se redondean a categorías antes de
    comparar; cada fallo categoría-contra-categoría aporta 2.

    Args:
        panel_holdout: Panel de evaluación (T ≥ 1)
        predictor: Modelo ajustado o de referencia
        family: "mn" o "ln"
    """
    if panel_holdout.T < 1:
        raise ValidationError("El panel de evaluación necesita al menos una transición", "panel")
    if family not in ("mn", "ln"):
        raise ValidationError(f"Métrica desconocida: {family}", "metric")
    expected = "mn" if isinstance(predictor, MultinomialModel) else (
        predictor.family if isinstance(predictor, BaselineModel) else "ln"
    )
    if expected != family:
        raise ValidationError(f"El predictor es de la familia '{expected}' y la métrica '{family}'", "metric")
    panel = panel_holdout
    if family == "mn" and panel.kind == PanelKind.COMPOSITIONAL:
        panel = round_to_categorical(panel)
    X_hat = predict_panel(predictor, panel)
    return float(np.square(panel.targets() - X_hat).sum() / (panel.T * panel.M))


def empirical_q(panel: EventPanel) -> np.ndarray:
    """q̂_m = T_m / T, acotado a [Q_FLOOR, 1]"""
    return np.clip(panel.event_frequencies, Q_FLOOR, 1.0)


def fitted_model(kind: str, fit: FitResult, panel: EventPanel) -> NetworkModel:
    """
    Modelo predictivo a partir de un ajuste.

    Para "ln-constq" el estimador no produce q̂; se usa la frecuencia empírica
    T_m / T del panel de entrenamiento.
    """
    if kind == "mn":
        return MultinomialModel(A=fit.A, nu=fit.nu)
    if kind == "ln-constq":
        return LogisticNormalModel(A=fit.A, nu=fit.nu, occurrence=ConstantQ(q=empirical_q(panel)))
    if kind == "ln-joint":
        return LogisticNormalModel(
            A=fit.A, nu=fit.nu, occurrence=DynamicOccurrence(B=fit.B, eta=fit.eta)
        )
    raise ValidationError(f"Familia de modelo desconocida: {kind}", "kind")


# ============================================================================
# Modelos de referencia
# ============================================================================

def baseline_penalty(M: int, T: int, c: float = 0.05) -> float:
    """λ del ajuste BAR: c·√(log M / T)"""
    return float(c * np.sqrt(np.log(max(M, 2)) / T))


def fit_baseline(
    panel: EventPanel,
    kind: Union[BaselineKind, str],
    family: str,
    lam: Optional[float] = None,
    clip_eps: float = 0.0,
) -> BaselineModel:
    """
    Ajusta un modelo de referencia sin red de contexto.

    Args:
        panel: Panel de entrenamiento
        kind: Proceso constante o red independiente del contexto
        family: "mn" (categorías) o "ln" (composiciones)
        lam: λ del ajuste BAR (por defecto baseline_penalty)
        clip_eps: Recorte para composiciones con ceros

    Raises:
        EstimationError: Si el panel no tiene eventos
    """
    kind = BaselineKind(kind)
    if family not in ("mn", "ln"):
        raise ValidationError(f"Familia desconocida: {family}", "family")
    if panel.T < 1 or panel.event_counts.sum() == 0:
        raise EstimationError("No se puede ajustar un modelo de referencia sobre un panel sin eventos")

    M, K = panel.M, panel.K
    counts = panel.event_counts
    has_events = counts > 0
    params = {}

    if family == "mn":
        rows = panel if panel.kind == PanelKind.CATEGORICAL else round_to_categorical(panel)
        totals = rows.targets().sum(axis=0)
        probs = np.full((M, K), 1.0 / K)
        probs[has_events] = totals[has_events] / counts[has_events, None]
        params["category_probs"] = probs
    else:
        lrpanel = log_ratio_transform(panel, clip_eps)
        mean = np.zeros((M, K - 1))
        mean[has_events] = lrpanel.Y[1:].sum(axis=0)[has_events] / counts[has_events, None]
        params["mean_log_ratio"] = mean

    if kind == BaselineKind.CONSTANT_PROCESS:
        params["occurrence_q"] = panel.event_frequencies
    else:
        lam = baseline_penalty(M, panel.T) if lam is None else lam
        fit = fit_bernoulli_autoregressive(panel, None, FitConfig(lambda_=lam, fit_intercepts=True))
        params["occurrence_B"] = fit.B[:, 0, :, 0]
        params["occurrence_eta"] = fit.eta
    logger.info(f"Modelo de referencia '{kind.value}' ({family}) ajustado: M={M}, K={K}, T={panel.T}")
    return BaselineModel(kind=kind, family=family, **params)


# ============================================================================
# Transformaciones de red
# ============================================================================

def absolute_to_relative(A_abs) -> np.ndarray:
    """A_rel[m, k] = A_abs[m, k] − A_abs[m, K] para k < K"""
    A = np.asarray(A_abs.data if isinstance(A_abs, InfluenceTensor) else A_abs, dtype=float)
    if A.ndim != 4 or A.shape[1] < 2:
        raise ValidationError("Se requiere un tensor absoluto (M, K, M, K) con K ≥ 2", "A")
    return A[:, :-1] - A[:, -1:]


def rebase_matrix(K: int, l: int) -> Tuple[np.ndarray, List[int]]:
    """
    Matriz L con Ỹ = L·Y al tomar la categoría l como nueva base.

    El nuevo orden es: categorías distintas de l y de la base actual en orden
    ascendente, la base actual, y l como nueva base.

    Returns:
        (L (K−1, K−1), etiquetas originales en el nuevo orden)
    """
    if K < 2:
        raise ValidationError("El cambio de base requiere K ≥ 2", "K")
    if l == K - 1:
        raise ValidationError(f"La categoría {l} ya es la base", "l")
    if not 0 <= l < K - 1:
        raise ValidationError(f"La nueva base debe estar en 0..{K - 2}, se recibió {l}", "l")
    others = [k for k in range(K - 1) if k != l]
    L = np.zeros((K - 1, K - 1))
    for j, k in enumerate(others):
        L[j, k] = 1.0
        L[j, l] = -1.0
    L[K - 2, l] = -1.0
    return L, others + [K - 1, l]


def rebase(A, nu, l: int, Sigma=None):
    """
    Reparametriza un modelo logístico-normal con la categoría l como base.

    Ã_{mk} = A_{mk} − A_{ml} para k ∉ {l, K}, Ã_{mK} = −A_{ml}; igual para ν, y
    Σ̃ = L·Σ·Lᵀ cuando se indica Σ.

    Returns:
        (Ã, ν̃, Σ̃ o None, etiquetas originales en el nuevo orden)
    """
    A = np.asarray(A.data if isinstance(A, InfluenceTensor) else A, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if A.ndim != 4:
        raise ValidationError("A debe ser un tensor (M, K−1, M, K)", "A")
    M, _, _, K = A.shape
    check_shape("A", A.shape, (M, K - 1, M, K))
    check_shape("nu", nu.shape, (M, K - 1))
    L, labels = rebase_matrix(K, l)
    A_new = np.einsum("jk,mkpq->mjpq", L, A)
    nu_new = nu @ L.T
    Sigma_new = None
    if Sigma is not None:
        Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
        check_shape("Sigma", Sigma.shape, (K - 1, K - 1))
        Sigma_new = L @ Sigma @ L.T
    return A_new, nu_new, Sigma_new, labels


# ============================================================================
# Aristas
# ============================================================================

def extract_edges(net, threshold: float, mode: Union[EdgeMode, str]) -> EdgeList:
    """
    Extrae las aristas de una red normalizada por su máximo |valor| global.

    Args:
        net: Tensor (M, K_out, M, K_in)
        threshold: Umbral en [0, 1) sobre |peso normalizado|
        mode: Red absoluta, relativa o de ocurrencia

    Returns:
        EdgeList (vacía si la red es nula)
    """
    mode = EdgeMode(mode)
    A = np.asarray(net.data if isinstance(net, InfluenceTensor) else net, dtype=float)
    if A.ndim != 4:
        raise ValidationError("La red debe tener 4 dimensiones (M, K_out, M, K_in)", "net")
    if not 0.0 <= threshold < 1.0:
        raise ValidationError("El umbral debe estar en [0, 1)", "threshold")
    scale = float(np.abs(A).max(initial=0.0))
    if scale == 0.0:
        logger.info("Red nula: sin aristas")
        return EdgeList(mode=mode, threshold=threshold, scale=0.0)

    normalized = A / scale
    edges = []
    for m, k, mp, kp in np.argwhere(np.abs(normalized) > threshold):
        w = float(normalized[m, k, mp, kp])
        edges.append(Edge(
            source=int(mp), target=int(m), k_in=int(kp),
            k_out=None if mode == EdgeMode.OCCURRENCE else int(k),
            weight=float(np.clip(w, -1.0, 1.0)),
            raw_weight=float(A[m, k, mp, kp]),
            sign=EdgeSign.STIMULATORY if w > 0 else EdgeSign.INHIBITORY,
        ))
    return EdgeList(mode=mode, threshold=threshold, scale=scale, edges=edges)


def edge_support(edges: Union[EdgeList, Set[EdgeKey]], targets: Optional[Set[int]] = None) -> Set[EdgeKey]:
    """Soporte de una lista de aristas (o un conjunto de claves) restringido a ciertos destinos"""
    if isinstance(edges, EdgeList):
        return edges.support(targets)
    return {key for key in edges if targets is None or key[1] in targets}


def edge_scores(
    estimated: Union[EdgeList, Set[EdgeKey]],
    truth: Union[EdgeList, Set[EdgeKey]],
    targets: Optional[Set[int]] = None,
) -> EdgeScore:
    """
    Precisión, exhaustividad y F1 del soporte estimado.

    Convenciones: ambos vacíos → 1.0 en todo; sin predicciones → precisión 0;
    sin aristas verdaderas → exhaustividad 1.
    """
    est = edge_support(estimated, targets)
    true = edge_support(truth, targets)
    hits = len(est & true)
    if not est and not true:
        return EdgeScore(precision=1.0, recall=1.0, f1=1.0, n_true=0, n_predicted=0, n_hits=0)
    precision = hits / len(est) if est else 0.0
    recall = hits / len(true) if true else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EdgeScore(
        precision=precision, recall=recall, f1=f1,
        n_true=len(true), n_predicted=len(est), n_hits=hits,
    )


def network_for_mode(model: NetworkModel, mode: Union[EdgeMode, str]) -> np.ndarray:
    """
    Tensor a exportar según el modo.

    - abs: red absoluta de un modelo multinomial
    - rel: relativa (transformada desde la absoluta, o A^LN directamente)
    - occ: red de ocurrencia B de un modelo logístico-normal dinámico
    """
    mode = EdgeMode(mode)
    if mode == EdgeMode.ABSOLUTE:
        if not isinstance(model, MultinomialModel):
            raise ValidationError("La red absoluta solo existe en modelos multinomiales", "mode")
        return model.A.data
    if mode == EdgeMode.RELATIVE:
        if isinstance(model, MultinomialModel):
            return absolute_to_relative(model.A)
        return model.A.data
    if isinstance(model, LogisticNormalModel) and isinstance(model.occurrence, DynamicOccurrence):
        return model.occurrence.B.data
    raise ValidationError("El modelo no tiene red de ocurrencia B", "mode")


class InferenceService(BaseService):
    """
    Servicio de Inferencia.

    Orquesta la evaluación de predicciones y la exportación de redes.
    """

    def __init__(self):
        super().__init__(entity_name="Inferencia")

    @service_operation("evaluar la predicción")
    def evaluate(
        self,
        predictor: Predictor,
        panel: EventPanel,
        holdout_start: int,
        metric: str,
    ) -> float:
        """
        Error de predicción sobre las transiciones posteriores a holdout_start.

        Raises:
            ValidationError: holdout_start fuera de 0..T−1
        """
        if not 0 <= holdout_start < panel.T:
            raise ValidationError(f"holdout_start debe estar en 0..{panel.T - 1}", "holdout_start")
        error = prediction_error(panel.window(holdout_start, panel.T), predictor, metric)
        logger.info(f"Error de predicción ({metric}) desde t={holdout_start}: {error:.6g}")
        return error

    @service_operation("ajustar el modelo de referencia")
    def baseline(
        self, panel: EventPanel, kind: Union[BaselineKind, str], family: str, clip_eps: float = 0.0
    ) -> BaselineModel:
        return fit_baseline(panel, kind, family, clip_eps=clip_eps)

    @service_operation("extraer las aristas")
    def edges(self, model: NetworkModel, mode: Union[EdgeMode, str], threshold: float) -> EdgeList:
        """Aristas del modelo en el modo indicado"""
        edges = extract_edges(network_for_mode(model, mode), threshold, mode)
        logger.info(f"{len(edges)} aristas extraídas (modo {EdgeMode(mode).value}, umbral {threshold})")
        return edges

    def export(self, edges: EdgeList, fmt: str) -> str:
        """Texto JSON o DOT de una lista de aristas"""
        if fmt == "json":
            return edges.model_dump_json(indent=2)
        if fmt == "dot":
            return edges.to_dot()
        raise ValidationError(f"Formato desconocido: {fmt}", "format")


# Instancia global del servicio
inference_service = InferenceService()
