"""
Servicio de Solver - Descenso de gradiente proximal con umbral suave vectorial,
los puntos de entrada de ajuste y la validación cruzada por ventanas

Cada nodo destino m es un problema independiente sobre su fila de parámetros
θ_m ∈ R^{M×d}; el solver trata un bloque de filas a la vez (vectorizado) y
reparte bloques entre hilos con joblib.
"""
from typing import Callable, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from joblib import cpu_count

from ctxnet.core.base_service import BaseService, run_parallel, service_operation
from ctxnet.core.config import settings
from ctxnet.core.exceptions import EstimationError, ValidationError, check_shape
from ctxnet.core.tensors import (
    EventPanel,
    GroupIndex,
    PanelKind,
    fibers_to_tensor,
)
from ctxnet.models.fit_config import CvConfig, CvCriterion, FitConfig, FixedStep
from ctxnet.models.fit_result import CvResult, CvRow, FitResult, KktReport, NodeDiagnostics
from ctxnet.service.objective_service import (
    bernoulli_node_terms,
    bernoulli_loss,
    ln_node_terms,
    ln_squared_loss,
    log_ratio_transform,
    multinomial_loss,
    multinomial_node_terms,
    objective_service,
)

logger = logging.getLogger(__name__)

# evaluate(theta, offsets, rows) -> (valores, grad_theta, grad_offsets)
Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]

MODEL_KINDS = ("mn", "ln-constq", "ln-joint")


# ============================================================================
# Operador proximal
# ============================================================================

def prox_group(v, tau) -> np.ndarray:
    """
    Umbral suave vectorial: max(0, 1 − τ/‖v‖₂)·v, y 0 cuando v = 0.

    Args:
        v: Vector, o arreglo de grupos cuya última dimensión es el grupo
        tau: τ ≥ 0, escalar o con forma v.shape[:-1] + (1,)

    Returns:
        Arreglo con la forma de v
    """
    v = np.asarray(v, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if (tau < 0).any():
        raise ValidationError("tau debe ser ≥ 0", "tau")
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > 0, np.maximum(0.0, 1.0 - tau / norm), 0.0)
    return scale * v


def _group_norms(theta: np.ndarray) -> np.ndarray:
    return np.linalg.norm(theta, axis=-1)


# ============================================================================
# Motor de descenso proximal por filas
# ============================================================================

def _solve_rows(
    evaluate: Evaluator,
    theta: np.ndarray,
    offsets: np.ndarray,
    lam: float,
    cfg: FitConfig,
    node_ids: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, List[NodeDiagnostics]]:
    """
    Descenso proximal con paso por fila y búsqueda hacia atrás.

    Condición de descenso suficiente por fila:
        f(θ⁺) ≤ f(θ) + ⟨∇f(θ), θ⁺ − θ⟩ + ‖θ⁺ − θ‖² / (2t)
    Una fila se congela cuando el cambio relativo del objetivo compuesto es ≤ tol
    y además el gradiente proximal ‖θ − θ⁺‖_∞ / t es ≤ residual_tol.
    """
    R = theta.shape[0]
    fixed = isinstance(cfg.step, FixedStep)
    step = np.full(R, cfg.step.eta if fixed else cfg.step.init)
    shrink = None if fixed else cfg.step.shrink
    min_step = None if fixed else cfg.step.min_step

    rows = np.arange(R)
    f, g, g_off = evaluate(theta, offsets, rows)
    F = f + lam * _group_norms(theta).sum(axis=1)
    history = [[float(x)] for x in F]
    iterations = np.zeros(R, dtype=int)
    converged = np.zeros(R, dtype=bool)
    residual = np.full(R, np.inf)
    monotone = np.ones(R, dtype=bool)
    active = rows.copy()

    for _ in range(cfg.max_iters):
        if active.size == 0:
            break
        th, of, ga, goa, fa = theta[active], offsets[active], g[active], g_off[active], f[active]
        t = step[active].copy()
        new_th, new_of = np.empty_like(th), of.copy()
        new_f, new_g, new_go = np.empty_like(fa), np.empty_like(ga), np.empty_like(goa)

        pending = np.arange(active.size)
        while pending.size:
            tp = t[pending]
            cand = prox_group(th[pending] - tp[:, None, None] * ga[pending], lam * tp[:, None, None])
            cand_of = of[pending] - tp[:, None] * goa[pending] if cfg.fit_intercepts else of[pending]
            fc, gc, goc = evaluate(cand, cand_of, active[pending])
            if fixed:
                accept = np.ones(pending.size, dtype=bool)
            else:
                d, d_of = cand - th[pending], cand_of - of[pending]
                lin = (ga[pending] * d).sum(axis=(1, 2)) + (goa[pending] * d_of).sum(axis=1)
                sq = np.square(d).sum(axis=(1, 2)) + np.square(d_of).sum(axis=1)
                bound = fa[pending] + lin + sq / (2.0 * tp)
                ok = fc <= bound + 1e-12 * np.maximum(1.0, np.abs(fa[pending]))
                accept = ok | (tp <= min_step)
            done = pending[accept]
            new_th[done], new_of[done] = cand[accept], cand_of[accept]
            new_f[done], new_g[done], new_go[done] = fc[accept], gc[accept], goc[accept]
            retry = pending[~accept]
            if retry.size:
                t[retry] = np.maximum(t[retry] * shrink, min_step)
            pending = retry

        F_old = F[active]
        F_new = new_f + lam * _group_norms(new_th).sum(axis=1)
        increased = F_new > F_old + 1e-10 * np.maximum(1.0, np.abs(F_old))
        if increased.any():
            bad = node_ids[active[increased]]
            logger.warning(f"El objetivo compuesto aumentó en los nodos {bad.tolist()}")
            monotone[active[increased]] = False

        # gradiente proximal del paso aceptado
        moved = np.abs(new_th - th).reshape(active.size, -1).max(axis=1, initial=0.0)
        moved = np.maximum(moved, np.abs(new_of - of).max(axis=1, initial=0.0))
        residual[active] = moved / t

        theta[active], offsets[active] = new_th, new_of
        f[active], g[active], g_off[active] = new_f, new_g, new_go
        F[active] = F_new
        step[active] = t
        iterations[active] += 1
        for r, value in zip(active, F_new):
            history[r].append(float(value))

        small = np.abs(F_old - F_new) <= cfg.tol * np.maximum(np.abs(F_old), np.finfo(float).tiny)
        small &= residual[active] <= cfg.residual_tol
        converged[active[small]] = True
        active = active[~small]

    if active.size:
        logger.warning(
            f"Sin convergencia tras {cfg.max_iters} iteraciones en los nodos {node_ids[active].tolist()}"
        )

    diagnostics = [
        NodeDiagnostics(
            node=int(node_ids[r]),
            iterations=int(iterations[r]),
            converged=bool(converged[r]),
            objective=float(F[r]),
            step=float(step[r]),
            residual=float(residual[r]) if np.isfinite(residual[r]) else 0.0,
            monotone=bool(monotone[r]),
            history=history[r],
        )
        for r in range(R)
    ]
    return theta, offsets, diagnostics


def _fit_rows(
    make_evaluator: Callable[[np.ndarray], Evaluator],
    M: int,
    d: int,
    offsets0: np.ndarray,
    cfg: FitConfig,
    nodes: Optional[Sequence[int]],
) -> Tuple[np.ndarray, np.ndarray, List[NodeDiagnostics]]:
    """
    Ajusta las filas de los nodos indicados, repartidas en bloques entre hilos.

    Args:
        make_evaluator: Construye el evaluador de un bloque a partir de sus nodos
        M: Número de nodos
        d: Tamaño de grupo
        offsets0: Interceptos iniciales de todos los nodos (M, c)
        cfg: Configuración del ajuste
        nodes: Subconjunto de nodos destino (por defecto todos)

    Returns:
        (theta (M, M, d), interceptos (M, c), diagnósticos en orden de nodos)
    """
    node_ids = np.arange(M) if nodes is None else np.unique(np.asarray(nodes, dtype=int))
    if node_ids.size and (node_ids.min() < 0 or node_ids.max() >= M):
        raise ValidationError(f"Nodos fuera del rango 0..{M - 1}", "nodes")
    n_jobs = settings.resolve_threads(cfg.threads)
    workers = cpu_count() if n_jobs < 0 else n_jobs
    n_chunks = max(1, min(node_ids.size, workers))
    chunks = [c for c in np.array_split(node_ids, n_chunks) if c.size]

    def solve(chunk: np.ndarray):
        theta0 = np.zeros((chunk.size, M, d))
        return _solve_rows(make_evaluator(chunk), theta0, offsets0[chunk].copy(), cfg.lambda_, cfg, chunk)

    results = run_parallel(solve, chunks, cfg.threads)
    theta = np.zeros((M, M, d))
    offsets = offsets0.copy()
    diagnostics: List[NodeDiagnostics] = []
    for chunk, (th, of, diags) in zip(chunks, results):
        theta[chunk], offsets[chunk] = th, of
        diagnostics.extend(diags)
    return theta, offsets, diagnostics


def _theta_to_rows(theta: np.ndarray, K_out: int, K_in: int) -> np.ndarray:
    """Fibras (R, M, K_out·K_in) → filas (R, K_out, M·K_in)"""
    R, M, _ = theta.shape
    return theta.reshape(R, M, K_out, K_in).transpose(0, 2, 1, 3).reshape(R, K_out, M * K_in)


def _rows_to_theta(rows: np.ndarray, K_out: int, K_in: int) -> np.ndarray:
    """Filas (R, K_out, M·K_in) → fibras (R, M, K_out·K_in)"""
    R = rows.shape[0]
    M = rows.shape[2] // K_in
    return rows.reshape(R, K_out, M, K_in).transpose(0, 2, 1, 3).reshape(R, M, K_out * K_in)


def _intercepts(values, M: int, width: int, field: str, fit: bool) -> np.ndarray:
    if values is None:
        if not fit:
            logger.info(f"{field} no indicado; se usa 0")
        return np.zeros((M, width))
    arr = np.array(values, dtype=float)
    if arr.size == M * width:
        arr = arr.reshape(M, width)
    check_shape(field, arr.shape, (M, width))
    return arr


def _log_fit(name: str, cfg: FitConfig, diagnostics: List[NodeDiagnostics]) -> None:
    n_conv = sum(d.converged for d in diagnostics)
    iters = max((d.iterations for d in diagnostics), default=0)
    logger.info(f"{name}: λ={cfg.lambda_:.6g}, {n_conv}/{len(diagnostics)} nodos convergieron, iteraciones máx. {iters}")


# ============================================================================
# Puntos de entrada de ajuste
# ============================================================================

def fit_multinomial(
    panel: EventPanel, nu, cfg: FitConfig, nodes: Optional[Sequence[int]] = None
) -> FitResult:
    """
    Estimador multinomial penalizado: min L^MN(A) + λ‖A‖_R, grupos de tamaño K².

    Args:
        panel: Panel categórico con T ≥ 2
        nu: Interceptos (M, K); iniciales si cfg.fit_intercepts
        cfg: Configuración del ajuste
        nodes: Nodos destino a ajustar (por defecto todos)

    Returns:
        FitResult con Â (M, K, M, K) y diagnósticos por nodo
    """
    if panel.kind != PanelKind.CATEGORICAL:
        raise ValidationError("El estimador multinomial requiere un panel categórico", "panel")
    if panel.T < 2:
        raise ValidationError("Se requieren al menos T = 2 transiciones", "T")
    M, K = panel.M, panel.K
    nu0 = _intercepts(nu, M, K, "nu", cfg.fit_intercepts)

    def make_evaluator(chunk: np.ndarray) -> Evaluator:
        def evaluate(theta, offsets, rows):
            values, grads, g_nu = multinomial_node_terms(_theta_to_rows(theta, K, K), offsets, panel, chunk[rows])
            return values, _rows_to_theta(grads, K, K), g_nu
        return evaluate

    theta, nu_hat, diagnostics = _fit_rows(make_evaluator, M, K * K, nu0, cfg, nodes)
    _log_fit("Ajuste multinomial", cfg, diagnostics)
    return FitResult(
        A=fibers_to_tensor(theta, K, K).copy(), nu=nu_hat,
        lambda_=cfg.lambda_, diagnostics=diagnostics,
    )


def fit_logistic_normal_const_q(
    panel: EventPanel, nu, cfg: FitConfig, nodes: Optional[Sequence[int]] = None
) -> FitResult:
    """
    Estimador logístico-normal con q constante: min L^LN(A) + λ‖A‖_R,
    grupos de tamaño K(K−1).
    """
    if panel.K < 2:
        raise ValidationError("El estimador logístico-normal requiere K ≥ 2", "K")
    if panel.T < 2:
        raise ValidationError("Se requieren al menos T = 2 transiciones", "T")
    M, K = panel.M, panel.K
    nu0 = _intercepts(nu, M, K - 1, "nu", cfg.fit_intercepts)
    lrpanel = log_ratio_transform(panel, cfg.clip_eps)

    def make_evaluator(chunk: np.ndarray) -> Evaluator:
        def evaluate(theta, offsets, rows):
            values, grads, g_nu = ln_node_terms(
                _theta_to_rows(theta, K - 1, K), offsets, lrpanel, panel, chunk[rows]
            )
            return values, _rows_to_theta(grads, K - 1, K), g_nu
        return evaluate

    theta, nu_hat, diagnostics = _fit_rows(make_evaluator, M, (K - 1) * K, nu0, cfg, nodes)
    _log_fit("Ajuste logístico-normal (q constante)", cfg, diagnostics)
    return FitResult(
        A=fibers_to_tensor(theta, K - 1, K).copy(), nu=nu_hat,
        lambda_=cfg.lambda_, diagnostics=diagnostics,
    )


def fit_joint(
    panel: EventPanel, nu, eta, cfg: FitConfig, nodes: Optional[Sequence[int]] = None
) -> FitResult:
    """
    Estimador conjunto: min α·L^LN(A) + (1−α)·L^Bern(B) + λ·R_α(A, B).

    Se resuelve sobre las variables (√α·A_m, √(1−α)·B_m), cuyas fibras
    concatenadas forman grupos de tamaño K². Con α = 0 (o 1) el bloque sin
    pérdida se queda en su inicialización nula.

    Returns:
        FitResult con Â (M, K−1, M, K), B̂ (M, 1, M, K), ν y η
    """
    if panel.K < 2:
        raise ValidationError("El estimador conjunto requiere K ≥ 2", "K")
    if panel.T < 2:
        raise ValidationError("Se requieren al menos T = 2 transiciones", "T")
    M, K = panel.M, panel.K
    alpha = cfg.alpha
    sa, sb = np.sqrt(alpha), np.sqrt(1.0 - alpha)
    dA = (K - 1) * K
    nu0 = _intercepts(nu, M, K - 1, "nu", cfg.fit_intercepts)
    eta0 = _intercepts(eta, M, 1, "eta", cfg.fit_intercepts)
    offsets0 = np.concatenate([nu0, eta0], axis=1)
    lrpanel = log_ratio_transform(panel, cfg.clip_eps) if alpha > 0 else None

    def make_evaluator(chunk: np.ndarray) -> Evaluator:
        def evaluate(theta, offsets, rows):
            R = theta.shape[0]
            values = np.zeros(R)
            grad = np.zeros_like(theta)
            g_off = np.zeros_like(offsets)
            if alpha > 0:
                W = _theta_to_rows(theta[..., :dA] / sa, K - 1, K)
                v, gW, g_nu = ln_node_terms(W, offsets[:, :K - 1], lrpanel, panel, chunk[rows])
                values += alpha * v
                grad[..., :dA] = sa * _rows_to_theta(gW, K - 1, K)
                g_off[:, :K - 1] = alpha * g_nu
            if alpha < 1:
                V = _theta_to_rows(theta[..., dA:] / sb, 1, K)
                v, gV, g_eta = bernoulli_node_terms(V, offsets[:, K - 1:], panel, chunk[rows])
                values += (1.0 - alpha) * v
                grad[..., dA:] = sb * _rows_to_theta(gV, 1, K)
                g_off[:, K - 1:] = (1.0 - alpha) * g_eta
            return values, grad, g_off
        return evaluate

    theta, offsets, diagnostics = _fit_rows(make_evaluator, M, K * K, offsets0, cfg, nodes)
    A = fibers_to_tensor(theta[..., :dA] / sa, K - 1, K) if alpha > 0 else np.zeros((M, K - 1, M, K))
    B = fibers_to_tensor(theta[..., dA:] / sb, 1, K) if alpha < 1 else np.zeros((M, 1, M, K))
    _log_fit(f"Ajuste conjunto (α={alpha})", cfg, diagnostics)
    return FitResult(
        A=np.ascontiguousarray(A), B=np.ascontiguousarray(B),
        nu=offsets[:, :K - 1], eta=offsets[:, K - 1],
        lambda_=cfg.lambda_, alpha=alpha, diagnostics=diagnostics,
    )


def fit_bernoulli_autoregressive(
    indicators: Union[EventPanel, np.ndarray],
    eta,
    cfg: FitConfig,
    nodes: Optional[Sequence[int]] = None,
) -> FitResult:
    """
    Autorregresión de Bernoulli con penalización ℓ1 (grupos de tamaño 1) sobre
    los indicadores de evento x^t_m = 1{X^t_m ≠ 0}.

    Args:
        indicators: Panel cualquiera (se agregan sus indicadores) o arreglo (T+1, M)

    Returns:
        FitResult con B̂ en la forma (M, 1, M, 1) y η
    """
    if isinstance(indicators, EventPanel):
        x = indicators.occurred.astype(float)
    else:
        x = (np.asarray(indicators, dtype=float) != 0).astype(float)
    if x.ndim != 2:
        raise ValidationError("Los indicadores deben tener forma (T+1, M)", "indicators")
    occ_panel = EventPanel(data=x[..., None], kind=PanelKind.CATEGORICAL)
    if occ_panel.T < 2:
        raise ValidationError("Se requieren al menos T = 2 transiciones", "T")
    M = occ_panel.M
    eta0 = _intercepts(eta, M, 1, "eta", cfg.fit_intercepts)

    def make_evaluator(chunk: np.ndarray) -> Evaluator:
        def evaluate(theta, offsets, rows):
            values, grads, g_eta = bernoulli_node_terms(_theta_to_rows(theta, 1, 1), offsets, occ_panel, chunk[rows])
            return values, _rows_to_theta(grads, 1, 1), g_eta
        return evaluate

    theta, eta_hat, diagnostics = _fit_rows(make_evaluator, M, 1, eta0, cfg, nodes)
    _log_fit("Ajuste BAR", cfg, diagnostics)
    return FitResult(
        B=fibers_to_tensor(theta, 1, 1).copy(), eta=eta_hat[:, 0],
        lambda_=cfg.lambda_, diagnostics=diagnostics,
    )


def fit_model(
    kind: str,
    panel: EventPanel,
    cfg: FitConfig,
    nu=None,
    eta=None,
    nodes: Optional[Sequence[int]] = None,
) -> FitResult:
    """Despacha el ajuste según la familia ("mn", "ln-constq" o "ln-joint")"""
    if kind == "mn":
        return fit_multinomial(panel, nu, cfg, nodes)
    if kind == "ln-constq":
        return fit_logistic_normal_const_q(panel, nu, cfg, nodes)
    if kind == "ln-joint":
        return fit_joint(panel, nu, eta, cfg, nodes)
    raise ValidationError(f"Familia de modelo desconocida: {kind}", "kind")


# ============================================================================
# Reglas de penalización y certificados
# ============================================================================

def penalty_rule(c: float, K: int, M: int, T: int) -> float:
    """λ = c·K·√(log M / T)"""
    if T < 1 or M < 1:
        raise ValidationError("M y T deben ser ≥ 1", "T")
    return float(c * K * np.sqrt(np.log(M) / T))


def rate_penalty(c: float, panel: EventPanel, sigma_max: float = 1.0) -> float:
    """λ = c·K·max_k Σ_kk·√(max_m T_m·log M / T²) (forma con q constante)"""
    T_max = float(panel.event_counts.max()) if panel.M else 0.0
    return float(c * panel.K * sigma_max * np.sqrt(T_max * np.log(panel.M) / panel.T ** 2))


def max_group_dual_norm(grad, groups: Optional[GroupIndex] = None) -> float:
    """
    max_{m,m'} ‖∇L[m, :, m', :]‖: el menor λ para el que 0 es solución.

    Args:
        grad: Tensor gradiente, o secuencia de tensores cuyas fibras se concatenan
    """
    tensors = grad if isinstance(grad, (list, tuple)) else (grad,)
    M = np.asarray(tensors[0]).shape[0]
    groups = groups or GroupIndex.for_nodes(M)
    return float(np.linalg.norm(groups.fibers(*tensors), axis=-1).max())


def kkt_audit(
    params,
    grads,
    lam: float,
    groups: Optional[GroupIndex] = None,
    tol: float = 1e-3,
    atol: float = 1e-6,
    nodes: Optional[Sequence[int]] = None,
) -> KktReport:
    """
    Verifica las condiciones de primer orden del programa penalizado.

    - grupo nulo: ‖g‖ ≤ λ (violación max(0, ‖g‖ − λ))
    - grupo activo: ‖g + λ·θ/‖θ‖‖ ≈ 0

    Un grupo se marca cuando su violación supera tol·λ + atol.

    Args:
        params: Tensor ajustado, o secuencia de tensores (fibras concatenadas)
        grads: Gradiente(s) de la pérdida suave en params, misma estructura
        lam: Penalización λ
        groups: Partición de grupos (por defecto todos los pares (m, m'))
        nodes: Filas a auditar (por defecto todas)
    """
    params = params if isinstance(params, (list, tuple)) else (params,)
    grads = grads if isinstance(grads, (list, tuple)) else (grads,)
    M = np.asarray(params[0]).shape[0]
    groups = groups or GroupIndex.for_nodes(M)
    theta = groups.fibers(*params)
    g = groups.fibers(*grads)
    check_shape("grads", g.shape, theta.shape)
    rows = np.arange(M) if nodes is None else np.asarray(nodes, dtype=int)
    theta, g = theta[rows], g[rows]

    norms = np.linalg.norm(theta, axis=-1)
    zero = norms == 0
    zero_violation = np.where(zero, np.maximum(np.linalg.norm(g, axis=-1) - lam, 0.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        direction = np.where(zero[..., None], 0.0, theta / np.where(zero, 1.0, norms)[..., None])
    active_violation = np.where(zero, 0.0, np.linalg.norm(g + lam * direction, axis=-1))

    limit = tol * lam + atol
    flagged = np.argwhere((zero_violation > limit) | (active_violation > limit))
    return KktReport(
        lambda_=lam,
        tol=tol,
        max_zero_violation=float(zero_violation.max(initial=0.0)),
        max_active_violation=float(active_violation.max(initial=0.0)),
        n_zero_groups=int(zero.sum()),
        n_active_groups=int((~zero).sum()),
        flagged_groups=[[int(rows[i]), int(j)] for i, j in flagged],
    )


# ============================================================================
# Validación cruzada
# ============================================================================

def cv_folds(T: int, cv: CvConfig) -> List[Tuple[int, int]]:
    """
    Ventanas de entrenamiento [t_i, t_i + L] con t_i = ⌊offset_frac·T·(i−1)⌋,
    L = ⌊window_frac·T⌋ transiciones, i = 1..folds.
    """
    L = int(np.floor(cv.window_frac * T))
    folds = []
    for i in range(cv.folds):
        start = int(np.floor(cv.offset_frac * T * i))
        folds.append((start, min(start + L, T)))
    return folds


def _has_events(panel: EventPanel) -> bool:
    return bool(panel.occurred[1:].any())


class SolverService(BaseService):
    """
    Servicio de Solver.

    Despacha los ajustes por familia de modelo, audita su optimalidad y
    ejecuta la validación cruzada en paralelo sobre la malla.
    """

    def __init__(self):
        super().__init__(entity_name="Ajuste")

    def _config(self, cfg: FitConfig) -> FitConfig:
        if self.threads and cfg.threads == 0:
            return cfg.model_copy(update={"threads": self.threads})
        return cfg

    @service_operation("ajustar el modelo")
    def fit(
        self,
        kind: str,
        panel: EventPanel,
        cfg: FitConfig,
        nu=None,
        eta=None,
        nodes: Optional[Sequence[int]] = None,
    ) -> FitResult:
        """
        Ajusta la familia indicada.

        Args:
            kind: "mn", "ln-constq" o "ln-joint"
            panel: Panel de entrenamiento
            cfg: Configuración (λ, α, control del solver)
            nu, eta: Interceptos conocidos (o iniciales con fit_intercepts)
            nodes: Subconjunto de nodos destino

        Raises:
            ValidationError: Familia desconocida o datos inválidos
        """
        cfg = self._config(cfg)
        logger.info(f"Ajustando '{kind}' con M={panel.M}, K={panel.K}, T={panel.T}")
        return fit_model(kind, panel, cfg, nu, eta, nodes)

    def smooth_gradient(
        self, kind: str, panel: EventPanel, fit: FitResult, alpha: Optional[float] = None, clip_eps: float = 0.0
    ) -> Tuple[tuple, tuple]:
        """
        Parámetros y gradientes en las variables penalizadas del problema.

        Returns:
            (params, grads) listos para kkt_audit / max_group_dual_norm
        """
        if kind == "mn":
            return (fit.A,), (multinomial_loss(fit.A, fit.nu, panel)[1],)
        lrpanel = log_ratio_transform(panel, clip_eps)
        if kind == "ln-constq":
            return (fit.A,), (ln_squared_loss(fit.A, fit.nu, lrpanel, panel)[1],)
        alpha = fit.alpha if alpha is None else alpha
        sa, sb = np.sqrt(alpha), np.sqrt(1.0 - alpha)
        gA = ln_squared_loss(fit.A, fit.nu, lrpanel, panel)[1]
        gB = bernoulli_loss(fit.B, fit.eta, panel)[1]
        return (sa * fit.A, sb * fit.B), (sa * gA, sb * gB)

    @service_operation("auditar el ajuste")
    def audit(self, kind: str, panel: EventPanel, fit: FitResult, clip_eps: float = 0.0, tol: float = 1e-3) -> KktReport:
        """Certificado KKT del ajuste sobre los nodos que fueron ajustados"""
        params, grads = self.smooth_gradient(kind, panel, fit, clip_eps=clip_eps)
        nodes = [d.node for d in fit.diagnostics] or None
        report = kkt_audit(params, grads, fit.lambda_, tol=tol, nodes=nodes)
        level = logging.INFO if report.passed else logging.WARNING
        logger.log(level, f"Auditoría KKT: violación máx. {report.max_violation:.3g}, {len(report.flagged_groups)} grupos marcados")
        return report

    def null_penalty(self, kind: str, panel: EventPanel, nu=None, eta=None, alpha: float = 0.4, clip_eps: float = 0.0) -> float:
        """Menor λ para el que el ajuste con interceptos fijos es exactamente 0"""
        M, K = panel.M, panel.K
        K_out = K if kind == "mn" else K - 1
        zero = FitResult(
            A=np.zeros((M, K_out, M, K)), B=np.zeros((M, 1, M, K)),
            nu=_intercepts(nu, M, K_out, "nu", False),
            eta=_intercepts(eta, M, 1, "eta", False)[:, 0],
            alpha=alpha,
        )
        _, grads = self.smooth_gradient(kind, panel, zero, alpha, clip_eps)
        return max_group_dual_norm(grads)

    def _score(
        self,
        kind: str,
        criterion: CvCriterion,
        fit: FitResult,
        train: EventPanel,
        parts: List[EventPanel],
        cfg: FitConfig,
    ) -> float:
        """Puntuación de las partes de prueba ponderada por número de transiciones"""
        total, weight = 0.0, 0
        if criterion == CvCriterion.PREDICTION_ERROR:
            from ctxnet.service.inference_service import fitted_model, prediction_error
            model = fitted_model(kind, fit, train)
            family = "mn" if kind == "mn" else "ln"
            for part in parts:
                total += part.T * prediction_error(part, model, family)
                weight += part.T
        else:
            for part in parts:
                value = objective_service.held_out_loss(
                    kind, part, fit.A, fit.nu, fit.B, fit.eta, alpha=cfg.alpha, clip_eps=cfg.clip_eps
                )
                total += part.T * value
                weight += part.T
        return total / weight

    @service_operation("ejecutar la validación cruzada")
    def cross_validate(
        self,
        kind: str,
        panel: EventPanel,
        cv: CvConfig,
        cfg: FitConfig,
        nu=None,
        eta=None,
        threads: Optional[int] = None,
    ) -> CvResult:
        """
        Validación cruzada por ventanas consecutivas.

        Para cada (λ, α) de la malla y cada ventana se ajusta con la ventana y se
        puntúa con el resto del panel (prefijo y sufijo). Gana la menor
        puntuación media; los empates se resuelven hacia el λ mayor y después
        hacia el primer α de la malla. Las ventanas degeneradas (sin eventos o
        sin transiciones de prueba) se omiten con una advertencia.

        Returns:
            CvResult con el ganador y la tabla completa
        """
        if kind not in MODEL_KINDS:
            raise ValidationError(f"Familia de modelo desconocida: {kind}", "kind")
        T = panel.T
        folds = cv_folds(T, cv)
        alphas: List[Optional[float]] = list(cv.alpha_grid) if (cv.alpha_grid and kind == "ln-joint") else [
            cfg.alpha if kind == "ln-joint" else None
        ]
        criterion = cv.criterion
        if len(alphas) > 1 and criterion == CvCriterion.HELD_OUT_LOSS:
            # la pérdida ponderada por α no es comparable entre valores de α
            logger.warning("Malla de α con criterio de pérdida: se usa el error de predicción")
            criterion = CvCriterion.PREDICTION_ERROR
        inner = cfg.model_copy(update={"threads": 1})

        usable = []
        for i, (start, stop) in enumerate(folds):
            train = panel.window(start, stop)
            parts = [panel.window(a, b) for a, b in ((0, start), (stop, T)) if b > a]
            if not _has_events(train) or not parts:
                logger.warning(f"Ventana {i + 1} [{start}, {stop}] degenerada; se omite")
                continue
            usable.append((i, train, parts))
        if not usable:
            raise EstimationError("Todas las ventanas de validación cruzada son degeneradas")

        grid = [(lam, a) for a in alphas for lam in cv.lambda_grid]
        jobs = [(g, fold) for g in range(len(grid)) for fold in range(len(usable))]

        def run(job):
            g, fold = job
            lam, a = grid[g]
            _, train, parts = usable[fold]
            fit_cfg = inner.with_lambda(lam, a)
            fit = fit_model(kind, train, fit_cfg, nu, eta)
            return self._score(kind, criterion, fit, train, parts, fit_cfg)

        logger.info(f"Validación cruzada: {len(grid)} puntos de malla × {len(usable)} ventanas")
        if threads is None:
            threads = self.threads if self.threads is not None else cfg.threads
        scores = run_parallel(run, jobs, threads)

        table: List[CvRow] = []
        for g, (lam, a) in enumerate(grid):
            fold_scores: List[Optional[float]] = [None] * len(folds)
            for (gj, fold), score in zip(jobs, scores):
                if gj == g:
                    fold_scores[usable[fold][0]] = float(score)
            used = [s for s in fold_scores if s is not None]
            table.append(CvRow(
                lambda_=lam, alpha=a, fold_scores=fold_scores,
                mean_score=float(np.mean(used)), folds_used=len(used),
            ))

        best_score = min(r.mean_score for r in table)
        slack = 1e-12 * max(1.0, abs(best_score))
        tied = [r for r in table if r.mean_score <= best_score + slack]
        best_lambda = max(r.lambda_ for r in tied)
        best = next(r for r in tied if r.lambda_ == best_lambda)
        logger.info(f"Validación cruzada: λ={best.lambda_:.6g}, α={best.alpha}, puntuación {best.mean_score:.6g}")
        return CvResult(
            best_lambda=best.lambda_, best_alpha=best.alpha,
            criterion=criterion.value, table=table,
        )


# Instancia global del servicio
solver_service = SolverService()
