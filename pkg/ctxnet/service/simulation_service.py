"""
Servicio de Simulación - Generadores reproducibles para los modelos multinomial,
logístico-normal (q constante o dinámica), de mezcla y de Bernoulli autorregresivo

Toda la aleatoriedad sale de un generador Philox (basado en contador) con un
sub-flujo por (paso de tiempo, propósito); dentro de un paso los nodos se sortean
vectorizados en orden fijo.
"""
from enum import IntEnum
from typing import Dict, List, Optional, Tuple, Union
import logging

import numpy as np
from scipy.special import expit, softmax

from ctxnet.core.base_service import BaseService, service_operation
from ctxnet.core.exceptions import NotFoundError, ValidationError, check_shape
from ctxnet.core.tensors import EventPanel, PanelKind
from ctxnet.models.mixture import MixtureSpec
from ctxnet.models.network import (
    ConstantQ,
    DynamicOccurrence,
    InitSpec,
    LogisticNormalModel,
    MultinomialModel,
    NetworkModel,
)
from ctxnet.service.objective_service import alr_inverse

logger = logging.getLogger(__name__)


class Purpose(IntEnum):
    """Propósito de un sub-flujo aleatorio dentro de un paso de tiempo"""
    INIT = 0
    OCCURRENCE = 1
    CATEGORY = 2
    NOISE = 3
    CONTAMINATION = 4
    NETWORK = 5


class SeedStream:
    """
    Fábrica de sub-flujos Philox.

    La clave de 128 bits se deriva de la semilla con SeedSequence; el contador
    [0, 0, t, propósito] identifica el sub-flujo, de modo que cada paso puede
    regenerarse sin recorrer los anteriores.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.key = np.random.SeedSequence(self.seed).generate_state(2, np.uint64)

    def step(self, t: int, purpose: Purpose) -> np.random.Generator:
        counter = np.array([0, 0, int(t), int(purpose)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=self.key, counter=counter))

    def network(self) -> np.random.Generator:
        """Sub-flujo para muestrear redes verdaderas"""
        return self.step(0, Purpose.NETWORK)

    @staticmethod
    def spawn_seeds(seed: int, n: int) -> List[int]:
        """Semillas independientes por repetición (hijas de SeedSequence)"""
        children = np.random.SeedSequence(int(seed)).spawn(n)
        return [int(child.generate_state(1, np.uint64)[0]) for child in children]


def _as_generator(seed: Union[int, np.random.Generator, None]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return SeedStream(0 if seed is None else seed).step(0, Purpose.NOISE)


def _noise_factor(Sigma) -> np.ndarray:
    """Factor de Cholesky L (Σ = LLᵀ); Σ = 0 se admite como caso degenerado"""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if Sigma.shape[0] != Sigma.shape[1] or not np.allclose(Sigma, Sigma.T):
        raise ValidationError("Sigma debe ser una matriz cuadrada simétrica", "Sigma")
    if not Sigma.any():
        return np.zeros_like(Sigma)
    try:
        return np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise ValidationError("Sigma no es definida positiva", "Sigma")


# ============================================================================
# Muestreo elemental
# ============================================================================

def sample_logistic_normal(
    mu,
    Sigma,
    seed: Union[int, np.random.Generator, None] = None,
    noiseless: bool = False,
) -> np.ndarray:
    """
    Muestra Z ~ LN(μ, Σ): ε ~ N(0, Σ) y Z = alr⁻¹(μ + ε).

    Args:
        mu: Log-cocientes medios (K−1,) o (n, K−1)
        Sigma: Covarianza (K−1, K−1); Σ = 0 da la imagen exacta de μ
        seed: Semilla o generador
        noiseless: Fuerza ε = 0

    Returns:
        Vector(es) del símplex de longitud K, estrictamente positivos

    Raises:
        ValidationError: Si Σ no es definida positiva
    """
    mu = np.asarray(mu, dtype=float)
    L = _noise_factor(Sigma)
    check_shape("Sigma", L.shape, (mu.shape[-1], mu.shape[-1]))
    if noiseless:
        return alr_inverse(mu)
    rng = _as_generator(seed)
    eps = rng.standard_normal(mu.shape) @ L.T
    return alr_inverse(mu + eps)


def _draw_initial(stream: SeedStream, M: int, K: int, init: InitSpec) -> np.ndarray:
    """X^0_m = e_k con probabilidad p0/K cada una; cero con probabilidad 1 − p0"""
    rng = stream.step(0, Purpose.INIT)
    occurs = rng.random(M) < init.p0
    category = rng.integers(0, K, size=M)
    X0 = np.zeros((M, K))
    X0[np.nonzero(occurs)[0], category[occurs]] = 1.0
    return X0


def _draw_categories(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sorteo por CDF inversa de una categoría por fila de probs (R, C)"""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None]
    return np.minimum((u >= cdf).sum(axis=1), probs.shape[1] - 1)


def _step_matrix(A: np.ndarray) -> np.ndarray:
    """Tensor (M, K_out, M, K) → matriz (M·K_out, M·K) para μ = W·vec(X^t)"""
    M, K_out, _, K = A.shape
    return A.reshape(M * K_out, M * K)


def _check_horizon(T: int) -> None:
    if T < 1:
        raise ValidationError(f"T debe ser ≥ 1, se recibió {T}", "T")


# ============================================================================
# Simuladores
# ============================================================================

def simulate_multinomial(
    model: MultinomialModel, T: int, init: Optional[InitSpec] = None, seed: int = 0
) -> EventPanel:
    """
    Simula el modelo multinomial: en t+1 el nodo m cae en la categoría k con
    probabilidad e^{μ_k} / (1 + Σ e^{μ_k'}) y no tiene evento con 1 / (1 + Σ e^{μ_k'}).

    Returns:
        Panel categórico de T+1 pasos
    """
    _check_horizon(T)
    init = init or InitSpec()
    stream = SeedStream(seed)
    M, K = model.M, model.K
    W = _step_matrix(model.A.data)

    data = np.zeros((T + 1, M, K))
    data[0] = _draw_initial(stream, M, K, init)
    rows = np.arange(M)
    for t in range(T):
        mu = (W @ data[t].ravel()).reshape(M, K) + model.nu
        # ranura 0 = sin evento
        probs = softmax(np.concatenate([np.zeros((M, 1)), mu], axis=1), axis=1)
        slot = _draw_categories(probs, stream.step(t + 1, Purpose.CATEGORY))
        hit = slot > 0
        data[t + 1, rows[hit], slot[hit] - 1] = 1.0
    return EventPanel(data=data, kind=PanelKind.CATEGORICAL)


def _occurrence_probability(model: LogisticNormalModel, x_flat: np.ndarray) -> np.ndarray:
    occ = model.occurrence
    if isinstance(occ, ConstantQ):
        return occ.q
    return expit(occ.B.data.reshape(model.M, -1) @ x_flat + occ.eta)


def simulate_logistic_normal(
    model: LogisticNormalModel,
    T: int,
    init: Optional[InitSpec] = None,
    seed: int = 0,
    noiseless: bool = False,
) -> EventPanel:
    """
    Simula el modelo logístico-normal: el nodo m tiene evento con probabilidad
    q_m (constante) o logistic(⟨B_m, X^t⟩ + η_m) (dinámica) y, si lo tiene,
    X^{t+1}_m = alr⁻¹(⟨A_m, X^t⟩ + ν_m + ε) con ε ~ N(0, Σ).

    Args:
        noiseless: Fuerza ε = 0 (las filas son la imagen exacta de la intensidad)

    Returns:
        Panel composicional de T+1 pasos
    """
    _check_horizon(T)
    if model.Sigma is None and not noiseless:
        raise ValidationError("Simular requiere la covarianza Sigma del modelo", "Sigma")
    init = init or InitSpec()
    stream = SeedStream(seed)
    M, K = model.M, model.K
    W = _step_matrix(model.A.data)
    L = None if noiseless else _noise_factor(model.Sigma)

    data = np.zeros((T + 1, M, K))
    data[0] = _draw_initial(stream, M, K, init)
    for t in range(T):
        x = data[t].ravel()
        q = _occurrence_probability(model, x)
        occurs = stream.step(t + 1, Purpose.OCCURRENCE).random(M) < q
        mu = (W @ x).reshape(M, K - 1) + model.nu
        if L is not None:
            mu = mu + stream.step(t + 1, Purpose.NOISE).standard_normal((M, K - 1)) @ L.T
        data[t + 1, occurs] = alr_inverse(mu[occurs])
    return EventPanel(data=data, kind=PanelKind.COMPOSITIONAL)


def contamination_means(K: int) -> np.ndarray:
    """
    Medias de log-cocientes de la contaminación por categoría verdadera,
    forma (K, K−1): e_k para k < K y (−1, …, −1) para la categoría K.
    """
    means = np.zeros((K, K - 1))
    means[np.arange(K - 1), np.arange(K - 1)] = 1.0
    means[K - 1] = -1.0
    return means


def simulate_mixture(
    spec: MixtureSpec, T: int, seed: int = 0, init: Optional[InitSpec] = None
) -> Tuple[EventPanel, MixtureSpec]:
    """
    Simula el modelo de mezcla: nodos M1 logístico-normales con ocurrencia dinámica;
    nodos M2 multinomiales cuyo resultado e_k se observa contaminado como
    LN(e_k, σ) (o LN((−1, …, −1), σ) si el resultado es la categoría K).

    Returns:
        (panel composicional, especificación verdadera)
    """
    _check_horizon(T)
    init = init or InitSpec()
    stream = SeedStream(seed)
    M, K = spec.M, spec.K
    m1, m2 = np.asarray(spec.m1, dtype=int), np.asarray(spec.m2, dtype=int)
    W_ln = _step_matrix(spec.A_ln)[np.ravel(m1[:, None] * (K - 1) + np.arange(K - 1))]
    W_mn = _step_matrix(spec.A_mn)[np.ravel(m2[:, None] * K + np.arange(K))]
    V = spec.B.reshape(M, M * K)[m1]
    L_ln = np.sqrt(spec.sigma2_ln) * np.eye(K - 1)
    means = contamination_means(K)

    data = np.zeros((T + 1, M, K))
    data[0] = _draw_initial(stream, M, K, init)
    for t in range(T):
        x = data[t].ravel()
        occ_rng = stream.step(t + 1, Purpose.OCCURRENCE)
        noise_rng = stream.step(t + 1, Purpose.NOISE)

        # M1: logístico-normal con red de ocurrencia
        if len(m1):
            occurs = occ_rng.random(len(m1)) < expit(V @ x + spec.eta[m1])
            mu = (W_ln @ x).reshape(len(m1), K - 1) + spec.nu_ln[m1]
            mu = mu + noise_rng.standard_normal((len(m1), K - 1)) @ L_ln.T
            data[t + 1, m1[occurs]] = alr_inverse(mu[occurs])

        # M2: multinomial contaminado
        if len(m2):
            mu = (W_mn @ x).reshape(len(m2), K) + spec.nu_mn[m2]
            probs = softmax(np.concatenate([np.zeros((len(m2), 1)), mu], axis=1), axis=1)
            slot = _draw_categories(probs, stream.step(t + 1, Purpose.CATEGORY))
            hit = slot > 0
            eps = stream.step(t + 1, Purpose.CONTAMINATION).standard_normal((len(m2), K - 1))
            y = means[np.maximum(slot - 1, 0)] + spec.sigma_contam * eps
            data[t + 1, m2[hit]] = alr_inverse(y[hit])
    return EventPanel(data=data, kind=PanelKind.COMPOSITIONAL), spec


def round_to_categorical(panel: EventPanel) -> EventPanel:
    """
    Redondea cada fila no nula a e_k con k = argmax (empates al menor índice);
    las filas nulas siguen nulas.
    """
    mask = panel.occurred
    data = np.zeros_like(panel.data)
    t_idx, m_idx = np.nonzero(mask)
    data[t_idx, m_idx, np.argmax(panel.data[t_idx, m_idx], axis=1)] = 1.0
    return EventPanel(data=data, kind=PanelKind.CATEGORICAL)


def simulate_bernoulli_autoregressive(
    B: np.ndarray, eta: np.ndarray, T: int, seed: int = 0, p0: float = 0.8
) -> EventPanel:
    """
    Simula indicadores de evento x^{t+1}_m ~ Bernoulli(logistic(⟨B_m, x^t⟩ + η_m)).

    Args:
        B: Matriz (M, M)
        eta: Desplazamientos (M,)
        T: Horizonte
        seed: Semilla
        p0: Probabilidad de evento inicial

    Returns:
        Panel categórico con K = 1 (indicadores)
    """
    _check_horizon(T)
    B = np.asarray(B, dtype=float)
    eta = np.asarray(eta, dtype=float).reshape(-1)
    M = B.shape[0]
    check_shape("B", B.shape, (M, M))
    check_shape("eta", eta.shape, (M,))
    stream = SeedStream(seed)
    x = np.zeros((T + 1, M))
    x[0] = stream.step(0, Purpose.INIT).random(M) < p0
    for t in range(T):
        x[t + 1] = stream.step(t + 1, Purpose.OCCURRENCE).random(M) < expit(B @ x[t] + eta)
    return EventPanel(data=x[..., None], kind=PanelKind.CATEGORICAL)


# ============================================================================
# Redes verdaderas
# ============================================================================

def _support_sizes(M: int, s: int) -> np.ndarray:
    """ρ = s // M grupos por nodo; el resto s mod M va a los primeros nodos"""
    if not 0 <= s <= M * M:
        raise ValidationError(f"s={s} fuera de rango 0..{M * M}", "s")
    sizes = np.full(M, s // M)
    sizes[: s % M] += 1
    return sizes


def sample_support(M: int, s: int, rng: np.random.Generator) -> np.ndarray:
    """Máscara booleana (M, M) de grupos no nulos, muestreados sin reemplazo por nodo"""
    support = np.zeros((M, M), dtype=bool)
    for m, size in enumerate(_support_sizes(M, s)):
        support[m, rng.choice(M, size=size, replace=False)] = True
    return support


def sample_group_sparse_network(
    M: int, K_out: int, K_in: int, s: int,
    low: float = -2.0, high: float = 2.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Red (M, K_out, M, K_in) con s grupos (m, m') no nulos y entradas U(low, high).
    """
    rng = rng or SeedStream(0).network()
    support = sample_support(M, s, rng)
    values = rng.uniform(low, high, size=(M, K_out, M, K_in))
    return values * support[:, None, :, None]


def sample_joint_network(
    M: int, K: int, s: int,
    low: float = -2.0, high: float = 2.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Redes (A^LN, B^Bern) con el mismo soporte de grupos"""
    rng = rng or SeedStream(0).network()
    support = sample_support(M, s, rng)
    A = rng.uniform(low, high, size=(M, K - 1, M, K)) * support[:, None, :, None]
    B = rng.uniform(low, high, size=(M, 1, M, K)) * support[:, None, :, None]
    return A, B


# ============================================================================
# Presets
# ============================================================================

PRESETS = ("mn-4.1.1", "ln-constq-4.1.2", "ln-dyn-4.1.3", "mixture-appB")


def build_preset(
    name: str, M: int, s: int, K: int = 2, seed: int = 0, sigma2: float = 1.0,
    low: float = -2.0, high: float = 2.0,
) -> NetworkModel:
    """
    Modelo verdadero de uno de los escenarios de simulación.

    - mn-4.1.1: multinomial, ν = log(4/K)
    - ln-constq-4.1.2: logístico-normal con q = 0.8, ν = 0, Σ = σ²I
    - ln-dyn-4.1.3: logístico-normal con red de ocurrencia de soporte compartido, η = log 4

    Raises:
        NotFoundError: Si el preset no existe (mixture-appB usa MixtureSpec)
    """
    rng = SeedStream(seed).network()
    if name == "mn-4.1.1":
        A = sample_group_sparse_network(M, K, K, s, low, high, rng)
        return MultinomialModel(A=A, nu=np.full((M, K), np.log(4.0 / K)))
    if K < 2:
        raise ValidationError("Los presets logístico-normales requieren K ≥ 2", "K")
    Sigma = sigma2 * np.eye(K - 1)
    if name == "ln-constq-4.1.2":
        A = sample_group_sparse_network(M, K - 1, K, s, low, high, rng)
        return LogisticNormalModel(A=A, nu=np.zeros((M, K - 1)), Sigma=Sigma, occurrence=ConstantQ(q=np.full(M, 0.8)))
    if name == "ln-dyn-4.1.3":
        A, B = sample_joint_network(M, K, s, low, high, rng)
        return LogisticNormalModel(
            A=A, nu=np.zeros((M, K - 1)), Sigma=Sigma,
            occurrence=DynamicOccurrence(B=B, eta=np.full(M, np.log(4.0))),
        )
    raise NotFoundError("Preset", name)


class SimulationService(BaseService):
    """
    Servicio de Simulación.

    Orquesta los simuladores para la CLI: modelos arbitrarios, presets con red
    muestreada y el modelo de mezcla.
    """

    def __init__(self):
        super().__init__(entity_name="Simulación")

    @service_operation("simular un modelo")
    def simulate_model(
        self, model: NetworkModel, T: int, seed: int, init: Optional[InitSpec] = None
    ) -> EventPanel:
        """Simula un modelo ya validado (multinomial o logístico-normal)"""
        logger.info(f"Simulando {type(model).__name__} con M={model.M}, K={model.K}, T={T}, seed={seed}")
        if isinstance(model, MultinomialModel):
            return simulate_multinomial(model, T, init, seed)
        return simulate_logistic_normal(model, T, init, seed)

    @service_operation("simular un preset")
    def simulate_preset(
        self,
        name: str,
        T: int,
        seed: int,
        M: int = 10,
        s: int = 10,
        K: int = 2,
        sigma_contam: float = 0.2,
    ) -> Tuple[EventPanel, Dict[str, object]]:
        """
        Simula un escenario predefinido.

        Returns:
            (panel, verdad) donde verdad contiene "model" (NetworkModel) y, para la
            mezcla, también "mixture" (MixtureSpec completa)
        """
        if name not in PRESETS:
            raise NotFoundError("Preset", name)
        if name == "mixture-appB":
            spec = MixtureSpec.reference_default(sigma_contam=sigma_contam)
            logger.info(f"Simulando mezcla de referencia con T={T}, seed={seed}")
            panel, truth = simulate_mixture(spec, T, seed)
            return panel, {"model": truth.as_logistic_normal(), "mixture": truth}
        model = build_preset(name, M, s, K, seed)
        return self.simulate_model(model, T, seed), {"model": model}


# Instancia global del servicio
simulation_service = SimulationService()
