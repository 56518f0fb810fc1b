"""
Patrón Repository: Capa de acceso a archivos genérica
Separa la lectura/escritura de paneles CSV y documentos JSON de la lógica numérica
"""
from pathlib import Path
from typing import Any, Generic, Iterable, Optional, Type, TypeVar, Union
import hashlib
import json
import logging

import numpy as np
import pandas as pd
import pydantic
from pydantic import BaseModel

from ctxnet.core.config import package_versions
from ctxnet.core.exceptions import BaseServiceError, DataFormatError, NotFoundError, ValidationError
from ctxnet.core.tensors import EventPanel, PanelKind, find_panel_violations
from ctxnet.models.manifest import PanelReport, PanelViolation, RunManifest
from ctxnet.models.network import ModelDocument, NetworkModel

logger = logging.getLogger(__name__)

T = TypeVar("T")
M = TypeVar("M", bound=BaseModel)

PathLike = Union[str, Path]


def file_digest(path: PathLike) -> str:
    """sha256 hexadecimal del contenido de un archivo"""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class BaseRepository(Generic[T]):
    """
    Repositorio base genérico para lectura y escritura de archivos.

    Responsabilidades:
    - Acceso directo al sistema de archivos
    - Conversión entre texto (CSV/JSON) y objetos de dominio
    - Traducción de errores de formato a DataFormatError
    - NO contiene lógica numérica
    """

    def __init__(self, entity_name: str, suffix: str):
        """
        Inicializa el repositorio base.

        Args:
            entity_name: Nombre para mensajes (ej: "Panel")
            suffix: Extensión esperada de los archivos (ej: ".csv")
        """
        self.entity_name = entity_name
        self.suffix = suffix

    def exists(self, path: PathLike) -> bool:
        return Path(path).is_file()

    def read_text(self, path: PathLike) -> str:
        """Lee el archivo como texto o lanza NotFoundError"""
        if not self.exists(path):
            raise NotFoundError(self.entity_name, str(path))
        return Path(path).read_text(encoding="utf-8")

    def write_text(self, text: str, path: PathLike) -> Path:
        """Escribe texto creando los directorios necesarios"""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
        logger.info(f"{self.entity_name} escrito en {target}")
        return target


class JsonRepository(BaseRepository[M]):
    """Repositorio de documentos JSON validados por un modelo pydantic"""

    def __init__(self, entity_name: str, response_model: Type[M]):
        super().__init__(entity_name=entity_name, suffix=".json")
        self.response_model = response_model

    def load(self, path: PathLike) -> M:
        """
        Carga y valida un documento.

        Raises:
            NotFoundError: Si el archivo no existe
            DataFormatError: Si el JSON está mal formado o no cumple el esquema
        """
        text = self.read_text(path)
        try:
            return self.response_model.model_validate_json(text)
        except BaseServiceError:
            raise
        except pydantic.ValidationError as e:
            logger.error(f"Documento {self.entity_name} inválido en {path}: {e}")
            raise DataFormatError(f"{path}: {e.errors()[0]['msg'] if e.errors() else e}")

    def save(self, obj: M, path: PathLike) -> Path:
        return self.write_text(obj.model_dump_json(indent=2), path)


class ArrayRepository(BaseRepository[np.ndarray]):
    """Repositorio de arreglos numéricos en JSON (lista anidada u objeto con una clave)"""

    def __init__(self):
        super().__init__(entity_name="Arreglo", suffix=".json")

    def load(self, path: PathLike, key: Optional[str] = None) -> np.ndarray:
        """
        Carga un arreglo de un archivo JSON.

        Args:
            path: Ruta del archivo
            key: Si el JSON es un objeto, clave donde está el arreglo

        Returns:
            ndarray float
        """
        text = self.read_text(path)
        try:
            payload: Any = json.loads(text)
            if isinstance(payload, dict):
                if key is None or key not in payload:
                    raise DataFormatError(f"{path}: falta la clave '{key}'")
                payload = payload[key]
            arr = np.array(payload, dtype=float)
        except DataFormatError:
            raise
        except (ValueError, TypeError) as e:
            raise DataFormatError(f"{path}: {e}")
        if not np.isfinite(arr).all():
            raise DataFormatError(f"{path}: el arreglo contiene valores no finitos")
        return arr

    def save(self, arr: np.ndarray, path: PathLike) -> Path:
        return self.write_text(json.dumps(np.asarray(arr).tolist()), path)


class PanelRepository(BaseRepository[EventPanel]):
    """
    Repositorio de paneles de eventos en CSV.

    Formato: cabecera `t,node,x_1,...,x_K`; una fila por (t, nodo) con evento;
    los pares ausentes son el vector cero.
    """

    def __init__(self):
        super().__init__(entity_name="Panel", suffix=".csv")

    def load_array(
        self,
        path: PathLike,
        T: Optional[int] = None,
        M: Optional[int] = None,
    ) -> np.ndarray:
        """
        Lee el CSV a un tensor [t, m, k] sin validar los invariantes de las filas.

        Args:
            path: Ruta del CSV
            T: Último paso de tiempo (por defecto el máximo t observado)
            M: Número de nodos (por defecto el máximo nodo observado + 1)

        Raises:
            NotFoundError: Si el archivo no existe
            DataFormatError: Si la cabecera o los valores están mal formados
        """
        if not self.exists(path):
            raise NotFoundError(self.entity_name, str(path))
        try:
            df = pd.read_csv(path)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DataFormatError(f"{path}: {e}")

        columns = [str(c).strip() for c in df.columns]
        K = len(columns) - 2
        expected = ["t", "node"] + [f"x_{k}" for k in range(1, K + 1)]
        if K < 1 or columns != expected:
            raise DataFormatError(f"{path}: cabecera {columns}, se esperaba t,node,x_1,...,x_K")
        df.columns = columns

        try:
            idx = df[["t", "node"]].to_numpy(dtype=float)
            values = df[expected[2:]].to_numpy(dtype=float)
        except (ValueError, TypeError) as e:
            raise DataFormatError(f"{path}: valores no numéricos ({e})")
        if len(df) and (np.isnan(idx).any() or (idx != np.round(idx)).any() or (idx < 0).any()):
            raise DataFormatError(f"{path}: t y node deben ser enteros no negativos")
        idx = idx.astype(int)
        if df.duplicated(subset=["t", "node"]).any():
            raise DataFormatError(f"{path}: pares (t, node) duplicados")

        max_t = int(idx[:, 0].max()) if len(idx) else 0
        max_m = int(idx[:, 1].max()) + 1 if len(idx) else 1
        T = max_t if T is None else T
        M = max_m if M is None else M
        if T < max_t:
            raise ValidationError(f"El panel tiene t={max_t} pero se indicó T={T}", "T")
        if M < max_m:
            raise ValidationError(f"El panel tiene nodo {max_m - 1} pero se indicó M={M}", "M")

        data = np.zeros((T + 1, M, K))
        data[idx[:, 0], idx[:, 1]] = values
        logger.info(f"Panel leído de {path}: T={T}, M={M}, K={K}, {len(df)} filas con evento")
        return data

    @staticmethod
    def infer_kind(data: np.ndarray) -> PanelKind:
        """Categórico si toda fila no nula es exactamente one-hot, composicional en otro caso"""
        rows = data.reshape(-1, data.shape[-1])
        nonzero = rows[(rows != 0).any(axis=1)]
        if len(nonzero) == 0:
            return PanelKind.CATEGORICAL
        one_hot = ((nonzero == 1).sum(axis=1) == 1) & ((nonzero != 0).sum(axis=1) == 1)
        return PanelKind.CATEGORICAL if one_hot.all() else PanelKind.COMPOSITIONAL

    def load(
        self,
        path: PathLike,
        kind: Optional[PanelKind] = None,
        allow_boundary: bool = False,
        T: Optional[int] = None,
        M: Optional[int] = None,
    ) -> EventPanel:
        """Lee y valida un panel; el tipo se infiere si no se indica"""
        data = self.load_array(path, T=T, M=M)
        kind = self.infer_kind(data) if kind is None else kind
        return EventPanel(data=data, kind=kind, allow_boundary=allow_boundary)

    def validate_panel(
        self, path: PathLike, kind: Optional[PanelKind] = None, allow_boundary: bool = False
    ) -> PanelReport:
        """
        Comprueba un panel sin lanzar por filas inválidas.

        Returns:
            PanelReport con dimensiones, frecuencias de evento y violaciones (t, nodo, motivo)

        Raises:
            NotFoundError: Si el archivo no existe
            DataFormatError: Si el CSV está mal formado
        """
        data = self.load_array(path)
        kind = self.infer_kind(data) if kind is None else kind
        violations = find_panel_violations(data, kind, allow_boundary=allow_boundary)
        T = data.shape[0] - 1
        occurred = (data[1:] != 0).any(axis=-1)
        report = PanelReport(
            path=str(path),
            kind=kind.value,
            T=T,
            M=data.shape[1],
            K=data.shape[2],
            event_rows=int((data != 0).any(axis=-1).sum()),
            event_frequencies=(occurred.sum(axis=0) / max(T, 1)).tolist(),
            violations=[PanelViolation(t=t, node=m, reason=reason) for t, m, reason in violations],
        )
        if not report.ok:
            logger.warning(f"Panel {path}: {len(report.violations)} filas inválidas")
        return report

    def to_frame(self, panel: EventPanel) -> pd.DataFrame:
        """Filas (t, nodo) con evento en orden (t, nodo)"""
        t_idx, m_idx = np.nonzero(panel.occurred)
        frame = pd.DataFrame({"t": t_idx, "node": m_idx})
        values = panel.data[t_idx, m_idx]
        for k in range(panel.K):
            frame[f"x_{k + 1}"] = values[:, k]
        return frame

    def save(self, panel: EventPanel, path: PathLike) -> Path:
        """Escribe el panel con 17 dígitos significativos (lectura exacta)"""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame(panel).to_csv(target, index=False, float_format="%.17g")
        logger.info(f"Panel escrito en {target}: T={panel.T}, M={panel.M}, K={panel.K}")
        return target


class ModelRepository(JsonRepository[ModelDocument]):
    """
    Repositorio específico para modelos de red.
    Extiende JsonRepository con la conversión documento ↔ modelo validado.
    """

    def __init__(self):
        super().__init__(entity_name="Modelo", response_model=ModelDocument)

    def load_model(self, path: PathLike) -> NetworkModel:
        """Carga un modelo validando las dimensiones de todos sus tensores"""
        return self.load(path).to_model()

    def save_model(self, model: NetworkModel, path: PathLike) -> Path:
        return self.save(ModelDocument.from_model(model), path)


class TableRepository(BaseRepository[pd.DataFrame]):
    """Repositorio de tablas de resultados en CSV"""

    def __init__(self):
        super().__init__(entity_name="Tabla", suffix=".csv")

    def load(self, path: PathLike) -> pd.DataFrame:
        if not self.exists(path):
            raise NotFoundError(self.entity_name, str(path))
        return pd.read_csv(path)

    def save(self, frame: pd.DataFrame, path: PathLike) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False, float_format="%.10g")
        logger.info(f"Tabla escrita en {target}: {len(frame)} filas")
        return target


class ManifestRepository(JsonRepository[RunManifest]):
    """Manifiesto JSON de una ejecución: configuración, semilla, digests y versiones"""

    def __init__(self):
        super().__init__(entity_name="Manifiesto", response_model=RunManifest)

    def record(
        self,
        path: PathLike,
        command: str,
        config: dict,
        seed: Optional[int],
        inputs: Iterable[PathLike],
        outputs: Iterable[PathLike],
        wall_time: float,
    ) -> Path:
        """Escribe el manifiesto con el sha256 de cada entrada y salida existente"""
        manifest = RunManifest(
            command=command,
            config=config,
            seed=seed,
            inputs={str(p): file_digest(p) for p in inputs if Path(p).is_file()},
            outputs={str(p): file_digest(p) for p in outputs if Path(p).is_file()},
            wall_time=wall_time,
            versions=package_versions(),
        )
        return self.save(manifest, path)
