from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Registro reproducible de una ejecución de la CLI"""
    command: str = Field(..., description="Subcomando y argumentos")
    config: Dict[str, Any] = Field(default_factory=dict, description="Eco completo de la configuración")
    seed: Optional[int] = None
    inputs: Dict[str, str] = Field(default_factory=dict, description="Ruta → sha256")
    outputs: Dict[str, str] = Field(default_factory=dict, description="Ruta → sha256")
    wall_time: float = Field(default=0.0, ge=0, description="Segundos")
    versions: Dict[str, str] = Field(default_factory=dict)
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class PanelViolation(BaseModel):
    t: int
    node: int
    reason: str


class PanelReport(BaseModel):
    """Resumen de validación de un panel CSV"""
    path: str
    kind: str
    T: int
    M: int
    K: int
    event_rows: int = Field(..., description="Filas (t, nodo) con evento")
    event_frequencies: List[float] = Field(..., description="T_m / T por nodo")
    violations: List[PanelViolation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        """Texto breve para la terminal"""
        lines = [
            f"{'OK' if self.ok else 'INVALID'} {self.path}",
            f"kind={self.kind} T={self.T} M={self.M} K={self.K} event_rows={self.event_rows}",
            "freq=" + ",".join(f"{f:.4f}" for f in self.event_frequencies),
        ]
        for v in self.violations:
            lines.append(f"violation t={v.t} node={v.node}: {v.reason}")
        return "\n".join(lines)
