"""
Factory Pattern para la creación y gestión de servicios
Centraliza los servicios numéricos y los repositorios de archivos que usan los routers
"""
from typing import Any, Dict

from ctxnet.core.base_repository import (
    ArrayRepository,
    ManifestRepository,
    ModelRepository,
    PanelRepository,
    TableRepository,
)
from ctxnet.service.experiment_service import ExperimentService, experiment_service
from ctxnet.service.inference_service import InferenceService, inference_service
from ctxnet.service.objective_service import objective_service
from ctxnet.service.simulation_service import SimulationService, simulation_service
from ctxnet.service.solver_service import SolverService, solver_service


class ServiceFactory:
    """
    Factory para obtener instancias de servicios y repositorios.

    Beneficios:
    - Centraliza la creación de servicios
    - Facilita el testing con dobles
    - Propaga opciones globales (hilos) a todos los servicios
    """

    _services: Dict[str, Any] = {}
    _repositories: Dict[str, Any] = {}
    _initialized: bool = False

    @classmethod
    def initialize(cls):
        """Inicializa todos los servicios y repositorios disponibles"""
        if not cls._initialized:
            cls._services = {
                'simulation': simulation_service,
                'objective': objective_service,
                'solver': solver_service,
                'inference': inference_service,
                'experiment': experiment_service,
            }
            cls._repositories = {
                'panel': PanelRepository(),
                'model': ModelRepository(),
                'array': ArrayRepository(),
                'table': TableRepository(),
                'manifest': ManifestRepository(),
            }
            cls._initialized = True

    @classmethod
    def set_threads(cls, threads: int | None):
        """Fija el número de hilos de todos los servicios"""
        cls.initialize()
        for service in cls._services.values():
            service.set_threads(threads)

    @classmethod
    def get_simulation_service(cls) -> SimulationService:
        cls.initialize()
        return cls._services['simulation']

    @classmethod
    def get_solver_service(cls) -> SolverService:
        cls.initialize()
        return cls._services['solver']

    @classmethod
    def get_inference_service(cls) -> InferenceService:
        cls.initialize()
        return cls._services['inference']

    @classmethod
    def get_experiment_service(cls) -> ExperimentService:
        cls.initialize()
        return cls._services['experiment']

    @classmethod
    def get_panel_repository(cls) -> PanelRepository:
        cls.initialize()
        return cls._repositories['panel']

    @classmethod
    def get_model_repository(cls) -> ModelRepository:
        cls.initialize()
        return cls._repositories['model']

    @classmethod
    def get_array_repository(cls) -> ArrayRepository:
        cls.initialize()
        return cls._repositories['array']

    @classmethod
    def get_table_repository(cls) -> TableRepository:
        cls.initialize()
        return cls._repositories['table']

    @classmethod
    def get_manifest_repository(cls) -> ManifestRepository:
        cls.initialize()
        return cls._repositories['manifest']
