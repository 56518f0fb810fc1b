# Modelos de la aplicación
from ctxnet.models.network import (
    ConstantQ,
    DynamicOccurrence,
    InitSpec,
    LogisticNormalModel,
    ModelDocument,
    MultinomialModel,
    NetworkModel,
)
from ctxnet.models.mixture import MixtureSpec
from ctxnet.models.fit_config import BacktrackingStep, CvConfig, CvCriterion, FitConfig, FixedStep
from ctxnet.models.fit_result import CvResult, FitReport, FitResult, KktReport
from ctxnet.models.inference import BaselineKind, BaselineModel, EdgeList, EdgeMode, EdgeScore, PredictionReport
from ctxnet.models.experiment import AlphaSweepConfig, MixtureStudyConfig, ModelKind, ScalingConfig
from ctxnet.models.manifest import PanelReport, RunManifest

__all__ = [
    "ConstantQ", "DynamicOccurrence", "InitSpec", "LogisticNormalModel", "ModelDocument",
    "MultinomialModel", "NetworkModel", "MixtureSpec", "BacktrackingStep", "CvConfig",
    "CvCriterion", "FitConfig", "FixedStep", "CvResult", "FitReport", "FitResult", "KktReport",
    "BaselineKind", "BaselineModel", "EdgeList", "EdgeMode", "EdgeScore", "PredictionReport",
    "AlphaSweepConfig", "MixtureStudyConfig", "ModelKind", "ScalingConfig",
    "PanelReport", "RunManifest",
]
