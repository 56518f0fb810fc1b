from ctxnet.core.config import settings, configure_logging
from ctxnet.core.tensors import (
    EventPanel,
    GroupIndex,
    InfluenceTensor,
    Intercepts,
    PanelKind,
    frobenius_sq_diff,
    group_norm_R,
    group_norm_R_alpha,
)

__all__ = [
    'settings', 'configure_logging', 'EventPanel', 'GroupIndex', 'InfluenceTensor',
    'Intercepts', 'PanelKind', 'frobenius_sq_diff', 'group_norm_R', 'group_norm_R_alpha',
]
