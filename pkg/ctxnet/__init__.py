"""ctxnet: redes de influencia dependientes del contexto"""

__version__ = "1.0.0"
