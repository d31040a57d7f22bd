"""Personalized graph federated learning simulator.

Clusters of clients attached to a graph of servers learn cluster-specific
models through a proximal consensus scheme with inter-cluster mixing,
optional client scheduling, and dynamically calibrated Gaussian
perturbation for differential privacy. A FedAvg-style baseline, evaluation
metrics, and a reproducible experiment harness are included.
"""

from pgfl.errors import (
    ConfigurationError,
    DataError,
    IdxFormatError,
    SolverError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DataError",
    "IdxFormatError",
    "SolverError",
    "__version__",
]
