"""Adaptive-circuit phase-transition toolkit.

Simulates measurement-and-feedback random circuits with interchangeable
backends (statevector, dephasing, bit-flip stat-mech samplers, a two-copy
weighted walk) and fits the resulting order parameters with a
finite-size-scaling collapse.
"""

from ._version import __version__
from .analysis import (CollapseInput, FitResult, KLConfig, KLResult,
                       collapse_loss, fit_collapse, frame_potential,
                       kl_divergence, lyapunov_estimate)
from .circuit import (BOUNDARIES, ENSEMBLES, CircuitParams,
                      CircuitRealization, deserialize_circuit,
                      sample_circuit, serialize_circuit)
from .classical import (NoiseParams, dephasing_run_batch, statmech1_exact,
                        statmech1_run_batch)
from .errors import (CapacityError, CiptError, ConvergenceWarning,
                     EstimationError, FitFailureError, FormatError,
                     InsufficientDataError, NumericalIntegrityError,
                     ParameterError, SchemaError, SingularLossError,
                     UnsupportedVersionError)
from .observables import (CircuitStats, EnsembleStats, circuit_stats,
                          decomposition_components, ensemble_stats,
                          quantum_var_estimate)
from .statevector import run_circuit_shots
from .statmech2 import estimate_collision_probability
from .sweep import SweepSpec, read_csv, run_sweep

__all__ = [
    "__version__",
    "BOUNDARIES", "ENSEMBLES", "CircuitParams", "CircuitRealization",
    "sample_circuit", "serialize_circuit", "deserialize_circuit",
    "run_circuit_shots",
    "NoiseParams", "dephasing_run_batch", "statmech1_run_batch",
    "statmech1_exact", "estimate_collision_probability",
    "CircuitStats", "EnsembleStats", "circuit_stats", "ensemble_stats",
    "quantum_var_estimate", "decomposition_components",
    "CollapseInput", "FitResult", "collapse_loss", "fit_collapse",
    "KLConfig", "KLResult", "kl_divergence",
    "frame_potential", "lyapunov_estimate",
    "SweepSpec", "run_sweep", "read_csv",
    "CiptError", "ParameterError", "CapacityError",
    "NumericalIntegrityError", "FormatError", "UnsupportedVersionError",
    "SchemaError", "InsufficientDataError", "SingularLossError",
    "FitFailureError", "EstimationError", "ConvergenceWarning",
]
