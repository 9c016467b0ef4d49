"""Analysis layer: scaling collapse, divergence estimation, diagnostics."""

from .fss import (ANSATZE, CollapseInput, FitResult, collapse_loss,
                  fit_collapse)
from .kl import KLConfig, KLResult, kl_divergence, log_kde, silverman_bandwidth
from .probes import FRAME_ENSEMBLES, frame_potential, lyapunov_estimate

__all__ = [
    "ANSATZE", "CollapseInput", "FitResult", "collapse_loss", "fit_collapse",
    "KLConfig", "KLResult", "kl_divergence", "log_kde", "silverman_bandwidth",
    "FRAME_ENSEMBLES", "frame_potential", "lyapunov_estimate",
]
