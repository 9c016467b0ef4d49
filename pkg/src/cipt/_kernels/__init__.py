"""Kernel selection: compiled extension if available, pure numpy otherwise.

Set CIPT_KERNELS=pure or CIPT_KERNELS=compiled to force a choice (forcing
`compiled` raises if the extension is missing, instead of silently falling
back).
"""

import os

from . import _pure

_choice = os.environ.get("CIPT_KERNELS", "auto").lower()

if _choice not in ("auto", "pure", "compiled"):
    raise ValueError(f"CIPT_KERNELS must be auto|pure|compiled, got {_choice!r}")

if _choice == "pure":
    impl = _pure
else:
    try:
        from . import _core as impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise
        impl = _pure

IMPL = impl.IMPL

statmech1_batch = impl.statmech1_batch
dephasing_batch = impl.dephasing_batch
statmech2_batch = impl.statmech2_batch
sv_apply2 = impl.sv_apply2
sv_apply1 = impl.sv_apply1
sv_measure_reset = impl.sv_measure_reset
sv_ones_moments = impl.sv_ones_moments
sv_sample_index = impl.sv_sample_index
sv_run_trajectory = impl.sv_run_trajectory
