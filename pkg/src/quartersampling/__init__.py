"""Quarter-sampling video acquisition and recursive frequency selective reconstruction."""

__version__ = "0.1.0"

import numba  # noqa: E402

# prefer OpenMP: the bundled TBB is often too old and only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .consistency import CheckMode, CheckStats, apply_check  # noqa: E402
from .errors import ConfigError, DimensionError, FormatError  # noqa: E402
from .frame_io import (Frame, Mask, SampledFrame, read_frame, read_mask,  # noqa: E402
                       read_sequence, write_frame, write_mask, write_sequence)
from .fsr import FsrParams, build_block_model, reconstruct_frame  # noqa: E402
from .mask import (MaskSchedule, apply_mask, generate_dynamic_mask,  # noqa: E402
                   generate_fixed_mask, generate_schedule)
from .metrics import EvalConfig, psnr, sequence_summary, ssim  # noqa: E402
from .motion import MotionField, MotionParams, estimate, reverse_cost  # noqa: E402
from .pipeline import History, PipelineConfig, reconstruct_next, run_sequence  # noqa: E402
from .projection import ProjectionBuffer, project  # noqa: E402

__all__ = [
    "CheckMode", "CheckStats", "ConfigError", "DimensionError", "EvalConfig", "FormatError",
    "Frame", "FsrParams", "History", "Mask", "MaskSchedule", "MotionField", "MotionParams",
    "PipelineConfig", "ProjectionBuffer", "SampledFrame", "apply_check", "apply_mask",
    "build_block_model", "estimate", "generate_dynamic_mask", "generate_fixed_mask",
    "generate_schedule", "project", "psnr", "read_frame", "read_mask", "read_sequence",
    "reconstruct_frame", "reconstruct_next", "reverse_cost", "run_sequence", "sequence_summary", "ssim",
    "write_frame", "write_mask", "write_sequence",
]
