"""Quality enhancement for block-quantized video.

The package detects high-quality keyframes in a compressed clip with an
SVM over no-reference features, aligns each remaining frame with its two
nearest keyframes through a trainable motion-compensation network, and
fuses the three frames in a residual enhancement network. Everything
runs on a small numpy-based autodiff engine (`mfqe.engine`); the
submodules expose the individual stages and `mfqe.cli` wires them into
the `mfqe` command.
"""

from .checkpoint import CheckpointBundle, load_bundle, load_svm, save_bundle, save_svm
from .detector import DetectionResult, DetectionScores, DetectorConfig, refine_labels
from .errors import (
    ArgumentError,
    CheckpointFormatError,
    DegenerateInputError,
    MfqeError,
    ShapeError,
    TrainingDivergedError,
    TruncationError,
    VideoFormatError,
)
from .mc_subnet import McConfig, McOutputs, MotionField, mc_forward, mc_params
from .metrics import (
    CurveStats,
    FrameKind,
    PeakValleyLabels,
    QualityCurve,
    curve_stats,
    find_peaks_valleys,
    psnr,
    quality_curve,
)
from .pipeline import (
    BuildResult,
    EnhanceResult,
    EvalReport,
    LossWeights,
    Schedule,
    TrainingSample,
    TrainReport,
    TrainResult,
    build_pqf_samples,
    build_samples,
    enhance_clip,
    evaluate_enhancement,
    train_mfcnn,
    train_single_frame,
)
from .qe_subnet import QeConfig, QeOutput, qe_forward, qe_params, qe_single_frame
from .simulate import QualitySchedule, SynthSpec, degrade_clip, synth_clip
from .svm import SvmModel
from .video_io import (
    ClipPair,
    LumaFrame,
    VideoClip,
    clip_from_arrays,
    read_raw_yuv420,
    read_y4m,
    write_y4m,
    y4m_bytes,
)

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "BuildResult",
    "CheckpointBundle",
    "CheckpointFormatError",
    "ClipPair",
    "CurveStats",
    "DegenerateInputError",
    "DetectionResult",
    "DetectionScores",
    "DetectorConfig",
    "EnhanceResult",
    "EvalReport",
    "FrameKind",
    "LossWeights",
    "LumaFrame",
    "McConfig",
    "McOutputs",
    "MfqeError",
    "MotionField",
    "PeakValleyLabels",
    "QeConfig",
    "QeOutput",
    "QualityCurve",
    "QualitySchedule",
    "Schedule",
    "ShapeError",
    "SvmModel",
    "SynthSpec",
    "TrainReport",
    "TrainResult",
    "TrainingDivergedError",
    "TrainingSample",
    "TruncationError",
    "VideoClip",
    "VideoFormatError",
    "build_pqf_samples",
    "build_samples",
    "clip_from_arrays",
    "curve_stats",
    "degrade_clip",
    "enhance_clip",
    "evaluate_enhancement",
    "find_peaks_valleys",
    "load_bundle",
    "load_svm",
    "mc_forward",
    "mc_params",
    "psnr",
    "qe_forward",
    "qe_params",
    "qe_single_frame",
    "quality_curve",
    "read_raw_yuv420",
    "read_y4m",
    "refine_labels",
    "save_bundle",
    "save_svm",
    "synth_clip",
    "train_mfcnn",
    "train_single_frame",
    "write_y4m",
    "y4m_bytes",
]
