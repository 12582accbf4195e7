"""Single-camera driving trial benchmark: Python bindings for the C++ core."""

from ._trackbench import (
    TrackbenchError,
    __version__,
    apply_homography,
    dtw_distance,
    estimate_homography,
    extract_reference_path,
    frechet_distance,
    keypoint_error_curve,
    leave_one_out_diagnostics,
    parse_detections,
    reprojection_diagnostics,
    run_benchmark,
    similarity_score,
    simulate,
    suggest_baseline,
    thin,
)

__all__ = [
    "TrackbenchError",
    "__version__",
    "apply_homography",
    "dtw_distance",
    "estimate_homography",
    "extract_reference_path",
    "frechet_distance",
    "keypoint_error_curve",
    "leave_one_out_diagnostics",
    "parse_detections",
    "reprojection_diagnostics",
    "run_benchmark",
    "similarity_score",
    "simulate",
    "suggest_baseline",
    "thin",
]
