"""Wi-Fi gated loop closure: simulator, policies and metrics."""

from ._core import (
    Pose2,
    WifiSlamError,
    between,
    cli,
    cosine_similarity,
    generate,
    kabsch_align,
    localize,
    mask_bssid,
    preset_names,
    rmse,
    run,
    similarity_curve,
    strength_of,
)

__all__ = [
    "Pose2",
    "WifiSlamError",
    "between",
    "cli",
    "cosine_similarity",
    "generate",
    "kabsch_align",
    "localize",
    "mask_bssid",
    "preset_names",
    "rmse",
    "run",
    "similarity_curve",
    "strength_of",
]
