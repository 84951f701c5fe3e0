"""Input coercion helpers for the estimator and library entry points."""

from __future__ import annotations

import numpy as np

from .scene import CameraModel, DepthMap, ImageBuffer, srgb_to_linear


def ensure_image(x) -> ImageBuffer:
    """Accept an ImageBuffer, a linear float array, or an sRGB uint8 array."""
    if isinstance(x, ImageBuffer):
        return x
    arr = np.asarray(x)
    if arr.dtype == np.uint8:
        return ImageBuffer(srgb_to_linear(arr.astype(np.float64) / 255.0))
    if arr.dtype == np.uint16:
        return ImageBuffer(srgb_to_linear(arr.astype(np.float64) / 65535.0))
    return ImageBuffer(arr)


def ensure_depth(x) -> DepthMap:
    if isinstance(x, DepthMap):
        return x
    return DepthMap(np.asarray(x, dtype=np.float64))


def ensure_camera(x) -> CameraModel:
    """Accept a CameraModel or a calibration-schema dict."""
    if isinstance(x, CameraModel):
        return x
    if isinstance(x, dict):
        doc = dict(x)
        speed = float(doc.pop("ego_speed_mps", 0.0))
        ego = doc.pop("ego_velocity", (0.0, 0.0, speed))
        return CameraModel(
            fx=float(doc["fx"]), fy=float(doc["fy"]),
            cx=float(doc["cx"]), cy=float(doc["cy"]),
            width=int(doc["width"]), height=int(doc["height"]),
            focal_m=float(doc["focal_m"]), f_number=float(doc["f_number"]),
            exposure_s=float(doc["exposure_s"]),
            focus_plane_m=float(doc.get("focus_plane_m", 6.0)),
            ego_velocity=tuple(ego))
    raise TypeError(f"cannot interpret {type(x).__name__} as a camera")
