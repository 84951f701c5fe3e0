"""Scene data model: linear-RGB image buffers, metric depth maps, camera
calibration and rainfall configuration.

Conventions used throughout the package:
  - camera frame: x right, y down, z forward (optical axis); up is (0,-1,0)
  - all radiometric math happens in linear RGB, values in [0,1]
  - sRGB encoding/decoding only at I/O boundaries
  - depth is metric (meters), one value per pixel
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage


# ---------------------------------------------------------------------------
# color space
# ---------------------------------------------------------------------------

def srgb_to_linear(x: np.ndarray) -> np.ndarray:
    """Decode sRGB values in [0,1] to linear radiance."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(x: np.ndarray) -> np.ndarray:
    """Encode linear radiance in [0,1] to sRGB."""
    x = np.asarray(x, dtype=np.float64)
    x = np.clip(x, 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * x ** (1.0 / 2.4) - 0.055)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class ImageBuffer:
    """Linear-RGB raster, float64 (H, W, 3), values in [0,1]."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got {self.data.shape}")
        if self.data.shape[0] == 0 or self.data.shape[1] == 0:
            raise ValueError("empty image")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("image contains non-finite values")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ValueError("image values outside [0,1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def mean(self) -> float:
        return float(self.data.mean())

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.data.copy())


@dataclass
class DepthMap:
    """Per-pixel metric depth, float64 (H, W), strictly positive meters."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"expected (H, W) array, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)) or self.data.min() <= 0.0:
            raise ValueError("depth must be finite and > 0 everywhere")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with exposure and thin-lens defocus parameters.

    fx, fy, cx, cy are in pixels; focal_m is the physical focal length in
    meters; exposure_s the shutter time; focus_plane_m the in-focus distance;
    ego_velocity the camera velocity in its own frame (m/s).
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    focal_m: float
    f_number: float
    exposure_s: float
    focus_plane_m: float = 6.0
    ego_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("fx", "fy", "focal_m", "f_number", "exposure_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if self.focus_plane_m <= self.focal_m:
            raise ValueError("focus plane must lie beyond the focal length")

    @property
    def pixel_pitch(self) -> float:
        """Physical sensor pixel size in meters, derived as focal_m / fx."""
        return self.focal_m / self.fx

    def project(self, points: np.ndarray, z_floor: float = 1e-6) -> np.ndarray:
        """Project camera-frame 3D points (N, 3) to pixel coordinates (N, 2).

        Depths below z_floor are clamped so points at/behind the camera plane
        do not produce infinities; callers classify such drops separately.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        z = np.maximum(pts[:, 2], z_floor)
        u = self.fx * pts[:, 0] / z + self.cx
        v = self.fy * pts[:, 1] / z + self.cy
        out = np.stack([u, v], axis=1)
        return out[0] if np.ndim(points) == 1 else out


@dataclass(frozen=True)
class RainfallConfig:
    """Rainfall intensity and particle-population parameters.

    rate is in mm/hr.  d_min/d_max bound the simulated drop diameters (mm);
    sub-millimeter drops are handled volumetrically by the fog layer.
    simulation_volume is the frustum depth bound in meters.  sun_direction
    is a unit vector in the camera frame (default: zenith, i.e. straight up).
    """

    rate: float
    seed: int = 0
    d_min: float = 1.0
    d_max: float = 6.0
    simulation_volume: float = 10.0
    hg_asymmetry: float = 0.9
    sun_direction: tuple[float, float, float] = (0.0, -1.0, 0.0)
    irradiance_scale: float = 1.0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rainfall rate must be >= 0")
        if not (0 < self.d_min < self.d_max):
            raise ValueError("need 0 < d_min < d_max")
        if abs(self.hg_asymmetry) >= 1:
            raise ValueError("|hg_asymmetry| must be < 1")
        if self.simulation_volume <= 0:
            raise ValueError("simulation_volume must be > 0")


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def load_image(path: str | Path, color_space: str = "srgb") -> ImageBuffer:
    """Load an 8/16-bit 3-channel raster and return a linear-RGB buffer."""
    if color_space not in ("srgb", "linear"):
        raise ValueError(f"unknown color space {color_space!r}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise IOError(f"cannot read image {path}")
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise ValueError(f"expected 3-channel image, got shape {raw.shape}")
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    data = raw[:, :, ::-1].astype(np.float64) / scale  # BGR -> RGB
    if color_space == "srgb":
        data = srgb_to_linear(data)
    return ImageBuffer(data)


def save_image(buffer: ImageBuffer, path: str | Path, color_space: str = "srgb",
               bit_depth: int = 8) -> None:
    """Write a linear buffer to disk, sRGB-encoding unless told otherwise."""
    data = buffer.data if color_space == "linear" else linear_to_srgb(buffer.data)
    if bit_depth == 8:
        raw = np.round(np.clip(data, 0, 1) * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        raw = np.round(np.clip(data, 0, 1) * 65535.0).astype(np.uint16)
    else:
        raise ValueError("bit_depth must be 8 or 16")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), raw[:, :, ::-1]):
        raise IOError(f"cannot write image {path}")


def _fill_invalid_nearest(depth: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Replace invalid pixels by their nearest valid neighbor (euclidean)."""
    if valid.all():
        return depth
    if not valid.any():
        raise ValueError("depth map has no valid pixels")
    idx = ndimage.distance_transform_edt(~valid, return_distances=False,
                                         return_indices=True)
    return depth[tuple(idx)]


def load_depth(path: str | Path, encoding: str = "png16_scaled",
               scale: float = 1.0 / 256.0, image_size: tuple[int, int] | None = None,
               allow_resample: bool = False) -> DepthMap:
    """Load a metric depth map.

    encoding "png16_scaled": 16-bit single-channel PNG, meters = value * scale,
    zeros treated as invalid.  encoding "float_raster": raw little-endian file
    of two uint32 (width, height) followed by width*height float32 meters.
    Invalid (zero / non-finite) pixels are filled from the nearest valid pixel.
    image_size is (width, height) of the paired image; a mismatch resamples
    (nearest neighbor) when allow_resample is set and raises otherwise.
    """
    if encoding == "png16_scaled":
        raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise IOError(f"cannot read depth {path}")
        if raw.ndim != 2:
            raise ValueError(f"expected single-channel depth, got shape {raw.shape}")
        depth = raw.astype(np.float64) * scale
    elif encoding == "float_raster":
        blob = Path(path).read_bytes()
        if len(blob) < 8:
            raise ValueError(f"truncated depth raster {path}")
        w, h = np.frombuffer(blob[:8], dtype="<u4")
        data = np.frombuffer(blob[8:], dtype="<f4")
        if data.size != w * h:
            raise ValueError(f"depth raster size mismatch in {path}")
        depth = data.reshape(int(h), int(w)).astype(np.float64)
    else:
        raise ValueError(f"unknown depth encoding {encoding!r}")

    valid = np.isfinite(depth) & (depth > 0)
    depth = _fill_invalid_nearest(np.where(valid, depth, 0.0), valid)

    if image_size is not None:
        w, h = image_size
        if (depth.shape[1], depth.shape[0]) != (w, h):
            if not allow_resample:
                raise ValueError(
                    f"depth size {depth.shape[1]}x{depth.shape[0]} does not match "
                    f"image {w}x{h} (pass allow_resample=True to resample)")
            depth = cv2.resize(depth, (w, h), interpolation=cv2.INTER_NEAREST)
    return DepthMap(depth)


def save_depth_raster(depth: DepthMap, path: str | Path) -> None:
    """Write the float_raster format understood by load_depth."""
    h, w = depth.data.shape
    header = np.array([w, h], dtype="<u4").tobytes()
    Path(path).write_bytes(header + depth.data.astype("<f4").tobytes())


def load_calibration(path: str | Path) -> CameraModel:
    """Parse the JSON calibration document into a CameraModel."""
    with open(path) as fh:
        doc = json.load(fh)
    required = ("fx", "fy", "cx", "cy", "width", "height",
                "focal_m", "f_number", "exposure_s")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValueError(f"calibration {path} missing fields: {missing}")
    speed = float(doc.get("ego_speed_mps", 0.0))
    return CameraModel(
        fx=float(doc["fx"]), fy=float(doc["fy"]),
        cx=float(doc["cx"]), cy=float(doc["cy"]),
        width=int(doc["width"]), height=int(doc["height"]),
        focal_m=float(doc["focal_m"]), f_number=float(doc["f_number"]),
        exposure_s=float(doc["exposure_s"]),
        focus_plane_m=float(doc.get("focus_plane_m", 6.0)),
        ego_velocity=(0.0, 0.0, speed),  # forward motion along the optical axis
    )
