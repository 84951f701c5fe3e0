"""Volumetric fog-like rain layer.

Drops projecting below one pixel are not rendered individually; their
aggregate effect is an attenuation of the scene radiance plus airlight
scattered into the view path:

    I_att(x) = I(x) * L_ext(x) + A_in(x)
    L_ext(x) = exp(-0.312 R^0.67 d_km(x))
    A_in(x)  = beta_HG(theta(x)) * E_sun * (1 - L_ext(x))

Depth enters in kilometers (meteorological extinction convention); with
meters the scene would be opaque within centimeters at moderate rain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import CameraModel, DepthMap, ImageBuffer

METERS_PER_KM = 1000.0


@dataclass(frozen=True)
class FogParams:
    """Inputs of the fog layer for one image."""

    rate: float                       # mm/hr
    hg_asymmetry: float = 0.9
    e_sun: tuple[float, float, float] = (1.0, 1.0, 1.0)  # per-channel, linear
    sun_direction: tuple[float, float, float] = (0.0, -1.0, 0.0)
    depth_unit_km: float = 1.0 / METERS_PER_KM

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        if abs(self.hg_asymmetry) >= 1:
            raise ValueError("|hg_asymmetry| must be < 1")


def extinction(rate: float, depth_m) -> np.ndarray | float:
    """Fraction of scene radiance surviving the rain volume, in (0, 1]."""
    d_km = np.asarray(depth_m, dtype=np.float64) / METERS_PER_KM
    out = np.exp(-0.312 * rate ** 0.67 * d_km)
    return float(out) if np.ndim(depth_m) == 0 else out


def hg_phase(theta, g: float) -> np.ndarray | float:
    """Henyey-Greenstein phase function, normalized over the sphere."""
    if abs(g) >= 1:
        raise ValueError("|g| must be < 1")
    cos_t = np.cos(np.asarray(theta, dtype=np.float64))
    out = (1.0 - g * g) / (4.0 * np.pi * (1.0 + g * g - 2.0 * g * cos_t) ** 1.5)
    return float(out) if np.ndim(theta) == 0 else out


def camera_ray_grid(camera: CameraModel) -> np.ndarray:
    """Unit view directions per pixel, shape (H, W, 3), camera frame."""
    u = (np.arange(camera.width) - camera.cx) / camera.fx
    v = (np.arange(camera.height) - camera.cy) / camera.fy
    uu, vv = np.meshgrid(u, v)
    rays = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def render_fog(image: ImageBuffer, depth: DepthMap, params: FogParams,
               camera: CameraModel) -> ImageBuffer:
    """Apply per-pixel extinction and airlight; identity at rate 0."""
    if (image.height, image.width) != (depth.height, depth.width):
        raise ValueError("image and depth dimensions differ")
    if params.rate == 0:
        return image.copy()

    l_ext = extinction(params.rate, depth.data)
    rays = camera_ray_grid(camera)
    sun = np.asarray(params.sun_direction, dtype=np.float64)
    sun = sun / np.linalg.norm(sun)
    cos_t = np.clip(rays @ sun, -1.0, 1.0)
    theta = np.arccos(cos_t)

    e_sun = np.asarray(params.e_sun, dtype=np.float64)
    a_in = hg_phase(theta, params.hg_asymmetry)[..., None] * e_sun * (1.0 - l_ext)[..., None]
    out = image.data * l_ext[..., None] + a_in
    return ImageBuffer(np.clip(out, 0.0, 1.0))
