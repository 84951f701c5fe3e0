"""Streak sprites and per-streak compositing.

A streak sprite is the motion-blurred appearance of one drop: a grayscale
radiance raster plus an alpha channel (max-normalized luminance; the source
renders were made on a black background).  Sprites come from a database
directory (``<dir>/<diameter_mm>_<oscillation>.png``) or from a procedural
generator.  For each simulated drop the sprite is warped by the homography
mapping its quad to the simulated endpoints, defocused by the circle of
confusion, exposure-corrected by tau_1 / tau_0 and alpha-blended over the
attenuated background:

    I_rain(x) = (T - S_alpha(x') tau_1) / T * I_att(x) + S'(x') tau_1 / tau_0

tau_0 is the per-pixel dwell time baked into the streak database,
sqrt(1e-3)/50 seconds.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage, signal

TAU0_S = math.sqrt(1e-3) / 50.0   # database per-pixel dwell time, seconds

_SPRITE_NAME = re.compile(r"^(?P<diam>\d+(?:\.\d+)?)_(?P<osc>\d+)\.png$")


@dataclass
class StreakSprite:
    """Grayscale streak appearance with derived alpha."""

    radiance: np.ndarray     # (h, w) in [0,1]
    alpha: np.ndarray        # (h, w) in [0,1], 0 wherever radiance is 0
    diameter_mm: float
    oscillation: int
    source: str              # "database" | "procedural"

    def __post_init__(self):
        if self.radiance.shape != self.alpha.shape:
            raise ValueError("radiance and alpha shapes differ")


class StreakLibrary:
    """Sprites indexed by diameter bucket, nearest-diameter lookup."""

    tau0_s = TAU0_S

    def __init__(self, sprites: list[StreakSprite]):
        if not sprites:
            raise ValueError("streak library is empty")
        self._by_diameter: dict[float, list[StreakSprite]] = {}
        for s in sprites:
            self._by_diameter.setdefault(s.diameter_mm, []).append(s)
        for group in self._by_diameter.values():
            group.sort(key=lambda s: s.oscillation)
        self._diameters = np.array(sorted(self._by_diameter))

    @property
    def diameters(self) -> np.ndarray:
        return self._diameters

    def __len__(self) -> int:
        return sum(len(g) for g in self._by_diameter.values())

    def select(self, diameter_mm: float, u_osc: float) -> StreakSprite:
        """Nearest diameter bucket; u_osc in [0,1) picks the oscillation."""
        i = int(np.argmin(np.abs(self._diameters - diameter_mm)))
        group = self._by_diameter[float(self._diameters[i])]
        return group[min(int(u_osc * len(group)), len(group) - 1)]


def load_streak_library(directory: str | Path) -> StreakLibrary:
    """Load ``<diameter_mm>_<oscillation>.png`` grayscale sprites."""
    directory = Path(directory)
    sprites = []
    for path in sorted(directory.glob("*.png")):
        m = _SPRITE_NAME.match(path.name)
        if not m:
            continue
        raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise IOError(f"cannot read streak sprite {path}")
        if raw.ndim == 3:
            raw = cv2.cvtColor(raw, cv2.COLOR_BGR2GRAY)
        scale = 65535.0 if raw.dtype == np.uint16 else 255.0
        radiance = raw.astype(np.float64) / scale
        peak = radiance.max()
        if peak > 0:
            radiance = radiance / peak
        sprites.append(StreakSprite(radiance=radiance, alpha=radiance.copy(),
                                    diameter_mm=float(m.group("diam")),
                                    oscillation=int(m.group("osc")),
                                    source="database"))
    if not sprites:
        raise ValueError(f"no streak sprites found in {directory}")
    return StreakLibrary(sprites)


def procedural_streak(diameter_mm: float, length_px: int, width_px: int,
                      oscillation_seed: int) -> StreakSprite:
    """Fallback sprite: Gaussian cross-section with sinusoidal oscillation.

    The lateral center line swings with amplitude at most half the width over
    one to three periods along the streak; the cross-section uses
    sigma = width / 3 so the profile stays inside the canvas.
    """
    if length_px < 1 or width_px < 1:
        raise ValueError("sprite dimensions must be >= 1 px")
    rng = np.random.default_rng(oscillation_seed)
    amplitude = rng.uniform(0.0, width_px / 2.0)
    periods = rng.uniform(1.0, 3.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)

    w = int(np.ceil(width_px + 2 * amplitude)) + 2
    y = np.arange(length_px)
    center = (w - 1) / 2.0 + amplitude * np.sin(2 * np.pi * periods * y / length_px + phase)
    xs = np.arange(w)
    sigma = width_px / 3.0
    radiance = np.exp(-((xs[None, :] - center[:, None]) ** 2) / (2 * sigma * sigma))
    radiance /= radiance.max()
    return StreakSprite(radiance=radiance, alpha=radiance.copy(),
                        diameter_mm=diameter_mm, oscillation=oscillation_seed,
                        source="procedural")


def build_procedural_library(diameters=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0),
                             oscillations: int = 10, length_px: int = 96,
                             width_px: int = 9, seed: int = 0) -> StreakLibrary:
    """Procedural stand-in for the streak database; needs no files."""
    sprites = []
    for di, d in enumerate(diameters):
        for osc in range(oscillations):
            s = procedural_streak(d, length_px, width_px,
                                  oscillation_seed=seed + 1000 * di + osc)
            s.oscillation = osc
            sprites.append(s)
    return StreakLibrary(sprites)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def homography_from_quads(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Direct linear transform: 3x3 H mapping 4 source points to 4 targets."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i], b[2 * i + 1] = u, v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate quad correspondence") from exc
    return np.append(h, 1.0).reshape(3, 3)


def apply_homography(h: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply 3x3 homography to (N, 2) points."""
    pts = np.asarray(points, dtype=np.float64)
    homo = np.concatenate([pts, np.ones((len(pts), 1))], axis=1) @ h.T
    return homo[:, :2] / homo[:, 2:3]


def streak_quad(p0: np.ndarray, p1: np.ndarray, width_px: float) -> np.ndarray:
    """Target quad of a streak: endpoints offset by half-width perpendicular."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    axis = p1 - p0
    norm = np.hypot(*axis)
    if norm < 1e-9:
        raise ValueError("degenerate streak: identical endpoints")
    n = np.array([-axis[1], axis[0]]) / norm * (width_px / 2.0)
    return np.array([p0 - n, p0 + n, p1 + n, p1 - n])


def warp_streak(sprite: StreakSprite, p0, p1, width_px: float,
                clip_rect: tuple[float, float, float, float] | None = None):
    """Warp the sprite quad onto the simulated streak position.

    Returns (radiance, alpha, x0, y0): patch rasters covering the target
    bounding box (optionally intersected with clip_rect = (xmin, ymin, xmax,
    ymax)) and the image-space pixel coordinates of patch element [0, 0].
    Returns None when the clipped bounding box is empty.
    """
    h_s, w_s = sprite.radiance.shape
    src = np.array([[0.0, 0.0], [w_s - 1.0, 0.0],
                    [w_s - 1.0, h_s - 1.0], [0.0, h_s - 1.0]])
    dst = streak_quad(p0, p1, width_px)
    h = homography_from_quads(src, dst)

    x_min, y_min = np.floor(dst.min(axis=0))
    x_max, y_max = np.ceil(dst.max(axis=0))
    if clip_rect is not None:
        x_min, y_min = max(x_min, clip_rect[0]), max(y_min, clip_rect[1])
        x_max, y_max = min(x_max, clip_rect[2]), min(y_max, clip_rect[3])
    if x_max < x_min or y_max < y_min:
        return None
    x0, y0 = int(np.floor(x_min)), int(np.floor(y_min))
    out_w = int(np.ceil(x_max)) - x0 + 1
    out_h = int(np.ceil(y_max)) - y0 + 1

    h_inv = np.linalg.inv(h)
    xs, ys = np.meshgrid(np.arange(out_w) + x0, np.arange(out_h) + y0)
    homo = h_inv @ np.stack([xs.ravel(), ys.ravel(), np.ones(xs.size)])
    sx = (homo[0] / homo[2]).reshape(out_h, out_w)
    sy = (homo[1] / homo[2]).reshape(out_h, out_w)

    radiance = _bilinear_sample(sprite.radiance, sx, sy)
    alpha = _bilinear_sample(sprite.alpha, sx, sy)
    return radiance, alpha, x0, y0


def _bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear lookup with zero outside the raster."""
    h, w = img.shape
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    fx, fy = x - x0, y - y0

    def tap(yy, xx):
        inside = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        vals = np.zeros(xx.shape)
        vals[inside] = img[yy[inside], xx[inside]]
        return vals

    return (tap(y0, x0) * (1 - fx) * (1 - fy) + tap(y0, x0 + 1) * fx * (1 - fy)
            + tap(y0 + 1, x0) * (1 - fx) * fy + tap(y0 + 1, x0 + 1) * fx * fy)


# ---------------------------------------------------------------------------
# defocus
# ---------------------------------------------------------------------------

def circle_of_confusion(distance_m: float, camera) -> float:
    """Defocus radius in pixels of an object at the given distance.

    Thin-lens blur C = (d - f_p) f^2 / (d (f_p - f) f_N) in meters, converted
    through the sensor pixel pitch; sign discarded (near and far defocus blur
    alike here).
    """
    if distance_m <= 0:
        raise ValueError("distance must be > 0")
    f = camera.focal_m
    c = (distance_m - camera.focus_plane_m) * f * f / (
        distance_m * (camera.focus_plane_m - f) * camera.f_number)
    return abs(c) / camera.pixel_pitch


def disk_kernel(radius_px: float) -> np.ndarray:
    """Normalized flat disk: cells whose center lies within the radius."""
    half = int(np.floor(radius_px + 1e-9))
    if half == 0:
        return np.ones((1, 1))
    y, x = np.mgrid[-half:half + 1, -half:half + 1]
    k = (x * x + y * y <= radius_px * radius_px).astype(np.float64)
    return k / k.sum()


def defocus(raster: np.ndarray, radius_px: float) -> np.ndarray:
    """Convolve with the normalized disk; identity below half a pixel."""
    if radius_px < 0:
        raise ValueError("defocus radius must be >= 0")
    if radius_px < 0.5:
        return raster
    kernel = disk_kernel(radius_px)
    if kernel.shape[0] > 15:
        out = signal.fftconvolve(raster, kernel, mode="same")
        return np.clip(out, 0.0, None)
    return ndimage.convolve(raster, kernel, mode="constant", cval=0.0)


# ---------------------------------------------------------------------------
# blending
# ---------------------------------------------------------------------------

def blend_streak(buffer: np.ndarray, s_prime: np.ndarray, s_alpha: np.ndarray,
                 origin: tuple[int, int], tau1_s: float, exposure_s: float,
                 tau0_s: float = TAU0_S) -> np.ndarray:
    """Blend one prepared streak patch into the working image, in place.

    buffer is the (H, W, 3) attenuated background being accumulated into;
    s_prime the photometrically weighted streak radiance ((h, w, 3) or
    (h, w)); s_alpha its alpha; origin the image-space (x, y) of patch
    element [0, 0].  Patch parts outside the frame are dropped.
    """
    if tau1_s > exposure_s:
        raise ValueError("pixel dwell time cannot exceed the exposure")
    if s_alpha.min() < 0 or s_alpha.max() > 1 + 1e-9:
        raise ValueError("alpha outside [0,1]")

    height, width = buffer.shape[:2]
    x0, y0 = origin
    ph, pw = s_alpha.shape
    ix0, iy0 = max(x0, 0), max(y0, 0)
    ix1, iy1 = min(x0 + pw, width), min(y0 + ph, height)
    if ix0 >= ix1 or iy0 >= iy1:
        return buffer

    win = np.s_[iy0:iy1, ix0:ix1]
    pwin = np.s_[iy0 - y0:iy1 - y0, ix0 - x0:ix1 - x0]
    alpha = s_alpha[pwin][..., None]
    src = s_prime[pwin]
    if src.ndim == 2:
        src = src[..., None]
    keep = (exposure_s - alpha * tau1_s) / exposure_s
    buffer[win] = np.clip(buffer[win] * keep + src * (tau1_s / tau0_s), 0.0, 1.0)
    return buffer


def restore_luminosity(pre: np.ndarray, original: np.ndarray) -> np.ndarray:
    """Scale the rainy render so its mean matches the original image's."""
    if pre.shape != original.shape:
        raise ValueError("image dimensions differ")
    mean_pre = pre.mean()
    if mean_pre <= 0:
        raise ValueError("cannot restore luminosity of an all-black render")
    k = original.mean() / mean_pre
    return np.clip(pre * k, 0.0, 1.0)
