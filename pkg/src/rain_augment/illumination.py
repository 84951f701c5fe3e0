"""Illumination estimation for drop photometry.

A single equirectangular environment map is estimated per image by
projecting the image onto a constant-distance sphere around the camera and
filling the unseen cells from row statistics.  Each streak-rendered drop
sees a wide cone (~165 degrees) of that map; the cone is projected onto the
sphere, traced as a contour on the map and filled, and the region's mean
radiance drives the streak's photometric weight

    w = 0.94 * F_mean + 0.06 * E_mean

(a drop refracts most of its field of view and reflects a small fraction of
the whole environment).

Map conventions: rows run from altitude +90 deg (zenith, row 0) to -90 deg
(nadir), columns from azimuth -180 deg to +180 deg; azimuth 0 is the camera
forward axis, altitude is measured against up = (0,-1,0) in the camera frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import CameraModel, ImageBuffer, RainfallConfig

UP = np.array([0.0, -1.0, 0.0])
DEFAULT_FOV_DEG = 165.0
DEFAULT_CONE_SAMPLES = 20
DEFAULT_SPHERE_RADIUS = 10.0
DEFAULT_MAP_SHAPE = (128, 256)  # (rows = altitude, cols = azimuth)

REFRACT_WEIGHT = 0.94
REFLECT_WEIGHT = 0.06


@dataclass
class EnvironmentMap:
    """Equirectangular linear-RGB radiance map on a constant-distance sphere."""

    data: np.ndarray           # (rows, cols, 3)
    radius: float = DEFAULT_SPHERE_RADIUS

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError(f"expected (rows, cols, 3) map, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)) or self.data.min() < 0:
            raise ValueError("environment map must be finite and >= 0")
        self._row_prefix = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    @property
    def mean(self) -> np.ndarray:
        """Per-channel arithmetic mean over all cells."""
        return self.data.mean(axis=(0, 1))

    def row_prefix(self) -> np.ndarray:
        """Column-wise cumulative sums, cached; used for fast region means."""
        if self._row_prefix is None:
            rows, cols, _ = self.data.shape
            pref = np.zeros((rows + 1, cols, 3))
            np.cumsum(self.data, axis=0, out=pref[1:])
            self._row_prefix = pref
        return self._row_prefix

    def cell_directions(self) -> np.ndarray:
        """Unit direction of every cell center, shape (rows, cols, 3)."""
        return map_cell_directions(self.shape)


def map_cell_directions(shape: tuple[int, int]) -> np.ndarray:
    """Unit direction of every equirectangular cell center."""
    rows, cols = shape
    alt = np.pi / 2 - (np.arange(rows) + 0.5) * np.pi / rows
    az = -np.pi + (np.arange(cols) + 0.5) * 2 * np.pi / cols
    aa, zz = np.meshgrid(az, alt)
    return np.stack([np.sin(aa) * np.cos(zz),
                     -np.sin(zz),
                     np.cos(aa) * np.cos(zz)], axis=-1)


def direction_to_map(directions: np.ndarray, shape: tuple[int, int]):
    """Continuous (row, col) map coordinates of unit directions."""
    d = np.asarray(directions, dtype=np.float64)
    alt = np.arcsin(np.clip(d @ UP, -1.0, 1.0))
    az = np.arctan2(d[..., 0], d[..., 2])
    rows, cols = shape
    row = (np.pi / 2 - alt) / np.pi * rows - 0.5
    col = (az + np.pi) / (2 * np.pi) * cols - 0.5
    return row, col


def estimate_environment(image: ImageBuffer, camera: CameraModel,
                         shape: tuple[int, int] = DEFAULT_MAP_SHAPE,
                         radius: float = DEFAULT_SPHERE_RADIUS) -> EnvironmentMap:
    """Back-project the image onto the sphere and fill the unseen cells.

    Cells inside the camera field of view sample the image bilinearly; cells
    outside on a partially seen row take that row's mean (horizontal wrap),
    rows entirely above the field of view take the mean of the upper image
    third and rows entirely below the mean of the lower third.
    """
    rows, cols = shape
    dirs = map_cell_directions(shape)

    h, w = image.height, image.width
    z = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * dirs[..., 0] / z + camera.cx
        v = camera.fy * dirs[..., 1] / z + camera.cy
    seen = (z > 1e-9) & (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)

    data = np.zeros((rows, cols, 3))
    if seen.any():
        us, vs = u[seen], v[seen]
        ui, vi = np.floor(us).astype(int), np.floor(vs).astype(int)
        ui1 = np.minimum(ui + 1, w - 1)
        vi1 = np.minimum(vi + 1, h - 1)
        fu, fv = (us - ui)[:, None], (vs - vi)[:, None]
        img = image.data
        data[seen] = (img[vi, ui] * (1 - fu) * (1 - fv) + img[vi, ui1] * fu * (1 - fv)
                      + img[vi1, ui] * (1 - fu) * fv + img[vi1, ui1] * fu * fv)

    seen_rows = np.flatnonzero(seen.any(axis=1))
    top_fill = image.data[: max(h // 3, 1)].mean(axis=(0, 1))
    bottom_fill = image.data[-max(h // 3, 1):].mean(axis=(0, 1))
    if seen_rows.size == 0:
        data[: rows // 2] = top_fill
        data[rows // 2:] = bottom_fill
    else:
        for r in seen_rows:
            hole = ~seen[r]
            if hole.any():
                data[r, hole] = data[r, seen[r]].mean(axis=0)
        data[: seen_rows[0]] = top_fill
        data[seen_rows[-1] + 1:] = bottom_fill

    return EnvironmentMap(data, radius=radius)


def estimate_sun_irradiance(image: ImageBuffer, config: RainfallConfig) -> np.ndarray:
    """Per-channel sun irradiance proxy: scaled mean of the linear image."""
    return config.irradiance_scale * image.data.mean(axis=(0, 1))


def rotate_about_axis(vec: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of vec (or a batch of vecs) about a unit axis."""
    v = np.asarray(vec, dtype=np.float64)
    k = np.asarray(axis, dtype=np.float64)
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    return v * cos_a + np.cross(k, v) * sin_a + k * (v @ k)[..., None] * (1 - cos_a)


def drop_view_cone(position: np.ndarray, fov_deg: float = DEFAULT_FOV_DEG,
                   samples: int = DEFAULT_CONE_SAMPLES) -> np.ndarray:
    """Unit vectors on the drop's viewing cone, shape (samples, 3).

    The cone axis is the camera-to-drop direction d; one rim vector is d
    rotated by half the field of view about an in-plane axis u, the rest are
    its rotations around d at evenly spaced angles.  u is chosen
    deterministically (d x z, falling back to d x x near the poles) -- the
    filled cone does not depend on this choice.
    """
    x = np.asarray(position, dtype=np.float64)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ValueError("drop position at the camera origin")
    d = x / norm

    u = np.cross(d, np.array([0.0, 0.0, 1.0]))
    if np.linalg.norm(u) < 1e-6:
        u = np.cross(d, np.array([1.0, 0.0, 0.0]))
    u /= np.linalg.norm(u)

    v = rotate_about_axis(d, u, np.deg2rad(fov_deg) / 2.0)
    alphas = 2.0 * np.pi * np.arange(samples) / samples
    cone = np.stack([rotate_about_axis(v, d, a) for a in alphas])
    return cone / np.linalg.norm(cone, axis=1, keepdims=True)


def sphere_intersect(origin: np.ndarray, direction: np.ndarray,
                     radius: float) -> np.ndarray:
    """Forward intersection of rays from inside a camera-centered sphere.

    Solves |origin + t * direction| = radius for the positive root.  origin
    and direction broadcast; origins must be strictly inside the sphere.
    """
    o = np.atleast_2d(np.asarray(origin, dtype=np.float64))
    u = np.atleast_2d(np.asarray(direction, dtype=np.float64))
    o, u = np.broadcast_arrays(o, u)
    a = np.sum(u * u, axis=-1)
    b = 2.0 * np.sum(o * u, axis=-1)
    c = np.sum(o * o, axis=-1) - radius * radius
    if np.any(c >= 0):
        raise ValueError("ray origin outside the sphere")
    if np.any(a <= 0):
        raise ValueError("zero-length ray direction")
    t = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    pts = o + t[..., None] * u
    return pts[0] if np.ndim(origin) == 1 and np.ndim(direction) == 1 else pts


@dataclass
class DropFov:
    """Filled drop field-of-view region on the environment map.

    Per map column, the region spans rows lo..hi inclusive (lo > hi marks an
    empty column); f_mean is the arithmetic mean radiance over the region.
    """

    lo: np.ndarray             # (cols,) int
    hi: np.ndarray             # (cols,) int
    map_shape: tuple[int, int]
    f_mean: np.ndarray         # (3,)

    @property
    def n_cells(self) -> int:
        return int(np.maximum(self.hi - self.lo + 1, 0).sum())

    def mask(self) -> np.ndarray:
        """Boolean (rows, cols) membership mask of the region."""
        rows, cols = self.map_shape
        r = np.arange(rows)[:, None]
        return (r >= self.lo[None, :]) & (r <= self.hi[None, :])


def _cap_row_bounds(row_pts: np.ndarray, col_pts: np.ndarray,
                    contains_zenith: bool, contains_nadir: bool,
                    shape: tuple[int, int]):
    """Per-column row interval of the filled cone contour.

    row_pts/col_pts trace the closed contour in continuous map coordinates
    with columns already unwrapped (closing vertex repeated; when the cone
    holds a pole the contour winds once around, shifting it by one width).
    The spherical cap is geodesically convex, so each azimuth column meets it
    in a single row interval; we rasterize every contour edge onto the
    columns it spans and keep per-column min/max crossings, then extend to
    the pole rows the cone contains.
    """
    rows, cols = shape
    lo = np.full(cols, rows, dtype=np.int64)
    hi = np.full(cols, -1, dtype=np.int64)

    for i in range(len(col_pts) - 1):
        c0, c1 = col_pts[i], col_pts[i + 1]
        r0, r1 = row_pts[i], row_pts[i + 1]
        k0, k1 = int(np.ceil(min(c0, c1))), int(np.floor(max(c0, c1)))
        if k1 < k0:
            continue
        ks = np.arange(k0, k1 + 1)
        t = (ks - c0) / (c1 - c0) if c1 != c0 else np.zeros(ks.shape)
        r = np.clip(np.round(r0 + t * (r1 - r0)).astype(np.int64), 0, rows - 1)
        kk = ks % cols
        np.minimum.at(lo, kk, r)
        np.maximum.at(hi, kk, r)

    # include the vertices themselves (edges shorter than one column)
    kk = np.round(col_pts[:-1]).astype(np.int64) % cols
    r = np.clip(np.round(row_pts[:-1]).astype(np.int64), 0, rows - 1)
    np.minimum.at(lo, kk, r)
    np.maximum.at(hi, kk, r)

    if contains_zenith:
        lo[:] = 0
        hi[hi < 0] = 0
    if contains_nadir:
        lo[lo >= rows] = rows - 1
        hi[:] = rows - 1
    return lo, hi


def drop_fov(position: np.ndarray, env: EnvironmentMap,
             fov_deg: float = DEFAULT_FOV_DEG,
             samples: int = DEFAULT_CONE_SAMPLES) -> DropFov:
    """Project the drop's viewing cone onto the map and fill it."""
    x = np.asarray(position, dtype=np.float64)
    cone = drop_view_cone(x, fov_deg=fov_deg, samples=samples)
    pts = sphere_intersect(x[None, :], cone, env.radius)
    rows, cols = env.shape

    row_f, col_f = direction_to_map(pts / np.linalg.norm(pts, axis=1, keepdims=True),
                                    env.shape)
    # unwrap the contour's azimuth so edges interpolate along the short way
    az = (col_f + 0.5) / cols * 2 * np.pi - np.pi
    az_closed = np.unwrap(np.append(az, az[0]))
    col_u = (az_closed + np.pi) / (2 * np.pi) * cols - 0.5
    row_closed = np.append(row_f, row_f[0])

    d = x / np.linalg.norm(x)
    half = np.deg2rad(fov_deg) / 2.0
    contains_zenith = float(d @ UP) >= np.cos(half)
    contains_nadir = float(d @ -UP) >= np.cos(half)

    lo, hi = _cap_row_bounds(row_closed, col_u,
                             contains_zenith, contains_nadir, env.shape)

    pref = env.row_prefix()
    covered = hi >= lo
    idx = np.flatnonzero(covered)
    counts = (hi[idx] - lo[idx] + 1)
    sums = pref[hi[idx] + 1, idx] - pref[lo[idx], idx]
    total = counts.sum()
    f_mean = sums.sum(axis=0) / total if total else env.mean
    return DropFov(lo=lo, hi=hi, map_shape=env.shape, f_mean=f_mean)


def streak_photometric_weight(fov: DropFov, env: EnvironmentMap) -> np.ndarray:
    """Per-channel radiance weight: 0.94 * region mean + 0.06 * map mean."""
    return REFRACT_WEIGHT * fov.f_mean + REFLECT_WEIGHT * env.mean
