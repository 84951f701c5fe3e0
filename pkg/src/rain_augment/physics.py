"""Raindrop particle simulation.

Samples a drop population for a given rainfall rate from the Marshall-Palmer
size distribution (N(D) = N0 exp(-lambda D), N0 = 8000 m^-3 mm^-1,
lambda = 4.1 R^-0.21 mm^-1, Ottawa measurements), gives each drop its
terminal fall velocity (Atlas: v(a) = 9.65 - 10.3 exp(-0.6 a), clamped at 0),
integrates drop and camera motion over the exposure, projects streak
endpoints to the image and classifies drops as fog-like (< 1 px) or streak.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import CameraModel, RainfallConfig

MP_N0 = 8000.0          # Marshall-Palmer intercept, drops / (m^3 mm)
FRUSTUM_PAD_M = 0.5     # lateral padding so streaks entering mid-exposure are kept
STREAK_WIDTH_PX = 1.0   # classification threshold


def marshall_palmer_lambda(rate: float) -> float:
    """Exponential slope of the drop-size distribution, per mm."""
    if rate <= 0:
        raise ValueError("rainfall rate must be > 0")
    return 4.1 * rate ** -0.21


def drop_concentration(rate: float, d_min: float = 1.0) -> float:
    """Drops per m^3 with diameter above d_min (closed-form MP integral)."""
    if d_min <= 0:
        raise ValueError("d_min must be > 0")
    lam = marshall_palmer_lambda(rate)
    return MP_N0 / lam * np.exp(-lam * d_min)


def sample_diameters(n: int, lam: float, d_min: float, d_max: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF samples from the exponential truncated to [d_min, d_max]."""
    if d_min >= d_max:
        raise ValueError("need d_min < d_max")
    if n == 0:
        return np.empty(0)
    u = rng.random(n)
    lo, hi = np.exp(-lam * d_min), np.exp(-lam * d_max)
    return -np.log(lo - u * (lo - hi)) / lam


def truncated_exponential_cdf(x: np.ndarray, lam: float, d_min: float,
                              d_max: float) -> np.ndarray:
    """Analytic CDF of the truncated drop-size distribution."""
    lo, hi = np.exp(-lam * d_min), np.exp(-lam * d_max)
    c = (lo - np.exp(-lam * np.asarray(x, dtype=np.float64))) / (lo - hi)
    return np.clip(c, 0.0, 1.0)


def terminal_velocity(diameter_mm) -> np.ndarray | float:
    """Terminal fall speed in m/s for a drop diameter in mm, clamped at 0."""
    v = 9.65 - 10.3 * np.exp(-0.6 * np.asarray(diameter_mm, dtype=np.float64))
    v = np.maximum(v, 0.0)
    return float(v) if np.ndim(diameter_mm) == 0 else v


@dataclass(frozen=True)
class Drop:
    """One simulated raindrop over a single exposure."""

    diameter: float          # mm
    x0: np.ndarray           # camera-frame position at shutter open, m
    x1: np.ndarray           # position at shutter close, m
    p0: np.ndarray           # image-space endpoint, px
    p1: np.ndarray
    projected_width: float   # px
    is_streak: bool
    u_osc: float             # uniform [0,1) selector for sprite oscillation

    @property
    def position(self) -> np.ndarray:
        """Assumed-constant drop position: midpoint of x0 and x1."""
        return 0.5 * (self.x0 + self.x1)

    @property
    def classification(self) -> str:
        return "streak" if self.is_streak else "fog_like"


@dataclass
class DropPopulation:
    """Structure-of-arrays drop population for one (image, rate, seed) triple."""

    rate: float
    volume: float            # padded frustum volume, m^3
    seed: int
    diameter: np.ndarray     # (N,)
    x0: np.ndarray           # (N, 3)
    x1: np.ndarray           # (N, 3)
    p0: np.ndarray           # (N, 2)
    p1: np.ndarray           # (N, 2)
    projected_width: np.ndarray  # (N,)
    is_streak: np.ndarray    # (N,) bool
    u_osc: np.ndarray        # (N,)

    def __len__(self) -> int:
        return self.diameter.shape[0]

    @property
    def n_streaks(self) -> int:
        return int(self.is_streak.sum())

    @property
    def streak_fraction(self) -> float:
        return self.n_streaks / len(self) if len(self) else 0.0

    @property
    def mid_z(self) -> np.ndarray:
        return 0.5 * (self.x0[:, 2] + self.x1[:, 2])

    def drop(self, i: int) -> Drop:
        return Drop(float(self.diameter[i]), self.x0[i], self.x1[i],
                    self.p0[i], self.p1[i], float(self.projected_width[i]),
                    bool(self.is_streak[i]), float(self.u_osc[i]))

    @property
    def drops(self) -> list[Drop]:
        """Materialize Drop objects; intended for debugging / small populations."""
        return [self.drop(i) for i in range(len(self))]

    def iter_streaks(self):
        for i in np.flatnonzero(self.is_streak):
            yield self.drop(int(i))


def _frustum_volume_coeffs(camera: CameraModel, pad: float):
    """Padded-frustum cross section A(z) = (a z + c)(b z + c); returns a, b, c."""
    return camera.width / camera.fx, camera.height / camera.fy, 2.0 * pad


def frustum_volume(camera: CameraModel, z_max,
                   pad: float = FRUSTUM_PAD_M):
    """Analytic volume of the laterally padded view frustum up to z_max."""
    a, b, c = _frustum_volume_coeffs(camera, pad)
    z = np.asarray(z_max, dtype=np.float64)
    v = a * b * z ** 3 / 3.0 + c * (a + b) * z ** 2 / 2.0 + c * c * z
    return float(v) if np.ndim(z_max) == 0 else v


def _empty_population(rate: float, volume: float, seed: int) -> DropPopulation:
    return DropPopulation(
        rate=rate, volume=volume, seed=seed,
        diameter=np.empty(0), x0=np.empty((0, 3)), x1=np.empty((0, 3)),
        p0=np.empty((0, 2)), p1=np.empty((0, 2)),
        projected_width=np.empty(0), is_streak=np.empty(0, dtype=bool),
        u_osc=np.empty(0))


def simulate(config: RainfallConfig, camera: CameraModel,
             rng: np.random.Generator | None = None) -> DropPopulation:
    """Sample a drop population uniformly inside the padded camera frustum.

    The drop count is Poisson around concentration x frustum volume.  Each
    drop falls at terminal velocity; the camera ego-velocity enters as a rigid
    relative motion over the exposure.  Projection uses the pinhole model;
    drops whose midpoint projects wider than one pixel become streaks.
    """
    z_max = config.simulation_volume
    volume = frustum_volume(camera, z_max)
    if volume <= 0:
        raise ValueError("degenerate frustum (zero volume)")
    if config.rate == 0:
        return _empty_population(0.0, volume, config.seed)
    if rng is None:
        rng = np.random.default_rng(config.seed)

    conc = drop_concentration(config.rate, config.d_min)
    lam = marshall_palmer_lambda(config.rate)
    n = int(rng.poisson(conc * volume))
    if n == 0:
        return _empty_population(config.rate, volume, config.seed)

    # depth: inverse-CDF of the cumulative padded-frustum volume (cubic in z)
    grid = np.linspace(0.0, z_max, 8193)
    cdf = frustum_volume(camera, grid) / volume
    z = np.interp(rng.random(n), cdf, grid)

    pad = FRUSTUM_PAD_M
    x_lo = (0 - camera.cx) / camera.fx * z - pad
    x_hi = (camera.width - camera.cx) / camera.fx * z + pad
    y_lo = (0 - camera.cy) / camera.fy * z - pad
    y_hi = (camera.height - camera.cy) / camera.fy * z + pad
    x = x_lo + rng.random(n) * (x_hi - x_lo)
    y = y_lo + rng.random(n) * (y_hi - y_lo)

    diam = sample_diameters(n, lam, config.d_min, config.d_max, rng)
    u_osc = rng.random(n)

    # relative velocity: terminal fall (down = +y) minus camera ego motion
    v_rel = np.zeros((n, 3))
    v_rel[:, 1] = terminal_velocity(diam)
    v_rel -= np.asarray(camera.ego_velocity, dtype=np.float64)

    x0 = np.stack([x, y, z], axis=1)
    x1 = x0 + v_rel * camera.exposure_s

    p0 = camera.project(x0)
    p1 = camera.project(x1)

    z_mid = 0.5 * (x0[:, 2] + x1[:, 2])
    width = np.where(z_mid > 0,
                     camera.fx * diam * 1e-3 / np.maximum(z_mid, 1e-12), 0.0)
    is_streak = width >= STREAK_WIDTH_PX

    return DropPopulation(rate=config.rate, volume=volume, seed=config.seed,
                          diameter=diam, x0=x0, x1=x1, p0=p0, p1=p1,
                          projected_width=width, is_streak=is_streak,
                          u_osc=u_osc)


def pixel_dwell_time(drop: Drop, exposure_s: float) -> float:
    """Time the drop spends on one pixel: min(T, T / streak length in px).

    Meaningful for streak-class drops; a (near) zero-length streak dwells the
    whole exposure.
    """
    length = float(np.hypot(*(drop.p1 - drop.p0)))
    if length < 1e-9:
        return exposure_s
    return min(exposure_s, exposure_s / length)


def dump_population(population: DropPopulation, path) -> None:
    """Line-oriented debug table: one drop per line for oracle cross-checks."""
    with open(path, "w") as fh:
        fh.write("# a_mm x0 y0 z0 x1 y1 z1 u0 v0 u1 v1 width_px class\n")
        for i in range(len(population)):
            row = [f"{population.diameter[i]:.6f}",
                   *(f"{v:.6f}" for v in population.x0[i]),
                   *(f"{v:.6f}" for v in population.x1[i]),
                   *(f"{v:.3f}" for v in population.p0[i]),
                   *(f"{v:.3f}" for v in population.p1[i]),
                   f"{population.projected_width[i]:.4f}",
                   "streak" if population.is_streak[i] else "fog_like"]
            fh.write(" ".join(row) + "\n")
