"""End-to-end rendering and batch processing.

One image is rendered in three steps: the fog-like attenuated image, the
individual streak-class drops composited over it, and a final global gain
restoring the original mean luminosity (cameras re-expose under the darker
rainy sky).  run_batch maps the renderer over an image directory for a sweep
of rainfall rates, with per-(image, rate) seeds derived by hashing so
results do not depend on iteration order or worker count.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import fog, illumination, physics, streaks
from .scene import (CameraModel, DepthMap, ImageBuffer, RainfallConfig,
                    load_calibration, load_depth, load_image, save_image)


@dataclass
class RenderOptions:
    """Knobs shared by the library API and the CLI."""

    streak_library: streaks.StreakLibrary | None = None  # None -> procedural
    fog_only: bool = False
    depth_occlusion: bool = False
    env_shape: tuple[int, int] = illumination.DEFAULT_MAP_SHAPE
    sphere_radius: float = illumination.DEFAULT_SPHERE_RADIUS
    drop_fov_deg: float = illumination.DEFAULT_FOV_DEG
    cone_samples: int = illumination.DEFAULT_CONE_SAMPLES


@dataclass
class RenderReport:
    """Per-(image, rate) record of what the renderer did."""

    image: str = ""
    rate: float = 0.0
    simulation_s: float = 0.0
    render_s: float = 0.0
    n_drops: int = 0
    n_streaks: int = 0
    fog_fraction: float = 1.0
    mean_delta: float = 0.0
    status: str = "ok"
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def render_rain(image: ImageBuffer, depth: DepthMap, camera: CameraModel,
                config: RainfallConfig,
                options: RenderOptions | None = None) -> tuple[ImageBuffer, RenderReport]:
    """Render rainfall of the configured rate onto one image."""
    options = options or RenderOptions()
    report = RenderReport(rate=config.rate)
    if config.rate == 0:
        return image.copy(), report

    t0 = time.perf_counter()
    population = physics.simulate(config, camera)
    report.simulation_s = time.perf_counter() - t0
    report.n_drops = len(population)
    report.n_streaks = population.n_streaks
    report.fog_fraction = 1.0 - population.streak_fraction

    t0 = time.perf_counter()
    e_sun = illumination.estimate_sun_irradiance(image, config)
    params = fog.FogParams(rate=config.rate, hg_asymmetry=config.hg_asymmetry,
                           e_sun=tuple(e_sun), sun_direction=config.sun_direction)
    attenuated = fog.render_fog(image, depth, params, camera)

    if options.fog_only:
        report.render_s = time.perf_counter() - t0
        report.mean_delta = abs(attenuated.mean() - image.mean())
        return attenuated, report

    out = _composite_streaks(attenuated.data.copy(), image, depth, camera,
                             population, options)
    restored = streaks.restore_luminosity(out, image.data)
    report.render_s = time.perf_counter() - t0
    result = ImageBuffer(restored)
    report.mean_delta = abs(result.mean() - image.mean())
    return result, report


def _composite_streaks(buffer: np.ndarray, image: ImageBuffer, depth: DepthMap,
                       camera: CameraModel, population: physics.DropPopulation,
                       options: RenderOptions) -> np.ndarray:
    """Blend every streak-class drop into the working buffer, far to near."""
    if population.n_streaks == 0:
        return buffer
    library = options.streak_library or streaks.build_procedural_library()
    env = illumination.estimate_environment(image, camera,
                                            shape=options.env_shape,
                                            radius=options.sphere_radius)
    env_mean = env.mean

    streak_idx = np.flatnonzero(population.is_streak)
    z_mid = population.mid_z[streak_idx]
    order = streak_idx[np.argsort(-z_mid, kind="stable")]

    height, width = buffer.shape[:2]
    for i in order:
        drop = population.drop(int(i))
        if np.hypot(*(drop.p1 - drop.p0)) < 1e-9:
            continue
        z = float(drop.position[2])
        if z <= 0:
            continue

        coc_px = streaks.circle_of_confusion(z, camera)
        pad = int(np.floor(coc_px + 1e-9)) if coc_px >= 0.5 else 0
        clip = (-pad, -pad, width - 1 + pad, height - 1 + pad)

        sprite = library.select(drop.diameter, drop.u_osc)
        warped = streaks.warp_streak(sprite, drop.p0, drop.p1,
                                     drop.projected_width, clip_rect=clip)
        if warped is None:
            continue
        radiance, alpha, x0, y0 = warped
        if pad:
            radiance = np.pad(radiance, pad)
            alpha = np.pad(alpha, pad)
            x0, y0 = x0 - pad, y0 - pad
            radiance = streaks.defocus(radiance, coc_px)
            alpha = np.clip(streaks.defocus(alpha, coc_px), 0.0, 1.0)

        if options.depth_occlusion:
            _mask_occluded(radiance, alpha, depth.data, x0, y0, z)

        fov = illumination.drop_fov(drop.position, env,
                                    fov_deg=options.drop_fov_deg,
                                    samples=options.cone_samples)
        weight = (illumination.REFRACT_WEIGHT * fov.f_mean
                  + illumination.REFLECT_WEIGHT * env_mean)
        tau1 = physics.pixel_dwell_time(drop, camera.exposure_s)
        streaks.blend_streak(buffer, radiance[..., None] * weight, alpha,
                             (x0, y0), tau1, camera.exposure_s,
                             tau0_s=library.tau0_s)
    return buffer


def _mask_occluded(radiance: np.ndarray, alpha: np.ndarray, depth: np.ndarray,
                   x0: int, y0: int, drop_z: float) -> None:
    """Zero streak pixels where the scene is nearer than the drop."""
    height, width = depth.shape
    ph, pw = alpha.shape
    ix0, iy0 = max(x0, 0), max(y0, 0)
    ix1, iy1 = min(x0 + pw, width), min(y0 + ph, height)
    if ix0 >= ix1 or iy0 >= iy1:
        return
    pwin = np.s_[iy0 - y0:iy1 - y0, ix0 - x0:ix1 - x0]
    occluded = depth[iy0:iy1, ix0:ix1] < drop_z
    radiance[pwin][occluded] = 0.0
    alpha[pwin][occluded] = 0.0


# ---------------------------------------------------------------------------
# batch processing
# ---------------------------------------------------------------------------

def derive_seed(master_seed: int, image_name: str, rate: float) -> int:
    """Order-independent per-(image, rate) seed."""
    key = f"{master_seed}|{image_name}|{rate:g}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass
class JobConfig:
    """One batch run over an image directory."""

    images_dir: str
    depth_dir: str
    calib_path: str
    out_dir: str
    rates: tuple[float, ...] = (0.0, 5.0, 25.0, 50.0, 100.0, 200.0)
    seed: int = 0
    streaks_path: str = "procedural"
    workers: int = 1
    fog_only: bool = False
    depth_occlusion: bool = False
    debug_dumps: bool = False
    depth_scale: float = 1.0 / 256.0
    bit_depth: int = 8
    report_path: str | None = None

    def __post_init__(self):
        if any(r < 0 for r in self.rates):
            raise ValueError("rates must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


_DEPTH_SUFFIXES = (".png", ".f32", ".raw")
_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _find_depth(depth_dir: Path, stem: str) -> Path:
    for suffix in _DEPTH_SUFFIXES:
        candidate = depth_dir / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no depth file for {stem!r} in {depth_dir}")


def _find_calibration(calib_path: Path, stem: str) -> Path:
    """Global calibration file, or per-image <stem>.json when given a directory."""
    if calib_path.is_dir():
        per_image = calib_path / f"{stem}.json"
        if per_image.exists():
            return per_image
        raise FileNotFoundError(f"no calibration for {stem!r} in {calib_path}")
    return calib_path


def _render_one(task: dict) -> dict:
    """Worker entry point: render a single (image, rate) pair to disk."""
    job = JobConfig(**task["job"])
    image_path = Path(task["image_path"])
    rate = task["rate"]
    stem = image_path.stem
    try:
        camera = load_calibration(_find_calibration(Path(job.calib_path), stem))
        image = load_image(image_path)
        depth_path = _find_depth(Path(job.depth_dir), stem)
        encoding = "png16_scaled" if depth_path.suffix == ".png" else "float_raster"
        depth = load_depth(depth_path, encoding=encoding, scale=job.depth_scale,
                           image_size=(image.width, image.height),
                           allow_resample=True)

        config = RainfallConfig(rate=rate, seed=derive_seed(job.seed, stem, rate))
        options = RenderOptions(
            streak_library=(None if job.streaks_path == "procedural"
                            else streaks.load_streak_library(job.streaks_path)),
            fog_only=job.fog_only, depth_occlusion=job.depth_occlusion)

        result, report = render_rain(image, depth, camera, config, options)
        report.image = image_path.name

        out_path = Path(job.out_dir) / f"{rate:g}mm" / f"{stem}.png"
        save_image(result, out_path, bit_depth=job.bit_depth)

        if job.debug_dumps:
            debug_dir = Path(job.out_dir) / "debug" / f"{rate:g}mm"
            debug_dir.mkdir(parents=True, exist_ok=True)
            population = physics.simulate(config, camera)
            physics.dump_population(population, debug_dir / f"{stem}_drops.txt")
            env = illumination.estimate_environment(image, camera)
            save_image(ImageBuffer(np.clip(env.data, 0, 1)),
                       debug_dir / f"{stem}_envmap.png")
        return asdict(report)
    except Exception as exc:  # partial-failure policy: record and continue
        return asdict(RenderReport(image=image_path.name, rate=rate,
                                   status="failed", error=str(exc)))


def run_batch(job: JobConfig) -> tuple[int, list[dict]]:
    """Render every (image, rate) pair; returns (exit_code, report records)."""
    images = sorted(p for p in Path(job.images_dir).iterdir()
                    if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not images:
        raise FileNotFoundError(f"no images in {job.images_dir}")
    Path(job.out_dir).mkdir(parents=True, exist_ok=True)

    tasks = [{"job": asdict(job), "image_path": str(p), "rate": float(r)}
             for p in images for r in job.rates]

    if job.workers == 1:
        reports = [_render_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=job.workers,
                                 mp_context=get_context("spawn")) as pool:
            reports = list(pool.map(_render_one, tasks))

    if job.report_path:
        with open(job.report_path, "w") as fh:
            for record in reports:
                fh.write(json.dumps(record) + "\n")

    failures = [r for r in reports if r["status"] != "ok"]
    return (1 if failures else 0), reports
