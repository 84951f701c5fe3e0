"""Physically-based rain rendering for image augmentation.

Given a clear-weather image, per-pixel metric depth, camera calibration and
a rainfall rate, the pipeline simulates a physically plausible raindrop
population, renders the sub-pixel drops as volumetric fog-like attenuation
and the larger ones as motion-blurred streaks lit by an environment map
estimated from the image itself, then restores the global luminosity.
"""

from .estimator import RainAugmenter
from .fog import FogParams, extinction, hg_phase, render_fog
from .illumination import (DropFov, EnvironmentMap, drop_fov, drop_view_cone,
                           estimate_environment, estimate_sun_irradiance,
                           sphere_intersect, streak_photometric_weight)
from .physics import (Drop, DropPopulation, drop_concentration,
                      marshall_palmer_lambda, pixel_dwell_time,
                      sample_diameters, simulate, terminal_velocity)
from .pipeline import (JobConfig, RenderOptions, RenderReport, derive_seed,
                       render_rain, run_batch)
from .scene import (CameraModel, DepthMap, ImageBuffer, RainfallConfig,
                    linear_to_srgb, load_calibration, load_depth, load_image,
                    save_depth_raster, save_image, srgb_to_linear)
from .streaks import (TAU0_S, StreakLibrary, StreakSprite,
                      build_procedural_library, blend_streak,
                      circle_of_confusion, defocus, disk_kernel,
                      homography_from_quads, load_streak_library,
                      procedural_streak, restore_luminosity, warp_streak)

__version__ = "0.1.0"

__all__ = [
    "RainAugmenter",
    "FogParams", "extinction", "hg_phase", "render_fog",
    "DropFov", "EnvironmentMap", "drop_fov", "drop_view_cone",
    "estimate_environment", "estimate_sun_irradiance", "sphere_intersect",
    "streak_photometric_weight",
    "Drop", "DropPopulation", "drop_concentration", "marshall_palmer_lambda",
    "pixel_dwell_time", "sample_diameters", "simulate", "terminal_velocity",
    "JobConfig", "RenderOptions", "RenderReport", "derive_seed",
    "render_rain", "run_batch",
    "CameraModel", "DepthMap", "ImageBuffer", "RainfallConfig",
    "linear_to_srgb", "load_calibration", "load_depth", "load_image",
    "save_depth_raster", "save_image", "srgb_to_linear",
    "TAU0_S", "StreakLibrary", "StreakSprite", "build_procedural_library",
    "blend_streak", "circle_of_confusion", "defocus", "disk_kernel",
    "homography_from_quads", "load_streak_library", "procedural_streak",
    "restore_luminosity", "warp_streak",
]
