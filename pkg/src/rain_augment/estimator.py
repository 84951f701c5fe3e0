"""Scikit-learn style front end.

RainAugmenter is a stateless transformer: fit() validates parameters and
prepares the streak library, transform() maps (image, depth) samples to
rain-augmented images.  Parameters follow the sklearn convention (stored
verbatim in __init__, validated in fit) so the transformer clones, grids and
pipelines like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import streaks
from .pipeline import RenderOptions, derive_seed, render_rain
from .scene import RainfallConfig
from .validation import ensure_camera, ensure_depth, ensure_image


class RainAugmenter(BaseEstimator, TransformerMixin):
    """Add physically-based rain of a chosen rate to images.

    Parameters
    ----------
    rate : rainfall rate in mm/hr (0 disables augmentation).
    camera : CameraModel or calibration dict (see scene.load_calibration).
    seed : master seed; each sample i uses a seed derived from (seed, i, rate).
    streak_library : "procedural" or a directory of database sprites.
    d_min, d_max : simulated drop diameter bounds, mm.
    simulation_volume : frustum depth bound, m.
    hg_asymmetry : Henyey-Greenstein g for the fog airlight.
    sun_direction : unit vector, camera frame.
    irradiance_scale : scale on the image-mean sun irradiance proxy.
    fog_only : render only the volumetric attenuation layer.
    depth_occlusion : mask streaks behind nearer scene content.

    transform(X) expects an iterable of (image, depth) pairs: images as
    ImageBuffer, linear float arrays in [0,1], or sRGB uint8; depth as
    DepthMap or float arrays in meters.  It returns a list of linear float
    arrays shaped like the inputs.
    """

    def __init__(self, rate: float = 50.0, camera=None, seed: int = 0,
                 streak_library: str = "procedural", d_min: float = 1.0,
                 d_max: float = 6.0, simulation_volume: float = 10.0,
                 hg_asymmetry: float = 0.9,
                 sun_direction: tuple = (0.0, -1.0, 0.0),
                 irradiance_scale: float = 1.0, fog_only: bool = False,
                 depth_occlusion: bool = False):
        self.rate = rate
        self.camera = camera
        self.seed = seed
        self.streak_library = streak_library
        self.d_min = d_min
        self.d_max = d_max
        self.simulation_volume = simulation_volume
        self.hg_asymmetry = hg_asymmetry
        self.sun_direction = sun_direction
        self.irradiance_scale = irradiance_scale
        self.fog_only = fog_only
        self.depth_occlusion = depth_occlusion

    def fit(self, X=None, y=None):
        """Validate parameters and prepare the streak library."""
        if self.camera is None:
            raise ValueError("a camera (CameraModel or calibration dict) is required")
        self.camera_ = ensure_camera(self.camera)
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        if self.streak_library == "procedural":
            self.library_ = streaks.build_procedural_library()
        else:
            self.library_ = streaks.load_streak_library(self.streak_library)
        return self

    def transform(self, X) -> list[np.ndarray]:
        if not hasattr(self, "library_"):
            raise NotFittedError("call fit() before transform()")
        options = RenderOptions(streak_library=self.library_,
                                fog_only=self.fog_only,
                                depth_occlusion=self.depth_occlusion)
        out = []
        for i, (image, depth) in enumerate(X):
            config = RainfallConfig(
                rate=self.rate, seed=derive_seed(self.seed, f"sample{i}", self.rate),
                d_min=self.d_min, d_max=self.d_max,
                simulation_volume=self.simulation_volume,
                hg_asymmetry=self.hg_asymmetry,
                sun_direction=tuple(self.sun_direction),
                irradiance_scale=self.irradiance_scale)
            rendered, _ = render_rain(ensure_image(image), ensure_depth(depth),
                                      self.camera_, config, options)
            out.append(rendered.data)
        return out
