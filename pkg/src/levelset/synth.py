"""Seeded synthetic two-region instances with exact ground truth.

Draws come from numpy's PCG64 generator in a fixed order (geometry,
noise, illumination direction), so a given spec is bit-reproducible.
The optional illumination ramp exists to break raw-intensity
segmentation while leaving multi-channel feature separation intact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion

from .errors import GenerationError, ParameterError
from .fields import Array, BinaryMask, FeatureField, ScalarField, Tsdf
from .tsdf import tsdf_from_mask

SHAPES = ("disk", "rounded_rect", "two_blobs", "annulus")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic instance.

    ``inside``/``outside`` are the per-channel region centroids; their
    distance is the feature-space contrast. ``illum_amplitude`` scales a
    linear ramp (direction drawn from the seed) that is added per channel
    with ``illum_weights`` (all ones when omitted).
    """

    seed: int
    height: int = 128
    width: int = 128
    shape: str = "disk"
    noise_sigma: float = 0.0
    channels: int = 1
    inside: tuple[float, ...] = (1.0,)
    outside: tuple[float, ...] = (0.0,)
    illum_amplitude: float = 0.0
    illum_weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ParameterError(f"unknown shape {self.shape!r}, expected one of {SHAPES}")
        if self.height < 16 or self.width < 16:
            raise ParameterError("synthetic grids must be at least 16 x 16")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ParameterError(f"noise sigma must be nonnegative, got {self.noise_sigma}")
        inside = tuple(float(v) for v in self.inside)
        outside = tuple(float(v) for v in self.outside)
        if len(inside) != self.channels or len(outside) != self.channels:
            raise ParameterError("inside/outside centroids must have one entry per channel")
        if not np.linalg.norm(np.subtract(inside, outside)) > 0:
            raise ParameterError("inside and outside centroids must differ")
        weights = self.illum_weights
        if weights is not None:
            weights = tuple(float(v) for v in weights)
            if len(weights) != self.channels:
                raise ParameterError("illum_weights must have one entry per channel")
        object.__setattr__(self, "inside", inside)
        object.__setattr__(self, "outside", outside)
        object.__setattr__(self, "illum_weights", weights)

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "SynthSpec":
        """Build a spec from flat key=value strings (the CLI spec file)."""
        def floats(text: str) -> tuple[float, ...]:
            return tuple(float(part) for part in text.split(","))

        kwargs: dict = {}
        converters = {
            "seed": int,
            "height": int,
            "width": int,
            "shape": str,
            "noise_sigma": float,
            "channels": int,
            "inside": floats,
            "outside": floats,
            "illum_amplitude": float,
            "illum_weights": floats,
        }
        for key, raw in mapping.items():
            if key not in converters:
                raise ParameterError(f"unknown synth spec key {key!r}")
            kwargs[key] = converters[key](raw)
        if "seed" not in kwargs:
            raise ParameterError("synth spec needs a seed")
        return cls(**kwargs)


def _shape_mask(spec: SynthSpec, rng: np.random.Generator) -> Array:
    h, w = spec.height, spec.width
    scale = min(h, w)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    jitter = 0.03 * scale
    cy = (h - 1) / 2.0 + rng.uniform(-jitter, jitter)
    cx = (w - 1) / 2.0 + rng.uniform(-jitter, jitter)
    if spec.shape == "disk":
        radius = scale * rng.uniform(0.26, 0.32)
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    if spec.shape == "rounded_rect":
        half_w = scale * rng.uniform(0.26, 0.32)
        half_h = scale * rng.uniform(0.20, 0.26)
        corner = scale * 0.06
        qx = np.abs(xx - cx) - (half_w - corner)
        qy = np.abs(yy - cy) - (half_h - corner)
        outside_d = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0)) + np.minimum(np.maximum(qx, qy), 0.0)
        return outside_d <= corner
    if spec.shape == "two_blobs":
        half_sep = scale * rng.uniform(0.20, 0.23)
        r_left = scale * rng.uniform(0.13, 0.16)
        r_right = scale * rng.uniform(0.13, 0.16)
        left = (xx - (cx - half_sep)) ** 2 + (yy - cy) ** 2 <= r_left**2
        right = (xx - (cx + half_sep)) ** 2 + (yy - cy) ** 2 <= r_right**2
        return left | right
    # annulus
    outer = scale * rng.uniform(0.28, 0.33)
    inner = scale * rng.uniform(0.14, 0.17)
    rr = (xx - cx) ** 2 + (yy - cy) ** 2
    return (rr <= outer**2) & (rr >= inner**2)


def _illumination(height: int, width: int, theta: float) -> Array:
    u = np.arange(width) / max(width - 1, 1) - 0.5
    v = np.arange(height) / max(height - 1, 1) - 0.5
    ramp = math.cos(theta) * u[None, :] + math.sin(theta) * v[:, None]
    peak = float(np.abs(ramp).max())
    if peak > 0:
        ramp = ramp * (0.5 / peak)
    return ramp  # spans [-0.5, 0.5]


def generate(spec: SynthSpec) -> tuple[FeatureField, BinaryMask, Tsdf]:
    """Features, ground-truth mask, and ground-truth TSDF for a spec.

    Fixed draw order: shape geometry, then per-pixel noise, then the
    illumination direction. Changing it would break seed compatibility.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    mask_arr = _shape_mask(spec, rng)
    noise = rng.standard_normal((spec.channels, spec.height, spec.width))
    theta = rng.uniform(0.0, 2.0 * math.pi)
    if not mask_arr.any():
        raise GenerationError("synthetic shape produced an empty mask")
    inside = np.asarray(spec.inside)
    outside = np.asarray(spec.outside)
    field = np.where(mask_arr[None], inside[:, None, None], outside[:, None, None])
    field = field + spec.noise_sigma * noise
    if spec.illum_amplitude != 0.0:
        weights = spec.illum_weights
        wvec = np.ones(spec.channels) if weights is None else np.asarray(weights)
        field = field + spec.illum_amplitude * wvec[:, None, None] * _illumination(spec.height, spec.width, theta)[None]
    mask = BinaryMask(mask_arr.astype(np.uint8))
    return FeatureField(field), mask, tsdf_from_mask(mask)


def grayscale_projection(features: FeatureField) -> ScalarField:
    """Channel mean, the single-channel view an intensity method would see."""
    return ScalarField(features.data.mean(axis=0))


def coarse_init(
    gt: BinaryMask,
    mode: str,
    amount: int = 0,
    truncation_radius: float | None = None,
) -> Tsdf:
    """Deliberately imprecise initialization derived from a ground-truth mask.

    box: TSDF of the filled bounding box. dilate/erode: grow or shrink the
    mask by `amount` 4-connected steps first. Eroding past the inradius
    empties the mask, which maps to the saturated all -1 TSDF.
    """
    if gt.area == 0:
        raise GenerationError("ground truth mask is empty")
    if mode == "box":
        r0, c0, r1, c1 = gt.bounding_box()
        grown = np.zeros(gt.shape, dtype=np.uint8)
        grown[r0 : r1 + 1, c0 : c1 + 1] = 1
    elif mode in ("dilate", "erode"):
        if amount < 0:
            raise ParameterError(f"amount must be nonnegative, got {amount}")
        grown = gt.data.astype(bool)
        if amount > 0:
            op = binary_dilation if mode == "dilate" else binary_erosion
            grown = op(grown, iterations=amount)
        grown = grown.astype(np.uint8)
    else:
        raise ParameterError(f"unknown init mode {mode!r}, expected box, dilate, or erode")
    return tsdf_from_mask(BinaryMask(grown), truncation_radius)
