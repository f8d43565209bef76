"""Raster grid value types shared by every other module.

All grids are double-precision numpy arrays in row-major order with
pixel (0, 0) at the top left; multi-channel data is channel-major,
shaped (channels, height, width). Construction copies and freezes the
backing array, so field values are immutable and can be shared between
threads without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError

Array = np.ndarray


def _validated_grid(data: object, what: str) -> Array:
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.ndim != 2:
        raise DimensionError(f"{what} must be a 2-d grid, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{what} dimensions must be at least 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ParameterError(f"{what} values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Single-channel grid of finite doubles (an image, a level set, ...)."""

    data: Array

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _validated_grid(self.data, "ScalarField"))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True, eq=False)
class FeatureField:
    """C-channel grid of finite doubles, channel-major (C, H, W)."""

    data: Array

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise DimensionError(f"FeatureField must be a 3-d (C, H, W) grid, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DimensionError("FeatureField needs at least one channel")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise DimensionError(f"FeatureField spatial dimensions must be at least 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ParameterError("FeatureField values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @classmethod
    def from_scalar(cls, field: ScalarField) -> "FeatureField":
        """Lift a single-channel field to a C=1 feature field."""
        return cls(field.data[np.newaxis])


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Grid of {0, 1} values stored as uint8."""

    data: Array

    def __post_init__(self) -> None:
        arr = np.array(self.data, copy=True)
        if arr.ndim != 2:
            raise DimensionError(f"BinaryMask must be a 2-d grid, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"BinaryMask dimensions must be at least 1, got {arr.shape}")
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        else:
            if not np.isin(arr, (0, 1)).all():
                raise ParameterError("BinaryMask values must be 0 or 1")
            arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def area(self) -> int:
        return int(self.data.sum())

    @classmethod
    def from_bool(cls, values: Array) -> "BinaryMask":
        return cls(np.asarray(values, dtype=bool))

    def bounding_box(self) -> tuple[int, int, int, int] | None:
        """Inclusive (row0, col0, row1, col1) of the set pixels, or None if empty."""
        rows = np.flatnonzero(self.data.any(axis=1))
        cols = np.flatnonzero(self.data.any(axis=0))
        if rows.size == 0:
            return None
        return int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1])


@dataclass(frozen=True, eq=False)
class Tsdf:
    """Truncated signed distance field, normalized to [-1, 1].

    Values are positive inside the object and negative outside; the zero
    crossing is the object boundary. ``truncation_radius`` is the
    clamping distance in pixels that produced the normalized values.
    """

    field: ScalarField
    truncation_radius: float

    def __post_init__(self) -> None:
        fld = self.field if isinstance(self.field, ScalarField) else ScalarField(self.field)
        radius = float(self.truncation_radius)
        if not (math.isfinite(radius) and radius > 0):
            raise ParameterError(f"truncation radius must be positive, got {radius}")
        if np.abs(fld.data).max() > 1.0:
            raise ParameterError("TSDF values must lie in [-1, 1]")
        object.__setattr__(self, "field", fld)
        object.__setattr__(self, "truncation_radius", radius)

    @property
    def data(self) -> Array:
        return self.field.data

    @property
    def height(self) -> int:
        return self.field.height

    @property
    def width(self) -> int:
        return self.field.width

    @property
    def shape(self) -> tuple[int, int]:
        return self.field.shape


def scalar_data(value: ScalarField | Tsdf) -> Array:
    """Backing array of a ScalarField, or of the field inside a Tsdf."""
    if isinstance(value, Tsdf):
        return value.field.data
    if isinstance(value, ScalarField):
        return value.data
    raise TypeError(f"expected ScalarField or Tsdf, got {type(value).__name__}")


def new_scalar_field(height: int, width: int, fill: float) -> ScalarField:
    """Constant field of the given size."""
    if height < 1 or width < 1:
        raise DimensionError(f"dimensions must be at least 1, got ({height}, {width})")
    fill = float(fill)
    if not math.isfinite(fill):
        raise ParameterError(f"fill value must be finite, got {fill}")
    return ScalarField(np.full((int(height), int(width)), fill))


def bilinear_resize(f: ScalarField, out_height: int, out_width: int) -> ScalarField:
    """Resample with output pixel centers at (i + 0.5) / n of the source extent.

    This is the align-corners-false convention: output center i maps to
    source coordinate (i + 0.5) * (src / dst) - 0.5, clamped at the
    borders. The result is clipped to the source value range, so
    interpolation can never overshoot it, and constant fields resize to
    the bit-identical constant.
    """
    if out_height < 1 or out_width < 1:
        raise DimensionError(f"target dimensions must be at least 1, got ({out_height}, {out_width})")
    src = f.data
    h, w = src.shape
    ys = np.clip((np.arange(out_height) + 0.5) * (h / out_height) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_width) + 0.5) * (w / out_width) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    v00 = src[np.ix_(y0, x0)]
    v01 = src[np.ix_(y0, x1)]
    v10 = src[np.ix_(y1, x0)]
    v11 = src[np.ix_(y1, x1)]
    top = v00 + fx * (v01 - v00)
    bottom = v10 + fx * (v11 - v10)
    out = top + fy * (bottom - top)
    np.clip(out, src.min(), src.max(), out=out)
    return ScalarField(out)
