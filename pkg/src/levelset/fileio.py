"""File containers: the LSF1 raw-double field format, grayscale PNG
masks and images, and the per-step energy CSV.

LSF1 layout, all little endian: magic "LSF1", u16 version (1), u16 dtype
code (1 = float64), u32 channels, u32 height, u32 width, then
channels * height * width doubles, row major within each channel.
Round trips are bit-lossless for every finite double.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .errors import DimensionError, FieldFormatError
from .fields import Array, BinaryMask, FeatureField, ScalarField, Tsdf, scalar_data

_MAGIC = b"LSF1"
_VERSION = 1
_DTYPE_FLOAT64_LE = 1
_HEADER = struct.Struct("<4sHHIII")


def write_field_file(path, field: FeatureField | ScalarField | Tsdf) -> None:
    if isinstance(field, FeatureField):
        arr = field.data
    else:
        arr = scalar_data(field)[None]
    c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, _DTYPE_FLOAT64_LE, c, h, w))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_field_array(path) -> Array:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FieldFormatError(f"{path}: truncated header")
    magic, version, dtype, c, h, w = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise FieldFormatError(f"{path}: unsupported version {version}")
    if dtype != _DTYPE_FLOAT64_LE:
        raise FieldFormatError(f"{path}: unsupported dtype code {dtype}")
    expected = 8 * c * h * w
    payload = blob[_HEADER.size :]
    if len(payload) != expected:
        raise FieldFormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f8").reshape(c, h, w).astype(np.float64)


def read_feature_field(path) -> FeatureField:
    return FeatureField(read_field_array(path))


def read_scalar_field(path) -> ScalarField:
    arr = read_field_array(path)
    if arr.shape[0] != 1:
        raise DimensionError(f"{path}: expected a single channel, found {arr.shape[0]}")
    return ScalarField(arr[0])


def write_mask_png(path, mask: BinaryMask) -> None:
    Image.fromarray((mask.data * 255).astype(np.uint8), mode="L").save(path, format="PNG")


def read_mask_png(path) -> BinaryMask:
    arr = np.asarray(Image.open(path).convert("L"))
    return BinaryMask((arr > 127).astype(np.uint8))


def write_gray_png(path, field: ScalarField) -> None:
    """Quantize a [0, 1] field to 8-bit grayscale; values outside clip."""
    scaled = np.clip(field.data, 0.0, 1.0) * 255.0
    Image.fromarray(np.rint(scaled).astype(np.uint8), mode="L").save(path, format="PNG")


def read_gray_image(path) -> ScalarField:
    """Load a PNG or PGM image as a grayscale field scaled to [0, 1]."""
    img = Image.open(path)
    if img.mode in ("I", "I;16", "I;16B", "I;16L"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    else:
        arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    return ScalarField(arr)


def write_energy_csv(path, energies) -> None:
    lines = ["step,energy"]
    for i, e in enumerate(energies):
        lines.append(f"{i},{e:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_energy_csv(path) -> list[float]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = fh.read().strip().splitlines()
    if not rows or rows[0] != "step,energy":
        raise FieldFormatError(f"{path}: not an energy CSV")
    return [float(row.split(",")[1]) for row in rows[1:]]
