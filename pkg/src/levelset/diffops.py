"""Discrete spatial operators: Sobel gradients, divergence, curvature.

The 3x3 Sobel kernels are scaled by 1/8 so linear ramps differentiate
exactly at interior pixels; borders use replicate padding. The private
``*_adjoint`` helpers are exact transposes of the forward operators and
back the reverse-mode pass in `autodiff`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .fields import Array, ScalarField


@dataclass(frozen=True, eq=False)
class VectorField2:
    """A 2-d vector field as matching x- and y-component scalar fields."""

    x: ScalarField
    y: ScalarField

    def __post_init__(self) -> None:
        if self.x.shape != self.y.shape:
            raise DimensionError(
                f"vector components must share a shape, got {self.x.shape} and {self.y.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape


def _pad_edge(f: Array) -> Array:
    h, w = f.shape
    p = np.empty((h + 2, w + 2), dtype=f.dtype)
    p[1:-1, 1:-1] = f
    p[0, 1:-1] = f[0]
    p[-1, 1:-1] = f[-1]
    p[:, 0] = p[:, 1]
    p[:, -1] = p[:, -2]
    return p


def _unpad_adjoint(pbar: Array) -> Array:
    # transpose of _pad_edge: fold the replicated border back onto its source
    inner = pbar[:, 1:-1].copy()
    inner[:, 0] += pbar[:, 0]
    inner[:, -1] += pbar[:, -1]
    out = inner[1:-1].copy()
    out[0] += inner[0]
    out[-1] += inner[-1]
    return out


def _sobel_pair(f: Array) -> tuple[Array, Array]:
    p = _pad_edge(f)
    tl = p[:-2, :-2]
    tc = p[:-2, 1:-1]
    tr = p[:-2, 2:]
    ml = p[1:-1, :-2]
    mr = p[1:-1, 2:]
    bl = p[2:, :-2]
    bc = p[2:, 1:-1]
    br = p[2:, 2:]
    gx = ((tr - tl) + 2.0 * (mr - ml) + (br - bl)) * 0.125
    gy = ((bl - tl) + 2.0 * (bc - tc) + (br - tr)) * 0.125
    return gx, gy


def _sobel_x(f: Array) -> Array:
    p = _pad_edge(f)
    return ((p[:-2, 2:] - p[:-2, :-2]) + 2.0 * (p[1:-1, 2:] - p[1:-1, :-2]) + (p[2:, 2:] - p[2:, :-2])) * 0.125


def _sobel_y(f: Array) -> Array:
    p = _pad_edge(f)
    return ((p[2:, :-2] - p[:-2, :-2]) + 2.0 * (p[2:, 1:-1] - p[:-2, 1:-1]) + (p[2:, 2:] - p[:-2, 2:])) * 0.125


def _scatter3(gx_bar: Array | None, gy_bar: Array | None) -> Array:
    ref = gx_bar if gx_bar is not None else gy_bar
    h, w = ref.shape
    p = np.zeros((h + 2, w + 2))
    if gx_bar is not None:
        a = 0.125 * gx_bar
        p[:-2, 2:] += a
        p[:-2, :-2] -= a
        p[1:-1, 2:] += 2.0 * a
        p[1:-1, :-2] -= 2.0 * a
        p[2:, 2:] += a
        p[2:, :-2] -= a
    if gy_bar is not None:
        b = 0.125 * gy_bar
        p[2:, :-2] += b
        p[:-2, :-2] -= b
        p[2:, 1:-1] += 2.0 * b
        p[:-2, 1:-1] -= 2.0 * b
        p[2:, 2:] += b
        p[:-2, 2:] -= b
    return _unpad_adjoint(p)


def _sobel_x_adjoint(gbar: Array) -> Array:
    return _scatter3(gbar, None)


def _sobel_y_adjoint(gbar: Array) -> Array:
    return _scatter3(None, gbar)


def _sobel_pair_adjoint(gx_bar: Array, gy_bar: Array) -> Array:
    return _scatter3(gx_bar, gy_bar)


def _curvature(f: Array, eta: float) -> Array:
    gx, gy = _sobel_pair(f)
    m = np.sqrt(gx * gx + gy * gy + eta * eta)
    return _sobel_x(gx / m) + _sobel_y(gy / m)


def sobel_gradient(f: ScalarField) -> VectorField2:
    """Sobel x/y derivatives with 1/8 scaling and replicate padding."""
    gx, gy = _sobel_pair(f.data)
    return VectorField2(ScalarField(gx), ScalarField(gy))


def divergence(v: VectorField2) -> ScalarField:
    """d(vx)/dx + d(vy)/dy using the same Sobel stencils."""
    return ScalarField(_sobel_x(v.x.data) + _sobel_y(v.y.data))


def curvature(phi: ScalarField, eta: float = 1e-8) -> ScalarField:
    """div(grad phi / |grad phi|), with the norm smoothed as sqrt(g^2 + eta^2).

    The eta term keeps the operator finite and differentiable where the
    gradient vanishes. For circular level sets the interior values
    approach -1/radius (positive-inside sign convention) as the grid
    refines.
    """
    eta = float(eta)
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    return ScalarField(_curvature(phi.data, eta))
