"""Truncated signed distance fields and their soft relaxations.

Covers construction from binary masks (exact Euclidean distance to the
mask boundary), truncation and normalization to [-1, 1], the smooth
step/impulse pair used by the segmentation energy, mask extraction, and
sub-pixel zero-crossing contours via marching squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParameterError
from .fields import Array, BinaryMask, ScalarField, Tsdf, scalar_data


@dataclass(frozen=True)
class SoftParams:
    """Sharpness of the soft step/impulse relaxations; smaller is sharper."""

    epsilon: float = 1.0

    def __post_init__(self) -> None:
        eps = float(self.epsilon)
        if not (math.isfinite(eps) and eps > 0):
            raise ParameterError(f"epsilon must be positive, got {eps}")
        object.__setattr__(self, "epsilon", eps)


def _heaviside(z, eps: float):
    # 0.5 + atan(z / eps) / pi, so H(-z) mirrors H(z) exactly in floating point
    return 0.5 + np.arctan(z / eps) / np.pi


def _heaviside_deriv(z, eps: float):
    return (eps / np.pi) / (eps * eps + z * z)


def _dirac(z, eps: float):
    return (eps * eps / np.pi) / (eps * eps + z * z)


def heaviside_soft(z, params: SoftParams):
    """Smooth step in (0, 1): 0.5 at z = 0, 0.75 at z = epsilon.

    Accepts scalars or arrays; strictly increasing in z.
    """
    out = _heaviside(np.asarray(z, dtype=np.float64), params.epsilon)
    return out if isinstance(z, np.ndarray) else float(out)


def dirac_soft(z, params: SoftParams):
    """Smooth impulse, even in z, peaking at 1/pi at z = 0 for any epsilon."""
    out = _dirac(np.asarray(z, dtype=np.float64), params.epsilon)
    return out if isinstance(z, np.ndarray) else float(out)


def boundary_midpoints(mask: BinaryMask) -> Array:
    """Midpoints of pixel edges separating a 1 pixel from a 4-adjacent 0 pixel.

    Returned as (row, col) coordinates in pixel-center units, one row per
    midpoint. Pixels beyond the grid border do not count as neighbors.
    """
    m = mask.data
    across = m[:, :-1] != m[:, 1:]
    rr, cc = np.nonzero(across)
    down = m[:-1, :] != m[1:, :]
    r2, c2 = np.nonzero(down)
    pts = np.empty((rr.size + r2.size, 2))
    pts[: rr.size, 0] = rr
    pts[: rr.size, 1] = cc + 0.5
    pts[rr.size :, 0] = r2 + 0.5
    pts[rr.size :, 1] = c2
    return pts


def signed_distance(mask: BinaryMask) -> ScalarField:
    """Exact Euclidean signed distance to the mask boundary, in pixels.

    Positive inside (mask value 1), negative outside. The boundary is the
    set of pixel-edge midpoints between a 1 pixel and a 4-adjacent 0
    pixel; distances run from pixel centers to the nearest midpoint. A
    mask with no boundary (all ones or all zeros) maps to the constant
    +/- grid diagonal length.
    """
    m = mask.data
    h, w = m.shape
    pts = boundary_midpoints(mask)
    if pts.shape[0] == 0:
        sentinel = math.hypot(h, w)
        value = sentinel if m.flat[0] else -sentinel
        return ScalarField(np.full((h, w), value))
    tree = cKDTree(pts)
    gy, gx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dist, _ = tree.query(np.column_stack([gy.ravel(), gx.ravel()]))
    dist = dist.reshape(h, w)
    return ScalarField(np.where(m > 0, dist, -dist))


def default_truncation_radius(height: int, width: int) -> float:
    """Default clamp distance: a fifth of the smaller grid side."""
    return 0.2 * min(int(height), int(width))


def truncate_normalize(d: ScalarField, truncation_radius: float) -> Tsdf:
    """Clamp a distance field to [-radius, radius] and scale to [-1, 1]."""
    radius = float(truncation_radius)
    if not (math.isfinite(radius) and radius > 0):
        raise ParameterError(f"truncation radius must be positive, got {radius}")
    return Tsdf(ScalarField(np.clip(d.data, -radius, radius) / radius), radius)


def tsdf_from_mask(mask: BinaryMask, truncation_radius: float | None = None) -> Tsdf:
    """Signed distance of a mask, truncated and normalized in one step."""
    if truncation_radius is None:
        truncation_radius = default_truncation_radius(mask.height, mask.width)
    return truncate_normalize(signed_distance(mask), truncation_radius)


def mask_from_tsdf(phi: Tsdf | ScalarField) -> BinaryMask:
    """Threshold at the zero level; phi = 0 counts as inside."""
    return BinaryMask((scalar_data(phi) >= 0.0).astype(np.uint8))


Point = tuple[float, float]
Segment = tuple[Point, Point]

# marching-squares segment table, indexed by the inside bits
# TL=1, TR=2, BR=4, BL=8; cases 5 and 10 are resolved at runtime
_CASE_EDGES = {
    1: ("top", "left"),
    2: ("top", "right"),
    3: ("left", "right"),
    4: ("right", "bottom"),
    6: ("top", "bottom"),
    7: ("left", "bottom"),
    8: ("left", "bottom"),
    9: ("top", "bottom"),
    11: ("right", "bottom"),
    12: ("left", "right"),
    13: ("top", "right"),
    14: ("top", "left"),
}


def zero_crossings(phi: Tsdf | ScalarField) -> list[Segment]:
    """Sub-pixel zero-level contour segments via marching squares.

    Pixel centers sit at integer (x, y) = (col, row). Every returned
    endpoint lies on a grid edge whose node values straddle the zero
    level (phi >= 0 counts as inside) and is placed by linear
    interpolation, so the interpolated phi at the endpoint is zero up to
    rounding. Saddle cells are disambiguated by the sign of the cell
    average. Endpoints shared between neighboring cells are bit-identical,
    which `chain_contours` relies on.
    """
    f = scalar_data(phi)
    h, w = f.shape
    if h < 2 or w < 2:
        return []
    inside = f >= 0.0
    code = (
        inside[:-1, :-1].astype(np.uint8)
        | inside[:-1, 1:].astype(np.uint8) << 1
        | inside[1:, 1:].astype(np.uint8) << 2
        | inside[1:, :-1].astype(np.uint8) << 3
    )
    segments: list[Segment] = []
    for r, c in np.argwhere((code != 0) & (code != 15)):
        r = int(r)
        c = int(c)
        k = int(code[r, c])
        f00 = f[r, c]
        f01 = f[r, c + 1]
        f10 = f[r + 1, c]
        f11 = f[r + 1, c + 1]
        edges = {
            "top": lambda: (c + f00 / (f00 - f01), float(r)),
            "bottom": lambda: (c + f10 / (f10 - f11), float(r + 1)),
            "left": lambda: (float(c), r + f00 / (f00 - f10)),
            "right": lambda: (float(c + 1), r + f01 / (f01 - f11)),
        }
        if k in (5, 10):
            center_inside = (f00 + f01 + f10 + f11) * 0.25 >= 0.0
            if (k == 5) == center_inside:
                pairs = (("top", "right"), ("left", "bottom"))
            else:
                pairs = (("top", "left"), ("right", "bottom"))
            for a, b in pairs:
                seg = (edges[a](), edges[b]())
                if seg[0] != seg[1]:
                    segments.append(seg)
        else:
            a, b = _CASE_EDGES[k]
            seg = (edges[a](), edges[b]())
            # a node sitting exactly on the zero level can collapse a segment
            if seg[0] != seg[1]:
                segments.append(seg)
    return segments


def contour_count(segments: list[Segment]) -> int:
    """Number of connected contours in a segment soup.

    Counts connected components of the endpoint-sharing graph, which
    stays correct even where a contour touches itself at a grid node
    (where simple polyline walking would split it).
    """
    index: dict[Point, int] = {}
    parent: list[int] = []

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for p, q in segments:
        for pt in (p, q):
            if pt not in index:
                index[pt] = len(parent)
                parent.append(len(parent))
        a, b = find(index[p]), find(index[q])
        if a != b:
            parent[a] = b
    return len({find(i) for i in range(len(parent))})


def chain_contours(segments: list[Segment]) -> list[list[Point]]:
    """Join segments that share endpoints into polylines.

    Closed contours come back with their first point repeated at the end;
    chains that leave the grid stay open. For level sets that touch
    themselves at a grid node the walk can split; use `contour_count`
    when only the number of contours matters.
    """
    by_point: dict[Point, list[int]] = {}
    for i, (p, q) in enumerate(segments):
        by_point.setdefault(p, []).append(i)
        by_point.setdefault(q, []).append(i)
    seen = [False] * len(segments)

    def extend(path: list[Point]) -> None:
        while True:
            tail = path[-1]
            nxt = -1
            for i in by_point.get(tail, ()):
                if not seen[i]:
                    nxt = i
                    break
            if nxt < 0:
                return
            seen[nxt] = True
            p, q = segments[nxt]
            path.append(q if p == tail else p)
            if path[-1] == path[0]:
                return

    contours: list[list[Point]] = []
    for i, (p, q) in enumerate(segments):
        if seen[i]:
            continue
        seen[i] = True
        path = [p, q]
        extend(path)
        if path[-1] != path[0]:
            path.reverse()
            extend(path)
        contours.append(path)
    return contours
