"""Raster geometry primitives for text instances.

Masks are 2-D ``bool`` arrays indexed ``[row, col]``.  Pixel ``(i, j)`` covers
the square ``[j, j+1] x [i, i+1]`` in pixel coordinates, so its center is
``(j + 0.5, i + 0.5)``.  Polygons are ``(N, 2)`` float arrays of ``(x, y)``
vertices in the same coordinate frame.

All morphology treats positions outside the image as background.  Distances
are compared in squared form (``d^2 > r^2`` for erosion, ``d^2 <= r^2`` for
dilation) so that results are bit-exact against brute-force definitions.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import DegeneratePolygon, EmptyMask, CenterOutsideMask, NotSingleComponent

_EIGHT = np.ones((3, 3), dtype=bool)


class Point2(NamedTuple):
    x: float
    y: float


# --------------------------------------------------------------------------
# polygons
# --------------------------------------------------------------------------

def signed_area(poly) -> float:
    """Shoelace area; positive for the vertex order used by :func:`trace_contour`."""
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def as_polygon(vertices) -> np.ndarray:
    """Validate and convert to an ``(N, 2)`` float64 array.

    Raises DegeneratePolygon for fewer than three distinct vertices or zero
    signed area.
    """
    p = np.asarray(vertices, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2:
        raise DegeneratePolygon(f"expected (N, 2) vertices, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DegeneratePolygon("non-finite vertex")
    if len(np.unique(p, axis=0)) < 3:
        raise DegeneratePolygon("fewer than 3 distinct vertices")
    if signed_area(p) == 0.0:
        raise DegeneratePolygon("zero area")
    return p


def _segments_cross(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_segment(p1, p2, p3)) or (o2 == 0 and on_segment(p1, p2, p4))
            or (o3 == 0 and on_segment(p3, p4, p1)) or (o4 == 0 and on_segment(p3, p4, p2)))


def is_simple(poly) -> bool:
    """True when no two non-adjacent edges touch (O(N^2))."""
    p = [tuple(v) for v in np.asarray(poly, dtype=np.float64).tolist()]
    n = len(p)
    if n < 3:
        return False
    for i in range(n):
        a, b = p[i], p[(i + 1) % n]
        if a == b:
            return False
        for k in range(i + 2, n):
            if i == 0 and k == n - 1:
                continue
            if _segments_cross(a, b, p[k], p[(k + 1) % n]):
                return False
    return True


def _winding_window(poly: np.ndarray, x0: int, y0: int, w: int, h: int) -> np.ndarray:
    # Winding number of every pixel center in the window, one scanline per row.
    # An upward edge crossing the row to the right of a center adds +1, a
    # downward one -1.  Edges own their lower endpoint only (half-open in y).
    a = poly
    b = np.roll(poly, -1, axis=0)
    ys = y0 + np.arange(h, dtype=np.float64)[:, None] + 0.5
    ay, by = a[:, 1][None, :], b[:, 1][None, :]
    up = (ay <= ys) & (by > ys)
    down = (by <= ys) & (ay > ys)
    rows, edges = np.nonzero(up | down)
    wind = np.zeros((h, w + 1), dtype=np.int32)
    if rows.size == 0:
        return wind[:, :w]
    ax_, ay_ = a[edges, 0], a[edges, 1]
    bx_, by_ = b[edges, 0], b[edges, 1]
    yc = ys[rows, 0]
    xi = ax_ + (yc - ay_) * (bx_ - ax_) / (by_ - ay_)
    # center j counts iff x0 + j + 0.5 < xi
    k = np.clip(np.ceil(xi - x0 - 0.5), 0, w).astype(np.intp)
    d = np.where(up[rows, edges], 1, -1).astype(np.int32)
    np.add.at(wind, (rows, np.zeros_like(k)), d)
    np.add.at(wind, (rows, k), -d)
    return np.cumsum(wind[:, :w], axis=1)


def rasterize_window(poly, x0: int, y0: int, width: int, height: int) -> np.ndarray:
    """Rasterize into the sub-window whose top-left pixel is ``(x0, y0)``."""
    p = as_polygon(poly)
    return _winding_window(p, int(x0), int(y0), int(width), int(height)) != 0


def rasterize_polygon(poly, width: int, height: int) -> np.ndarray:
    """Pixel-center sampling with the nonzero winding rule.

    Pixel ``(i, j)`` is set iff ``(j + 0.5, i + 0.5)`` lies inside ``poly``.
    Parts outside the ``width x height`` image are clipped.
    """
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    p = as_polygon(poly)
    out = np.zeros((height, width), dtype=bool)
    xmin, ymin = np.floor(p.min(axis=0)).astype(int)
    xmax, ymax = np.ceil(p.max(axis=0)).astype(int)
    c0, r0 = max(xmin, 0), max(ymin, 0)
    c1, r1 = min(xmax, width), min(ymax, height)
    if c1 <= c0 or r1 <= r0:
        return out
    out[r0:r1, c0:c1] = _winding_window(p, c0, r0, c1 - c0, r1 - r0) != 0
    return out


# --------------------------------------------------------------------------
# distances and morphology
# --------------------------------------------------------------------------

def _nearest_zero_d2(arr: np.ndarray) -> np.ndarray:
    # Exact squared distance from each pixel center to the nearest zero of
    # ``arr``; scipy's EDT is exact, and recomputing d^2 from the returned
    # feature indices keeps it in integers.
    inds = ndimage.distance_transform_edt(arr, return_distances=False, return_indices=True)
    rr, cc = np.indices(arr.shape)
    return (inds[0] - rr) ** 2 + (inds[1] - cc) ** 2


def squared_distance_transform(mask) -> np.ndarray:
    """Integer squared distance to the nearest background pixel center.

    Out-of-image positions are background, so border pixels get 1.
    """
    m = np.asarray(mask, dtype=bool)
    padded = np.pad(m, 1, constant_values=False)
    return _nearest_zero_d2(padded)[1:-1, 1:-1].astype(np.int64)


def distance_transform(mask) -> np.ndarray:
    """Exact Euclidean distance transform (0 on background)."""
    return np.sqrt(squared_distance_transform(mask))


def squared_distance_to_foreground(mask) -> np.ndarray:
    """Squared distance to the nearest foreground pixel center.

    Empty masks give ``inf`` everywhere.
    """
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return np.full(m.shape, np.inf)
    return _nearest_zero_d2(~m).astype(np.int64)


def erode_disk(mask, r: float) -> np.ndarray:
    """Keep pixels whose distance to the background is strictly greater than ``r``."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    return squared_distance_transform(mask) > r * r


def dilate_disk(mask, r: float) -> np.ndarray:
    """Set pixels within distance ``r`` (inclusive) of a foreground pixel."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return m.copy()
    return squared_distance_to_foreground(m) <= r * r


def outline(mask) -> np.ndarray:
    """Foreground pixels with at least one background 4-neighbor."""
    m = np.asarray(mask, dtype=bool)
    p = np.pad(m, 1, constant_values=False)
    interior = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    return m & ~interior


# --------------------------------------------------------------------------
# center and PMD
# --------------------------------------------------------------------------

def center_pixel(mask) -> tuple[int, int]:
    """``(row, col)`` of the distance-transform maximum; first in raster order on ties."""
    d2 = squared_distance_transform(mask)
    flat = int(np.argmax(d2))
    if d2.flat[flat] == 0:
        raise EmptyMask("mask has no foreground pixels")
    return divmod(flat, d2.shape[1])


def find_center(mask) -> Point2:
    i, j = center_pixel(mask)
    return Point2(j + 0.5, i + 0.5)


def compute_pmd(mask, center) -> float:
    """Distance from ``center`` to the nearest background pixel center."""
    m = np.asarray(mask, dtype=bool)
    x, y = center
    i, j = int(np.floor(y)), int(np.floor(x))
    if not (0 <= i < m.shape[0] and 0 <= j < m.shape[1]) or not m[i, j]:
        raise CenterOutsideMask(f"center {tuple(center)} is not on a foreground pixel")
    # only the neighborhood within reach of the nearest background matters,
    # but the full transform keeps this obviously consistent with find_center
    return float(np.sqrt(squared_distance_transform(m)[i, j]))


# --------------------------------------------------------------------------
# components and contours
# --------------------------------------------------------------------------

def label_components(mask) -> tuple[np.ndarray, int]:
    """8-connected labels ``1..n``, numbered by each component's first pixel in raster order."""
    m = np.asarray(mask, dtype=bool)
    # scipy assigns labels in raster order of each component's first pixel
    labels, n = ndimage.label(m, structure=_EIGHT)
    return labels, int(n)


def connected_components(mask) -> list[np.ndarray]:
    labels, n = label_components(mask)
    return [labels == k for k in range(1, n + 1)]


def mask_bbox(mask) -> tuple[int, int, int, int] | None:
    """Half-open ``(r0, r1, c0, c1)`` bounding box, or None for an empty mask."""
    m = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(m.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(m.any(axis=0))
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


def trace_outer_boundary(mask) -> np.ndarray:
    """Outer crack boundary of the component holding the first foreground pixel.

    Walks pixel edges with the foreground on the left-hand normal
    ``(-dy, dx)``; at diagonal pinches it steps across, which follows
    8-connectivity.  Only direction changes are emitted, so collinear
    vertices never appear.  No connectivity check; see :func:`trace_contour`.
    """
    m = np.asarray(mask, dtype=bool)
    bb = mask_bbox(m)
    if bb is None:
        raise EmptyMask("mask has no foreground pixels")
    r0, r1, c0, c1 = bb
    p = np.pad(m[r0:r1, c0:c1], 1, constant_values=False)
    i0 = 0
    j0 = int(np.argmax(p[1])) - 1
    x, y = j0, i0
    dx, dy = 1, 0
    verts = [(x, y)]
    while True:
        x += dx
        y += dy
        nx, ny = -dy, dx
        # pixels ahead of vertex (x, y): inner side and outer side of the walk
        inner = p[y + (dy + ny - 1) // 2 + 1, x + (dx + nx - 1) // 2 + 1]
        outer = p[y + (dy - ny - 1) // 2 + 1, x + (dx - nx - 1) // 2 + 1]
        if outer:
            ndx, ndy = -nx, -ny
        elif inner:
            ndx, ndy = dx, dy
        else:
            ndx, ndy = nx, ny
        if (x, y) == (j0, i0) and (ndx, ndy) == (1, 0):
            break
        if (ndx, ndy) != (dx, dy):
            verts.append((x, y))
        dx, dy = ndx, ndy
    out = np.asarray(verts, dtype=np.float64)
    out[:, 0] += c0
    out[:, 1] += r0
    return out


def simplify_collinear(poly) -> np.ndarray:
    """Drop vertices lying on the segment joining their neighbours."""
    p = np.asarray(poly, dtype=np.float64)
    changed = True
    while changed and len(p) > 3:
        prev, nxt = np.roll(p, 1, axis=0), np.roll(p, -1, axis=0)
        cross = (p[:, 0] - prev[:, 0]) * (nxt[:, 1] - prev[:, 1]) - (p[:, 1] - prev[:, 1]) * (nxt[:, 0] - prev[:, 0])
        dup = np.all(p == prev, axis=1)
        drop = (cross == 0) | dup
        changed = bool(drop.any()) and drop.sum() < len(p) - 2
        if changed:
            p = p[~drop]
    return p


def trace_contour(mask) -> np.ndarray:
    """Outer boundary polygon of a single 8-connected component.

    Vertices are pixel corners in positive-area (shoelace) order, so
    rasterizing the result gives back the mask with any holes filled.  A
    single pixel yields the unit square around its center.
    """
    _, n = label_components(mask)
    if n != 1:
        raise NotSingleComponent(f"expected exactly one component, found {n}")
    return trace_outer_boundary(mask)
