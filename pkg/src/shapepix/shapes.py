"""Parametric ground-truth shapes on the unit square.

Coordinates are ``(x, y)`` with ``y`` pointing up.  Raster row 0 is the top
of the square, so the centre of raster cell ``(r, c)`` sits at
``x = (c + 1/2) / N`` and ``y = 1 - (r + 1/2) / N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np


class ShapeError(ValueError):
    pass


def _in_unit_square(points) -> bool:
    p = np.asarray(points, dtype=float)
    return bool(np.all((p >= -1e-12) & (p <= 1 + 1e-12)))


@dataclass(frozen=True)
class Circle:
    center: Tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ShapeError("circle radius must be positive")
        if not _in_unit_square(self.center):
            raise ShapeError("circle center outside the unit square")

    def contains(self, x, y):
        cx, cy = self.center
        return (x - cx) ** 2 + (y - cy) ** 2 < self.radius**2

    def area(self):
        return math.pi * self.radius**2

    def perimeter(self):
        return 2 * math.pi * self.radius

    def to_dict(self):
        return {"type": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class HalfDisk:
    """Disk of ``radius`` around ``center`` cut by the diameter orthogonal to ``direction``.

    The kept half is the one ``direction`` (an angle in radians) points into.
    """

    center: Tuple[float, float]
    radius: float
    direction: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ShapeError("half-disk radius must be positive")
        if not _in_unit_square(self.center):
            raise ShapeError("half-disk center outside the unit square")

    def contains(self, x, y):
        cx, cy = self.center
        dx, dy = x - cx, y - cy
        side = dx * math.cos(self.direction) + dy * math.sin(self.direction)
        return (dx**2 + dy**2 < self.radius**2) & (side > 0)

    def area(self):
        return 0.5 * math.pi * self.radius**2

    def perimeter(self):
        return math.pi * self.radius + 2 * self.radius

    def to_dict(self):
        return {"type": "halfdisk", "center": list(self.center),
                "radius": self.radius, "direction": self.direction}


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


@dataclass(frozen=True)
class Polygon:
    vertices: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        v = tuple(tuple(map(float, p)) for p in self.vertices)
        object.__setattr__(self, "vertices", v)
        if len(v) < 3:
            raise ShapeError("polygon needs at least three vertices")
        if not _in_unit_square(v):
            raise ShapeError("polygon vertex outside the unit square")
        n = len(v)
        edges = [(v[i], v[(i + 1) % n]) for i in range(n)]
        for a in range(n):
            for b in range(a + 2, n):
                if a == 0 and b == n - 1:
                    continue
                if _segments_cross(*edges[a], *edges[b]):
                    raise ShapeError("polygon is self-intersecting")

    def contains(self, x, y):
        v = np.asarray(self.vertices)
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        x1, y1 = v[:, 0], v[:, 1]
        x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
        for a, b, c, d in zip(x1, y1, x2, y2):
            if b == d:
                continue
            straddle = (b > y) != (d > y)
            xint = a + (y - b) * (c - a) / (d - b)
            inside ^= straddle & (x < xint)
        return inside

    def area(self):
        v = np.asarray(self.vertices)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))

    def perimeter(self):
        v = np.asarray(self.vertices)
        return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))

    def to_dict(self):
        return {"type": "polygon", "vertices": [list(p) for p in self.vertices]}


@dataclass(frozen=True)
class Composite:
    """Union of primitives whose interiors do not overlap."""

    parts: Tuple["Shape", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, x, y):
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for p in self.parts:
            inside |= p.contains(x, y)
        return inside

    def check_disjoint(self, n: int = 256) -> None:
        """Raise if two parts overlap on more than boundary samples."""
        if len(self.parts) < 2:
            return
        xs = (np.arange(n) + 0.5) / n
        x, y = np.meshgrid(xs, 1 - xs)
        counts = sum(p.contains(x, y).astype(int) for p in self.parts)
        overlap = np.count_nonzero(counts > 1)
        if overlap > 2 * n:
            raise ShapeError("composite parts overlap; analytic oracles unsupported")

    def area(self):
        self.check_disjoint()
        return float(sum(p.area() for p in self.parts))

    def perimeter(self):
        self.check_disjoint()
        total = sum(p.perimeter() for p in self.parts)
        return float(total - 2 * _shared_boundary(self.parts))

    def to_dict(self):
        return {"type": "composite", "parts": [p.to_dict() for p in self.parts]}


Shape = Union[Circle, HalfDisk, Polygon, Composite]


def _shared_boundary(parts) -> float:
    # Only straight edges can be shared exactly: polygon edges and half-disk diameters.
    segs = []
    for p in parts:
        if isinstance(p, Polygon):
            v = p.vertices
            segs.append([(v[i], v[(i + 1) % len(v)]) for i in range(len(v))])
        elif isinstance(p, HalfDisk):
            cx, cy = p.center
            ux, uy = -math.sin(p.direction), math.cos(p.direction)
            a = (cx - p.radius * ux, cy - p.radius * uy)
            b = (cx + p.radius * ux, cy + p.radius * uy)
            segs.append([(a, b)])
        else:
            segs.append([])
    shared = 0.0
    for a in range(len(segs)):
        for b in range(a + 1, len(segs)):
            for s in segs[a]:
                for t in segs[b]:
                    shared += _collinear_overlap(s, t)
    return shared


def _collinear_overlap(s, t, tol=1e-9) -> float:
    p0, p1 = np.asarray(s[0]), np.asarray(s[1])
    q0, q1 = np.asarray(t[0]), np.asarray(t[1])
    d = p1 - p0
    L = float(np.hypot(*d))
    if L == 0:
        return 0.0
    u = d / L
    nrm = np.array([-u[1], u[0]])
    if abs(np.dot(q0 - p0, nrm)) > tol or abs(np.dot(q1 - p0, nrm)) > tol:
        return 0.0
    a, b = sorted((float(np.dot(q0 - p0, u)), float(np.dot(q1 - p0, u))))
    return max(0.0, min(b, L) - max(a, 0.0))


def rasterize(shape: Shape, N: int, supersample: int = 4, chunk_rows: int = 64) -> np.ndarray:
    """Fractional coverage of each raster cell, estimated on ``supersample**2`` sub-points."""
    if supersample < 1:
        raise ShapeError("supersample must be >= 1")
    ss = int(supersample)
    sub = (np.arange(N * ss) + 0.5) / (N * ss)
    out = np.empty((N, N))
    for r0 in range(0, N, chunk_rows):
        r1 = min(N, r0 + chunk_rows)
        y = 1.0 - sub[r0 * ss:r1 * ss, None]
        inside = shape.contains(sub[None, :], y)
        out[r0:r1] = inside.reshape(r1 - r0, ss, N, ss).mean(axis=(1, 3))
    return out


def analytic_area(shape: Shape) -> float:
    return float(shape.area())


def analytic_perimeter(shape: Shape) -> float:
    return float(shape.perimeter())


def triangle_with_semicircle(center=(0.5, 0.5), side=0.5, angle=0.0) -> Composite:
    """Equilateral triangle with a half-disk glued onto one of its sides.

    ``center`` is the midpoint of the shared side, ``angle`` rotates the
    whole figure.  The half-disk bulges towards ``angle + pi/2`` and the
    triangle apex points the other way.
    """
    cx, cy = center
    ux, uy = math.cos(angle), math.sin(angle)
    nx, ny = -uy, ux
    h = side * math.sqrt(3) / 2
    a = (cx - 0.5 * side * ux, cy - 0.5 * side * uy)
    b = (cx + 0.5 * side * ux, cy + 0.5 * side * uy)
    apex = (cx - h * nx, cy - h * ny)
    tri = Polygon((a, b, apex))
    cap = HalfDisk((cx, cy), side / 2, angle + math.pi / 2)
    return Composite((tri, cap))


def shape_from_dict(data) -> Shape:
    kind = data.get("type")
    if kind == "circle":
        return Circle(tuple(data["center"]), float(data["radius"]))
    if kind == "halfdisk":
        return HalfDisk(tuple(data["center"]), float(data["radius"]), float(data["direction"]))
    if kind == "polygon":
        return Polygon(tuple(map(tuple, data["vertices"])))
    if kind == "composite":
        return Composite(tuple(shape_from_dict(p) for p in data.get("parts", [])))
    if kind == "triangle_semicircle":
        return triangle_with_semicircle(tuple(data.get("center", (0.5, 0.5))),
                                        float(data.get("side", 0.5)),
                                        float(data.get("angle", 0.0)))
    raise ShapeError(f"unknown shape type {kind!r}")
