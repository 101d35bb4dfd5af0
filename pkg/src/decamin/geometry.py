"""Planar geometric primitives over a single local metric projection.

One azimuthal-equidistant projection, centered on the dataset's bounding-box
center, serves a whole run; at city scale (<= ~30 km) this keeps distances
and areas metric without per-feature zone juggling. Polygon set operations
(intersection, union, buffering) are delegated to GEOS via shapely; the
projection and the centroid are computed directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from shapely.geometry import LineString, MultiPolygon, Point, Polygon
from shapely.geometry.base import BaseGeometry
from shapely.ops import unary_union

from .errors import GeometryError

EARTH_RADIUS_M = 6_371_008.8  # mean Earth radius
MAX_ABS_LAT = 85.0


@dataclass(frozen=True)
class LocalProjection:
    """Azimuthal equidistant projection centered on (origin_lon, origin_lat)."""

    origin_lon: float
    origin_lat: float

    def project(self, lon: float, lat: float) -> tuple[float, float]:
        """WGS84 degrees -> planar meters (x east, y north)."""
        if abs(lat) >= MAX_ABS_LAT or abs(lon) > 180.0:
            raise GeometryError(f"coordinate out of range: ({lon}, {lat})")
        lam0, phi0 = math.radians(self.origin_lon), math.radians(self.origin_lat)
        lam, phi = math.radians(lon), math.radians(lat)
        cos_c = math.sin(phi0) * math.sin(phi) + math.cos(phi0) * math.cos(phi) * math.cos(
            lam - lam0
        )
        cos_c = min(1.0, max(-1.0, cos_c))
        c = math.acos(cos_c)
        k = 1.0 if c < 1e-12 else c / math.sin(c)
        x = EARTH_RADIUS_M * k * math.cos(phi) * math.sin(lam - lam0)
        y = EARTH_RADIUS_M * k * (
            math.cos(phi0) * math.sin(phi) - math.sin(phi0) * math.cos(phi) * math.cos(lam - lam0)
        )
        return x, y

    def unproject(self, x: float, y: float) -> tuple[float, float]:
        """Planar meters -> WGS84 degrees."""
        rho = math.hypot(x, y)
        if rho < 1e-12:
            return self.origin_lon, self.origin_lat
        c = rho / EARTH_RADIUS_M
        phi0 = math.radians(self.origin_lat)
        lam0 = math.radians(self.origin_lon)
        sin_c, cos_c = math.sin(c), math.cos(c)
        phi = math.asin(cos_c * math.sin(phi0) + (y * sin_c * math.cos(phi0)) / rho)
        lam = lam0 + math.atan2(
            x * sin_c, rho * math.cos(phi0) * cos_c - y * math.sin(phi0) * sin_c
        )
        return math.degrees(lam), math.degrees(phi)

    def project_array(self, lonlat: "np.ndarray") -> "np.ndarray":
        """Vectorized project for an (N, 2) array of lon/lat degrees."""
        import numpy as np

        lon = np.radians(lonlat[:, 0])
        lat = np.radians(lonlat[:, 1])
        lam0, phi0 = math.radians(self.origin_lon), math.radians(self.origin_lat)
        cos_c = np.sin(phi0) * np.sin(lat) + np.cos(phi0) * np.cos(lat) * np.cos(lon - lam0)
        cos_c = np.clip(cos_c, -1.0, 1.0)
        c = np.arccos(cos_c)
        sin_c = np.sin(c)
        k = np.where(c < 1e-12, 1.0, c / np.where(sin_c == 0.0, 1.0, sin_c))
        x = EARTH_RADIUS_M * k * np.cos(lat) * np.sin(lon - lam0)
        y = EARTH_RADIUS_M * k * (
            np.cos(phi0) * np.sin(lat) - np.sin(phi0) * np.cos(lat) * np.cos(lon - lam0)
        )
        return np.column_stack([x, y])

    def project_ring(self, ring: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
        return [self.project(lon, lat) for lon, lat in ring]

    def project_polygon(self, polygon: Polygon) -> Polygon:
        shell = self.project_ring(polygon.exterior.coords)
        holes = [self.project_ring(r.coords) for r in polygon.interiors]
        return Polygon(shell, holes)

    def unproject_ring(self, ring: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
        return [self.unproject(x, y) for x, y in ring]


def projection_for_bounds(min_lon: float, min_lat: float, max_lon: float, max_lat: float) -> LocalProjection:
    return LocalProjection((min_lon + max_lon) / 2.0, (min_lat + max_lat) / 2.0)


def polygon_centroid(poly: Polygon) -> Point:
    """Area-weighted centroid via the shoelace formula (holes subtract)."""

    def ring_terms(coords: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
        a = cx = cy = 0.0
        for (x0, y0), (x1, y1) in zip(coords[:-1], coords[1:]):
            cross = x0 * y1 - x1 * y0
            a += cross
            cx += (x0 + x1) * cross
            cy += (y0 + y1) * cross
        return a / 2.0, cx / 6.0, cy / 6.0

    area, sx, sy = ring_terms(list(poly.exterior.coords))
    for interior in poly.interiors:
        a, cx, cy = ring_terms(list(interior.coords))
        # interior rings of a valid polygon are wound opposite to the shell,
        # so their signed terms subtract the hole automatically
        area += a
        sx += cx
        sy += cy
    if abs(area) < 1e-12:
        raise GeometryError("degenerate polygon: zero area")
    return Point(sx / area, sy / area)


def intersection_area(a: Polygon, b: Polygon) -> float:
    """Area of a ∩ b in m²; 0 when disjoint."""
    if not (a.is_valid and b.is_valid):
        raise GeometryError("invalid polygon passed to intersection_area")
    if not a.intersects(b):
        return 0.0
    return a.intersection(b).area


def contains(poly: Polygon | MultiPolygon, point: Point) -> bool:
    """Boundary-inclusive point-in-polygon."""
    if not poly.is_valid:
        raise GeometryError("invalid polygon passed to contains")
    return poly.covers(point)


def buffer_union(
    segments: Sequence[LineString | Point | Sequence[tuple[float, float]]],
    radius: float,
    quad_segs: int = 8,
) -> Polygon | MultiPolygon:
    """Union of round-capped buffers around segments (and bare points)."""
    if radius <= 0:
        raise GeometryError("buffer radius must be positive")
    geoms = []
    for seg in segments:
        if isinstance(seg, BaseGeometry):
            geom = seg
        else:
            coords = list(seg)
            geom = Point(coords[0]) if len(coords) == 1 else LineString(coords)
        if isinstance(geom, LineString) and geom.length == 0.0:
            geom = Point(geom.coords[0])
        geoms.append(geom.buffer(radius, quad_segs=quad_segs))
    if not geoms:
        raise GeometryError("buffer_union of empty segment set")
    return unary_union(geoms)
