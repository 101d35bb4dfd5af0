"""Shared fixture helpers: tiny WGS84 constructions around Florence."""

import json
import math

from decamin.geometry import EARTH_RADIUS_M

CENTER = (11.2558, 43.7696)
M_PER_DEG_LAT = EARTH_RADIUS_M * math.pi / 180.0


def m_per_deg_lon(lat: float) -> float:
    return M_PER_DEG_LAT * math.cos(math.radians(lat))


def offset_deg(lon: float, lat: float, dx_m: float, dy_m: float) -> tuple[float, float]:
    """Move a WGS84 point by planar meters (small-offset approximation)."""
    return lon + dx_m / m_per_deg_lon(lat), lat + dy_m / M_PER_DEG_LAT


def wgs_square(lon: float, lat: float, side_m: float) -> list[tuple[float, float]]:
    """Closed ring of a square of given side length centered on (lon, lat)."""
    half = side_m / 2.0
    corners = [(-half, -half), (half, -half), (half, half), (-half, half), (-half, -half)]
    return [offset_deg(lon, lat, dx, dy) for dx, dy in corners]


def feature_collection(features: list[dict]) -> dict:
    return {"type": "FeatureCollection", "features": features}


def polygon_feature(ring, **properties) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [[list(c) for c in ring]]},
        "properties": properties,
    }


def point_feature(lon: float, lat: float, **properties) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [lon, lat]},
        "properties": properties,
    }


def line_feature(coords, **properties) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": [list(c) for c in coords]},
        "properties": properties,
    }


def write_geojson(path, features: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(feature_collection(features), fh)


def fig5_city():
    """Two-building fictional city: two playgrounds, a cinema, a kindergarten.

    Blue building (P=2) reaches {s1, s2, s3}; red building (P=3) reaches
    {s2, s3, s4}.
    """
    from decamin.model import AccessSet

    service_types = {
        "s1": "playground",
        "s2": "playground",
        "s3": "cinema",
        "s4": "kindergarten",
    }
    access_sets = [
        AccessSet(
            building_id="blue",
            services_in_iso=frozenset({"s1", "s2", "s3"}),
            per_type_counts={"playground": 2, "cinema": 1},
        ),
        AccessSet(
            building_id="red",
            services_in_iso=frozenset({"s2", "s3", "s4"}),
            per_type_counts={"playground": 1, "cinema": 1, "kindergarten": 1},
        ),
    ]
    populations = {"blue": 2.0, "red": 3.0}
    return service_types, access_sets, populations


def brute_force_service_matrix(access_sets, populations, service_types):
    """Independent Eq.-oracle: triple loop over buildings x ordered pairs."""
    import numpy as np

    ids = sorted(service_types)
    idx = {s: i for i, s in enumerate(ids)}
    W = np.zeros((len(ids), len(ids)))
    for a in sorted(access_sets, key=lambda s: s.building_id):
        P = populations[a.building_id]
        for si in sorted(a.services_in_iso):
            for sj in sorted(a.services_in_iso):
                if si == sj:
                    continue
                if service_types[si] == service_types[sj]:
                    continue
                n_t = sum(
                    1 for s in a.services_in_iso if service_types[s] == service_types[sj]
                )
                W[idx[si], idx[sj]] += P / n_t
    return ids, W
