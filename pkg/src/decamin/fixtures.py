"""Deterministic synthetic cities for tests, demos, and benchmarks.

Coordinates are generated around a fixed WGS84 center on a street grid.
The same seed always yields byte-identical input files.
"""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

from .geometry import EARTH_RADIUS_M
from .taxonomy import default_taxonomy

CENTER_LON, CENTER_LAT = 11.2558, 43.7696
_M_PER_DEG_LAT = EARTH_RADIUS_M * math.pi / 180.0


def _offset(lon: float, lat: float, dx_m: float, dy_m: float) -> tuple[float, float]:
    m_per_deg_lon = _M_PER_DEG_LAT * math.cos(math.radians(lat))
    return round(lon + dx_m / m_per_deg_lon, 10), round(lat + dy_m / _M_PER_DEG_LAT, 10)


def _square(lon: float, lat: float, side_m: float) -> list[list[float]]:
    half = side_m / 2.0
    ring = [(-half, -half), (half, -half), (half, half), (-half, half), (-half, -half)]
    return [list(_offset(lon, lat, dx, dy)) for dx, dy in ring]


def _fc(features: list[dict]) -> dict:
    return {"type": "FeatureCollection", "features": features}


def _write(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def _grid_network(nx: int, ny: int, spacing_m: float) -> dict:
    """Rectangular street grid centered on the city center."""
    features = []
    x0, y0 = -(nx - 1) * spacing_m / 2.0, -(ny - 1) * spacing_m / 2.0

    def node(i: int, j: int) -> tuple[float, float]:
        return _offset(CENTER_LON, CENTER_LAT, x0 + i * spacing_m, y0 + j * spacing_m)

    for j in range(ny):
        for i in range(nx):
            if i + 1 < nx:
                features.append(
                    {
                        "type": "Feature",
                        "geometry": {
                            "type": "LineString",
                            "coordinates": [list(node(i, j)), list(node(i + 1, j))],
                        },
                        "properties": {"u": f"n{i}_{j}", "v": f"n{i+1}_{j}", "highway": "residential"},
                    }
                )
            if j + 1 < ny:
                features.append(
                    {
                        "type": "Feature",
                        "geometry": {
                            "type": "LineString",
                            "coordinates": [list(node(i, j)), list(node(i, j + 1))],
                        },
                        "properties": {"u": f"n{i}_{j}", "v": f"n{i}_{j+1}", "highway": "residential"},
                    }
                )
    return _fc(features)


def _poi_types() -> list[str]:
    tax = default_taxonomy()
    return [t for t in tax.type_names if t != tax.green_type]


_RUN_TOML = """\
[inputs]
buildings = "buildings.geojson"
pois = "pois.geojson"
greens = "greens.geojson"
network = "network.geojson"
industrial_zones = "zones.geojson"

[params]
budget_s = 600.0
speed_kmh = 5.0
buffer_m = 30.0
snap_limit_m = 200.0
green_threshold_m2 = 80000.0
min_area_m2 = 28.0
teleport = 0.15
seed = {seed}
trials = {trials}
assignment = "literal"
population_policy = "uniform"

[run]
provider = "internal"
output = "out"
workers = {workers}
"""


def write_fixture_city(directory, seed: int = 7, trials: int = 6, workers: int = 1) -> Path:
    """The bundled small city: 50 buildings, 30 POIs, 2 greens, 7x7 grid.

    Three buildings are designed to be filtered (hospital tag, under-size,
    industrial zone) and one survives the filter but sits too far off the
    network, so every accounting path is exercised. Returns the run-config
    path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    spacing = 150.0
    nx = ny = 7
    x0 = -(nx - 1) * spacing / 2.0

    _write(directory / "network.geojson", _grid_network(nx, ny, spacing))

    # buildings: 46 plain + hospital + under-size + industrial + far off-grid
    features = []
    n_plain = 46
    for k in range(n_plain):
        i, j = rng.randrange(nx), rng.randrange(ny)
        dx = x0 + i * spacing + rng.uniform(-40.0, 40.0)
        dy = x0 + j * spacing + rng.uniform(-40.0, 40.0)
        lon, lat = _offset(CENTER_LON, CENTER_LAT, dx, dy)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [_square(lon, lat, rng.uniform(9.0, 14.0))]},
                "properties": {"id": f"b{k:03d}", "building": "yes"},
            }
        )
    extras = [
        ("b900", 12.0, 0.0, 60.0, {"building": "hospital"}),
        ("b901", 4.4, 80.0, 0.0, {"building": "yes"}),  # ~19 m² < 28 m²
        ("b902", 12.0, 2000.0, 2000.0, {"building": "yes"}),  # inside industrial zone
        ("b903", 12.0, 0.0, -1250.0, {"building": "yes"}),  # 800 m south of the grid
    ]
    for bid, side, dx, dy, props in extras:
        lon, lat = _offset(CENTER_LON, CENTER_LAT, dx, dy)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [_square(lon, lat, side)]},
                "properties": {"id": bid, **props},
            }
        )
    _write(directory / "buildings.geojson", _fc(features))

    zone_lon, zone_lat = _offset(CENTER_LON, CENTER_LAT, 2000.0, 2000.0)
    _write(
        directory / "zones.geojson",
        _fc(
            [
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [_square(zone_lon, zone_lat, 600.0)]},
                    "properties": {"id": "industrial-1"},
                }
            ]
        ),
    )

    types = _poi_types()
    pois = []
    for k in range(30):
        i, j = rng.randrange(nx), rng.randrange(ny)
        dx = x0 + i * spacing + rng.uniform(-50.0, 50.0)
        dy = x0 + j * spacing + rng.uniform(-50.0, 50.0)
        lon, lat = _offset(CENTER_LON, CENTER_LAT, dx, dy)
        pois.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": {"id": f"p{k:03d}", "type": types[k % len(types)]},
            }
        )
    _write(directory / "pois.geojson", _fc(pois))

    g1_lon, g1_lat = _offset(CENTER_LON, CENTER_LAT, -200.0, 150.0)
    g2_lon, g2_lat = _offset(CENTER_LON, CENTER_LAT, 250.0, -250.0)
    _write(
        directory / "greens.geojson",
        _fc(
            [
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [_square(g1_lon, g1_lat, 245.0)]},
                    "properties": {"id": "green-1", "name": "big park"},  # ~6 ha
                },
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [_square(g2_lon, g2_lat, 122.0)]},
                    "properties": {"id": "green-2", "name": "small park"},  # ~1.5 ha
                },
            ]
        ),
    )

    config = directory / "run.toml"
    config.write_text(_RUN_TOML.format(seed=0, trials=trials, workers=workers))
    return config


def write_synthetic_city(
    directory,
    n_buildings: int = 10_000,
    n_pois: int = 2_000,
    grid_nx: int = 160,
    grid_ny: int = 160,
    spacing_m: float = 100.0,
    seed: int = 11,
    trials: int = 5,
    workers: int = 8,
) -> Path:
    """Large benchmark city; the 160x160 grid yields 50,880 edges."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    x0 = -(grid_nx - 1) * spacing_m / 2.0
    y0 = -(grid_ny - 1) * spacing_m / 2.0

    _write(directory / "network.geojson", _grid_network(grid_nx, grid_ny, spacing_m))

    features = []
    for k in range(n_buildings):
        dx = x0 + rng.randrange(grid_nx) * spacing_m + rng.uniform(-35.0, 35.0)
        dy = y0 + rng.randrange(grid_ny) * spacing_m + rng.uniform(-35.0, 35.0)
        lon, lat = _offset(CENTER_LON, CENTER_LAT, dx, dy)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [_square(lon, lat, 12.0)]},
                "properties": {"id": f"b{k:05d}", "building": "yes"},
            }
        )
    _write(directory / "buildings.geojson", _fc(features))

    types = _poi_types()
    pois = []
    for k in range(n_pois):
        dx = x0 + rng.randrange(grid_nx) * spacing_m + rng.uniform(-40.0, 40.0)
        dy = y0 + rng.randrange(grid_ny) * spacing_m + rng.uniform(-40.0, 40.0)
        lon, lat = _offset(CENTER_LON, CENTER_LAT, dx, dy)
        pois.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": {"id": f"p{k:05d}", "type": types[k % len(types)]},
            }
        )
    _write(directory / "pois.geojson", _fc(pois))

    greens = []
    for k in range(6):
        dx = x0 + rng.randrange(grid_nx) * spacing_m
        dy = y0 + rng.randrange(grid_ny) * spacing_m
        lon, lat = _offset(CENTER_LON, CENTER_LAT, dx, dy)
        greens.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [_square(lon, lat, 260.0)]},
                "properties": {"id": f"green-{k}", "name": f"park {k}"},
            }
        )
    _write(directory / "greens.geojson", _fc(greens))

    config = directory / "run.toml"
    base = _RUN_TOML.format(seed=0, trials=trials, workers=workers)
    config.write_text(base.replace('industrial_zones = "zones.geojson"\n', ""))
    return config
