"""File ingestion: buildings, POIs, green areas, pedestrian network.

Accepts GeoJSON FeatureCollections (POIs alternatively CSV) and applies the
residential filter: tag exclusions, minimum footprint area, industrial-zone
membership. Geocoding of address-only POI records goes through a pluggable
client; an offline CSV lookup ships for tests and air-gapped runs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests
from shapely.geometry import LineString, Polygon, shape

from .errors import IngestError, RemoteError, TaxonomyError
from .geometry import LocalProjection, polygon_centroid, projection_for_bounds
from .model import Building, GreenArea, ServicePoint
from .taxonomy import ServiceTaxonomy

log = logging.getLogger(__name__)

DEFAULT_EXCLUDED_TAG_VALUES = frozenset(
    {
        "school",
        "university",
        "hospital",
        "government",
        "barracks",
        "church",
        "convent",
        "prison",
    }
)

# highway classes a pedestrian may not use
NON_WALKABLE_HIGHWAYS = frozenset({"motorway", "motorway_link", "trunk", "trunk_link"})


@dataclass(frozen=True)
class RawBuilding:
    source_id: str
    footprint: Polygon  # WGS84
    tags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PoiRecord:
    id: str
    type_name: str
    lon: float | None = None
    lat: float | None = None
    address: str | None = None
    source: str = ""

    def __post_init__(self) -> None:
        if self.lon is None and not self.address:
            raise IngestError(f"poi {self.id}: neither coordinates nor address")


@dataclass(frozen=True)
class SourceEdge:
    u: str
    v: str
    length_m: float
    geometry: tuple[tuple[float, float], ...]  # WGS84 polyline, endpoints included


@dataclass
class WalkNetworkSource:
    nodes: dict[str, tuple[float, float]]  # id -> (lon, lat)
    edges: list[SourceEdge]


@dataclass(frozen=True)
class FilterRules:
    excluded_tag_values: frozenset[str] = DEFAULT_EXCLUDED_TAG_VALUES
    tag_keys: tuple[str, ...] = ("building",)
    min_area_m2: float = 28.0
    industrial_zones: tuple[Polygon, ...] = ()  # WGS84


@dataclass(frozen=True)
class PopulationPolicy:
    """How P is assigned: 'uniform' (1 per building) or 'area' (share of a total)."""

    mode: str = "uniform"
    total: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("uniform", "area"):
            raise IngestError(f"unknown population policy {self.mode!r}")
        if self.mode == "area" and self.total <= 0:
            raise IngestError("area population policy needs a positive total")


@dataclass
class FilterResult:
    kept: list[Building]
    dropped: list[tuple[str, str]]  # (source id, reason)
    invalid: list[str]

    def counts(self) -> dict[str, int]:
        by_reason: dict[str, int] = {}
        for _, reason in self.dropped:
            by_reason[reason] = by_reason.get(reason, 0) + 1
        by_reason["kept"] = len(self.kept)
        by_reason["invalid-geometry"] = len(self.invalid)
        return by_reason


def _feature_collection(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("type") != "FeatureCollection":
        raise IngestError(f"{path}: not a GeoJSON FeatureCollection")
    return data.get("features", [])


def load_raw_buildings(path) -> list[RawBuilding]:
    raws = []
    for i, feat in enumerate(_feature_collection(path)):
        props = feat.get("properties") or {}
        source_id = str(props.get("id", i))
        geom = shape(feat["geometry"])
        if geom.geom_type == "MultiPolygon":
            geom = max(geom.geoms, key=lambda g: g.area)
        if geom.geom_type != "Polygon":
            raise IngestError(f"building {source_id}: geometry is {geom.geom_type}")
        tags = {k: v for k, v in props.items() if k != "id"}
        raws.append(RawBuilding(source_id=source_id, footprint=geom, tags=tags))
    return raws


def load_green_areas(path, projection: LocalProjection) -> list[GreenArea]:
    greens = []
    for i, feat in enumerate(_feature_collection(path)):
        props = feat.get("properties") or {}
        gid = str(props.get("id", f"green-{i}"))
        geom = shape(feat["geometry"])
        polys = geom.geoms if geom.geom_type == "MultiPolygon" else [geom]
        for k, poly in enumerate(polys):
            projected = projection.project_polygon(poly)
            if not projected.is_valid or projected.area <= 0:
                raise IngestError(f"green area {gid}: invalid polygon")
            suffix = f"-{k}" if len(list(polys)) > 1 else ""
            greens.append(GreenArea(id=gid + suffix, polygon=projected, name=str(props.get("name", ""))))
    return greens


def _excluded_tag(raw: RawBuilding, rules: FilterRules) -> bool:
    for key in rules.tag_keys:
        value = raw.tags.get(key)
        if isinstance(value, str) and value.lower() in rules.excluded_tag_values:
            return True
    return False


def _in_industrial_zone(raw: RawBuilding, rules: FilterRules) -> bool:
    if not rules.industrial_zones:
        return False
    c = raw.footprint.centroid
    return any(zone.covers(c) for zone in rules.industrial_zones)


def filter_residential(
    raws: Sequence[RawBuilding],
    rules: FilterRules,
    projection: LocalProjection,
    population: PopulationPolicy = PopulationPolicy(),
) -> FilterResult:
    """Apply the residential filter and convert survivors to Building.

    Keeps exact accounting: len(kept) + len(dropped) + len(invalid) equals
    the input count, with one reason per dropped building.
    """
    kept: list[Building] = []
    dropped: list[tuple[str, str]] = []
    invalid: list[str] = []
    for raw in raws:
        if raw.footprint.is_empty or not raw.footprint.is_valid:
            log.warning("building %s: invalid footprint, skipped", raw.source_id)
            invalid.append(raw.source_id)
            continue
        if _excluded_tag(raw, rules):
            dropped.append((raw.source_id, "excluded-tag"))
            continue
        footprint = projection.project_polygon(raw.footprint)
        if footprint.area < rules.min_area_m2:
            dropped.append((raw.source_id, "min-area"))
            continue
        if _in_industrial_zone(raw, rules):
            dropped.append((raw.source_id, "industrial-zone"))
            continue
        kept.append(
            Building(
                id=raw.source_id,
                footprint=footprint,
                centroid=polygon_centroid(footprint),
                population=1.0,
                tags=dict(raw.tags),
                footprint_wgs84=tuple(raw.footprint.exterior.coords),
            )
        )
    if population.mode == "area" and kept:
        total_area = sum(b.footprint.area for b in kept)
        kept = [
            Building(
                id=b.id,
                footprint=b.footprint,
                centroid=b.centroid,
                population=population.total * b.footprint.area / total_area,
                tags=b.tags,
                footprint_wgs84=b.footprint_wgs84,
            )
            for b in kept
        ]
    return FilterResult(kept=kept, dropped=dropped, invalid=invalid)


# --- POIs -------------------------------------------------------------------


@dataclass(frozen=True)
class GeocodeResult:
    lon: float
    lat: float
    confidence: float = 1.0


class CsvGeocoder:
    """Offline lookup-table geocoder: CSV columns address,lon,lat."""

    def __init__(self, path):
        self._table: dict[str, GeocodeResult] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                self._table[row["address"].strip().lower()] = GeocodeResult(
                    lon=float(row["lon"]), lat=float(row["lat"])
                )

    def geocode(self, address: str) -> GeocodeResult | None:
        return self._table.get(address.strip().lower())


class HttpGeocoder:
    """address -> {lon, lat, confidence} over HTTP GET with retry/backoff."""

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        timeout_s: float = 10.0,
        retries: int = 3,
        backoff_s: float = 0.25,
    ):
        self.endpoint = endpoint or os.environ.get("DECAMIN_GEOCODER_URL", "")
        if not self.endpoint:
            raise RemoteError("geocoder endpoint not configured (DECAMIN_GEOCODER_URL)")
        self.api_key = api_key or os.environ.get("DECAMIN_GEOCODER_KEY", "")
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s

    def geocode(self, address: str) -> GeocodeResult | None:
        params = {"address": address}
        if self.api_key:
            params["key"] = self.api_key
        last = None
        for attempt in range(self.retries):
            try:
                resp = requests.get(self.endpoint, params=params, timeout=self.timeout_s)
                if resp.status_code == 200:
                    body = resp.json()
                    return GeocodeResult(
                        lon=float(body["lon"]),
                        lat=float(body["lat"]),
                        confidence=float(body.get("confidence", 1.0)),
                    )
                if resp.status_code == 404:
                    return None
                last = f"HTTP {resp.status_code}"
            except (requests.RequestException, ValueError, KeyError) as exc:
                last = repr(exc)
            time.sleep(self.backoff_s * (2**attempt))
        raise RemoteError(f"geocoding {address!r} failed after {self.retries} attempts: {last}")


def _parse_poi_csv(path) -> list[PoiRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            lon = row.get("lon") or None
            lat = row.get("lat") or None
            records.append(
                PoiRecord(
                    id=str(row["id"]),
                    type_name=row["type"].strip(),
                    lon=float(lon) if lon else None,
                    lat=float(lat) if lat else None,
                    address=(row.get("address") or "").strip() or None,
                    source=str(path),
                )
            )
    return records


def _parse_poi_geojson(path) -> list[PoiRecord]:
    records = []
    for i, feat in enumerate(_feature_collection(path)):
        props = feat.get("properties") or {}
        geom = feat.get("geometry")
        lon = lat = None
        if geom:
            pt = shape(geom)
            lon, lat = pt.x, pt.y
        records.append(
            PoiRecord(
                id=str(props.get("id", i)),
                type_name=str(props["type"]).strip(),
                lon=lon,
                lat=lat,
                address=(props.get("address") or None),
                source=str(path),
            )
        )
    return records


def load_pois(
    files: Iterable,
    taxonomy: ServiceTaxonomy,
    geocoder=None,
    max_parallel: int = 4,
) -> tuple[list[ServicePoint], list[tuple[str, str]]]:
    """Read POI files; geocode address-only records; quarantine failures.

    Returns (service points, rejects) where rejects holds (record id, reason)
    for every record that could not be resolved. Unknown types are a hard
    error: silently mis-binned services would poison every downstream score.
    """
    records: list[PoiRecord] = []
    for path in files:
        p = Path(path)
        records.extend(_parse_poi_csv(p) if p.suffix.lower() == ".csv" else _parse_poi_geojson(p))

    for rec in records:
        if not taxonomy.has_type(rec.type_name):
            raise TaxonomyError(f"poi {rec.id}: unknown service type {rec.type_name!r}")

    points: list[ServicePoint] = []
    rejects: list[tuple[str, str]] = []
    to_geocode = [r for r in records if r.lon is None]

    resolved: dict[str, GeocodeResult | None | Exception] = {}
    if to_geocode:
        if geocoder is None:
            raise IngestError(
                f"{len(to_geocode)} address-only POI records but no geocoder configured"
            )

        def job(rec: PoiRecord):
            try:
                return rec.id, geocoder.geocode(rec.address)
            except RemoteError as exc:
                return rec.id, exc

        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            for rid, result in pool.map(job, to_geocode):
                resolved[rid] = result

    for rec in records:
        if rec.lon is not None:
            points.append(
                ServicePoint(id=rec.id, type_name=rec.type_name, lon=rec.lon, lat=rec.lat, source=rec.source)
            )
            continue
        result = resolved.get(rec.id)
        if isinstance(result, GeocodeResult):
            points.append(
                ServicePoint(
                    id=rec.id, type_name=rec.type_name, lon=result.lon, lat=result.lat, source=rec.source
                )
            )
        elif isinstance(result, Exception):
            rejects.append((rec.id, f"geocoder-error: {result}"))
        else:
            rejects.append((rec.id, "address-not-found"))
    if rejects:
        log.warning("%d POI records unresolved (quarantined)", len(rejects))
    return points, rejects


def write_rejects(path, rejects: Sequence[tuple[str, str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "reason"])
        writer.writerows(rejects)


# --- walk network -----------------------------------------------------------


def default_walkable(tags: dict) -> bool:
    if str(tags.get("foot", "")).lower() == "no":
        return False
    highway = tags.get("highway")
    if highway in NON_WALKABLE_HIGHWAYS:
        return False
    walkable = tags.get("walkable")
    if walkable is not None and str(walkable).lower() in ("false", "0", "no"):
        return False
    return True


def _polyline_length_m(coords: Sequence[tuple[float, float]], projection: LocalProjection) -> float:
    pts = [projection.project(lon, lat) for lon, lat in coords]
    return sum(math.hypot(x1 - x0, y1 - y0) for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]))


def load_walk_network(
    path,
    projection: LocalProjection | None = None,
    nodes_path=None,
    walkable: Callable[[dict], bool] = default_walkable,
) -> WalkNetworkSource:
    """Read a pedestrian network from GeoJSON lines or a nodes/edges CSV pair.

    Non-walkable edges are dropped; missing lengths are recomputed from the
    projected polyline geometry.
    """
    p = Path(path)
    if p.suffix.lower() == ".csv":
        if nodes_path is None:
            raise IngestError("edge CSV given without a nodes CSV")
        nodes, raw_edges = _parse_network_csv(p, nodes_path)
    else:
        nodes, raw_edges = _parse_network_geojson(p)

    if projection is None:
        if not nodes:
            raise IngestError(f"{path}: network has no nodes")
        lons = [c[0] for c in nodes.values()]
        lats = [c[1] for c in nodes.values()]
        projection = projection_for_bounds(min(lons), min(lats), max(lons), max(lats))

    edges: list[SourceEdge] = []
    for u, v, length, geometry, tags in raw_edges:
        if not walkable(tags):
            continue
        if u not in nodes or v not in nodes:
            raise IngestError(f"edge {u}-{v}: dangling node reference")
        if geometry is None:
            geometry = (nodes[u], nodes[v])
        if length is None:
            length = _polyline_length_m(geometry, projection)
        if length <= 0:
            raise IngestError(f"edge {u}-{v}: non-positive length")
        edges.append(SourceEdge(u=u, v=v, length_m=float(length), geometry=tuple(geometry)))
    if not edges:
        raise IngestError(f"{path}: no walkable edges")
    return WalkNetworkSource(nodes=nodes, edges=edges)


def _parse_network_geojson(path):
    nodes: dict[str, tuple[float, float]] = {}
    raw_edges = []
    for i, feat in enumerate(_feature_collection(path)):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") != "LineString":
            continue
        coords = [tuple(c[:2]) for c in geom["coordinates"]]
        if len(coords) < 2:
            raise IngestError(f"edge feature #{i}: degenerate line")
        u = str(props.get("u", f"n{coords[0][0]:.7f},{coords[0][1]:.7f}"))
        v = str(props.get("v", f"n{coords[-1][0]:.7f},{coords[-1][1]:.7f}"))
        nodes.setdefault(u, coords[0])
        nodes.setdefault(v, coords[-1])
        length = props.get("length")
        tags = {k: val for k, val in props.items() if k not in ("u", "v", "length")}
        raw_edges.append((u, v, float(length) if length is not None else None, coords, tags))
    return nodes, raw_edges


def _parse_network_csv(edges_path, nodes_path):
    nodes: dict[str, tuple[float, float]] = {}
    with open(nodes_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            nodes[str(row["id"])] = (float(row["lon"]), float(row["lat"]))
    raw_edges = []
    with open(edges_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            u, v = str(row["u"]), str(row["v"])
            length = row.get("length") or None
            tags = {k: val for k, val in row.items() if k not in ("u", "v", "length")}
            geometry = None
            if u in nodes and v in nodes:
                geometry = (nodes[u], nodes[v])
            raw_edges.append((u, v, float(length) if length else None, geometry, tags))
    return nodes, raw_edges
