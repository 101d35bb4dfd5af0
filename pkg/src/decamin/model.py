"""Domain types shared by the pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field

from shapely.geometry import Point, Polygon


@dataclass(frozen=True)
class ServicePoint:
    """A georeferenced service instance (POI) of a taxonomy type."""

    id: str
    type_name: str
    lon: float
    lat: float
    source: str = ""

    def __post_init__(self) -> None:
        if not (-180.0 <= self.lon <= 180.0 and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"service {self.id}: coordinates out of range")


@dataclass(frozen=True)
class GreenArea:
    """Public green space; polygon is planar (m) after projection."""

    id: str
    polygon: Polygon
    name: str = ""


@dataclass(frozen=True)
class Building:
    """Residential unit of analysis. Footprint and centroid are planar (m)."""

    id: str
    footprint: Polygon
    centroid: Point
    population: float = 1.0
    tags: dict = field(default_factory=dict)
    # original WGS84 exterior ring, kept so exports round-trip exactly
    footprint_wgs84: tuple = ()


@dataclass
class AccessSet:
    """What one building reaches: POIs by id and type, plus green overlap."""

    building_id: str
    services_in_iso: frozenset[str]
    per_type_counts: dict[str, int]
    green_overlap_m2: float = 0.0

    def count(self, type_name: str) -> int:
        return self.per_type_counts.get(type_name, 0)


@dataclass
class ScoreFlags:
    excluded_isochrone: bool = False
    contested: bool = False
    unassignable: bool = False


@dataclass
class BuildingScores:
    """Per-building category scores, overall index, and derived labels."""

    building_id: str
    category_scores: dict[str, float]
    index: float
    community: int | None = None
    redundancy: float | None = None
    flags: ScoreFlags = field(default_factory=ScoreFlags)
