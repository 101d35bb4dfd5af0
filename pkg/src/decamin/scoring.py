"""Per-building access scores: POI overlap, category scores, 10-minute index.

A non-green category scores the share of its accessible types, averaged over
subcategories; the green category scores the capped ratio of green overlap to
the 8-hectare threshold; the index is the plain mean of the category scores.
"""

from __future__ import annotations

import numpy as np
from shapely.geometry import Point, Polygon
from shapely.strtree import STRtree

from .errors import DecaminError, TaxonomyError
from .geometry import LocalProjection, intersection_area
from .model import AccessSet, BuildingScores, GreenArea, ScoreFlags, ServicePoint
from .taxonomy import Category, ServiceTaxonomy

GREEN_THRESHOLD_M2 = 80_000.0  # 8 ha


class PoiIndex:
    """Spatial index over projected service points."""

    def __init__(self, pois: list[ServicePoint], projection: LocalProjection):
        self.pois = sorted(pois, key=lambda p: p.id)
        self.points = [Point(*projection.project(p.lon, p.lat)) for p in self.pois]
        self._tree = STRtree(self.points) if self.points else None

    def covered_by(self, polygon: Polygon) -> list[ServicePoint]:
        """POIs inside the polygon, boundary inclusive."""
        if self._tree is None:
            return []
        idx = self._tree.query(polygon, predicate="covers")
        return [self.pois[i] for i in sorted(idx)]


class GreenIndex:
    """Spatial index over projected green-area polygons."""

    def __init__(self, greens: list[GreenArea]):
        self.greens = sorted(greens, key=lambda g: g.id)
        self._tree = STRtree([g.polygon for g in self.greens]) if greens else None

    def overlap_m2(self, polygon: Polygon) -> float:
        if self._tree is None:
            return 0.0
        idx = self._tree.query(polygon, predicate="intersects")
        return float(
            sum(intersection_area(polygon, self.greens[i].polygon) for i in sorted(idx))
        )


def overlay(iso_polygon: Polygon, building_id: str, pois: PoiIndex, greens: GreenIndex) -> AccessSet:
    """Services and green overlap captured by one (non-excluded) isochrone."""
    inside = pois.covered_by(iso_polygon)
    counts: dict[str, int] = {}
    for p in inside:
        counts[p.type_name] = counts.get(p.type_name, 0) + 1
    return AccessSet(
        building_id=building_id,
        services_in_iso=frozenset(p.id for p in inside),
        per_type_counts=counts,
        green_overlap_m2=greens.overlap_m2(iso_polygon),
    )


def type_access(a: AccessSet, type_name: str, taxonomy: ServiceTaxonomy) -> int:
    """1 iff at least one POI of the type is in reach. Green handled separately."""
    if not taxonomy.has_type(type_name):
        raise TaxonomyError(f"unknown service type {type_name!r}")
    if type_name == taxonomy.green_type:
        raise DecaminError("green accessibility is area-based; use green_score")
    return 1 if a.count(type_name) >= 1 else 0


def green_score(a: AccessSet, threshold_m2: float = GREEN_THRESHOLD_M2) -> float:
    if threshold_m2 <= 0:
        raise DecaminError("green threshold must be positive")
    return min(1.0, a.green_overlap_m2 / threshold_m2)


def category_score(
    a: AccessSet,
    category: Category,
    taxonomy: ServiceTaxonomy,
    green_threshold_m2: float = GREEN_THRESHOLD_M2,
) -> float:
    """Mean over the category's subcategories of their accessible-type ratios."""
    if category.is_green:
        return green_score(a, green_threshold_m2)
    sub_scores = [
        sum(type_access(a, t, taxonomy) for t in sub.types) / len(sub.types)
        for sub in category.subcategories
    ]
    return sum(sub_scores) / len(sub_scores)


def ten_minute_index(
    a: AccessSet,
    taxonomy: ServiceTaxonomy,
    green_threshold_m2: float = GREEN_THRESHOLD_M2,
) -> BuildingScores:
    """Category scores and their mean for one building."""
    scores = {
        cat.name: category_score(a, cat, taxonomy, green_threshold_m2)
        for cat in taxonomy.categories
    }
    index = sum(scores.values()) / taxonomy.n
    return BuildingScores(
        building_id=a.building_id, category_scores=scores, index=index, flags=ScoreFlags()
    )


def weighted_index(scores: BuildingScores, weights: dict[str, float]) -> float:
    """Custom-weight aggregation of the category scores; weights sum to 1."""
    if set(weights) != set(scores.category_scores):
        raise DecaminError("weights must cover exactly the taxonomy categories")
    values = np.array([weights[name] for name in scores.category_scores])
    if (values < 0).any():
        raise DecaminError("weights must be non-negative")
    if abs(values.sum() - 1.0) > 1e-9:
        raise DecaminError(f"weights must sum to 1, got {values.sum()!r}")
    return float(
        sum(w * s for w, s in zip(values, scores.category_scores.values()))
    )
