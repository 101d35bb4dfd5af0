"""Functional redundancy of access and exclusive-provider populations.

R sums, over the accessible POI types, each type's index weight divided by
the building's index and by the number of reachable providers of that type:
R close to 1 means single closures hit the index hard; low R means many
substitutes. Green areas are excluded from the sum (they are not POIs) but
keep their place in the weight denominators and in the index.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import AccessSet, BuildingScores
from .taxonomy import ServiceTaxonomy


@dataclass(frozen=True)
class TypeContribution:
    weight: float  # the type's index weight
    providers: int  # reachable services of the type
    contribution: float  # weight / (index * providers)


@dataclass
class RedundancyResult:
    building_id: str
    R: float | None  # None when the index is 0 (undefined, never coerced to a number)
    detail: dict[str, TypeContribution]


@dataclass(frozen=True)
class ExclusiveServiceStat:
    service_id: str
    exclusive_population: float


def redundancy_index(
    a: AccessSet, scores: BuildingScores, taxonomy: ServiceTaxonomy
) -> RedundancyResult:
    """R for one building; undefined (None) when its index is zero."""
    index = scores.index
    if index <= 0.0:
        return RedundancyResult(building_id=a.building_id, R=None, detail={})
    detail: dict[str, TypeContribution] = {}
    total = 0.0
    for cat in taxonomy.categories:
        if cat.is_green:
            continue
        for sub in cat.subcategories:
            for t in sub.types:
                providers = a.count(t)
                if providers == 0:
                    continue
                weight = taxonomy.type_weight(t)
                contribution = weight / (index * providers)
                detail[t] = TypeContribution(
                    weight=weight, providers=providers, contribution=contribution
                )
                total += contribution
    return RedundancyResult(building_id=a.building_id, R=total, detail=detail)


def exclusive_populations(
    access_sets: list[AccessSet],
    populations: dict[str, float],
    service_types: dict[str, str],
) -> list[ExclusiveServiceStat]:
    """Population for which each service is the sole reachable provider of its type."""
    exclusive = {s: 0.0 for s in service_types}
    for a in access_sets:
        solo_types = {t for t, c in a.per_type_counts.items() if c == 1}
        if not solo_types:
            continue
        P = populations[a.building_id]
        for s in a.services_in_iso:
            if service_types[s] in solo_types:
                exclusive[s] += P
    return [
        ExclusiveServiceStat(service_id=s, exclusive_population=exclusive[s])
        for s in sorted(exclusive)
    ]
