"""File-mediated pipeline stages and final exports.

Stages (ingest, isochrones, score, communities, redundancy, export) read the
previous stage's artifact from the output directory and write their own, so
expensive steps are cached and each stage is independently re-runnable.
Every artifact is written with sorted keys and sorted rows: a fixed config
and seed yields byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import shapely
from shapely.geometry import Point, shape

from . import geometry, ingest, isochrone, redundancy, scoring, servicenet
from .errors import ConfigError, DecaminError
from .model import AccessSet, Building, GreenArea, ServicePoint
from .taxonomy import ServiceTaxonomy, default_taxonomy, load_taxonomy_file

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

STAGES = ("ingest", "isochrones", "score", "communities", "redundancy", "export")

# upstream artifact each stage requires
_REQUIRES = {
    "ingest": (),
    "isochrones": ("ingest.json",),
    "score": ("ingest.json", "isochrones.json"),
    "communities": ("ingest.json", "access.json"),
    "redundancy": ("ingest.json", "access.json", "scores.json"),
    "export": ("ingest.json", "isochrones.json", "scores.json"),
}


class MissingArtifactError(DecaminError):
    def __init__(self, path: Path):
        super().__init__(f"missing upstream artifact: {path}")
        self.path = path


@dataclass
class RunConfig:
    buildings: Path
    pois: list[Path]
    network: Path
    output: Path
    greens: Path | None = None
    network_nodes: Path | None = None
    taxonomy_path: Path | None = None
    industrial_zones: Path | None = None
    geocoder_lookup: Path | None = None

    budget_s: float = 600.0
    speed_kmh: float = 5.0
    buffer_m: float = 30.0
    snap_limit_m: float = 200.0
    green_threshold_m2: float = 80_000.0
    min_area_m2: float = 28.0
    teleport: float = 0.15
    seed: int = 0
    trials: int = 10
    assignment: str = "literal"
    population_policy: str = "uniform"
    population_total: float = 0.0

    provider: str = "internal"
    workers: int = 0
    raw_params: dict = field(default_factory=dict)

    @property
    def speed_m_s(self) -> float:
        return self.speed_kmh * 1000.0 / 3600.0

    def iso_params(self) -> isochrone.IsochroneParams:
        return isochrone.IsochroneParams(
            budget_s=self.budget_s,
            speed_m_s=self.speed_m_s,
            buffer_m=self.buffer_m,
            snap_limit_m=self.snap_limit_m,
        )

    def taxonomy(self) -> ServiceTaxonomy:
        return load_taxonomy_file(self.taxonomy_path) if self.taxonomy_path else default_taxonomy()

    def validate(self) -> list[str]:
        """Returns a list of problems; empty means the config is runnable."""
        problems = []
        for label, path in [("buildings", self.buildings), ("network", self.network)] + [
            ("pois", p) for p in self.pois
        ]:
            if not Path(path).exists():
                problems.append(f"{label} file not found: {path}")
        for label, path in [
            ("greens", self.greens),
            ("network_nodes", self.network_nodes),
            ("taxonomy", self.taxonomy_path),
            ("industrial_zones", self.industrial_zones),
            ("geocoder_lookup", self.geocoder_lookup),
        ]:
            if path is not None and not Path(path).exists():
                problems.append(f"{label} file not found: {path}")
        if self.budget_s <= 0:
            problems.append("budget_s must be positive")
        if self.speed_kmh <= 0:
            problems.append("speed_kmh must be positive")
        if self.buffer_m <= 0 or self.snap_limit_m <= 0:
            problems.append("buffer_m and snap_limit_m must be positive")
        if self.green_threshold_m2 <= 0:
            problems.append("green_threshold_m2 must be positive")
        if not (0.0 < self.teleport < 1.0):
            problems.append("teleport must be in (0, 1)")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if self.assignment not in ("literal", "pair"):
            problems.append(f"unknown assignment variant {self.assignment!r}")
        if self.population_policy not in ("uniform", "area"):
            problems.append(f"unknown population policy {self.population_policy!r}")
        if self.provider not in ("internal", "remote"):
            problems.append(f"unknown provider {self.provider!r}")
        return problems


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = path.parent
    inputs = data.get("inputs", {})
    params = data.get("params", {})
    run = data.get("run", {})

    def p(value) -> Path | None:
        return (base / value) if value else None

    pois = inputs.get("pois", [])
    if isinstance(pois, str):
        pois = [pois]
    if not inputs.get("buildings") or not pois or not inputs.get("network"):
        raise ConfigError(f"{path}: [inputs] must define buildings, pois, network")
    return RunConfig(
        buildings=p(inputs["buildings"]),
        pois=[p(x) for x in pois],
        network=p(inputs["network"]),
        greens=p(inputs.get("greens")),
        network_nodes=p(inputs.get("network_nodes")),
        taxonomy_path=p(inputs.get("taxonomy")),
        industrial_zones=p(inputs.get("industrial_zones")),
        geocoder_lookup=p(inputs.get("geocoder_lookup")),
        output=base / run.get("output", "out"),
        provider=run.get("provider", "internal"),
        workers=int(run.get("workers", 0)),
        budget_s=float(params.get("budget_s", 600.0)),
        speed_kmh=float(params.get("speed_kmh", 5.0)),
        buffer_m=float(params.get("buffer_m", 30.0)),
        snap_limit_m=float(params.get("snap_limit_m", 200.0)),
        green_threshold_m2=float(params.get("green_threshold_m2", 80_000.0)),
        min_area_m2=float(params.get("min_area_m2", 28.0)),
        teleport=float(params.get("teleport", 0.15)),
        seed=int(params.get("seed", 0)),
        trials=int(params.get("trials", 10)),
        assignment=str(params.get("assignment", "literal")),
        population_policy=str(params.get("population_policy", "uniform")),
        population_total=float(params.get("population_total", 0.0)),
        raw_params=dict(params),
    )


def _dump_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _load_json(path: Path) -> Any:
    if not path.exists():
        raise MissingArtifactError(path)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _wkb_hex(geom) -> str:
    return shapely.to_wkb(geom, hex=True)


def _from_wkb(hex_str: str):
    return shapely.from_wkb(bytes.fromhex(hex_str))


def _require(config: RunConfig, stage: str) -> None:
    for name in _REQUIRES[stage]:
        p = config.output / name
        if not p.exists():
            raise MissingArtifactError(p)


# --- stages ---------------------------------------------------------------------


def stage_ingest(config: RunConfig) -> dict:
    taxonomy = config.taxonomy()
    raws = ingest.load_raw_buildings(config.buildings)
    lons, lats = [], []
    for r in raws:
        minx, miny, maxx, maxy = r.footprint.bounds
        lons += [minx, maxx]
        lats += [miny, maxy]
    if not lons:
        raise DecaminError("no buildings in input")
    projection = geometry.projection_for_bounds(min(lons), min(lats), max(lons), max(lats))

    zones = ()
    if config.industrial_zones:
        zone_feats = ingest._feature_collection(config.industrial_zones)
        zones = tuple(shape(f["geometry"]) for f in zone_feats)
    rules = ingest.FilterRules(min_area_m2=config.min_area_m2, industrial_zones=zones)
    policy = ingest.PopulationPolicy(config.population_policy, config.population_total)
    result = ingest.filter_residential(raws, rules, projection, policy)

    geocoder = ingest.CsvGeocoder(config.geocoder_lookup) if config.geocoder_lookup else None
    pois, rejects = ingest.load_pois(config.pois, taxonomy, geocoder=geocoder)
    if rejects:
        ingest.write_rejects(config.output / "rejects.csv", rejects)

    greens = ingest.load_green_areas(config.greens, projection) if config.greens else []
    network = ingest.load_walk_network(config.network, projection, nodes_path=config.network_nodes)

    payload = {
        "projection": {"origin_lon": projection.origin_lon, "origin_lat": projection.origin_lat},
        "accounting": {
            "input_buildings": len(raws),
            "kept": len(result.kept),
            "dropped": {},
            "invalid": len(result.invalid),
            "poi_rejects": len(rejects),
        },
        "buildings": [
            {
                "id": b.id,
                "population": b.population,
                "centroid": [b.centroid.x, b.centroid.y],
                "footprint_wkb": _wkb_hex(b.footprint),
                "wgs84_ring": [[lon, lat] for lon, lat in b.footprint_wgs84],
            }
            for b in sorted(result.kept, key=lambda b: b.id)
        ],
        "pois": [
            {"id": p.id, "type": p.type_name, "lon": p.lon, "lat": p.lat}
            for p in sorted(pois, key=lambda p: p.id)
        ],
        "greens": [
            {"id": g.id, "name": g.name, "wkb": _wkb_hex(g.polygon)}
            for g in sorted(greens, key=lambda g: g.id)
        ],
        "network": {
            "nodes": {nid: [lon, lat] for nid, (lon, lat) in sorted(network.nodes.items())},
            "edges": [
                [e.u, e.v, e.length_m, [[lon, lat] for lon, lat in e.geometry]]
                for e in network.edges
            ],
        },
    }
    for _, reason in result.dropped:
        payload["accounting"]["dropped"][reason] = payload["accounting"]["dropped"].get(reason, 0) + 1
    _dump_json(config.output / "ingest.json", payload)
    return payload


def _projection_from(artifact: dict) -> geometry.LocalProjection:
    return geometry.LocalProjection(
        artifact["projection"]["origin_lon"], artifact["projection"]["origin_lat"]
    )


def _buildings_from(artifact: dict) -> list[Building]:
    out = []
    for b in artifact["buildings"]:
        footprint = _from_wkb(b["footprint_wkb"])
        out.append(
            Building(
                id=b["id"],
                footprint=footprint,
                centroid=Point(*b["centroid"]),
                population=b["population"],
                footprint_wgs84=tuple(tuple(c) for c in b["wgs84_ring"]),
            )
        )
    return out


def _network_from(artifact: dict) -> ingest.WalkNetworkSource:
    nodes = {nid: tuple(c) for nid, c in artifact["network"]["nodes"].items()}
    edges = [
        ingest.SourceEdge(u=u, v=v, length_m=length, geometry=tuple(tuple(c) for c in coords))
        for u, v, length, coords in artifact["network"]["edges"]
    ]
    return ingest.WalkNetworkSource(nodes=nodes, edges=edges)


def stage_isochrones(config: RunConfig) -> dict:
    _require(config, "isochrones")
    art = _load_json(config.output / "ingest.json")
    projection = _projection_from(art)
    buildings = _buildings_from(art)
    params = config.iso_params()

    if config.provider == "remote":
        client = isochrone.RemoteIsochroneClient(cache_dir=config.output / "iso_cache")
        isochrones = [
            isochrone.fetch_isochrone_remote(client, b, projection, params)
            for b in sorted(buildings, key=lambda b: b.id)
        ]
    else:
        graph = isochrone.build_graph(_network_from(art), projection)
        workers = config.workers if config.workers > 0 else (os.cpu_count() or 1)
        isochrones = isochrone.compute_isochrones(graph, buildings, params, workers=workers)

    payload = {
        "params": {
            "budget_s": params.budget_s,
            "speed_m_s": params.speed_m_s,
            "buffer_m": params.buffer_m,
            "snap_limit_m": params.snap_limit_m,
        },
        "isochrones": [
            {
                "building": iso.building_id,
                "excluded": iso.excluded,
                "reason": iso.reason,
                "wkb": _wkb_hex(iso.polygon) if iso.polygon is not None else None,
                "snap": (
                    {
                        "edge": iso.origin_snap.edge_idx,
                        "arc_m": iso.origin_snap.arc_m,
                        "point": list(iso.origin_snap.point),
                        "distance_m": iso.origin_snap.distance_m,
                    }
                    if iso.origin_snap
                    else None
                ),
            }
            for iso in isochrones
        ],
    }
    _dump_json(config.output / "isochrones.json", payload)
    return payload


def stage_score(config: RunConfig) -> dict:
    _require(config, "score")
    art = _load_json(config.output / "ingest.json")
    iso_art = _load_json(config.output / "isochrones.json")
    projection = _projection_from(art)
    taxonomy = config.taxonomy()

    pois = [
        ServicePoint(id=p["id"], type_name=p["type"], lon=p["lon"], lat=p["lat"])
        for p in art["pois"]
    ]
    poi_index = scoring.PoiIndex(pois, projection)
    green_index = scoring.GreenIndex(
        [GreenArea(id=g["id"], polygon=_from_wkb(g["wkb"]), name=g["name"]) for g in art["greens"]]
    )

    access_rows = []
    score_rows = []
    for iso in iso_art["isochrones"]:
        if iso["excluded"] or iso["wkb"] is None:
            continue
        polygon = _from_wkb(iso["wkb"])
        access = scoring.overlay(polygon, iso["building"], poi_index, green_index)
        scores = scoring.ten_minute_index(access, taxonomy, config.green_threshold_m2)
        access_rows.append(
            {
                "building": access.building_id,
                "services": sorted(access.services_in_iso),
                "counts": {k: access.per_type_counts[k] for k in sorted(access.per_type_counts)},
                "green_m2": access.green_overlap_m2,
            }
        )
        score_rows.append(
            {
                "building": scores.building_id,
                "scores": {k: scores.category_scores[k] for k in sorted(scores.category_scores)},
                "index": scores.index,
            }
        )
    _dump_json(config.output / "access.json", access_rows)
    _dump_json(config.output / "scores.json", score_rows)
    return {"access": access_rows, "scores": score_rows}


def _access_sets_from(rows: list[dict]) -> list[AccessSet]:
    return [
        AccessSet(
            building_id=r["building"],
            services_in_iso=frozenset(r["services"]),
            per_type_counts=dict(r["counts"]),
            green_overlap_m2=r["green_m2"],
        )
        for r in rows
    ]


def stage_communities(config: RunConfig) -> dict:
    _require(config, "communities")
    art = _load_json(config.output / "ingest.json")
    access_rows = _load_json(config.output / "access.json")
    taxonomy = config.taxonomy()
    service_types = {p["id"]: p["type"] for p in art["pois"]}
    populations = {b["id"]: b["population"] for b in art["buildings"]}
    access_sets = _access_sets_from(access_rows)

    edges_path = config.output / "edges.csv"
    partition_path = config.output / "partition.csv"

    graph = servicenet.build_service_graph(access_sets, populations, service_types)
    skipped = graph.n == 0 or not graph.W.any()
    if skipped:
        log.warning("service graph empty: community detection skipped")
        _write_csv(edges_path, ["src", "dst", "weight"], [])
        _write_csv(partition_path, ["service_id", "community"], [])
        payload = {
            "skipped": True,
            "codelength": None,
            "n_communities": 0,
            "seed": config.seed,
            "trials": config.trials,
            "teleport": config.teleport,
            "assignment_variant": config.assignment,
            "labels": {},
            "scores": {},
        }
        _dump_json(config.output / "servicenet.json", payload)
        return payload

    partition = servicenet.detect_communities(
        graph, seed=config.seed, trials=config.trials, teleport=config.teleport
    )
    assignment = servicenet.assign_buildings(
        access_sets, partition, taxonomy, service_types, variant=config.assignment
    )

    rows = []
    for i in range(graph.n):
        for j in range(graph.n):
            if graph.W[i, j] > 0:
                rows.append([graph.ids[i], graph.ids[j], repr(graph.W[i, j])])
    _write_csv(edges_path, ["src", "dst", "weight"], rows)
    _write_csv(
        partition_path,
        ["service_id", "community"],
        [[sid, str(m)] for sid, m in zip(partition.ids, partition.modules.tolist())],
    )
    payload = {
        "skipped": False,
        "codelength": partition.codelength,
        "n_communities": partition.n_communities,
        "seed": config.seed,
        "trials": config.trials,
        "teleport": config.teleport,
        "assignment_variant": config.assignment,
        "labels": {b: assignment.labels[b] for b in sorted(assignment.labels)},
        "scores": {
            b: {str(k): v for k, v in sorted(assignment.scores[b].items())}
            for b in sorted(assignment.scores)
        },
    }
    _dump_json(config.output / "servicenet.json", payload)
    return payload


def stage_redundancy(config: RunConfig) -> dict:
    _require(config, "redundancy")
    art = _load_json(config.output / "ingest.json")
    access_rows = _load_json(config.output / "access.json")
    score_rows = _load_json(config.output / "scores.json")
    taxonomy = config.taxonomy()
    service_types = {p["id"]: p["type"] for p in art["pois"]}
    populations = {b["id"]: b["population"] for b in art["buildings"]}
    access_sets = _access_sets_from(access_rows)
    score_by_building = {
        r["building"]: scoring.BuildingScores(
            building_id=r["building"], category_scores=r["scores"], index=r["index"]
        )
        for r in score_rows
    }

    building_rows = []
    for a in sorted(access_sets, key=lambda s: s.building_id):
        result = redundancy.redundancy_index(a, score_by_building[a.building_id], taxonomy)
        building_rows.append(
            {
                "building": a.building_id,
                "R": result.R,
                "defined": result.R is not None,
                "detail": {
                    t: {
                        "weight": c.weight,
                        "providers": c.providers,
                        "contribution": c.contribution,
                    }
                    for t, c in sorted(result.detail.items())
                },
            }
        )
    exclusive = redundancy.exclusive_populations(access_sets, populations, service_types)
    payload = {
        "buildings": building_rows,
        "exclusive": [
            {"service": s.service_id, "population": s.exclusive_population} for s in exclusive
        ],
    }
    _dump_json(config.output / "redundancy.json", payload)
    _write_csv(
        config.output / "redundancy.csv",
        ["building_id", "R", "defined"],
        [
            [r["building"], "" if r["R"] is None else repr(r["R"]), str(r["defined"]).lower()]
            for r in building_rows
        ],
    )
    return payload


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def stage_export(config: RunConfig) -> dict:
    _require(config, "export")
    art = _load_json(config.output / "ingest.json")
    iso_art = _load_json(config.output / "isochrones.json")
    score_rows = {r["building"]: r for r in _load_json(config.output / "scores.json")}
    try:
        net = _load_json(config.output / "servicenet.json")
    except MissingArtifactError:
        net = {"skipped": True, "codelength": None, "n_communities": 0, "labels": {}}
    try:
        red = _load_json(config.output / "redundancy.json")
    except MissingArtifactError:
        red = {"buildings": [], "exclusive": []}

    red_by_building = {r["building"]: r for r in red["buildings"]}
    exclusive_by_service = {r["service"]: r["population"] for r in red["exclusive"]}
    labels = net.get("labels", {})

    features = []
    counts = {"scored": 0, "off-network": 0, "centroid-outside": 0, "remote-failed": 0}
    contested = unassignable = 0
    buildings_by_id = {b["id"]: b for b in art["buildings"]}
    for iso in iso_art["isochrones"]:
        bid = iso["building"]
        b_art = buildings_by_id[bid]
        props: dict[str, Any] = {"id": bid, "population": b_art["population"]}
        if iso["excluded"]:
            counts[iso["reason"]] = counts.get(iso["reason"], 0) + 1
            props.update(
                {
                    "excluded": True,
                    "reason": iso["reason"],
                    "scores": None,
                    "index": None,
                    "community": None,
                    "contested": False,
                    "unassignable": False,
                    "redundancy": None,
                }
            )
        else:
            counts["scored"] += 1
            row = score_rows[bid]
            label = labels.get(bid)
            is_contested = label == servicenet.CONTESTED
            is_unassignable = label == servicenet.UNASSIGNABLE
            contested += int(is_contested)
            unassignable += int(is_unassignable)
            r_row = red_by_building.get(bid, {"R": None})
            props.update(
                {
                    "excluded": False,
                    "reason": "",
                    "scores": row["scores"],
                    "index": row["index"],
                    "community": label if isinstance(label, int) else None,
                    "contested": is_contested,
                    "unassignable": is_unassignable,
                    "redundancy": r_row["R"],
                }
            )
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[list(c) for c in b_art["wgs84_ring"]]],
                },
                "properties": props,
            }
        )
    _dump_json(
        config.output / "buildings.geojson", {"type": "FeatureCollection", "features": features}
    )

    partition_by_service: dict[str, int] = {}
    partition_path = config.output / "partition.csv"
    if partition_path.exists():
        with open(partition_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                partition_by_service[row["service_id"]] = int(row["community"])
    service_features = [
        {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [p["lon"], p["lat"]]},
            "properties": {
                "id": p["id"],
                "type": p["type"],
                "community": partition_by_service.get(p["id"]),
                "exclusive_population": exclusive_by_service.get(p["id"], 0.0),
            },
        }
        for p in art["pois"]
    ]
    _dump_json(
        config.output / "services.geojson",
        {"type": "FeatureCollection", "features": service_features},
    )

    indices = [r["index"] for r in score_rows.values()]
    r_values = [r["R"] for r in red["buildings"] if r["R"] is not None]
    quantile_points = [0.0, 0.25, 0.5, 0.75, 1.0]
    ingested = art["accounting"]["kept"]
    excluded_total = counts["off-network"] + counts["centroid-outside"]
    summary = {
        "params": dict(config.raw_params),
        "provider": config.provider,
        "accounting": {
            **art["accounting"],
            "scored": counts["scored"],
            "excluded_isochrone": excluded_total,
            "off_network": counts["off-network"],
            "centroid_outside": counts["centroid-outside"],
            "remote_failed": counts["remote-failed"],
            "contested": contested,
            "unassignable": unassignable,
            "identity_ok": counts["scored"] + excluded_total + counts["remote-failed"] == ingested,
        },
        "communities": {
            "skipped": net.get("skipped", True),
            "codelength": net.get("codelength"),
            "count": net.get("n_communities", 0),
        },
        "quantiles": {
            "index": [float(x) for x in np.quantile(indices, quantile_points)] if indices else None,
            "redundancy": (
                [float(x) for x in np.quantile(r_values, quantile_points)] if r_values else None
            ),
        },
    }
    _dump_json(config.output / "summary.json", summary)
    return summary


_STAGE_FNS = {
    "ingest": stage_ingest,
    "isochrones": stage_isochrones,
    "score": stage_score,
    "communities": stage_communities,
    "redundancy": stage_redundancy,
    "export": stage_export,
}


def run_stage(stage: str, config: RunConfig) -> dict:
    if stage not in _STAGE_FNS:
        raise ConfigError(f"unknown stage {stage!r}")
    config.output.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    result = _STAGE_FNS[stage](config)
    log.info("stage %s finished in %.2fs", stage, time.perf_counter() - started)
    return result


def run_pipeline(config: RunConfig) -> dict:
    for stage in STAGES:
        run_stage(stage, config)
    return _load_json(config.output / "summary.json")
