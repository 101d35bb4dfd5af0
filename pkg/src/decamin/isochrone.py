"""10-minute walking isochrones over the pedestrian graph.

The reachable set is a truncated single-source shortest-path run from the
building's snapped origin; partially reached edges are clipped at the exact
residual distance. The polygon is the round-capped buffer of the reached
subnetwork, which never claims off-network area beyond the buffer radius.
A building whose (unsnapped) centroid ends up outside its own polygon is
excluded rather than silently misplaced.

Graph storage is flat numpy (CSR adjacency, pooled polyline coordinates):
cheap to build, cheap to ship to worker processes. Before buffering,
collinear contiguous covered runs are merged; dilation distributes over
unions, so the polygon is unchanged while GEOS sees far fewer capsules.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests
import shapely
from shapely.geometry import MultiLineString, MultiPolygon, Point, Polygon, shape
from shapely.strtree import STRtree

from .errors import DecaminError, RemoteError
from .geometry import LocalProjection, buffer_union, contains
from .ingest import WalkNetworkSource
from .model import Building

log = logging.getLogger(__name__)

WALK_SPEED_M_S = 5.0 * 1000.0 / 3600.0  # 5 km/h


class OffNetworkError(DecaminError):
    """Origin does not snap to any edge within the snap limit."""


@dataclass(frozen=True)
class IsochroneParams:
    budget_s: float = 600.0
    speed_m_s: float = WALK_SPEED_M_S
    buffer_m: float = 30.0
    snap_limit_m: float = 200.0
    quad_segs: int = 8

    @property
    def budget_m(self) -> float:
        return self.budget_s * self.speed_m_s


@dataclass(frozen=True)
class Snap:
    edge_idx: int
    arc_m: float  # along edge geometry
    point: tuple[float, float]
    distance_m: float  # origin -> snapped point


@dataclass
class Reached:
    origin: tuple[float, float]
    snap: Snap
    budget_m: float
    node_distances: dict[str, float]
    segments: list[np.ndarray]

    @property
    def total_length_m(self) -> float:
        return float(
            sum(np.hypot(np.diff(s[:, 0]), np.diff(s[:, 1])).sum() for s in self.segments)
        )


@dataclass
class Isochrone:
    building_id: str
    polygon: Polygon | None
    origin_snap: Snap | None
    excluded: bool = False
    reason: str = ""


class WalkGraph:
    """Undirected pedestrian graph with a spatial index for edge snapping."""

    def __init__(self, node_ids, node_xy, edge_u, edge_v, edge_length, coords, offsets, cum):
        self.node_ids: list[str] = node_ids
        self.node_xy: np.ndarray = node_xy
        self.edge_u: np.ndarray = edge_u
        self.edge_v: np.ndarray = edge_v
        self.edge_length: np.ndarray = edge_length
        self.coords: np.ndarray = coords  # pooled polyline vertices (M, 2)
        self.offsets: np.ndarray = offsets  # edge e -> coords[offsets[e]:offsets[e+1]]
        self.cum: np.ndarray = cum  # arc length within each edge, 0 at its first vertex
        self._build_adjacency()
        self._tree: STRtree | None = None
        self.component = self._components()

    def _build_adjacency(self) -> None:
        n, e = len(self.node_ids), len(self.edge_u)
        ends = np.concatenate([self.edge_u, self.edge_v])
        others = np.concatenate([self.edge_v, self.edge_u])
        eidx = np.concatenate([np.arange(e), np.arange(e)])
        order = np.lexsort((eidx, others, ends))
        self.adj_node = others[order]
        self.adj_edge = eidx[order]
        self.adj_indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.adj_indptr, ends + 1, 1)
        np.cumsum(self.adj_indptr, out=self.adj_indptr)

    def neighbors(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.adj_indptr[node], self.adj_indptr[node + 1]
        return self.adj_node[lo:hi], self.adj_edge[lo:hi]

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_u)

    @property
    def n_components(self) -> int:
        return int(self.component.max()) + 1 if len(self.component) else 0

    def edge_geom_length(self, e: int) -> float:
        return float(self.cum[self.offsets[e + 1] - 1])

    def _components(self) -> np.ndarray:
        n = self.n_nodes
        comp = np.full(n, -1, dtype=np.int64)
        cid = 0
        for start in range(n):
            if comp[start] >= 0:
                continue
            stack = [start]
            comp[start] = cid
            while stack:
                cur = stack.pop()
                nbrs, _ = self.neighbors(cur)
                for other in nbrs:
                    if comp[other] < 0:
                        comp[other] = cid
                        stack.append(int(other))
            cid += 1
        return comp

    def _ensure_tree(self) -> None:
        if self._tree is None:
            m = len(self.coords)
            vertex_edge = np.repeat(np.arange(self.n_edges), np.diff(self.offsets))
            lines = shapely.linestrings(self.coords, indices=vertex_edge)
            self._lines = lines
            self._tree = STRtree(lines)
        assert self._tree is not None

    def snap(self, x: float, y: float, limit_m: float) -> Snap | None:
        self._ensure_tree()
        pt = Point(x, y)
        idx = int(self._tree.nearest(pt))
        line = self._lines[idx]
        dist = line.distance(pt)
        if dist > limit_m:
            return None
        arc = line.project(pt)
        snapped = line.interpolate(arc)
        return Snap(edge_idx=idx, arc_m=float(arc), point=(snapped.x, snapped.y), distance_m=float(dist))

    # the spatial index is rebuilt lazily after unpickling in worker processes
    def __getstate__(self):
        state = self.__dict__.copy()
        state["_tree"] = None
        state.pop("_lines", None)
        return state


def build_graph(src: WalkNetworkSource, projection: LocalProjection) -> WalkGraph:
    """Project a network source into a planar WalkGraph with spatial index."""
    if not src.edges:
        raise DecaminError("empty walk network")
    node_ids = sorted(src.nodes)
    id2idx = {nid: i for i, nid in enumerate(node_ids)}
    lonlat = np.array([src.nodes[nid] for nid in node_ids], dtype=float)
    node_xy = projection.project_array(lonlat) if len(lonlat) else np.zeros((0, 2))

    counts = np.array([len(e.geometry) for e in src.edges], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    pool = np.concatenate([np.asarray(e.geometry, dtype=float) for e in src.edges])
    coords = projection.project_array(pool)

    steps = np.hypot(*(np.diff(coords, axis=0).T))
    steps = np.concatenate([[0.0], steps])
    steps[offsets[:-1]] = 0.0  # no step across edge boundaries
    cum = np.cumsum(steps)
    cum -= np.repeat(cum[offsets[:-1]], counts)

    edge_u = np.array([id2idx[e.u] for e in src.edges], dtype=np.int64)
    edge_v = np.array([id2idx[e.v] for e in src.edges], dtype=np.int64)
    edge_length = np.array([e.length_m for e in src.edges], dtype=float)

    # degenerate stored geometry: substitute the straight node-to-node segment
    geom_len = cum[offsets[1:] - 1]
    for e in np.nonzero(geom_len <= 0)[0]:
        lo = offsets[e]
        coords[lo] = node_xy[edge_u[e]]
        coords[offsets[e + 1] - 1] = node_xy[edge_v[e]]
        cum[offsets[e + 1] - 1] = max(edge_length[e], 1e-9)

    return WalkGraph(
        node_ids=node_ids,
        node_xy=node_xy,
        edge_u=edge_u,
        edge_v=edge_v,
        edge_length=edge_length,
        coords=coords,
        offsets=offsets,
        cum=cum,
    )


def _subline(g: WalkGraph, e: int, s_graph: float, t_graph: float) -> np.ndarray | None:
    """Polyline portion of edge e between graph-length positions s..t."""
    if t_graph - s_graph <= 1e-12:
        return None
    lo, hi = int(g.offsets[e]), int(g.offsets[e + 1])
    geom = g.coords[lo:hi]
    cum = g.cum[lo:hi]
    length = g.edge_length[e]
    geom_length = cum[-1]
    if s_graph <= 1e-12 and t_graph >= length - 1e-12:
        return geom  # fully covered: pooled slice, no copy
    scale = geom_length / length
    s, t = s_graph * scale, t_graph * scale
    i = int(np.searchsorted(cum, s, side="right"))
    j = int(np.searchsorted(cum, t, side="left"))

    def interp(pos: float) -> np.ndarray:
        k = min(max(int(np.searchsorted(cum, pos, side="right")) - 1, 0), len(cum) - 2)
        seg_len = cum[k + 1] - cum[k]
        f = 0.0 if seg_len <= 0 else (pos - cum[k]) / seg_len
        return geom[k] + f * (geom[k + 1] - geom[k])

    pts = [interp(s)] + [geom[k] for k in range(i, j)] + [interp(t)]
    arr = np.array(pts, dtype=float)
    keep = np.concatenate([[True], np.hypot(*(np.diff(arr, axis=0).T)) > 1e-12])
    arr = arr[keep]
    return arr if len(arr) >= 2 else None


def reachable_set(
    g: WalkGraph,
    origin_xy: tuple[float, float],
    budget_s: float = 600.0,
    speed_m_s: float = WALK_SPEED_M_S,
    snap_limit_m: float = 200.0,
) -> Reached:
    """Truncated Dijkstra from the snapped origin.

    Returns reached nodes with exact network distances <= D and the reached
    (sub)segments, partial edges clipped at the residual distance.
    Raises OffNetworkError when the origin cannot be snapped.
    """
    if budget_s <= 0:
        raise DecaminError("budget must be positive")
    D = budget_s * speed_m_s
    snap = g.snap(origin_xy[0], origin_xy[1], snap_limit_m)
    if snap is None:
        raise OffNetworkError(f"origin {origin_xy} farther than {snap_limit_m} m from network")

    e_star = snap.edge_idx
    geom_length = g.edge_geom_length(e_star)
    length_star = float(g.edge_length[e_star])
    frac = 0.0 if geom_length == 0 else min(1.0, max(0.0, snap.arc_m / geom_length))
    # snapping onto a node: keep the zero exact (project() rounds at ends)
    if snap.arc_m <= 1e-9:
        frac = 0.0
    elif snap.arc_m >= geom_length - 1e-9:
        frac = 1.0
    d_to_u = frac * length_star
    d_to_v = 0.0 if frac == 1.0 else length_star - d_to_u
    u_star, v_star = int(g.edge_u[e_star]), int(g.edge_v[e_star])

    dist: dict[int, float] = {}
    heap: list[tuple[float, int]] = []
    if d_to_u <= D:
        heapq.heappush(heap, (d_to_u, u_star))
    if d_to_v <= D:
        heapq.heappush(heap, (d_to_v, v_star))
    lengths = g.edge_length
    while heap:
        d, node = heapq.heappop(heap)
        if node in dist:
            continue
        dist[node] = d
        nbrs, eidx = g.neighbors(node)
        for other, e in zip(nbrs.tolist(), eidx.tolist()):
            if other in dist:
                continue
            nd = d + lengths[e]
            if nd <= D:
                heapq.heappush(heap, (nd, other))

    segments: list[np.ndarray] = []
    o_graph = frac * length_star

    def covered(e: int, du: float, dv: float, lo: float, hi: float) -> None:
        """Append covered portions of edge positions lo..hi given end distances."""
        span = hi - lo
        if span <= 0:
            return
        a = min(span, D - du) if du <= D else 0.0
        b = min(span, D - dv) if dv <= D else 0.0
        if a <= 0 and b <= 0:
            return
        if a + b >= span - 1e-12:
            piece = _subline(g, e, lo, hi)
            if piece is not None:
                segments.append(piece)
            return
        if a > 0:
            piece = _subline(g, e, lo, lo + a)
            if piece is not None:
                segments.append(piece)
        if b > 0:
            piece = _subline(g, e, hi - b, hi)
            if piece is not None:
                segments.append(piece)

    du_star = dist.get(u_star, math.inf)
    dv_star = dist.get(v_star, math.inf)
    covered(e_star, du_star, 0.0, 0.0, o_graph)  # u-side stub, origin end at distance 0
    covered(e_star, 0.0, dv_star, o_graph, length_star)  # v-side stub

    seen = {e_star}
    for node in sorted(dist):
        _, eidx = g.neighbors(node)
        for e in eidx.tolist():
            if e in seen:
                continue
            seen.add(e)
            covered(
                e,
                dist.get(int(g.edge_u[e]), math.inf),
                dist.get(int(g.edge_v[e]), math.inf),
                0.0,
                float(lengths[e]),
            )

    node_distances = {g.node_ids[i]: d for i, d in sorted(dist.items())}
    return Reached(
        origin=snap.point, snap=snap, budget_m=D, node_distances=node_distances, segments=segments
    )


_CHAIN_COS_TOL = 1.0 - 5e-7  # join only when the turn is under ~0.001 rad


def _merge_chains(segments: list[np.ndarray]) -> list[np.ndarray]:
    """Concatenate reached pieces into maximal near-straight polylines.

    A polyline's buffer equals the union of its segments' capsules, so
    grouping pieces (all original vertices kept) leaves the polygon
    unchanged while GEOS unions far fewer parts. Joins are restricted to
    near-collinear continuations so discretized join arcs stay negligible.
    """
    n = len(segments)
    if n <= 2:
        return segments

    def key(pt) -> tuple[float, float]:
        return (round(float(pt[0]), 6), round(float(pt[1]), 6))

    def out_dir_of(seg: np.ndarray, at_end: bool) -> np.ndarray | None:
        """Unit direction pointing out of the polyline at one of its ends."""
        d = seg[-1] - seg[-2] if at_end else seg[0] - seg[1]
        norm = math.hypot(d[0], d[1])
        return d / norm if norm > 0 else None

    def out_dir(i: int, end: int) -> np.ndarray:
        seg = segments[i]
        d = seg[-1] - seg[-2] if end == 1 else seg[0] - seg[1]
        norm = math.hypot(d[0], d[1])
        return d / norm if norm > 0 else d

    at_point: dict[tuple[float, float], list[tuple[int, int]]] = {}
    for i, seg in enumerate(segments):
        at_point.setdefault(key(seg[0]), []).append((i, 0))
        at_point.setdefault(key(seg[-1]), []).append((i, 1))

    def leave_dir(j: int, j_end: int) -> np.ndarray:
        """Unit direction walking away from the junction along piece j."""
        return -out_dir(j, j_end)

    used = [False] * n
    chains: list[np.ndarray] = []
    for start in range(n):
        if used[start]:
            continue
        used[start] = True
        parts: list[np.ndarray] = [segments[start]]
        ends = {
            True: (segments[start][-1], out_dir_of(segments[start], at_end=True)),
            False: (segments[start][0], out_dir_of(segments[start], at_end=False)),
        }
        for tail in (True, False):
            while True:
                pt, v = ends[tail]
                if v is None:
                    break
                best, best_cos = None, _CHAIN_COS_TOL
                for j, j_end in at_point.get(key(pt), ()):
                    if used[j]:
                        continue
                    cand = leave_dir(j, j_end)
                    cos = float(v[0] * cand[0] + v[1] * cand[1])
                    if cos > best_cos:
                        best, best_cos = (j, j_end), cos
                if best is None:
                    break
                j, j_end = best
                used[j] = True
                onward = segments[j] if j_end == 0 else segments[j][::-1]  # starts at pt
                if tail:
                    parts.append(onward[1:])
                else:
                    parts.insert(0, onward[::-1][:-1])
                ends[tail] = (onward[-1], out_dir_of(onward, at_end=True))
        chains.append(np.concatenate(parts) if len(parts) > 1 else parts[0])
    return chains


def polygonize(reached: Reached, buffer_m: float = 30.0, quad_segs: int = 8) -> Polygon:
    """Round-capped buffer of the reached subnetwork (plus the origin point)."""
    runs = _merge_chains(reached.segments)
    geoms: list = [Point(reached.origin)]
    if runs:
        geoms.append(MultiLineString(runs))
    merged = buffer_union(geoms, buffer_m, quad_segs=quad_segs)
    if isinstance(merged, MultiPolygon):
        # cannot occur for a connected reached set with round caps; keep the
        # dominant part if GEOS ever splits on robustness grounds
        log.warning("polygonize produced %d parts; keeping largest", len(merged.geoms))
        merged = max(merged.geoms, key=lambda p: p.area)
    return merged


def isochrone_for_building(
    g: WalkGraph, building: Building, params: IsochroneParams = IsochroneParams()
) -> Isochrone:
    """Reachable polygon for one building, with the exclusion rules applied."""
    cx, cy = building.centroid.x, building.centroid.y
    try:
        reached = reachable_set(
            g, (cx, cy), params.budget_s, params.speed_m_s, params.snap_limit_m
        )
    except OffNetworkError:
        return Isochrone(
            building_id=building.id, polygon=None, origin_snap=None, excluded=True, reason="off-network"
        )
    polygon = polygonize(reached, params.buffer_m, params.quad_segs)
    if not contains(polygon, building.centroid):
        return Isochrone(
            building_id=building.id,
            polygon=polygon,
            origin_snap=reached.snap,
            excluded=True,
            reason="centroid-outside",
        )
    return Isochrone(building_id=building.id, polygon=polygon, origin_snap=reached.snap)


# --- parallel computation -----------------------------------------------------

_WORKER: dict = {}


def _init_worker(graph: WalkGraph, params: IsochroneParams) -> None:
    _WORKER["graph"] = graph
    _WORKER["params"] = params


def _worker_job(batch: list[tuple[str, float, float]]) -> list[Isochrone]:
    g, params = _WORKER["graph"], _WORKER["params"]
    out = []
    for bid, x, y in batch:
        b = Building(id=bid, footprint=Point(x, y).buffer(1.0), centroid=Point(x, y))
        out.append(isochrone_for_building(g, b, params))
    return out


def compute_isochrones(
    g: WalkGraph,
    buildings: list[Building],
    params: IsochroneParams = IsochroneParams(),
    workers: int = 1,
) -> list[Isochrone]:
    """Isochrones for all buildings, ordered by building id.

    Embarrassingly parallel over buildings; results are deterministic for a
    fixed input regardless of worker count.
    """
    ordered = sorted(buildings, key=lambda b: b.id)
    if workers <= 1 or len(ordered) < 32:
        return [isochrone_for_building(g, b, params) for b in ordered]
    payload = [(b.id, b.centroid.x, b.centroid.y) for b in ordered]
    n_batches = workers * 4
    batches = [payload[i::n_batches] for i in range(n_batches)]
    batches = [b for b in batches if b]
    results: list[Isochrone] = []
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(g, params)
    ) as pool:
        for part in pool.map(_worker_job, batches):
            results.extend(part)
    results.sort(key=lambda iso: iso.building_id)
    return results


# --- remote provider ----------------------------------------------------------


class RemoteIsochroneClient:
    """ORS-compatible isochrone API client with a disk cache.

    POSTs {"locations": [[lon, lat]], "range_seconds": [s], "profile": "walking"}
    and expects a GeoJSON polygon (bare geometry, Feature, or FeatureCollection).
    Responses are cached per (provider, 1e-6-degree-rounded coordinates, budget).
    """

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        cache_dir=None,
        provider: str = "remote",
        timeout_s: float = 30.0,
        retries: int = 3,
        backoff_s: float = 0.25,
    ):
        self.endpoint = endpoint or os.environ.get("DECAMIN_ISOCHRONE_URL", "")
        if not self.endpoint:
            raise RemoteError("isochrone endpoint not configured (DECAMIN_ISOCHRONE_URL)")
        self.api_key = api_key or os.environ.get("DECAMIN_ISOCHRONE_KEY", "")
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.provider = provider
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s

    def _cache_path(self, lon: float, lat: float, budget_s: float) -> Path | None:
        if not self.cache_dir:
            return None
        key = f"{self.provider}_{lon:.6f}_{lat:.6f}_{budget_s:g}"
        digest = hashlib.sha256(key.encode()).hexdigest()[:16]
        return self.cache_dir / f"{key}_{digest}.geojson"

    def fetch(self, lon: float, lat: float, budget_s: float) -> Polygon:
        """WGS84 isochrone polygon for one origin, served from cache if present."""
        cache = self._cache_path(lon, lat, budget_s)
        if cache and cache.exists():
            return shape(json.loads(cache.read_text()))
        body = {"locations": [[lon, lat]], "range_seconds": [budget_s], "profile": "walking"}
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = self.api_key
        last = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout_s
                )
                if resp.status_code == 200:
                    polygon = _parse_isochrone_response(resp.json())
                    if cache:
                        cache.write_text(json.dumps(polygon.__geo_interface__))
                    return polygon
                last = f"HTTP {resp.status_code}"
            except (requests.RequestException, ValueError, KeyError) as exc:
                last = repr(exc)
            time.sleep(self.backoff_s * (2**attempt))
        raise RemoteError(f"isochrone request for ({lon}, {lat}) failed: {last}")


def _parse_isochrone_response(data: dict) -> Polygon:
    if data.get("type") == "FeatureCollection":
        feats = data.get("features") or []
        if not feats:
            raise ValueError("empty FeatureCollection")
        geom = shape(feats[0]["geometry"])
    elif data.get("type") == "Feature":
        geom = shape(data["geometry"])
    else:
        geom = shape(data)
    if geom.geom_type == "MultiPolygon":
        geom = max(geom.geoms, key=lambda p: p.area)
    if geom.geom_type != "Polygon":
        raise ValueError(f"isochrone response is {geom.geom_type}, not Polygon")
    return geom


def fetch_isochrone_remote(
    client: RemoteIsochroneClient,
    building: Building,
    projection: LocalProjection,
    params: IsochroneParams = IsochroneParams(),
) -> Isochrone:
    """Remote polygon for a building, with the same exclusion rule applied."""
    lon, lat = projection.unproject(building.centroid.x, building.centroid.y)
    try:
        wgs_polygon = client.fetch(round(lon, 6), round(lat, 6), params.budget_s)
    except RemoteError as exc:
        log.warning("building %s: %s", building.id, exc)
        return Isochrone(
            building_id=building.id, polygon=None, origin_snap=None, excluded=True, reason="remote-failed"
        )
    polygon = projection.project_polygon(wgs_polygon)
    if not contains(polygon, building.centroid):
        return Isochrone(
            building_id=building.id, polygon=polygon, origin_snap=None, excluded=True, reason="centroid-outside"
        )
    return Isochrone(building_id=building.id, polygon=polygon, origin_snap=None)
