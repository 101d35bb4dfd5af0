"""Weighted directed service network, community detection, building assignment.

Edge weights: a building with population P whose isochrone holds services of
different types sends, for every ordered pair (origin, destination) of
distinct-type services it reaches, P divided by the number of reachable
services sharing the destination's type. Communities minimize the two-level
map equation (random-walk description length, in bits) with a seeded
multi-restart greedy search; buildings are then assigned to the community
with the highest score over the services in their isochrone.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import DecaminError, FlowError
from .model import AccessSet
from .taxonomy import ServiceTaxonomy

CONTESTED = "contested"
UNASSIGNABLE = "unassignable"


@dataclass
class ServiceGraph:
    """Directed weighted graph over services; W[i, j] in persons."""

    ids: tuple[str, ...]  # sorted service ids
    types: tuple[str, ...]  # typology per node
    W: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.ids)
        if self.W.shape != (n, n):
            raise DecaminError("weight matrix shape mismatch")

    @property
    def n(self) -> int:
        return len(self.ids)

    def index_of(self, service_id: str) -> int:
        # ids are sorted, so bisection would work too; dict is built lazily
        if not hasattr(self, "_id2idx"):
            object.__setattr__(self, "_id2idx", {s: i for i, s in enumerate(self.ids)})
        return self._id2idx[service_id]


def build_service_graph(
    access_sets: list[AccessSet],
    populations: dict[str, float],
    service_types: dict[str, str],
) -> ServiceGraph:
    """Accumulate every building's pairwise contributions into W.

    For building a and ordered pair (s_i, s_j), both reachable and of
    different types, W[i, j] += P_a / n_a(type of s_j). Only POIs are nodes;
    green areas never appear in access sets' service lists.
    """
    ids = tuple(sorted(service_types))
    id2idx = {s: i for i, s in enumerate(ids)}
    types = tuple(service_types[s] for s in ids)
    type_arr = np.array(types)
    N = len(ids)
    W = np.zeros((N, N), dtype=float)

    for a in sorted(access_sets, key=lambda s: s.building_id):
        present = sorted(a.services_in_iso)
        if len(present) < 2:
            continue
        try:
            idx = np.array([id2idx[s] for s in present], dtype=int)
        except KeyError as exc:
            raise DecaminError(
                f"building {a.building_id} references unknown service id {exc.args[0]!r}"
            ) from None
        P = float(populations[a.building_id])
        tvec = type_arr[idx]
        uniq, inverse = np.unique(tvec, return_inverse=True)
        counts = np.bincount(inverse)
        contrib = P / counts[inverse]  # per destination column
        mask = tvec[:, None] != tvec[None, :]
        W[np.ix_(idx, idx)] += mask * contrib[None, :]
    return ServiceGraph(ids=ids, types=types, W=W)


# --- random-walk flows --------------------------------------------------------


@dataclass
class FlowResult:
    rates: np.ndarray  # stationary visit rates, sum to 1
    link_flows: np.ndarray  # Q[i, j]: encoded flow along i -> j
    teleport: float
    iterations: int
    residual: float


def stationary_flow(
    g: ServiceGraph,
    teleport: float = 0.15,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> FlowResult:
    """Visit rates by power iteration with uniform teleportation.

    Dangling nodes redistribute uniformly. Link flows count only real link
    transitions, scaled by (1 - teleport): teleport steps are not encoded in
    the codelength (standard practice).
    """
    if g.n == 0:
        raise DecaminError("empty service graph")
    if not (0.0 < teleport < 1.0):
        raise DecaminError("teleport probability must be in (0, 1)")
    N = g.n
    out = g.W.sum(axis=1)
    dangling = out <= 0
    P = np.zeros_like(g.W)
    nz = ~dangling
    P[nz] = g.W[nz] / out[nz, None]

    pi = np.full(N, 1.0 / N)
    residual = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        drift = pi[dangling].sum()
        nxt = teleport / N + (1.0 - teleport) * (pi @ P + drift / N)
        residual = float(np.abs(nxt - pi).max())
        pi = nxt
        if residual < tol:
            break
    else:
        raise FlowError(f"stationary flow did not converge: residual {residual:g}")
    pi = pi / pi.sum()
    Q = (1.0 - teleport) * (pi[:, None] * P)
    return FlowResult(
        rates=pi, link_flows=Q, teleport=teleport, iterations=iterations, residual=residual
    )


# --- two-level map equation -----------------------------------------------------


def _plogp(x: np.ndarray | float) -> np.ndarray | float:
    if np.isscalar(x):
        return x * math.log2(x) if x > 0 else 0.0
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


def _module_aggregate(Q: np.ndarray, modules: np.ndarray, K: int) -> np.ndarray:
    """agg[k, l] = sum of Q[i, j] over i in module k, j in module l."""
    colagg = np.zeros((K, Q.shape[1]))
    np.add.at(colagg, modules, Q)
    agg_t = np.zeros((K, K))
    np.add.at(agg_t, modules, colagg.T)
    return agg_t.T


def map_equation(flows: FlowResult, modules: np.ndarray) -> float:
    """Exact two-level codelength (bits per step) of a partition.

    L = plogp(q) - 2 sum_m plogp(q_m) + sum_m plogp(q_m + p_m) - sum_i plogp(pi_i)
    where q_m is module m's exit flow and p_m its visit-rate mass.
    """
    modules = np.asarray(modules, dtype=int)
    pi, Q = flows.rates, flows.link_flows
    K = int(modules.max()) + 1 if len(modules) else 0
    p_m = np.bincount(modules, weights=pi, minlength=K)
    row_out = Q.sum(axis=1)
    out_m = np.bincount(modules, weights=row_out, minlength=K)
    internal = _module_aggregate(Q, modules, K)
    q_m = out_m - np.diag(internal)
    q_m = np.maximum(q_m, 0.0)  # clamp float dust
    q = q_m.sum()
    return float(
        _plogp(q) - 2 * _plogp(q_m).sum() + _plogp(q_m + p_m).sum() - _plogp(pi).sum()
    )


# --- optimizer ------------------------------------------------------------------

_EXHAUSTIVE_LIMIT = 64  # below this, candidate modules = all modules + a fresh one


class _Level:
    """One aggregation level: nodes carry mass, self-flow, inter-node flows."""

    def __init__(self, pi: np.ndarray, self_flow: np.ndarray, Q: np.ndarray):
        self.pi = pi
        self.self_flow = self_flow
        self.Q = Q
        self.n = len(pi)

    def local_moves(self, rng: random.Random, init: np.ndarray | None = None):
        """Greedy node-to-module moves until no move improves the codelength."""
        n = self.n
        modules = np.arange(n) if init is None else init.copy()
        K = int(modules.max()) + 1
        p = np.bincount(modules, weights=self.pi, minlength=K).astype(float)
        row_out = self.Q.sum(axis=1)
        out_sum = np.bincount(modules, weights=row_out, minlength=K).astype(float)
        if init is None:
            internal = np.zeros(K)  # W has a zero diagonal
        else:
            internal = np.diag(_module_aggregate(self.Q, modules, K)).copy()
        q_m = out_sum - internal
        q_tot = float(q_m.sum())

        # spare slot reused for "move to a fresh module" candidates
        def grow(arrs):
            return [np.append(a, 0.0) for a in arrs]

        p, out_sum, internal, q_m = grow([p, out_sum, internal, q_m])
        spare = K
        order = list(range(n))
        exhaustive = n <= _EXHAUSTIVE_LIMIT
        moved_any = False
        for _ in range(200):
            rng.shuffle(order)
            moved = False
            for v in order:
                a = modules[v]
                row = self.Q[v]
                col = self.Q[:, v]
                fv2m = np.bincount(modules, weights=row, minlength=spare + 1)
                fm2v = np.bincount(modules, weights=col, minlength=spare + 1)
                out_v = float(row.sum())
                in_out_v = out_v + float(col.sum())
                pv = self.pi[v]

                # stats of module a without v
                pa_new = p[a] - pv
                outa_new = out_sum[a] - out_v
                inta_new = internal[a] - fv2m[a] - fm2v[a]
                qa_old, qa_new = q_m[a], outa_new - inta_new

                if exhaustive:
                    candidates = [m for m in range(spare + 1) if m != a]
                else:
                    cand = set(np.nonzero(fv2m)[0].tolist())
                    cand.update(np.nonzero(fm2v)[0].tolist())
                    cand.discard(a)
                    cand.add(spare)
                    candidates = sorted(cand)

                best_delta = -1e-12
                best_b = -1
                for b in candidates:
                    if p[b] == 0.0 and b != spare:
                        continue
                    pb_new = p[b] + pv
                    outb_new = out_sum[b] + out_v
                    intb_new = internal[b] + fv2m[b] + fm2v[b]
                    qb_old, qb_new = q_m[b], outb_new - intb_new
                    q_new = q_tot + (qa_new - qa_old) + (qb_new - qb_old)
                    delta = (
                        _plogp(q_new)
                        - _plogp(q_tot)
                        - 2 * (_plogp(qa_new) + _plogp(qb_new) - _plogp(qa_old) - _plogp(qb_old))
                        + (
                            _plogp(qa_new + pa_new)
                            + _plogp(qb_new + pb_new)
                            - _plogp(qa_old + p[a])
                            - _plogp(qb_old + p[b])
                        )
                    )
                    if delta < best_delta:
                        best_delta = delta
                        best_b = b
                if best_b < 0:
                    continue
                b = best_b
                pb_new = p[b] + pv
                outb_new = out_sum[b] + out_v
                intb_new = internal[b] + fv2m[b] + fm2v[b]
                qb_new = outb_new - intb_new
                q_tot += (qa_new - q_m[a]) + (qb_new - q_m[b])
                p[a], out_sum[a], internal[a], q_m[a] = pa_new, outa_new, inta_new, qa_new
                p[b], out_sum[b], internal[b], q_m[b] = pb_new, outb_new, intb_new, qb_new
                modules[v] = b
                moved = True
                moved_any = True
                if b == spare:  # fresh module consumed; allocate a new spare
                    spare += 1
                    p, out_sum, internal, q_m = grow([p, out_sum, internal, q_m])
            if not moved:
                break
        return modules, moved_any

    def aggregate(self, modules: np.ndarray) -> tuple["_Level", np.ndarray]:
        """Collapse modules into supernodes; returns (new level, relabeling)."""
        uniq = np.unique(modules)
        relabel = {int(m): k for k, m in enumerate(uniq)}
        compact = np.array([relabel[int(m)] for m in modules], dtype=int)
        K = len(uniq)
        agg = _module_aggregate(self.Q, compact, K)
        self_flow = np.bincount(compact, weights=self.self_flow, minlength=K) + np.diag(agg)
        Q = agg.copy()
        np.fill_diagonal(Q, 0.0)
        pi = np.bincount(compact, weights=self.pi, minlength=K)
        return _Level(pi=pi, self_flow=self_flow, Q=Q), compact


def _optimize_once(flows: FlowResult, rng: random.Random) -> np.ndarray:
    level = _Level(pi=flows.rates.copy(), self_flow=np.zeros(flows.rates.shape), Q=flows.link_flows.copy())
    node_modules = np.arange(level.n)  # original node -> current level node
    while True:
        assignment, moved = level.local_moves(rng)
        new_level, compact = level.aggregate(assignment)
        node_modules = compact[node_modules]
        if not moved or new_level.n == level.n:
            break
        level = new_level
    # one fine-tuning pass at the node level, seeded from the coarse partition
    base = _Level(pi=flows.rates.copy(), self_flow=np.zeros(flows.rates.shape), Q=flows.link_flows.copy())
    refined, _ = base.local_moves(rng, init=node_modules)
    _, compact = base.aggregate(refined)
    return compact


@dataclass
class Partition:
    ids: tuple[str, ...]
    modules: np.ndarray  # contiguous community id per node
    codelength: float
    seed: int
    trials: int

    def as_dict(self) -> dict[str, int]:
        return {s: int(m) for s, m in zip(self.ids, self.modules)}

    @property
    def n_communities(self) -> int:
        return int(self.modules.max()) + 1 if len(self.modules) else 0


def detect_communities(
    g: ServiceGraph,
    seed: int = 0,
    trials: int = 10,
    teleport: float = 0.15,
) -> Partition:
    """Best-of-`trials` seeded greedy minimization of the map equation."""
    if g.n == 0:
        raise DecaminError("empty service graph")
    flows = stationary_flow(g, teleport=teleport)
    best_modules: np.ndarray | None = None
    best_L = math.inf
    for t in range(max(1, trials)):
        rng = random.Random(seed * 100_003 + t)
        modules = _optimize_once(flows, rng)
        L = map_equation(flows, modules)
        if L < best_L - 1e-12:
            best_L, best_modules = L, modules
    # relabel communities in first-appearance order over the sorted node ids
    relabel: dict[int, int] = {}
    out = np.empty_like(best_modules)
    for i, m in enumerate(best_modules):
        out[i] = relabel.setdefault(int(m), len(relabel))
    return Partition(ids=g.ids, modules=out, codelength=best_L, seed=seed, trials=trials)


# --- building -> community assignment -------------------------------------------


@dataclass
class CommunityAssignment:
    # building id -> community id, or the CONTESTED / UNASSIGNABLE markers
    labels: dict[str, int | str]
    scores: dict[str, dict[int, float]] = field(default_factory=dict)

    @property
    def contested(self) -> list[str]:
        return sorted(b for b, v in self.labels.items() if v == CONTESTED)

    @property
    def unassignable(self) -> list[str]:
        return sorted(b for b, v in self.labels.items() if v == UNASSIGNABLE)


def _community_score(
    members: list[str],
    service_types: dict[str, str],
    taxonomy: ServiceTaxonomy,
    variant: str,
) -> float:
    total = len(members)
    by_category: dict[str, int] = {}
    for s in members:
        cat = taxonomy.category_of(service_types[s]).name
        by_category[cat] = by_category.get(cat, 0) + 1
    score = 0.0
    for cat in taxonomy.categories:
        in_cat = by_category.get(cat.name, 0)
        if variant == "literal":
            score += total - in_cat
        elif variant == "pair":
            score += in_cat * (total - in_cat)
        else:
            raise DecaminError(f"unknown assignment variant {variant!r}")
    return score


def assign_buildings(
    access_sets: list[AccessSet],
    partition: Partition,
    taxonomy: ServiceTaxonomy,
    service_types: dict[str, str],
    variant: str = "literal",
) -> CommunityAssignment:
    """Assign each building to the best-scoring community in its isochrone.

    Buildings reaching fewer than two distinct service types are
    unassignable; exact score ties are contested. Only communities holding
    at least two of the building's services are scored (falling back to all
    present communities when none qualifies, which can only tie).
    """
    community_of = partition.as_dict()
    labels: dict[str, int | str] = {}
    all_scores: dict[str, dict[int, float]] = {}
    for a in sorted(access_sets, key=lambda s: s.building_id):
        distinct_types = sum(1 for c in a.per_type_counts.values() if c >= 1)
        if distinct_types < 2:
            labels[a.building_id] = UNASSIGNABLE
            continue
        members: dict[int, list[str]] = {}
        for s in sorted(a.services_in_iso):
            members.setdefault(community_of[s], []).append(s)
        qualified = {k: v for k, v in members.items() if len(v) >= 2} or members
        scores = {
            k: _community_score(v, service_types, taxonomy, variant)
            for k, v in qualified.items()
        }
        all_scores[a.building_id] = scores
        best = max(scores.values())
        winners = sorted(k for k, v in scores.items() if v == best)
        labels[a.building_id] = winners[0] if len(winners) == 1 else CONTESTED
    return CommunityAssignment(labels=labels, scores=all_scores)
