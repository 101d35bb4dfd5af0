import random

import pytest

from conftest import fig5_city
from decamin.model import AccessSet
from decamin.redundancy import exclusive_populations, redundancy_index
from decamin.scoring import ten_minute_index
from decamin.taxonomy import default_taxonomy

TAX = default_taxonomy()
ALL_POI_TYPES = [t for t in TAX.type_names if t != TAX.green_type]


def make_access(counts: dict[str, int], green_m2: float = 0.0, bid="b") -> AccessSet:
    ids = []
    for t, c in counts.items():
        ids.extend(f"{t}#{k}" for k in range(c))
    return AccessSet(
        building_id=bid,
        services_in_iso=frozenset(ids),
        per_type_counts=dict(counts),
        green_overlap_m2=green_m2,
    )


def score_and_r(counts, green_m2=0.0):
    a = make_access(counts, green_m2)
    scores = ten_minute_index(a, TAX)
    return scores, redundancy_index(a, scores, TAX)


class TestRedundancyIndex:
    def test_lone_food_pair_gives_r_one_exactly(self):
        # one supermarket + one market, nothing else: I = 1/6, K = 1/12 each
        scores, result = score_and_r({"supermarket": 1, "open_air_market": 1})
        assert scores.index == pytest.approx(1 / 6, abs=1e-15)
        assert result.R == 1.0
        assert result.detail["supermarket"].contribution == 0.5

    def test_duplicated_providers_give_half(self):
        scores, result = score_and_r({"supermarket": 2, "open_air_market": 2})
        assert scores.index == pytest.approx(1 / 6, abs=1e-15)
        assert result.R == 0.5

    def test_zero_index_undefined(self):
        scores, result = score_and_r({})
        assert scores.index == 0.0
        assert result.R is None
        assert result.detail == {}

    def test_unique_providers_no_green_r_is_one(self):
        counts = {t: 1 for t in ALL_POI_TYPES}
        scores, result = score_and_r(counts)
        assert result.R == pytest.approx(1.0, abs=1e-12)

    def test_green_weight_stays_in_denominator(self):
        # green overlap raises I but never contributes a redundancy term
        scores, result = score_and_r({"supermarket": 1, "open_air_market": 1}, green_m2=80_000.0)
        assert scores.index == pytest.approx(2 / 6, abs=1e-15)
        assert result.R == pytest.approx(0.5, abs=1e-12)
        assert "green_area" not in result.detail

    def test_bounds_on_random_instances(self):
        rng = random.Random(4)
        for _ in range(500):
            counts = {
                t: rng.randint(1, 4)
                for t in rng.sample(ALL_POI_TYPES, rng.randint(1, len(ALL_POI_TYPES)))
            }
            _, result = score_and_r(counts, green_m2=rng.uniform(0, 100_000))
            assert result.R is not None
            assert 0.0 <= result.R <= 1.0 + 1e-12

    def test_deletion_consistency(self):
        # removing the sole provider of an accessible type lowers the index
        # by exactly that type's weight
        rng = random.Random(6)
        for _ in range(200):
            counts = {
                t: rng.randint(1, 3)
                for t in rng.sample(ALL_POI_TYPES, rng.randint(1, len(ALL_POI_TYPES)))
            }
            green = rng.uniform(0, 120_000)
            solo = [t for t, c in counts.items() if c == 1]
            if not solo:
                continue
            victim = rng.choice(solo)
            before = ten_minute_index(make_access(counts, green), TAX)
            after_counts = {t: c for t, c in counts.items() if t != victim}
            after = ten_minute_index(make_access(after_counts, green), TAX)
            drop = before.index - after.index
            assert drop == pytest.approx(TAX.type_weight(victim), abs=1e-12)

    def test_adding_duplicate_decreases_r_keeps_index(self):
        rng = random.Random(10)
        for _ in range(100):
            counts = {
                t: rng.randint(1, 3)
                for t in rng.sample(ALL_POI_TYPES, rng.randint(1, 10))
            }
            scores1, r1 = score_and_r(counts)
            extra = rng.choice(sorted(counts))
            bumped = dict(counts)
            bumped[extra] += 1
            scores2, r2 = score_and_r(bumped)
            assert scores2.index == scores1.index
            assert r2.R < r1.R


class TestExclusivePopulations:
    def test_fig5_city(self):
        service_types, access_sets, populations = fig5_city()
        stats = exclusive_populations(access_sets, populations, service_types)
        by_id = {s.service_id: s.exclusive_population for s in stats}
        # cinema unique for both buildings; kindergarten only in the red iso;
        # s2 is the red building's only playground; s1 never exclusive
        assert by_id == {"s1": 0.0, "s2": 3.0, "s3": 5.0, "s4": 3.0}

    def test_total_bounded_by_population_type_pairs(self):
        rng = random.Random(12)
        service_types = {f"s{i}": rng.choice(["a", "b", "c"]) for i in range(12)}
        access_sets = []
        populations = {}
        for b in range(8):
            bid = f"b{b}"
            sub = rng.sample(sorted(service_types), rng.randint(0, 8))
            counts: dict[str, int] = {}
            for s in sub:
                counts[service_types[s]] = counts.get(service_types[s], 0) + 1
            access_sets.append(AccessSet(bid, frozenset(sub), counts))
            populations[bid] = float(rng.randint(1, 5))
        stats = exclusive_populations(access_sets, populations, service_types)
        total = sum(s.exclusive_population for s in stats)
        bound = sum(
            populations[a.building_id] * len(a.per_type_counts) for a in access_sets
        )
        assert total <= bound + 1e-9

    def test_services_without_exclusivity_reported_as_zero(self):
        service_types = {"x": "a", "y": "a"}
        access_sets = [AccessSet("b", frozenset({"x", "y"}), {"a": 2})]
        stats = exclusive_populations(access_sets, {"b": 7.0}, service_types)
        assert [(s.service_id, s.exclusive_population) for s in stats] == [
            ("x", 0.0),
            ("y", 0.0),
        ]
