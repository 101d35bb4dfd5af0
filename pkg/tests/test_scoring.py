import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import box

from conftest import CENTER, offset_deg
from decamin.errors import DecaminError, TaxonomyError
from decamin.geometry import LocalProjection
from decamin.model import AccessSet, GreenArea, ServicePoint
from decamin.scoring import (
    GREEN_THRESHOLD_M2,
    GreenIndex,
    PoiIndex,
    category_score,
    green_score,
    overlay,
    ten_minute_index,
    type_access,
    weighted_index,
)
from decamin.taxonomy import default_taxonomy

TAX = default_taxonomy()
PROJ = LocalProjection(*CENTER)
LON, LAT = CENTER
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


class TestOverlay:
    def test_pois_inside_and_outside(self):
        inside = [(-100, 0), (0, 50), (80, -80)]
        outside = [(1000, 0), (0, -1500)]
        pois = [
            ServicePoint(id=f"p{i}", type_name="supermarket", lon=lon, lat=lat)
            for i, (lon, lat) in enumerate(
                offset_deg(LON, LAT, dx, dy) for dx, dy in inside + outside
            )
        ]
        index = PoiIndex(pois, PROJ)
        iso = box(-200, -200, 200, 200)
        access = overlay(iso, "b1", index, GreenIndex([]))
        assert access.services_in_iso == {"p0", "p1", "p2"}
        assert access.per_type_counts == {"supermarket": 3}

    def test_poi_on_boundary_counts(self):
        poi = ServicePoint(id="edge", type_name="bank", lon=LON, lat=LAT)
        index = PoiIndex([poi], PROJ)
        x, y = index.points[0].x, index.points[0].y
        iso = box(x - 400, y - 400, x, y + 400)  # POI exactly on the east edge
        access = overlay(iso, "b1", index, GreenIndex([]))
        assert access.services_in_iso == {"edge"}

    def test_green_fully_inside(self):
        iso = box(-300, -300, 300, 300)
        greens = GreenIndex([GreenArea(id="g1", polygon=box(-100, -50, 100, 50))])  # 2 ha
        access = overlay(iso, "b1", PoiIndex([], PROJ), greens)
        assert access.green_overlap_m2 == pytest.approx(20_000.0, abs=1e-9)

    def test_two_half_overlapping_greens_sum(self):
        iso = box(-200, -200, 200, 200)
        greens = GreenIndex(
            [
                GreenArea(id="g1", polygon=box(100, -50, 300, 50)),  # 1 ha inside
                GreenArea(id="g2", polygon=box(-300, -50, -100, 50)),  # 1 ha inside
            ]
        )
        access = overlay(iso, "b1", PoiIndex([], PROJ), greens)
        assert access.green_overlap_m2 == pytest.approx(20_000.0, abs=1e-9)


class TestTypeAccess:
    def test_threshold_at_one(self):
        assert type_access(make_access({"bank": 3}), "bank", TAX) == 1
        assert type_access(make_access({}), "bank", TAX) == 0
        assert type_access(make_access({"bank": 1}), "bank", TAX) == 1

    def test_green_type_rejected(self):
        with pytest.raises(DecaminError):
            type_access(make_access({}), TAX.green_type, TAX)

    def test_unknown_type_rejected(self):
        with pytest.raises(TaxonomyError):
            type_access(make_access({}), "spaceport", TAX)


class TestGreenScore:
    def test_threshold_cases(self):
        assert green_score(make_access({}, 80_000.0)) == 1.0
        assert green_score(make_access({}, 40_000.0)) == 0.5
        assert green_score(make_access({}, 0.0)) == 0.0
        assert green_score(make_access({}, 120_000.0)) == 1.0

    def test_piecewise_linear_below_threshold(self):
        rng = random.Random(1)
        for _ in range(50):
            x = rng.uniform(0, GREEN_THRESHOLD_M2)
            assert green_score(make_access({}, x)) == x / GREEN_THRESHOLD_M2


CATS = {c.name: c for c in TAX.categories}


class TestCategoryScore:
    def test_healthcare_ratio(self):
        a = make_access({"emergency_room": 1, "medical_clinic": 2})
        assert category_score(a, CATS["healthcare"], TAX) == pytest.approx(2 / 3, abs=1e-15)

    def test_leisure_mean_of_subscores(self):
        # associative 1/2, cultural 0, sport 3/3, children 1/2 -> mean 0.5
        a = make_access(
            {"social_club": 1, "sport_center": 1, "school_gym": 2, "equipped_sport_area": 1, "playground": 4}
        )
        assert category_score(a, CATS["leisure"], TAX) == pytest.approx(0.5, abs=1e-15)

    def test_schools_complete(self):
        a = make_access(
            {"nursery": 1, "kindergarten": 1, "primary_school": 2, "secondary_school": 1}
        )
        assert category_score(a, CATS["schools"], TAX) == 1.0

    def test_green_category_uses_overlap(self):
        a = make_access({}, green_m2=40_000.0)
        assert category_score(a, CATS["green_areas"], TAX) == 0.5


def full_access(green_m2: float = 120_000.0) -> AccessSet:
    return make_access({t: 1 for t in ALL_POI_TYPES}, green_m2=green_m2)


class TestTenMinuteIndex:
    def test_everything_accessible(self):
        scores = ten_minute_index(full_access(), TAX)
        assert scores.index == 1.0
        assert all(v == 1.0 for v in scores.category_scores.values())

    def test_only_food_retail(self):
        a = make_access({"supermarket": 1, "open_air_market": 1})
        scores = ten_minute_index(a, TAX)
        assert scores.index == pytest.approx(1 / 6, abs=1e-15)

    def test_hand_mixed_case(self):
        # schools 1, healthcare 2/3, primary 1/2, green 1/2, leisure 1/2, food 1
        a = make_access(
            {
                "nursery": 1,
                "kindergarten": 1,
                "primary_school": 1,
                "secondary_school": 1,
                "emergency_room": 1,
                "medical_clinic": 1,
                "tobacco_shop": 1,
                "bank": 1,
                "social_club": 1,
                "theater": 1,
                "cinema": 1,
                "museum": 1,
                "library": 1,
                "playground": 1,
                "supermarket": 1,
                "open_air_market": 1,
            },
            green_m2=40_000.0,
        )
        scores = ten_minute_index(a, TAX)
        expected = (1 + 2 / 3 + 0.5 + 0.5 + 0.5 + 1) / 6
        assert scores.index == pytest.approx(expected, abs=1e-12)
        assert scores.index == pytest.approx(25 / 36, abs=1e-12)

    def test_bounds_on_random_instances(self):
        rng = random.Random(13)
        for _ in range(300):
            counts = {t: rng.randint(0, 3) for t in rng.sample(ALL_POI_TYPES, rng.randint(0, 24))}
            a = make_access(counts, green_m2=rng.uniform(0, 160_000))
            scores = ten_minute_index(a, TAX)
            assert 0.0 <= scores.index <= 1.0
            complete = all(counts.get(t, 0) >= 1 for t in ALL_POI_TYPES) and (
                a.green_overlap_m2 >= GREEN_THRESHOLD_M2
            )
            assert (scores.index == 1.0) == complete


class TestMonotonicity:
    def test_adding_a_poi_never_decreases_scores(self):
        rng = random.Random(99)
        for _ in range(1000):
            counts = {
                t: rng.randint(0, 2)
                for t in rng.sample(ALL_POI_TYPES, rng.randint(0, len(ALL_POI_TYPES)))
            }
            green = rng.uniform(0, 120_000)
            before = ten_minute_index(make_access(counts, green), TAX)
            bumped = dict(counts)
            extra = rng.choice(ALL_POI_TYPES)
            bumped[extra] = bumped.get(extra, 0) + 1
            after = ten_minute_index(make_access(bumped, green), TAX)
            assert after.index >= before.index - 1e-15
            for name in before.category_scores:
                assert after.category_scores[name] >= before.category_scores[name] - 1e-15


class TestWeightedIndex:
    def test_uniform_equals_index(self):
        a = make_access({"supermarket": 1, "bank": 1, "theater": 1}, green_m2=30_000)
        scores = ten_minute_index(a, TAX)
        uniform = {c.name: 1 / 6 for c in TAX.categories}
        assert weighted_index(scores, uniform) == pytest.approx(scores.index, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=6, max_size=6))
    def test_uniform_equals_index_property(self, values):
        scores = ten_minute_index(full_access(), TAX)
        scores.category_scores = dict(zip(scores.category_scores, values))
        scores.index = sum(values) / 6
        uniform = {name: 1 / 6 for name in scores.category_scores}
        assert weighted_index(scores, uniform) == pytest.approx(scores.index, abs=1e-12)

    def test_single_category_weight(self):
        a = make_access({"nursery": 1, "supermarket": 1})
        scores = ten_minute_index(a, TAX)
        w = {c.name: 0.0 for c in TAX.categories}
        w["schools"] = 1.0
        assert weighted_index(scores, w) == scores.category_scores["schools"]

    def test_half_half_weights(self):
        scores = ten_minute_index(full_access(), TAX)
        names = list(scores.category_scores)
        scores.category_scores = {n: (1.0 if i == 0 else 0.0) for i, n in enumerate(names)}
        w = {n: 0.0 for n in names}
        w[names[0]] = 0.5
        w[names[1]] = 0.5
        assert weighted_index(scores, w) == pytest.approx(0.5, abs=1e-15)

    def test_unnormalized_weights_rejected(self):
        scores = ten_minute_index(full_access(), TAX)
        w = {name: 0.5 for name in scores.category_scores}
        with pytest.raises(DecaminError, match="sum to 1"):
            weighted_index(scores, w)
        w = {name: 1 / 6 for name in scores.category_scores}
        w["schools"] = -1 / 6
        w["healthcare"] = 0.5
        with pytest.raises(DecaminError, match="non-negative"):
            weighted_index(scores, w)
