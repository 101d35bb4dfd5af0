import math

import pytest

from decamin.errors import TaxonomyError
from decamin.taxonomy import default_taxonomy, load_taxonomy

MINIMAL = """
[[category]]
name = "only"
types = ["only_type"]
"""

DUPLICATE = """
[[category]]
name = "food"
types = ["supermarket"]

[[category]]
name = "retail"
types = ["supermarket"]
"""


def test_default_tree_shape():
    tax = default_taxonomy()
    assert tax.n == 6
    assert len(tax.type_names) == 25
    by_name = {c.name: c for c in tax.categories}
    assert len(by_name["schools"].type_names) == 4
    assert len(by_name["healthcare"].type_names) == 3
    assert len(by_name["primary_services"].type_names) == 4
    assert len(by_name["food_retail"].type_names) == 2
    leisure = by_name["leisure"]
    assert [len(s.types) for s in leisure.subcategories] == [2, 4, 3, 2]
    assert by_name["green_areas"].is_green
    assert tax.green_type == "green_area"


def test_minimal_tree():
    tax = load_taxonomy(MINIMAL)
    assert tax.n == 1
    assert tax.type_weight("only_type") == 1.0


def test_duplicate_type_rejected():
    with pytest.raises(TaxonomyError, match="supermarket"):
        load_taxonomy(DUPLICATE)


def test_empty_category_rejected():
    with pytest.raises(TaxonomyError):
        load_taxonomy('[[category]]\nname = "empty"\ntypes = []\n')


def test_two_green_categories_rejected():
    doc = """
[[category]]
name = "g1"
is_green = true
types = ["park1"]

[[category]]
name = "g2"
is_green = true
types = ["park2"]
"""
    with pytest.raises(TaxonomyError, match="green"):
        load_taxonomy(doc)


def test_green_category_must_be_single_type():
    doc = """
[[category]]
name = "green"
is_green = true
types = ["park", "garden"]
"""
    with pytest.raises(TaxonomyError):
        load_taxonomy(doc)


def test_type_weights_hand_derived():
    tax = default_taxonomy()
    # food retail: n=6, p=1, m=2
    assert tax.type_weight("supermarket") == pytest.approx(1 / 12, abs=1e-15)
    # leisure -> cultural: n=6, p=4, m=4
    assert tax.type_weight("theater") == pytest.approx(1 / 96, abs=1e-15)
    with pytest.raises(TaxonomyError):
        tax.type_weight("spaceport")


def test_weights_sum_to_category_share_and_one():
    tax = default_taxonomy()
    total = 0.0
    for cat in tax.categories:
        cat_sum = sum(tax.type_weight(t) for t in cat.type_names)
        assert math.isclose(cat_sum, 1 / tax.n, rel_tol=0, abs_tol=1e-12)
        total += cat_sum
    assert math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-12)
