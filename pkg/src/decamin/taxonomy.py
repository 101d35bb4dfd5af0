"""Service taxonomy: category -> subcategory -> type tree and index weights.

The tree is configuration, not code. Each service type carries the weight
1 / (n * p_j * m_{j,h}) where n is the number of categories, p_j the number
of subcategories in the type's category and m_{j,h} the number of types in
its subcategory, so the weights of one category's types always sum to 1/n
and all weights sum to 1.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources

from .errors import TaxonomyError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class Subcategory:
    name: str
    types: tuple[str, ...]


@dataclass(frozen=True)
class Category:
    name: str
    subcategories: tuple[Subcategory, ...]
    is_green: bool = False

    @property
    def type_names(self) -> tuple[str, ...]:
        return tuple(t for sub in self.subcategories for t in sub.types)


@dataclass(frozen=True)
class ServiceTaxonomy:
    """Immutable taxonomy; safe to share across parallel workers."""

    categories: tuple[Category, ...]
    # type name -> (category index, subcategory index)
    _index: dict[str, tuple[int, int]] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self.categories:
            raise TaxonomyError("taxonomy has no categories")
        index: dict[str, tuple[int, int]] = {}
        greens = 0
        for j, cat in enumerate(self.categories):
            if not cat.subcategories:
                raise TaxonomyError(f"category {cat.name!r} has no subcategories")
            if cat.is_green:
                greens += 1
                if len(cat.subcategories) != 1 or len(cat.subcategories[0].types) != 1:
                    raise TaxonomyError(
                        f"green category {cat.name!r} must hold exactly one type"
                    )
            for h, sub in enumerate(cat.subcategories):
                if not sub.types:
                    raise TaxonomyError(
                        f"subcategory {sub.name!r} of {cat.name!r} has no types"
                    )
                for t in sub.types:
                    if t in index:
                        raise TaxonomyError(f"duplicate type name {t!r}")
                    index[t] = (j, h)
        if greens > 1:
            raise TaxonomyError("more than one green category")
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return len(self.categories)

    @property
    def type_names(self) -> tuple[str, ...]:
        return tuple(self._index)

    @property
    def green_category(self) -> Category | None:
        for cat in self.categories:
            if cat.is_green:
                return cat
        return None

    @property
    def green_type(self) -> str | None:
        cat = self.green_category
        return cat.subcategories[0].types[0] if cat else None

    def has_type(self, type_name: str) -> bool:
        return type_name in self._index

    def locate(self, type_name: str) -> tuple[int, int]:
        """(category index, subcategory index) for a type name."""
        try:
            return self._index[type_name]
        except KeyError:
            raise TaxonomyError(f"unknown service type {type_name!r}") from None

    def category_of(self, type_name: str) -> Category:
        return self.categories[self.locate(type_name)[0]]

    def type_weight(self, type_name: str) -> float:
        """Index contribution 1/(n * p_j * m_{j,h}) of one service type."""
        j, h = self.locate(type_name)
        cat = self.categories[j]
        return 1.0 / (self.n * len(cat.subcategories) * len(cat.subcategories[h].types))


def _parse_category(raw: dict, position: int) -> Category:
    name = raw.get("name")
    if not name or not isinstance(name, str):
        raise TaxonomyError(f"category #{position} has no name")
    is_green = bool(raw.get("is_green", False))
    has_types = "types" in raw
    has_subs = "subcategory" in raw
    if has_types == has_subs:
        raise TaxonomyError(
            f"category {name!r} must define either 'types' or 'subcategory' blocks"
        )
    if has_types:
        subs = (Subcategory(name=name, types=tuple(raw["types"])),)
    else:
        subs = tuple(
            Subcategory(name=s.get("name", f"{name}_{i}"), types=tuple(s.get("types", ())))
            for i, s in enumerate(raw["subcategory"])
        )
    return Category(name=name, subcategories=subs, is_green=is_green)


def load_taxonomy(document: str) -> ServiceTaxonomy:
    """Parse a TOML taxonomy document into a validated ServiceTaxonomy."""
    try:
        data = tomllib.loads(document)
    except tomllib.TOMLDecodeError as exc:
        raise TaxonomyError(f"taxonomy document is not valid TOML: {exc}") from exc
    raw_categories = data.get("category")
    if not raw_categories:
        raise TaxonomyError("taxonomy document defines no [[category]] blocks")
    categories = tuple(_parse_category(c, i) for i, c in enumerate(raw_categories))
    return ServiceTaxonomy(categories=categories)


def load_taxonomy_file(path) -> ServiceTaxonomy:
    with open(path, "r", encoding="utf-8") as fh:
        return load_taxonomy(fh.read())


def default_taxonomy() -> ServiceTaxonomy:
    """The bundled 6-category / 25-type tree."""
    doc = resources.files("decamin.data").joinpath("default_taxonomy.toml").read_text("utf-8")
    return load_taxonomy(doc)
