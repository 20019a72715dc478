"""Product catalog loading, the extraction gazetteer derived from it, and
hard slot-constraint filtering."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .domain import SlotSchema, SlotValue, normalize_value

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Product:
    id: str
    name: str
    price: float
    attributes: dict[str, str] = field(hash=False)


@dataclass(frozen=True)
class Catalog:
    products: tuple[Product, ...]
    schema: SlotSchema

    def by_id(self, product_id: str) -> Product:
        return self._index()[product_id]

    def _index(self) -> dict[str, Product]:
        # cached on first use; Catalog is immutable after load
        idx = getattr(self, "_idx", None)
        if idx is None:
            idx = {p.id: p for p in self.products}
            object.__setattr__(self, "_idx", idx)
        return idx

    def values_for(self, slot: str) -> list[str]:
        """Distinct values realized in the catalog for a slot, first-seen order."""
        out: list[str] = []
        seen: set[str] = set()
        for p in self.products:
            v = p.attributes.get(slot)
            if v is not None and v not in seen:
                seen.add(v)
                out.append(v)
        return out


@dataclass(frozen=True)
class Gazetteer:
    """normalized phrase -> (slot, canonical value); phrases up to
    max_phrase_words long."""

    entries: dict[str, tuple[str, str]] = field(hash=False)
    max_phrase_words: int = 1


class CatalogError(ValueError):
    pass


def load_catalog(path: str, schema: SlotSchema) -> Catalog:
    """Load and validate the product catalog file.

    Attribute values are normalized on load; duplicate ids and attributes
    naming unknown slots are reported with the offending product id.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"catalog parse failure at {path}: {exc}") from exc
    products = []
    seen_ids: set[str] = set()
    known = set(schema.names)
    for i, entry in enumerate(doc):
        pid = str(entry["id"])
        if pid in seen_ids:
            raise CatalogError(f'duplicate product id "{pid}" (entry {i})')
        seen_ids.add(pid)
        attrs = {}
        for slot, value in entry.get("attributes", {}).items():
            if slot not in known:
                raise CatalogError(f'product "{pid}" references unknown slot "{slot}"')
            attrs[slot] = normalize_value(str(value))
        price = float(entry.get("price", 0.0))
        if price < 0:
            raise CatalogError(f'product "{pid}" has negative price')
        products.append(Product(id=pid, name=str(entry["name"]), price=price, attributes=attrs))
    return Catalog(products=tuple(products), schema=schema)


def build_gazetteer(catalog: Catalog, synonyms: dict[str, str] | None = None) -> Gazetteer:
    """Derive the phrase lookup used for label-free slot extraction.

    Every distinct value of every enumerated slot becomes an entry; synonym
    phrases are added pointing at their canonical (slot, value) target.
    Synonyms whose target value is not realized in the catalog are skipped
    with a warning.
    """
    entries: dict[str, tuple[str, str]] = {}
    max_words = 1
    enumerated = [s.name for s in catalog.schema.slots if s.value_domain == "enumerated"]
    for slot in enumerated:
        for value in catalog.values_for(slot):
            if value in entries and entries[value] != (slot, value):
                log.warning("gazetteer collision on %r: keeping %s", value, entries[value])
                continue
            entries[value] = (slot, value)
            max_words = max(max_words, len(value.split()))
    if synonyms:
        value_index = {phrase: target for phrase, target in entries.items()}
        for phrase, canonical in synonyms.items():
            phrase_n = normalize_value(phrase)
            canonical_n = normalize_value(canonical)
            target = value_index.get(canonical_n)
            if target is None:
                log.warning("synonym %r -> %r has no catalog target; skipped", phrase, canonical)
                continue
            entries.setdefault(phrase_n, target)
            max_words = max(max_words, len(phrase_n.split()))
    return Gazetteer(entries=entries, max_phrase_words=max_words)


def satisfies(product: Product, constraint: SlotValue) -> bool:
    """A product satisfies a constraint when it defines the attribute and
    matches it; a missing attribute never satisfies."""
    return product.attributes.get(constraint.slot) == constraint.value


def filter_products(catalog: Catalog, constraints: list[SlotValue]) -> list[Product]:
    """Hard-constraint stage before ranking: products matching every
    constraint, in catalog order. Empty constraints keep everything."""
    out = []
    for p in catalog.products:
        if all(satisfies(p, c) for c in constraints):
            out.append(p)
    return out
