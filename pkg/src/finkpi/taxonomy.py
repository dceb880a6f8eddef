"""Metric taxonomy: canonical KPI names, surface aliases, and value classes."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class ValueClass(Enum):
    CURRENCY = "Currency"
    PERCENT = "Percent"
    COUNT = "Count"


@dataclass(frozen=True)
class TaxonomyEntry:
    canonical_name: str
    aliases: tuple[str, ...]
    value_class: ValueClass


@dataclass
class MetricTaxonomy:
    """Case-insensitive alias -> canonical metric lookup."""

    entries: list[TaxonomyEntry] = field(default_factory=list)

    def __post_init__(self):
        self._by_canonical: dict[str, TaxonomyEntry] = {}
        self._by_alias: dict[str, str] = {}
        for entry in self.entries:
            if entry.canonical_name in self._by_canonical:
                raise ValueError(f"duplicate canonical name: {entry.canonical_name}")
            self._by_canonical[entry.canonical_name] = entry
            for alias in entry.aliases:
                key = alias.lower()
                if key in self._by_alias and self._by_alias[key] != entry.canonical_name:
                    raise ValueError(f"alias {alias!r} maps to two canonical names")
                self._by_alias[key] = entry.canonical_name

    def canonical_for(self, alias: str) -> str | None:
        return self._by_alias.get(alias.lower())

    def entry(self, canonical_name: str) -> TaxonomyEntry | None:
        return self._by_canonical.get(canonical_name)

    def value_class(self, canonical_name: str) -> ValueClass | None:
        entry = self._by_canonical.get(canonical_name)
        return entry.value_class if entry else None

    def canonical_names(self) -> list[str]:
        return list(self._by_canonical)

    def aliases_sorted(self) -> list[tuple[str, str]]:
        """(alias, canonical) pairs, longest alias first so greedy matching works."""
        return sorted(self._by_alias.items(), key=lambda kv: (-len(kv[0]), kv[0]))

    def growth_variant(self, canonical_name: str) -> str | None:
        """Canonical name of the YoY-growth percent metric derived from a
        currency metric, if the taxonomy carries one."""
        candidate = f"{canonical_name}_yoy_growth"
        return candidate if candidate in self._by_canonical else None


_DEFAULT_ENTRIES = [
    TaxonomyEntry("revenue", ("revenue", "revenues", "net revenue", "total revenue", "sales"),
                  ValueClass.CURRENCY),
    TaxonomyEntry("operating_income", ("operating income", "income from operations"),
                  ValueClass.CURRENCY),
    TaxonomyEntry("operating_margin", ("operating margin", "operating margins"),
                  ValueClass.PERCENT),
    TaxonomyEntry("gross_margin", ("gross margin", "gross margins"), ValueClass.PERCENT),
    TaxonomyEntry("free_cash_flow", ("free cash flow", "fcf"), ValueClass.CURRENCY),
    TaxonomyEntry("eps", ("eps", "earnings per share", "diluted eps"), ValueClass.CURRENCY),
    TaxonomyEntry("consensus_delta", ("consensus", "consensus delta", "consensus estimate"),
                  ValueClass.CURRENCY),
]


def default_taxonomy() -> MetricTaxonomy:
    """Default taxonomy plus derived YoY-growth percent variants for every
    currency metric (a growth percent next to a currency alias resolves to
    the derived metric, not the level metric)."""
    entries = list(_DEFAULT_ENTRIES)
    for entry in _DEFAULT_ENTRIES:
        if entry.value_class is ValueClass.CURRENCY:
            name = f"{entry.canonical_name}_yoy_growth"
            aliases = tuple(f"{a} growth" for a in entry.aliases[:2])
            entries.append(TaxonomyEntry(name, aliases, ValueClass.PERCENT))
    return MetricTaxonomy(entries)
