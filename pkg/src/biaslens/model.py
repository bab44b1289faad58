"""Core domain types shared by all analysis modules.

Plain immutable value objects, no I/O and no statistics.  Everything is
safe to share read-only across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

MISSING_GROUP_SENTINELS = frozenset({"", "unknown", "na", "n/a", "none", "?"})


@dataclass(frozen=True)
class GroupLabel:
    """A categorical group; ids are dense integers 0..G-1 within a table."""

    id: int
    name: str


@dataclass(frozen=True)
class Entity:
    """One person/article row: group membership plus per-edition metadata.

    article_length holds a word count only for editions where covered
    is true; featured_years lists front-page appearances.
    """

    id: str
    group: GroupLabel
    datasets: frozenset[str] = frozenset()
    covered: Mapping[str, bool] = field(default_factory=dict)
    article_length: Mapping[str, int | None] = field(default_factory=dict)
    featured_years: frozenset[int] = frozenset()


@dataclass(frozen=True)
class Document:
    """Full article body for one entity in one language edition."""

    entity_id: str
    edition: str
    text: str


@dataclass(frozen=True)
class ValidationFinding:
    entity_id: str  # empty string for table-level findings
    rule: str
    message: str


@dataclass(frozen=True)
class EntityTable:
    """Ordered collection of entities plus the edition codes in play.

    Construct through :meth:`from_entities`, which assigns dense group
    label ids (sorted by name) and normalizes the per-edition maps, so
    equal contents compare equal regardless of construction order.
    """

    entities: tuple[Entity, ...]
    language_editions: tuple[str, ...]

    @classmethod
    def from_entities(
        cls, entities: Iterable[Entity], editions: Iterable[str]
    ) -> "EntityTable":
        editions = tuple(editions)
        entities = tuple(entities)
        names = sorted({e.group.name for e in entities})
        labels = {name: GroupLabel(i, name) for i, name in enumerate(names)}
        normalized = []
        for e in entities:
            covered = {ed: bool(e.covered.get(ed, False)) for ed in editions}
            length = {ed: e.article_length.get(ed) for ed in editions}
            normalized.append(
                replace(
                    e,
                    group=labels[e.group.name],
                    datasets=frozenset(e.datasets),
                    covered=covered,
                    article_length=length,
                    featured_years=frozenset(e.featured_years),
                )
            )
        return cls(tuple(normalized), editions)

    @cached_property
    def labels(self) -> tuple[GroupLabel, ...]:
        seen: dict[int, GroupLabel] = {}
        for e in self.entities:
            seen.setdefault(e.group.id, e.group)
        return tuple(seen[i] for i in sorted(seen))

    @cached_property
    def label_by_name(self) -> dict[str, GroupLabel]:
        return {lab.name: lab for lab in self.labels}

    @cached_property
    def by_id(self) -> dict[str, Entity]:
        index: dict[str, Entity] = {}
        for e in self.entities:
            index.setdefault(e.id, e)  # first occurrence wins on duplicates
        return index

    @cached_property
    def dataset_names(self) -> tuple[str, ...]:
        names: set[str] = set()
        for e in self.entities:
            names.update(e.datasets)
        return tuple(sorted(names))

    def covered_ids(self, edition: str | None) -> tuple[str, ...]:
        """Ids covered in the edition (any edition when None), table order."""
        out = []
        seen: set[str] = set()
        for e in self.entities:
            if e.id in seen:
                continue
            seen.add(e.id)
            if edition is None:
                if any(e.covered.values()):
                    out.append(e.id)
            elif e.covered.get(edition, False):
                out.append(e.id)
        return tuple(out)

    def group_of(self, entity_id: str) -> GroupLabel:
        return self.by_id[entity_id].group


@dataclass(frozen=True)
class LinkGraph:
    """Directed graph over entity ids; parallel edges allowed, order kept."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    @cached_property
    def node_set(self) -> frozenset[str]:
        return frozenset(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def validate_table(table: EntityTable) -> list[ValidationFinding]:
    """Check the table invariants; returns findings instead of raising."""
    findings: list[ValidationFinding] = []
    seen: set[str] = set()
    for e in table.entities:
        if e.id in seen:
            findings.append(
                ValidationFinding(e.id, "duplicate-id", f"entity id {e.id!r} appears more than once")
            )
        seen.add(e.id)
        for ed, length in e.article_length.items():
            if length is None:
                continue
            if not e.covered.get(ed, False):
                findings.append(
                    ValidationFinding(
                        e.id,
                        "length-without-coverage",
                        f"entity {e.id!r} has article_length for {ed!r} but covered is false",
                    )
                )
            if length < 0:
                findings.append(
                    ValidationFinding(
                        e.id, "negative-length", f"entity {e.id!r} has negative length for {ed!r}"
                    )
                )
    label_ids = sorted({e.group.id for e in table.entities})
    if table.entities and len(label_ids) < 2:
        findings.append(
            ValidationFinding("", "single-group", "fewer than 2 distinct group labels present")
        )
    if label_ids and label_ids != list(range(len(label_ids))):
        findings.append(
            ValidationFinding("", "non-dense-label-ids", f"group label ids {label_ids} are not dense 0..G-1")
        )
    return findings


def induced_graph(
    table: EntityTable,
    edges: Iterable[tuple[str, str]],
    edition: str | None = None,
    dedupe: bool = False,
) -> LinkGraph:
    """Restrict a raw edge list to the table's covered entities.

    Keeps only edges whose both endpoints are covered entities (covered
    in `edition`, or in any edition when None), drops self-loops, and
    otherwise preserves edge multiplicity and order.  `dedupe=True`
    additionally keeps only the first occurrence of each (from, to)
    pair.
    """
    nodes = table.covered_ids(edition)
    node_set = set(nodes)
    kept: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for frm, to in edges:
        if frm == to or frm not in node_set or to not in node_set:
            continue
        if dedupe:
            if (frm, to) in seen:
                continue
            seen.add((frm, to))
        kept.append((frm, to))
    return LinkGraph(nodes, tuple(kept))


def dedupe_edges(graph: LinkGraph) -> LinkGraph:
    """Collapse parallel edges, keeping first occurrences in order."""
    seen: set[tuple[str, str]] = set()
    kept = []
    for edge in graph.edges:
        if edge in seen:
            continue
        seen.add(edge)
        kept.append(edge)
    return LinkGraph(graph.nodes, tuple(kept))
