"""Parse and validate the on-disk dataset formats; emit them back out.

Formats (all UTF-8, locale-independent):

* entities.tsv  -- tab-separated with header: id, gender, datasets
  (comma list), covered_<edition> booleans, length_<edition> integers.
  Fields must not contain tabs or newlines.
* edges_<ed>.tsv -- two columns (from, to), no header.
* corpus_<ed>.jsonl -- one JSON object per line: {id, edition, text}.
* featured.tsv -- two columns (id, year), no header.
* lexicons.tsv -- two columns (stem, category); category is one of
  Gender / Relationship / Family and each stem maps to exactly one.
* external_ranking.tsv -- two columns (edition, rank).

Per-row problems are collected as ParseIssue entries, never raised;
structural problems (missing required columns, lexicon category
overlap, unknown category) raise IngestError.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from biaslens.model import (
    MISSING_GROUP_SENTINELS,
    Document,
    Entity,
    EntityTable,
    GroupLabel,
    LinkGraph,
    induced_graph,
)

CATEGORIES = ("Gender", "Relationship", "Family")
_TRUE = {"1", "true", "yes", "y"}
_FALSE = {"0", "false", "no", "n", ""}


class IngestError(ValueError):
    """Fatal structural problem in an input file."""


@dataclass(frozen=True)
class ParseIssue:
    path: str
    line: int  # 1-based; 0 for file-level issues
    message: str


@dataclass(frozen=True)
class DatasetBundle:
    """Everything one analysis run consumes, fully cross-referenced."""

    table: EntityTable
    graphs: Mapping[str, LinkGraph]
    corpus: Mapping[str, tuple[Document, ...]]
    featured_log: tuple[tuple[str, int], ...]
    lexicons: Mapping[str, frozenset[str]]
    external_ranking: Mapping[str, float] | None = None

    def validate(self) -> list[str]:
        """Cross-reference findings: every id must resolve in the table."""
        problems = []
        known = set(self.table.by_id)
        for ed, graph in self.graphs.items():
            for node in graph.nodes:
                if node not in known:
                    problems.append(f"graph {ed!r}: unknown node {node!r}")
        for ed, docs in self.corpus.items():
            for doc in docs:
                if doc.entity_id not in known:
                    problems.append(f"corpus {ed!r}: unknown entity {doc.entity_id!r}")
                if not doc.text:
                    problems.append(f"corpus {ed!r}: empty text for {doc.entity_id!r}")
        for eid, _year in self.featured_log:
            if eid not in known:
                problems.append(f"featured log: unknown entity {eid!r}")
        return problems


def _read_lines(path: str | Path) -> list[str]:
    # universal newlines: CRLF and LF files parse identically
    with open(path, encoding="utf-8", newline=None) as fh:
        return fh.read().splitlines()


def load_entities(path: str | Path) -> tuple[EntityTable, list[ParseIssue]]:
    """Entity table from TSV; bad rows are skipped and reported.

    Rows whose gender field is a missing-value sentinel (empty,
    "unknown", "na", ...) are excluded: entities without a known group
    take no part in any analysis.  Duplicate ids keep the first row.
    """
    lines = _read_lines(path)
    issues: list[ParseIssue] = []
    spath = str(path)
    if not lines:
        raise IngestError(f"{spath}: empty entities file")
    header = lines[0].split("\t")
    required = ("id", "gender", "datasets")
    for col in required:
        if col not in header:
            raise IngestError(f"{spath}: missing required column {col!r}")
    col_idx = {name: i for i, name in enumerate(header)}
    editions = [c[len("covered_"):] for c in header if c.startswith("covered_")]

    entities: list[Entity] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != len(header):
            issues.append(
                ParseIssue(spath, lineno, f"expected {len(header)} fields, got {len(fields)}")
            )
            continue
        eid = fields[col_idx["id"]].strip()
        if not eid:
            issues.append(ParseIssue(spath, lineno, "empty id"))
            continue
        if eid in seen:
            issues.append(ParseIssue(spath, lineno, f"duplicate id {eid!r}; row skipped"))
            continue
        gender = fields[col_idx["gender"]].strip()
        if gender.lower() in MISSING_GROUP_SENTINELS:
            issues.append(
                ParseIssue(spath, lineno, f"entity {eid!r} has unknown group; excluded")
            )
            continue
        datasets = frozenset(
            d.strip() for d in fields[col_idx["datasets"]].split(",") if d.strip()
        )
        covered: dict[str, bool] = {}
        lengths: dict[str, int | None] = {}
        bad_row = False
        for ed in editions:
            raw_cov = fields[col_idx[f"covered_{ed}"]].strip().lower()
            if raw_cov in _TRUE:
                covered[ed] = True
            elif raw_cov in _FALSE:
                covered[ed] = False
            else:
                issues.append(
                    ParseIssue(spath, lineno, f"bad covered_{ed} value {raw_cov!r}")
                )
                bad_row = True
                break
            raw_len = fields[col_idx[f"length_{ed}"]].strip() if f"length_{ed}" in col_idx else ""
            if raw_len == "":
                lengths[ed] = None
            else:
                try:
                    value = int(raw_len)
                except ValueError:
                    issues.append(
                        ParseIssue(spath, lineno, f"bad length_{ed} value {raw_len!r}")
                    )
                    bad_row = True
                    break
                if value < 0:
                    issues.append(
                        ParseIssue(spath, lineno, f"negative length_{ed} value {value}")
                    )
                    bad_row = True
                    break
                lengths[ed] = value
        if bad_row:
            continue
        seen.add(eid)
        entities.append(
            Entity(
                id=eid,
                group=GroupLabel(0, gender),  # ids reassigned by from_entities
                datasets=datasets,
                covered=covered,
                article_length=lengths,
            )
        )
    return EntityTable.from_entities(entities, editions), issues


def load_edges(path: str | Path) -> tuple[list[tuple[str, str]], list[ParseIssue]]:
    """Raw ordered edge list; no endpoint validation here."""
    issues: list[ParseIssue] = []
    edges: list[tuple[str, str]] = []
    spath = str(path)
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0] or not fields[1]:
            issues.append(ParseIssue(spath, lineno, f"malformed edge line {line!r}"))
            continue
        edges.append((fields[0], fields[1]))
    return edges, issues


def load_corpus(path: str | Path) -> tuple[list[Document], list[ParseIssue]]:
    """Documents from a JSON-lines file; blank texts are skipped."""
    issues: list[ParseIssue] = []
    docs: list[Document] = []
    spath = str(path)
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            issues.append(ParseIssue(spath, lineno, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict) or not {"id", "edition", "text"} <= set(obj):
            issues.append(ParseIssue(spath, lineno, "object needs id, edition, text keys"))
            continue
        if not obj["text"]:
            issues.append(ParseIssue(spath, lineno, f"empty text for {obj['id']!r}"))
            continue
        docs.append(Document(str(obj["id"]), str(obj["edition"]), str(obj["text"])))
    return docs, issues


def load_featured(path: str | Path) -> tuple[list[tuple[str, int]], list[ParseIssue]]:
    issues: list[ParseIssue] = []
    log: list[tuple[str, int]] = []
    spath = str(path)
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0]:
            issues.append(ParseIssue(spath, lineno, f"malformed featured line {line!r}"))
            continue
        try:
            year = int(fields[1])
        except ValueError:
            issues.append(ParseIssue(spath, lineno, f"bad year {fields[1]!r}"))
            continue
        log.append((fields[0], year))
    return log, issues


def load_lexicons(path: str | Path) -> dict[str, frozenset[str]]:
    """Category lexicons from stem->category TSV.

    The categories partition the stems: a stem mapped to two different
    categories is a fatal error (everything unmapped is Others).
    """
    spath = str(path)
    canonical = {c.lower(): c for c in CATEGORIES}
    assignment: dict[str, str] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0]:
            raise IngestError(f"{spath}:{lineno}: malformed lexicon line {line!r}")
        stem = fields[0].strip()
        cat = canonical.get(fields[1].strip().lower())
        if cat is None:
            raise IngestError(
                f"{spath}:{lineno}: unknown category {fields[1]!r} "
                f"(expected one of {', '.join(CATEGORIES)})"
            )
        if stem in assignment and assignment[stem] != cat:
            raise IngestError(
                f"{spath}:{lineno}: stem {stem!r} mapped to both "
                f"{assignment[stem]} and {cat}; categories must partition stems"
            )
        assignment[stem] = cat
    out: dict[str, set[str]] = {c: set() for c in CATEGORIES}
    for stem, cat in assignment.items():
        out[cat].add(stem)
    return {c: frozenset(s) for c, s in out.items()}


def load_external_ranking(path: str | Path) -> tuple[dict[str, float], list[ParseIssue]]:
    issues: list[ParseIssue] = []
    ranking: dict[str, float] = {}
    spath = str(path)
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0]:
            issues.append(ParseIssue(spath, lineno, f"malformed ranking line {line!r}"))
            continue
        try:
            ranking[fields[0]] = float(fields[1])
        except ValueError:
            issues.append(ParseIssue(spath, lineno, f"bad rank value {fields[1]!r}"))
    return ranking, issues


# ---------------------------------------------------------------------------
# Bundle assembly and emission
# ---------------------------------------------------------------------------

def bundle_paths(directory: str | Path, editions: Iterable[str]) -> dict[str, Path]:
    base = Path(directory)
    paths = {
        "entities": base / "entities.tsv",
        "featured": base / "featured.tsv",
        "lexicons": base / "lexicons.tsv",
        "external_ranking": base / "external_ranking.tsv",
    }
    for ed in editions:
        paths[f"edges_{ed}"] = base / f"edges_{ed}.tsv"
        paths[f"corpus_{ed}"] = base / f"corpus_{ed}.jsonl"
    return paths


def load_bundle(
    entities_path: str | Path,
    edges_paths: Mapping[str, str | Path] | None = None,
    corpus_paths: Mapping[str, str | Path] | None = None,
    featured_path: str | Path | None = None,
    lexicons_path: str | Path | None = None,
    external_ranking_path: str | Path | None = None,
    dedupe_edges: bool = False,
) -> tuple[DatasetBundle, list[ParseIssue]]:
    """Assemble a bundle; entries referencing unknown entities are dropped."""
    table, issues = load_entities(entities_path)
    known = set(table.by_id)

    graphs: dict[str, LinkGraph] = {}
    for ed, path in (edges_paths or {}).items():
        edges, edge_issues = load_edges(path)
        issues.extend(edge_issues)
        graphs[ed] = induced_graph(table, edges, ed, dedupe=dedupe_edges)

    corpus: dict[str, tuple[Document, ...]] = {}
    for ed, path in (corpus_paths or {}).items():
        docs, doc_issues = load_corpus(path)
        issues.extend(doc_issues)
        kept = []
        for doc in docs:
            if doc.entity_id not in known:
                issues.append(
                    ParseIssue(str(path), 0, f"document for unknown entity {doc.entity_id!r} dropped")
                )
                continue
            kept.append(doc)
        corpus[ed] = tuple(kept)

    featured: tuple[tuple[str, int], ...] = ()
    if featured_path is not None:
        log, feat_issues = load_featured(featured_path)
        issues.extend(feat_issues)
        kept_log = []
        for eid, year in log:
            if eid not in known:
                issues.append(
                    ParseIssue(str(featured_path), 0, f"featured entry for unknown entity {eid!r} dropped")
                )
                continue
            kept_log.append((eid, year))
        featured = tuple(kept_log)

    lexicons: dict[str, frozenset[str]] = {c: frozenset() for c in CATEGORIES}
    if lexicons_path is not None:
        lexicons = load_lexicons(lexicons_path)

    external = None
    if external_ranking_path is not None:
        external, rank_issues = load_external_ranking(external_ranking_path)
        issues.extend(rank_issues)

    bundle = DatasetBundle(
        table=table,
        graphs=graphs,
        corpus=corpus,
        featured_log=featured,
        lexicons=lexicons,
        external_ranking=external,
    )
    return bundle, issues


def _bool_str(value: bool) -> str:
    return "1" if value else "0"


def write_bundle(bundle: DatasetBundle, directory: str | Path) -> dict[str, Path]:
    """Write every bundle part in the canonical on-disk formats.

    Writing then loading yields an equal bundle; the writer is
    deterministic (canonical column order, entity order preserved,
    lexicon stems sorted).
    """
    base = Path(directory)
    base.mkdir(parents=True, exist_ok=True)
    editions = bundle.table.language_editions
    paths = bundle_paths(base, editions)

    header = ["id", "gender", "datasets"]
    for ed in editions:
        header += [f"covered_{ed}", f"length_{ed}"]
    rows = ["\t".join(header)]
    for e in bundle.table.entities:
        row = [e.id, e.group.name, ",".join(sorted(e.datasets))]
        for ed in editions:
            row.append(_bool_str(e.covered.get(ed, False)))
            length = e.article_length.get(ed)
            row.append("" if length is None else str(length))
        rows.append("\t".join(row))
    paths["entities"].write_text("\n".join(rows) + "\n", encoding="utf-8")

    for ed in editions:
        graph = bundle.graphs.get(ed)
        lines = [f"{f}\t{t}" for f, t in (graph.edges if graph else ())]
        paths[f"edges_{ed}"].write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
        )
        docs = bundle.corpus.get(ed, ())
        doc_lines = [
            json.dumps(
                {"id": d.entity_id, "edition": d.edition, "text": d.text},
                ensure_ascii=False,
                sort_keys=True,
            )
            for d in docs
        ]
        paths[f"corpus_{ed}"].write_text(
            "\n".join(doc_lines) + ("\n" if doc_lines else ""), encoding="utf-8"
        )

    feat_lines = [f"{eid}\t{year}" for eid, year in bundle.featured_log]
    paths["featured"].write_text(
        "\n".join(feat_lines) + ("\n" if feat_lines else ""), encoding="utf-8"
    )

    lex_lines = []
    for cat in CATEGORIES:
        for stem in sorted(bundle.lexicons.get(cat, ())):
            lex_lines.append(f"{stem}\t{cat}")
    paths["lexicons"].write_text(
        "\n".join(lex_lines) + ("\n" if lex_lines else ""), encoding="utf-8"
    )

    if bundle.external_ranking is not None:
        rank_lines = [
            f"{ed}\t{bundle.external_ranking[ed]!r}" for ed in sorted(bundle.external_ranking)
        ]
        paths["external_ranking"].write_text(
            "\n".join(rank_lines) + ("\n" if rank_lines else ""), encoding="utf-8"
        )
    else:
        paths.pop("external_ranking")
    return paths


def load_bundle_dir(
    directory: str | Path, dedupe_edges: bool = False
) -> tuple[DatasetBundle, list[ParseIssue]]:
    """Load a directory written by write_bundle (files discovered by name)."""
    base = Path(directory)
    entities = base / "entities.tsv"
    if not entities.exists():
        raise IngestError(f"{entities}: missing entities file")
    # editions come from the header so edge/corpus files can be discovered
    header = _read_lines(entities)[0].split("\t")
    editions = [c[len("covered_"):] for c in header if c.startswith("covered_")]
    paths = bundle_paths(base, editions)
    return load_bundle(
        entities_path=entities,
        edges_paths={ed: paths[f"edges_{ed}"] for ed in editions if paths[f"edges_{ed}"].exists()},
        corpus_paths={ed: paths[f"corpus_{ed}"] for ed in editions if paths[f"corpus_{ed}"].exists()},
        featured_path=paths["featured"] if paths["featured"].exists() else None,
        lexicons_path=paths["lexicons"] if paths["lexicons"].exists() else None,
        external_ranking_path=(
            paths["external_ranking"] if paths["external_ranking"].exists() else None
        ),
        dedupe_edges=dedupe_edges,
    )
