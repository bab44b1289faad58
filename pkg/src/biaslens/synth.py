"""Synthetic dataset generator with planted bias parameters.

The generator solves analytically for a 2x2 group-pair edge-fraction
matrix whose assortativity coefficient and cross-group log-ratio
asymmetry equal the requested targets, then samples a bundle (entities,
graphs, corpus, featured log, lexicons) whose estimated statistics
converge to those targets.  Every draw comes from a single seeded
numpy PCG64 generator consumed in a fixed order, so equal specs yield
byte-identical bundles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from biaslens.ingest import DatasetBundle
from biaslens.model import Document, Entity, EntityTable, GroupLabel, induced_graph

CATEGORY_NAMES = ("Gender", "Relationship", "Family")


class SynthError(ValueError):
    """Raised when the requested parameter combination is infeasible."""


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a planted-bias bundle.

    n_nodes maps exactly two group names to node counts; the smaller
    group plays the minority role in the planted asymmetry.  Rates are
    probabilities in [0, 1].  shared_vocab / exclusive_vocab size the
    stem pools; each group's exclusive stems appear only in its own
    documents, at exclusive_boost times a shared stem's rate.
    """

    n_nodes: Mapping[str, int]
    target_assortativity: float = 0.0
    target_asymmetry: float = 0.0
    mean_out_degree: float = 4.0
    shared_vocab: int = 200
    exclusive_vocab: int = 30
    exclusive_boost: float = 10.0
    docs_per_entity: int = 1
    doc_length: int = 60
    coverage: Mapping[str, float] = field(default_factory=dict)  # default 1.0
    featured_rate: Mapping[str, float] = field(default_factory=dict)  # default 0.0
    categorized_fraction: float = 0.6
    editions: tuple[str, ...] = ("xx",)
    dataset: str = "synth"
    seed: int = 0

    def role_names(self) -> tuple[str, str]:
        if len(self.n_nodes) != 2:
            raise SynthError("n_nodes must name exactly two groups")
        (n1, g1), (n2, g2) = sorted((n, g) for g, n in self.n_nodes.items())
        return g1, g2  # (minority, majority)


def _validate(spec: SynthSpec) -> None:
    minor, major = spec.role_names()
    for g, n in spec.n_nodes.items():
        if n < 1:
            raise SynthError(f"group {g!r} needs at least 1 node")
    for name, rates in (("coverage", spec.coverage), ("featured_rate", spec.featured_rate)):
        for g, r in rates.items():
            if not 0.0 <= r <= 1.0:
                raise SynthError(f"{name}[{g!r}]={r} outside [0, 1]")
    if not -1.0 < spec.target_assortativity < 1.0:
        raise SynthError("target_assortativity must lie in (-1, 1)")
    if spec.mean_out_degree <= 0:
        raise SynthError("mean_out_degree must be positive")
    if not 0.0 <= spec.categorized_fraction <= 1.0:
        raise SynthError("categorized_fraction outside [0, 1]")


def solve_mixing(
    minority_fraction: float, target_assortativity: float, target_asymmetry: float
) -> np.ndarray:
    """Edge-fraction matrix [[e11,e12],[e21,e22]] (minority first) hitting the targets.

    Origin marginals are fixed to the group node fractions (every node
    emits edges at the same rate).  With a1 the minority fraction and
    u = e21 - e12, the end marginal is b1 = a1 + u and the
    assortativity constraint pins e12 + e21 = (1 - r) * (1 - sum_g
    a_g*b_g), leaving a one-dimensional root find in u for the
    asymmetry.  Raises SynthError with the violated constraint when no
    valid matrix exists.
    """
    a1 = minority_fraction
    a2 = 1.0 - a1
    r = target_assortativity
    if not 0.0 < a1 < 1.0:
        raise SynthError(f"minority fraction {a1} outside (0, 1)")

    def cells(u: float) -> tuple[float, float, float, float] | None:
        b1 = a1 + u
        b2 = a2 - u
        if b1 <= 0.0 or b2 <= 0.0:
            return None
        sum_ab = a1 * b1 + a2 * b2
        d = (1.0 - r) * (1.0 - sum_ab)
        x = (d - u) / 2.0  # e12: minority -> majority
        y = (d + u) / 2.0  # e21: majority -> minority
        e11 = a1 - x
        e22 = a2 - y
        if min(x, y, e11, e22) <= 0.0:
            return None
        return e11, x, y, e22

    def asym(u: float) -> float | None:
        c = cells(u)
        if c is None:
            return None
        _, x, y, _ = c
        b1, b2 = a1 + u, a2 - u
        return math.log(x * a2 * b1 / (y * a1 * b2))

    # bracket the root on a feasibility scan, then bisect
    grid = np.linspace(-a1, a2, 4001)[1:-1]
    values = [(u, asym(u)) for u in grid]
    feasible = [(u, v) for u, v in values if v is not None]
    if not feasible:
        raise SynthError(
            f"no valid edge-fraction matrix: assortativity {r} infeasible "
            f"for minority fraction {a1}"
        )
    bracket = None
    for (u1, v1), (u2, v2) in zip(feasible, feasible[1:]):
        if (v1 - target_asymmetry) * (v2 - target_asymmetry) <= 0.0:
            bracket = (u1, v1, u2)
            break
    if bracket is None:
        span = (min(v for _, v in feasible), max(v for _, v in feasible))
        raise SynthError(
            f"asymmetry {target_asymmetry} unattainable: feasible range "
            f"{span[0]:.4f}..{span[1]:.4f} at assortativity {r}, "
            f"minority fraction {a1}"
        )
    lo, f_lo, hi = bracket
    f_lo -= target_asymmetry
    for _ in range(100):
        mid = (lo + hi) / 2.0
        v = asym(mid)
        assert v is not None  # feasibility is an interval; mid lies inside
        f_mid = v - target_asymmetry
        if f_mid * f_lo > 0.0:
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    u = (lo + hi) / 2.0
    c = cells(u)
    assert c is not None
    e11, e12, e21, e22 = c
    matrix = np.array([[e11, e12], [e21, e22]])

    # closed-form self-check on the solved matrix
    a = matrix.sum(axis=1)
    b = matrix.sum(axis=0)
    sum_ab = float(a @ b)
    got_r = (float(np.trace(matrix)) - sum_ab) / (1.0 - sum_ab)
    got_a = math.log(e12 * a[1] * b[0] / (e21 * a[0] * b[1]))
    if abs(got_r - r) > 1e-9 or abs(got_a - target_asymmetry) > 1e-9:
        raise SynthError("mixing solver failed to converge")
    return matrix


def _stem_pool(prefix: str, count: int) -> list[str]:
    """Alphabetic-only stems so tokenization round-trips them unchanged."""
    out = []
    for i in range(count):
        suffix = ""
        v = i
        for _ in range(3):
            suffix = chr(ord("a") + v % 26) + suffix
            v //= 26
        out.append(prefix + suffix)
    return out


def _draw_edges(
    rng: np.random.Generator,
    node_ids: tuple[list[str], list[str]],
    mixing: np.ndarray,
    n_edges: int,
) -> list[tuple[str, str]]:
    pair_types = rng.choice(4, size=n_edges, p=mixing.reshape(-1))
    froms = np.empty(n_edges, dtype=np.int64)
    tos = np.empty(n_edges, dtype=np.int64)
    sizes = (len(node_ids[0]), len(node_ids[1]))
    for t in range(4):
        gi, gj = divmod(t, 2)
        mask = pair_types == t
        k = int(mask.sum())
        if k == 0:
            continue
        f = rng.integers(0, sizes[gi], size=k)
        to = rng.integers(0, sizes[gj], size=k)
        if gi == gj:
            # resample collisions: self-loops carry no mixing information
            bad = f == to
            while bad.any():
                to[bad] = rng.integers(0, sizes[gj], size=int(bad.sum()))
                bad = f == to
        froms[mask] = f
        tos[mask] = to
    out = []
    for e in range(n_edges):
        gi, gj = divmod(int(pair_types[e]), 2)
        out.append((node_ids[gi][froms[e]], node_ids[gj][tos[e]]))
    return out


def generate(spec: SynthSpec) -> DatasetBundle:
    """Deterministic planted-bias bundle for the given spec."""
    _validate(spec)
    minor, major = spec.role_names()
    groups = (minor, major)
    rng = np.random.default_rng(spec.seed)

    shared = _stem_pool("sh", spec.shared_vocab)
    exclusive = {g: _stem_pool(g[:1] + "x", spec.exclusive_vocab) for g in groups}
    if set(exclusive[minor]) & set(exclusive[major]):
        raise SynthError("exclusive vocabularies overlap; use distinct group initials")

    labels = {name: GroupLabel(i, name) for i, name in enumerate(sorted(groups))}
    entities = []
    covered_flags: dict[str, dict[str, bool]] = {}
    for g in groups:
        rate = spec.coverage.get(g, 1.0)
        for i in range(spec.n_nodes[g]):
            eid = f"{g}{i:06d}"
            covered_flags[eid] = {
                ed: bool(rng.random() < rate) for ed in spec.editions
            }
    # document token counts drawn up front; first doc's count doubles as
    # the article length so coverage and lexical metadata stay coherent
    doc_counts: dict[tuple[str, str], list[int]] = {}
    for g in groups:
        for i in range(spec.n_nodes[g]):
            eid = f"{g}{i:06d}"
            for ed in spec.editions:
                if covered_flags[eid][ed] and spec.docs_per_entity > 0:
                    doc_counts[(eid, ed)] = [
                        int(rng.poisson(spec.doc_length)) + 1
                        for _ in range(spec.docs_per_entity)
                    ]
    for g in groups:
        for i in range(spec.n_nodes[g]):
            eid = f"{g}{i:06d}"
            lengths = {
                ed: (doc_counts.get((eid, ed), [None])[0] if covered_flags[eid][ed] else None)
                for ed in spec.editions
            }
            entities.append(
                Entity(
                    id=eid,
                    group=labels[g],
                    datasets=frozenset({spec.dataset}),
                    covered=covered_flags[eid],
                    article_length=lengths,
                )
            )
    table = EntityTable.from_entities(entities, spec.editions)

    graphs = {}
    for ed in spec.editions:
        node_ids = tuple(
            [e.id for e in table.entities if e.group.name == g and e.covered[ed]]
            for g in groups
        )
        n_cov = len(node_ids[0]) + len(node_ids[1])
        if len(node_ids[0]) < 2 or len(node_ids[1]) < 2:
            raise SynthError(f"edition {ed!r}: each group needs >= 2 covered nodes")
        mixing = solve_mixing(
            len(node_ids[0]) / n_cov, spec.target_assortativity, spec.target_asymmetry
        )
        n_edges = int(round(spec.mean_out_degree * n_cov))
        edges = _draw_edges(rng, node_ids, mixing, n_edges)
        graphs[ed] = induced_graph(table, edges, ed)

    # token distributions: shared stems at weight 1, own-group exclusive
    # stems boosted; the other group's exclusive stems never appear
    vocab = {g: shared + exclusive[g] for g in groups}
    probs = {}
    for g in groups:
        w = np.concatenate(
            [np.ones(len(shared)), np.full(len(exclusive[g]), spec.exclusive_boost)]
        )
        probs[g] = w / w.sum()

    corpus: dict[str, list[Document]] = {ed: [] for ed in spec.editions}
    for ed in spec.editions:
        for e in table.entities:
            if not e.covered[ed] or spec.docs_per_entity < 1:
                continue
            g = e.group.name
            for count in doc_counts[(e.id, ed)]:
                tokens = rng.choice(len(vocab[g]), size=count, p=probs[g])
                text = " ".join(vocab[g][t] for t in tokens)
                corpus[ed].append(Document(e.id, ed, text))

    featured: list[tuple[str, int]] = []
    first_ed = spec.editions[0]
    for e in table.entities:
        rate = spec.featured_rate.get(e.group.name, 0.0)
        if rate <= 0.0 or not e.covered[first_ed]:
            continue
        if rng.random() < rate:
            featured.append((e.id, 2010 + int(rng.integers(0, 5))))

    lexicons: dict[str, set[str]] = {name: set() for name in CATEGORY_NAMES}
    n_cat = int(round(spec.categorized_fraction * spec.exclusive_vocab))
    for i, stem in enumerate(exclusive[minor][:n_cat]):
        lexicons[CATEGORY_NAMES[i % len(CATEGORY_NAMES)]].add(stem)

    external = None
    if len(spec.editions) >= 3:
        external = {ed: float(i + 1) for i, ed in enumerate(sorted(spec.editions))}

    return DatasetBundle(
        table=table,
        graphs=graphs,
        corpus={ed: tuple(docs) for ed, docs in corpus.items()},
        featured_log=tuple(featured),
        lexicons={k: frozenset(v) for k, v in lexicons.items()},
        external_ranking=external,
    )
