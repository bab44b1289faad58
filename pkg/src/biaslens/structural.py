"""Structural bias: link assortativity, cross-group asymmetry, null
models, and centrality comparisons on the link graph.

The mixing matrix cell for groups (g1, g2) is the natural-log
likelihood ratio between the conditional probability that an edge ends
in g2 given it starts in g1 and the base rate of ending in g2.
Positive cells mean increased connectivity from g1 to g2.  Asymmetry
between a minority and majority group is the difference of the two
cross cells.  Significance comes from three randomization null models
run thousands of times each.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from biaslens.model import EntityTable, GroupLabel, LinkGraph
from biaslens.stats import (
    KS,
    MonteCarloEnvelope,
    TestResult,
    envelope,
    ks_two_sample,
    wilcoxon_rank_sum,
)

RANDOMIZED_GENDER = "randomized_gender"
RANDOMIZED_LINK_END = "randomized_link_end"
RANDOMIZED_LINK_ORIGIN = "randomized_link_origin"
NULL_MODELS = (RANDOMIZED_GENDER, RANDOMIZED_LINK_END, RANDOMIZED_LINK_ORIGIN)

WORKERS_ENV = "BIASLENS_WORKERS"


class StructuralError(ValueError):
    """Raised for degenerate graphs (no edges, single group, undefined cells)."""


@dataclass(frozen=True)
class AssortativityMatrix:
    """Log-likelihood mixing matrix with the raw counts that produced it.

    log_ratios[i][j] is None where the (i, j) edge count is zero: with
    no observed edges the ratio is undefined, and we report that
    explicitly rather than smoothing.
    """

    labels: tuple[GroupLabel, ...]
    edge_counts: tuple[tuple[int, ...], ...]
    log_ratios: tuple[tuple[float | None, ...], ...]
    base_rates: tuple[float, ...]

    @property
    def n_edges(self) -> int:
        return sum(sum(row) for row in self.edge_counts)

    def index_of(self, group_name: str) -> int:
        for i, lab in enumerate(self.labels):
            if lab.name == group_name:
                return i
        raise StructuralError(f"unknown group {group_name!r}")

    def cell(self, from_group: str, to_group: str) -> float | None:
        return self.log_ratios[self.index_of(from_group)][self.index_of(to_group)]


@dataclass(frozen=True)
class StructuralResult:
    matrix: AssortativityMatrix
    assortativity: float
    asymmetry: float
    roles: tuple[str, str]  # (minority, majority) group names
    null_envelopes: Mapping[str, tuple[MonteCarloEnvelope, MonteCarloEnvelope]]
    n_runs: int
    master_seed: int

    def outside_null(self, model: str) -> tuple[bool, bool]:
        """Whether (assortativity, asymmetry) fall outside the model's CI."""
        env_a, env_s = self.null_envelopes[model]
        return (not env_a.contains(self.assortativity), not env_s.contains(self.asymmetry))

    @property
    def significant(self) -> dict[str, dict[str, bool]]:
        return {
            model: dict(zip(("assortativity", "asymmetry"), self.outside_null(model)))
            for model in self.null_envelopes
        }


@dataclass(frozen=True)
class CentralityProfile:
    roles: tuple[str, str]
    in_degrees: Mapping[str, tuple[int, ...]]  # group name -> per-node values
    in_kcores: Mapping[str, tuple[int, ...]]
    ccdf: Mapping[str, Mapping[str, tuple[tuple[int, float], ...]]]  # metric -> group -> (t, P(X>t))
    tests: Mapping[str, Mapping[str, TestResult]]  # metric -> {wilcoxon, ks}


# ---------------------------------------------------------------------------
# Mixing matrix and scalar statistics
# ---------------------------------------------------------------------------

def _group_edge_counts(graph: LinkGraph, table: EntityTable) -> np.ndarray:
    g = len(table.labels)
    counts = np.zeros((g, g), dtype=np.int64)
    by_id = table.by_id
    for frm, to in graph.edges:
        counts[by_id[frm].group.id, by_id[to].group.id] += 1
    return counts


def _check_counts(counts: np.ndarray) -> None:
    total = int(counts.sum())
    if total == 0:
        raise StructuralError("graph has no edges")
    touched = np.flatnonzero(counts.sum(axis=0) + counts.sum(axis=1))
    if len(touched) < 2:
        raise StructuralError("edges touch a single group")


def _matrix_from_counts(
    counts: np.ndarray, labels: Sequence[GroupLabel]
) -> AssortativityMatrix:
    _check_counts(counts)
    total = int(counts.sum())
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    g = len(labels)
    ratios: list[tuple[float | None, ...]] = []
    for i in range(g):
        row: list[float | None] = []
        for j in range(g):
            c = int(counts[i, j])
            if c == 0:
                row.append(None)
            else:
                row.append(math.log(c * total / (row_sums[i] * col_sums[j])))
        ratios.append(tuple(row))
    return AssortativityMatrix(
        labels=tuple(labels),
        edge_counts=tuple(tuple(int(v) for v in row) for row in counts),
        log_ratios=tuple(ratios),
        base_rates=tuple(float(col_sums[j] / total) for j in range(g)),
    )


def assortativity_matrix(graph: LinkGraph, table: EntityTable) -> AssortativityMatrix:
    """Log-likelihood mixing matrix of the graph's group-to-group edges.

    Probabilities are estimated as edge-count ratios over the multiset
    of edges.  Raises StructuralError when the graph has no edges or
    all edges touch a single group.
    """
    return _matrix_from_counts(_group_edge_counts(graph, table), table.labels)


def _newman_from_counts(counts: np.ndarray) -> float:
    _check_counts(counts)
    total = counts.sum()
    e = counts / total
    a = e.sum(axis=1)
    b = e.sum(axis=0)
    sum_ab = float(a @ b)
    denom = 1.0 - sum_ab
    if denom <= 1e-15:
        raise StructuralError("degenerate: single-group edges")
    return (float(np.trace(e)) - sum_ab) / denom


def newman_assortativity(graph: LinkGraph, table: EntityTable) -> float:
    """Standard assortativity coefficient over the group mixing matrix.

    (sum_g e_gg - sum_g a_g*b_g) / (1 - sum_g a_g*b_g), with e the
    joint edge fractions and a, b the origin/end marginals.
    """
    return _newman_from_counts(_group_edge_counts(graph, table))


def asymmetry(matrix: AssortativityMatrix, g_minor: str, g_major: str) -> float:
    """Cross-cell difference L(minor, major) - L(major, minor).

    Positive values mean the minority group links to the majority more
    than the reverse, controlling for base rates.
    """
    forward = matrix.cell(g_minor, g_major)
    backward = matrix.cell(g_major, g_minor)
    if forward is None:
        raise StructuralError(f"cell L({g_minor},{g_major}) undefined: zero edge count")
    if backward is None:
        raise StructuralError(f"cell L({g_major},{g_minor}) undefined: zero edge count")
    return forward - backward


def _asymmetry_from_counts(counts: np.ndarray, i_minor: int, i_major: int) -> float:
    c_fm = counts[i_minor, i_major]
    c_mf = counts[i_major, i_minor]
    if c_fm == 0:
        raise StructuralError("cell L(minor,major) undefined: zero edge count")
    if c_mf == 0:
        raise StructuralError("cell L(major,minor) undefined: zero edge count")
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    return math.log(c_fm * row[i_major] * col[i_minor] / (c_mf * row[i_minor] * col[i_major]))


def infer_roles(graph: LinkGraph, table: EntityTable) -> tuple[str, str]:
    """(minority, majority) group names by node count in the graph."""
    sizes: dict[str, int] = {lab.name: 0 for lab in table.labels}
    for node in graph.nodes:
        sizes[table.by_id[node].group.name] += 1
    present = [(n, name) for name, n in sizes.items() if n > 0]
    if len(present) < 2:
        raise StructuralError("fewer than 2 groups present in graph")
    present.sort(key=lambda t: (t[0], t[1]))
    return present[0][1], present[-1][1]


# ---------------------------------------------------------------------------
# Null models
# ---------------------------------------------------------------------------

class _Context:
    """Graph unpacked into arrays for fast repeated randomization."""

    def __init__(self, graph: LinkGraph, table: EntityTable, roles: tuple[str, str] | None):
        if not graph.edges:
            raise StructuralError("graph has no edges")
        self.labels = table.labels
        self.g = len(self.labels)
        index = {node: i for i, node in enumerate(graph.nodes)}
        self.node_groups = np.array(
            [table.by_id[node].group.id for node in graph.nodes], dtype=np.int64
        )
        self.from_idx = np.array([index[frm] for frm, _ in graph.edges], dtype=np.int64)
        self.to_idx = np.array([index[to] for _, to in graph.edges], dtype=np.int64)
        self.n_nodes = len(graph.nodes)
        if roles is None:
            roles = infer_roles(graph, table)
        self.roles = roles
        by_name = {lab.name: lab.id for lab in self.labels}
        self.i_minor = by_name[roles[0]]
        self.i_major = by_name[roles[1]]

    def counts(self, node_groups: np.ndarray, from_idx: np.ndarray, to_idx: np.ndarray) -> np.ndarray:
        flat = np.bincount(
            node_groups[from_idx] * self.g + node_groups[to_idx], minlength=self.g * self.g
        )
        return flat.reshape(self.g, self.g)

    def run(self, model: str, seed: int) -> tuple[float, float]:
        rng = np.random.default_rng(seed)
        if model == RANDOMIZED_GENDER:
            groups = rng.permutation(self.node_groups)
            counts = self.counts(groups, self.from_idx, self.to_idx)
        elif model == RANDOMIZED_LINK_END:
            to_idx = rng.integers(0, self.n_nodes, size=len(self.to_idx))
            counts = self.counts(self.node_groups, self.from_idx, to_idx)
        elif model == RANDOMIZED_LINK_ORIGIN:
            from_idx = rng.integers(0, self.n_nodes, size=len(self.from_idx))
            counts = self.counts(self.node_groups, from_idx, self.to_idx)
        else:
            raise StructuralError(f"unknown null model {model!r}")
        return (
            _newman_from_counts(counts),
            _asymmetry_from_counts(counts, self.i_minor, self.i_major),
        )


def derive_seed(master_seed: int, model: str, index: int) -> int:
    """Stable per-run seed from (master seed, model name, run index)."""
    digest = hashlib.blake2b(
        f"{master_seed}:{model}:{index}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def null_model_run(
    graph: LinkGraph,
    table: EntityTable,
    model: str,
    seed: int,
    roles: tuple[str, str] | None = None,
) -> tuple[float, float]:
    """(assortativity, asymmetry) of one randomization of the graph.

    randomized_gender permutes group labels over nodes and leaves the
    edge list untouched; randomized_link_end keeps each edge's origin
    and resamples its end uniformly from all nodes (out-degrees
    preserved); randomized_link_origin is the mirror image (in-degrees
    preserved).  Deterministic given the seed.
    """
    if model not in NULL_MODELS:
        raise StructuralError(f"unknown null model {model!r}")
    return _Context(graph, table, roles).run(model, seed)


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def structural_analysis(
    graph: LinkGraph,
    table: EntityTable,
    n_runs: int = 10_000,
    master_seed: int = 0,
    roles: tuple[str, str] | None = None,
    models: Sequence[str] = NULL_MODELS,
) -> StructuralResult:
    """Empirical assortativity and asymmetry with null-model envelopes.

    Runs each null model n_runs times; per-run seeds derive
    deterministically from the master seed, the model name and the run
    index, so results are independent of execution order and worker
    count (set via the BIASLENS_WORKERS environment variable).
    """
    ctx = _Context(graph, table, roles)
    counts = ctx.counts(ctx.node_groups, ctx.from_idx, ctx.to_idx)
    matrix = _matrix_from_counts(counts, ctx.labels)
    empirical_assort = _newman_from_counts(counts)
    empirical_asym = _asymmetry_from_counts(counts, ctx.i_minor, ctx.i_major)

    def run_block(model: str, indices: range) -> list[tuple[float, float]]:
        return [ctx.run(model, derive_seed(master_seed, model, i)) for i in indices]

    envelopes: dict[str, tuple[MonteCarloEnvelope, MonteCarloEnvelope]] = {}
    workers = _worker_count()
    for model in models:
        if workers == 1:
            pairs = run_block(model, range(n_runs))
        else:
            chunk = (n_runs + workers - 1) // workers
            blocks = [range(s, min(s + chunk, n_runs)) for s in range(0, n_runs, chunk)]
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = pool.map(run_block, [model] * len(blocks), blocks)
            pairs = [p for block in results for p in block]
        envelopes[model] = (
            envelope([p[0] for p in pairs], master_seed, n_runs),
            envelope([p[1] for p in pairs], master_seed, n_runs),
        )
    return StructuralResult(
        matrix=matrix,
        assortativity=empirical_assort,
        asymmetry=empirical_asym,
        roles=ctx.roles,
        null_envelopes=envelopes,
        n_runs=n_runs,
        master_seed=master_seed,
    )


# ---------------------------------------------------------------------------
# Centrality
# ---------------------------------------------------------------------------

def _dedup_edges_no_loops(graph: LinkGraph) -> set[tuple[str, str]]:
    return {(f, t) for f, t in graph.edges if f != t}


def in_degrees(graph: LinkGraph) -> dict[str, int]:
    """Deduplicated in-degree for every node (parallel edges count once)."""
    deg = {node: 0 for node in graph.nodes}
    for _, to in _dedup_edges_no_loops(graph):
        deg[to] += 1
    return deg


def in_kcore(graph: LinkGraph) -> dict[str, int]:
    """In-degree coreness of every node by iterative peeling.

    A node's coreness is the maximal k such that it survives repeated
    removal of all nodes with in-degree < k (in-degree recomputed on
    the remaining subgraph).  Edges are deduplicated for degree
    counting.  Linear-time bucket implementation: repeatedly remove the
    node of minimum current in-degree; in-degrees of its targets never
    drop below the current removal level.
    """
    nodes = list(graph.nodes)
    n = len(nodes)
    if n == 0:
        return {}
    index = {node: i for i, node in enumerate(nodes)}
    edges = _dedup_edges_no_loops(graph)
    deg = [0] * n
    out: list[list[int]] = [[] for _ in range(n)]
    for frm, to in edges:
        deg[index[to]] += 1
        out[index[frm]].append(index[to])

    max_deg = max(deg) if deg else 0
    # bucket sort nodes by degree
    bin_start = [0] * (max_deg + 2)
    for d in deg:
        bin_start[d + 1] += 1
    for d in range(1, max_deg + 2):
        bin_start[d] += bin_start[d - 1]
    pos = [0] * n
    vert = [0] * n
    fill = bin_start[:-1].copy()
    for v in range(n):
        pos[v] = fill[deg[v]]
        vert[pos[v]] = v
        fill[deg[v]] += 1

    cur_deg = deg.copy()
    core = [0] * n
    removed = [False] * n
    for i in range(n):
        v = vert[i]
        core[v] = cur_deg[v]
        removed[v] = True
        for w in out[v]:
            if removed[w] or cur_deg[w] <= cur_deg[v]:
                continue
            # move w one bucket down: swap with first element of its bucket
            dw = cur_deg[w]
            pw = pos[w]
            ps = bin_start[dw]
            u = vert[ps]
            if u != w:
                vert[ps], vert[pw] = w, u
                pos[w], pos[u] = ps, pw
            bin_start[dw] += 1
            cur_deg[w] -= 1
    return {nodes[v]: core[v] for v in range(n)}


def ccdf_points(values: Sequence[int]) -> tuple[tuple[int, float], ...]:
    """P(X > t) at integer thresholds t = 0..max(values); strictly greater."""
    if not values:
        return ()
    n = len(values)
    top = max(values)
    points = []
    for t in range(top + 1):
        points.append((t, sum(1 for v in values if v > t) / n))
    return tuple(points)


def centrality_profile(
    graph: LinkGraph, table: EntityTable, roles: tuple[str, str] | None = None
) -> CentralityProfile:
    """Per-group in-degree and in-coreness samples with significance tests.

    Nodes with zero in-degree are included with value 0; excluding them
    would bias the comparison toward the better-linked group.  Test
    direction +1 means the minority group is more central.
    """
    if roles is None:
        roles = infer_roles(graph, table)
    minor, major = roles
    deg = in_degrees(graph)
    cores = in_kcore(graph)
    groups: dict[str, list[str]] = {minor: [], major: []}
    for node in graph.nodes:
        name = table.by_id[node].group.name
        if name in groups:
            groups[name].append(node)
    for name, members in groups.items():
        if not members:
            raise StructuralError(f"group {name!r} has no nodes in graph")

    degrees = {name: tuple(deg[v] for v in members) for name, members in groups.items()}
    kcores = {name: tuple(cores[v] for v in members) for name, members in groups.items()}
    metrics = {"in_degree": degrees, "in_kcore": kcores}
    tests = {}
    ccdf = {}
    for metric, samples in metrics.items():
        x = [float(v) for v in samples[minor]]
        y = [float(v) for v in samples[major]]
        tests[metric] = {
            "wilcoxon": wilcoxon_rank_sum(x, y),
            KS: ks_two_sample(x, y),
        }
        ccdf[metric] = {name: ccdf_points(vals) for name, vals in samples.items()}
    return CentralityProfile(
        roles=roles, in_degrees=degrees, in_kcores=kcores, ccdf=ccdf, tests=tests
    )
