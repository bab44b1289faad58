"""Group-bias measurement for attributed entity graphs and document corpora.

Four analysis dimensions over a shared data model:

* coverage  -- who is covered, how much is written about them
* structural -- link assortativity, cross-group asymmetry, centrality
* lexical   -- discriminative vocabulary and category coding
* visibility -- front-page featuring rates

plus Monte Carlo null models, a self-contained statistics kernel, a
synthetic-data oracle, and a batch CLI.
"""

__version__ = "0.1.0"

from biaslens.model import (
    Document,
    Entity,
    EntityTable,
    GroupLabel,
    LinkGraph,
    ValidationFinding,
    dedupe_edges,
    induced_graph,
    validate_table,
)
from biaslens.stats import MonteCarloEnvelope, StatsError, TestResult

__all__ = [
    "Document",
    "Entity",
    "EntityTable",
    "GroupLabel",
    "LinkGraph",
    "MonteCarloEnvelope",
    "StatsError",
    "TestResult",
    "ValidationFinding",
    "__version__",
    "dedupe_edges",
    "induced_graph",
    "validate_table",
]
