"""Tree augmentation solver library.

Covers a rooted tree's edges with a minimum-size set of extra links so the
result is 2-edge-connected.  Ships a deferred primal-dual cover algorithm
with a credit ledger, an exact branch-and-bound oracle, a folklore
2-approximation baseline, and a fuzzing harness that cross-checks the
algorithm's inequalities against the oracle at desk scale.
"""

from importlib import resources

from .instance import (
    Instance,
    InstanceError,
    InfeasibleInstanceError,
    Link,
    RootedTree,
    Solution,
    build_instance,
    covers_all_edges,
    is_feasible,
    lca,
    link_path,
    parse,
    parse_solution,
    serialize,
    serialize_solution,
    shadow_complete,
)
from .contraction import ContractionState
from .solver import (
    audit_ledger,
    baseline_two_approx,
    cover,
    enumerate_shadow_minimal_optima,
    exact_opt,
)
from .harness import GenParams, FuzzConfig, bench, fuzz, generate

__all__ = [
    "Instance",
    "InstanceError",
    "InfeasibleInstanceError",
    "Link",
    "RootedTree",
    "Solution",
    "ContractionState",
    "GenParams",
    "FuzzConfig",
    "audit_ledger",
    "baseline_two_approx",
    "bench",
    "build_instance",
    "cover",
    "covers_all_edges",
    "enumerate_shadow_minimal_optima",
    "exact_opt",
    "example_instance",
    "fuzz",
    "generate",
    "is_feasible",
    "lca",
    "link_path",
    "parse",
    "parse_solution",
    "serialize",
    "serialize_solution",
    "shadow_complete",
]


def example_instance() -> Instance:
    """The bundled 10-node demo instance used throughout the docs and tests."""
    text = resources.files("tapcover.data").joinpath("example10.tap").read_text()
    return parse(text)
