"""Optimal choice of filtering nodes among the Phase-1 candidates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Collection, Hashable, Iterable, TypeVar

from .squadtree import Candidates, SQuadTreeNode

N = TypeVar("N", bound=Hashable)


@dataclass(frozen=True)
class NodeCostModel:
    alpha_io: float = 1.0
    alpha_cpu: float = 0.1
    alpha_merge: float = 0.05

    def __post_init__(self) -> None:
        if min(self.alpha_io, self.alpha_cpu, self.alpha_merge) < 0:
            raise ValueError("cost weights must be non-negative")


@dataclass
class SelectionResult:
    v_star: list = field(default_factory=list)
    sigma_star: float = 0.0
    xi_star: float = 0.0

    def __bool__(self) -> bool:
        return bool(self.v_star)


def node_cost(node: SQuadTreeNode, cs_ids: Collection[int], m: NodeCostModel) -> float:
    """alpha_IO * |CS(a)| + alpha_CPU * |E-list(a)|."""
    return m.alpha_io * node.self_cs.cardinality(cs_ids) + m.alpha_cpu * len(node.e_list)


def node_xi(node: SQuadTreeNode, m: NodeCostModel) -> float:
    return m.alpha_merge * len(node.e_list)


def solve(
    root: N,
    in_v: Callable[[N], bool],
    children: Callable[[N], Iterable[N]],
    cost: Callable[[N], float],
    xi: Callable[[N], float],
) -> SelectionResult:
    """Bottom-up evaluation of the selection recurrences over an arbitrary tree.

    A node of V with no child in V is treated as a leaf. On a tie between a
    node and the best cover by its descendants the node itself is kept.
    """

    def rec(a: N) -> SelectionResult:
        if not in_v(a):
            return SelectionResult()
        subs = [r for r in (rec(c) for c in children(a)) if r.v_star]
        own = cost(a)
        if not subs:
            return SelectionResult([a], own, xi(a))
        sigma = sum(r.sigma_star for r in subs)
        xi_sum = sum(r.xi_star for r in subs)
        mu = xi_sum if len(subs) > 1 else 0.0
        if own <= sigma + mu:
            return SelectionResult([a], own, xi(a))
        return SelectionResult([n for r in subs for n in r.v_star], sigma + mu, xi_sum)

    return rec(root)


def select_optimal(
    candidates: Candidates,
    m: NodeCostModel | None = None,
    root: SQuadTreeNode | None = None,
) -> SelectionResult:
    """V* for a set of Phase-1 candidate nodes of an S-QuadTree."""
    m = m or NodeCostModel()
    if not candidates.nodes:
        return SelectionResult()
    root = root or candidates.nodes[0]
    members = {id(n) for n in candidates.nodes}
    cs_ids = candidates.matching["self"]
    return solve(
        root,
        lambda a: id(a) in members,
        lambda a: a.child_nodes(),
        lambda a: node_cost(a, cs_ids, m),
        lambda a: node_xi(a, m),
    )
