"""Exhaustive reference for the filtering-node choice.

A selection is an antichain that covers every V-leaf. Each chosen node pays
its own cost plus its merge weight once per branching ancestor (an ancestor
with more than one child in V) above it.
"""

from __future__ import annotations

from itertools import product


def covering_antichains(root, children):
    """Every admissible selection below ``root`` (children already restricted to V)."""
    kids = children(root)
    if not kids:
        return [[root]]
    combos = [[root]]
    for parts in product(*(covering_antichains(c, children) for c in kids)):
        combos.append([n for p in parts for n in p])
    return combos


def selection_cost(selection, parent, children, cost, xi):
    total = 0.0
    for n in selection:
        branching = 0
        a = parent.get(n)
        while a is not None:
            if len(children(a)) > 1:
                branching += 1
            a = parent.get(a)
        total += cost(n) + xi(n) * branching
    return total


def brute_force(root, children, cost, xi):
    parent = {}
    stack = [root]
    while stack:
        a = stack.pop()
        for c in children(a):
            parent[c] = a
            stack.append(c)
    best = min(
        (selection_cost(s, parent, children, cost, xi), s) for s in covering_antichains(root, children)
    )
    return best
