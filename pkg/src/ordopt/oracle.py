"""Brute-force reference computations used to adjudicate the heuristics:
exhaustive plan costing, exhaustive tree-labeling benefit, and a trusted
in-memory sort.

This module deliberately depends only on the value types, the catalog, and
the cost model, never on the heuristic modules it judges.  Guards fail
loudly; ORDOPT_GUARD_OVERRIDE=1 lifts them (test use only).
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

from . import catalog_stats as cs
from . import cost_model as cm
from . import logical_expr as lx
from .errors import TooLarge
from .order_algebra import EMPTY, SortOrder


@dataclass(frozen=True)
class OracleGuard:
    max_attrs: int = 6
    max_nodes: int = 9
    max_rows: int = 10**6


def guards_lifted() -> bool:
    return os.environ.get("ORDOPT_GUARD_OVERRIDE") == "1"


class BrutePlanner:
    """Exhaustive plan costing with a memo shared across goals.

    Same physical algebra as the optimizer, but every permutation is tried at
    every order-sensitive node.
    """

    def __init__(self, catalog: cs.Catalog, params: cm.CostParams, query_attrs, guard: OracleGuard | None = None):
        self.catalog = catalog
        self.params = params
        self.guard = guard or OracleGuard()
        self.query_attrs = frozenset(query_attrs)
        self._memo: dict[tuple, float] = {}

    def _perms_of(self, attrs) -> list[SortOrder]:
        if len(attrs) > self.guard.max_attrs and not guards_lifted():
            raise TooLarge(f"{len(attrs)} attributes exceed guard {self.guard.max_attrs}")
        return [SortOrder(p) for p in itertools.permutations(sorted(attrs))]

    def cost(self, node: lx.LogicalExpr, want: SortOrder) -> float:
        key = (node, want)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        catalog, params = self.catalog, self.params
        cands: list[float] = []

        if isinstance(node, lx.Scan):
            for _, produced, cost, _ in cm.access_paths(node, catalog, self.query_attrs, params):
                cands.append(cost + cm.enforce_cost(node, produced, want, params, catalog))
        elif isinstance(node, (lx.Select, lx.Project)):
            cands.append(self.cost(node.input, want))
        elif isinstance(node, lx.Join):
            lstat = cs.expr_stats(node.left, catalog)
            rstat = cs.expr_stats(node.right, catalog)
            join_cost = cm.merge_join_cost(lstat.rows, rstat.rows, params)
            for io in self._perms_of(node.join_attrs):
                cands.append(
                    self.cost(node.left, io)
                    + self.cost(node.right, io)
                    + join_cost
                    + cm.enforce_cost(node, io, want, params, catalog)
                )
            if params.hashjoin_enabled:
                cands.append(
                    self.cost(node.left, EMPTY)
                    + self.cost(node.right, EMPTY)
                    + cm.hash_join_cost(
                        cs.expr_blocks(node.left, catalog, params.cfg),
                        cs.expr_blocks(node.right, catalog, params.cfg),
                        params,
                    )
                    + cm.enforce_cost(node, EMPTY, want, params, catalog)
                )
        elif isinstance(node, lx.GroupBy):
            for io in self._perms_of(node.keys):
                cands.append(self.cost(node.input, io) + cm.enforce_cost(node, io, want, params, catalog))
            if params.hashjoin_enabled:
                cands.append(
                    self.cost(node.input, EMPTY)
                    + cm.hash_group_cost(cs.expr_blocks(node.input, catalog, params.cfg), params)
                    + cm.enforce_cost(node, EMPTY, want, params, catalog)
                )
        else:
            raise TypeError(f"not a logical expression: {node!r}")

        if want:
            cands.append(self.cost(node, EMPTY) + cm.enforce_cost(node, EMPTY, want, params, catalog))
        best = min(cands)
        self._memo[key] = best
        return best


def brute_best_plan(
    e: lx.LogicalExpr,
    required: SortOrder,
    catalog: cs.Catalog,
    params: cm.CostParams,
    guard: OracleGuard | None = None,
    query_attrs=None,
) -> float:
    """Minimum plan cost over every permutation at every order-sensitive
    node, in the same physical algebra as the optimizer.

    `query_attrs` is the attribute set the whole query references (the
    coverage requirement for secondary indices); it defaults to the one the
    optimizer would derive for the goal treated as a complete query.
    """
    if query_attrs is None:
        query_attrs = lx.query_attrs(lx.QuerySpec(e, required), catalog)
    return BrutePlanner(catalog, params, query_attrs, guard).cost(e, required)


def _prefix_len(a: tuple, b: tuple) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def brute_tree_benefit(tree, guard: OracleGuard | None = None) -> int:
    """Exact maximum of the shared-prefix benefit over all per-node
    permutations of a labeled tree.

    Exhaustive over per-node permutations, organized as a tree DP so edges
    are scored pairwise.
    """
    guard = guard or OracleGuard()
    sets = [frozenset(s) for s in tree.node_sets]
    edges = list(tree.edges)
    work = 1.0
    for s in sets:
        work *= math.factorial(len(s))
    if work > 10**7 and not guards_lifted():
        raise TooLarge(f"assignment space of {work:.3g} exceeds guard 1e7")

    n = len(sets)
    kids: list[list[int]] = [[] for _ in range(n)]
    has_parent = [False] * n
    for p, c in edges:
        kids[p].append(c)
        has_parent[c] = True
    roots = [v for v in range(n) if not has_parent[v]]

    perms = [sorted(itertools.permutations(sorted(s))) for s in sets]
    memo: dict[tuple[int, tuple], int] = {}

    def best(v: int, perm: tuple) -> int:
        key = (v, perm)
        if key in memo:
            return memo[key]
        total = 0
        for c in kids[v]:
            total += max(best(c, cp) + _prefix_len(perm, cp) for cp in perms[c])
        memo[key] = total
        return total

    return sum(max(best(r, p) for p in perms[r]) for r in roots)


def reference_sort(records, guard: OracleGuard | None = None) -> list:
    """Trusted in-memory sort by the full key vector."""
    guard = guard or OracleGuard()
    out = list(records)
    if len(out) > guard.max_rows and not guards_lifted():
        raise TooLarge(f"{len(out)} rows exceed guard {guard.max_rows}")
    out.sort(key=lambda r: r.keys)
    return out
