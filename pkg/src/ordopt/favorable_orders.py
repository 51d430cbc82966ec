"""Favorable orders: sort orders an expression can produce more cheaply than
by fully sorting an unordered result.

The approximate sets are computed bottom-up in one pass over the expression
tree; the exact minimal sets are an oracle-grade computation for small
schemas only, defined through best-plan costs.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from . import catalog_stats as cs
from . import cost_model as cm
from . import logical_expr as lx
from . import oracle
from .errors import TooLarge
from .order_algebra import (
    EMPTY,
    AttrSet,
    SortOrder,
    canonical_permutation,
    concat,
    is_prefix,
    lcp_with_set,
)

log = logging.getLogger(__name__)

#: Nodes whose favorable-order set grows past this are logged, not pruned.
SET_SIZE_FLAG = 64

FavorableOrderSet = frozenset  # of SortOrder; the empty order is implicit


def restrict_orders(orders, s: AttrSet) -> FavorableOrderSet:
    """Restrict each order to its longest prefix within s, dropping empties."""
    out = {lcp_with_set(o, s) for o in orders}
    out.discard(EMPTY)
    return frozenset(out)


def _extend_over(o: SortOrder, s: AttrSet) -> SortOrder:
    """Prefix of o within s, extended to a full permutation of s."""
    head = lcp_with_set(o, s)
    return concat(head, canonical_permutation(s - head.attr_set()))


@dataclass
class FavorableOrderIndex:
    """Per-node favorable orders for one query, computed bottom-up and cached.

    Scans contribute their clustering order and the keys of secondary indices
    that cover the query; selections pass orders through; projections cut
    orders to surviving prefixes; joins and group-bys keep input orders and
    extend their usable prefixes to full permutations of the join attributes
    resp. grouping keys (leftover attributes in deterministic name order).
    """

    catalog: cs.Catalog
    query_attrs: AttrSet
    _cache: dict = field(default_factory=dict)

    def orders_for(self, e: lx.LogicalExpr) -> FavorableOrderSet:
        cached = self._cache.get(e)
        if cached is not None:
            return cached
        orders = self._compute(e)
        if len(orders) > SET_SIZE_FLAG:
            log.warning("favorable-order set of %s has %d members", type(e).__name__, len(orders))
        self._cache[e] = orders
        return orders

    def restricted(self, e: lx.LogicalExpr, s: AttrSet) -> FavorableOrderSet:
        return restrict_orders(self.orders_for(e), s)

    def _compute(self, e: lx.LogicalExpr) -> FavorableOrderSet:
        if isinstance(e, lx.Scan):
            rel = self.catalog.relation(e.relation)
            out = {rel.clustering_order}
            needed = self.query_attrs & rel.columns
            for idx in cs.covering_indices(rel, needed, self.catalog):
                out.add(idx.key_order)
            out.discard(EMPTY)
            return frozenset(out)

        if isinstance(e, lx.Select):
            return self.orders_for(e.input)

        if isinstance(e, lx.Project):
            return restrict_orders(self.orders_for(e.input), e.cols)

        if isinstance(e, lx.Join):
            base = self.orders_for(e.left) | self.orders_for(e.right)
            out = set(base)
            for o in sorted(base | {EMPTY}, key=lambda o: o.attrs):
                out.add(_extend_over(o, e.join_attrs))
            out.discard(EMPTY)
            return frozenset(out)

        if isinstance(e, lx.GroupBy):
            out = set()
            for o in sorted(self.orders_for(e.input) | {EMPTY}, key=lambda o: o.attrs):
                out.add(_extend_over(o, e.keys))
            out.discard(EMPTY)
            return frozenset(out)

        raise TypeError(f"not a logical expression: {e!r}")


def index_for_query(q: lx.QuerySpec, catalog: cs.Catalog) -> FavorableOrderIndex:
    return FavorableOrderIndex(catalog, lx.query_attrs(q, catalog))


# --- exact minimal favorable orders (oracle-grade, small schemas only) ------


def _orders_over(attrs: AttrSet) -> list[SortOrder]:
    out = []
    for k in range(1, len(attrs) + 1):
        for combo in itertools.permutations(sorted(attrs), k):
            out.append(SortOrder(combo))
    return out


def exact_minimal_favorable_orders(
    e: lx.LogicalExpr,
    catalog: cs.Catalog,
    params: cm.CostParams,
    guard: "oracle.OracleGuard | None" = None,
    query_attrs: AttrSet | None = None,
) -> FavorableOrderSet:
    """The smallest set of positive-benefit orders that accounts for every
    positive-benefit order, either directly, as an extendable prefix of it at
    equal cost, or as an equal-cost extension of it.

    Exhaustively enumerates orders over the schema; guarded by schema width.
    Exact set-cover minimization for small favorable sets, greedy beyond
    (coverage, which downstream consumers rely on, always holds).
    `query_attrs` fixes the index-coverage requirement of the enclosing
    query; by default the expression is treated as the whole query.
    """
    guard = guard or oracle.OracleGuard()
    attrs = lx.schema(e, catalog)
    if len(attrs) > guard.max_attrs and not oracle.guards_lifted():
        raise TooLarge(f"schema of {len(attrs)} attributes exceeds guard {guard.max_attrs}")
    if query_attrs is None:
        query_attrs = lx.query_attrs(lx.QuerySpec(e, EMPTY), catalog)

    candidates = _orders_over(attrs)
    planner = oracle.BrutePlanner(catalog, params, query_attrs, guard)
    cbp: dict[SortOrder, float] = {o: planner.cost(e, o) for o in [EMPTY] + candidates}

    def coster(have: SortOrder, want: SortOrder) -> float:
        return cm.enforce_cost(e, have, want, params, catalog)

    def close(a: float, b: float) -> bool:
        return abs(a - b) <= max(1e-9 * max(abs(a), abs(b)), 1e-12)

    ford = sorted(
        (o for o in candidates if cbp[EMPTY] + coster(EMPTY, o) - cbp[o] > 1e-9),
        key=lambda o: o.attrs,
    )
    if not ford:
        return frozenset()

    n = len(ford)
    # covers[i] = bitmask of ford members that member i accounts for.
    covers = []
    for i, m in enumerate(ford):
        mask = 1 << i
        for j, o in enumerate(ford):
            if i == j:
                continue
            if is_prefix(m, o) and close(cbp[m] + coster(m, o), cbp[o]):
                mask |= 1 << j
            elif is_prefix(o, m) and close(cbp[m], cbp[o]):
                mask |= 1 << j
        covers.append(mask)
    full = (1 << n) - 1

    if n <= 14:
        for size in range(1, n + 1):
            for combo in itertools.combinations(range(n), size):
                mask = 0
                for i in combo:
                    mask |= covers[i]
                if mask == full:
                    return frozenset(ford[i] for i in combo)

    chosen: list[int] = []
    covered = 0
    while covered != full:
        best_i = max(range(n), key=lambda i: bin(covers[i] | covered).count("1"))
        chosen.append(best_i)
        covered |= covers[best_i]
    kept = list(chosen)
    for i in list(kept):
        mask = 0
        for j in kept:
            if j != i:
                mask |= covers[j]
        if mask == full:
            kept.remove(i)
    return frozenset(ford[i] for i in kept)
