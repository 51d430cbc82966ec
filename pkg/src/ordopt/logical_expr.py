"""Logical expression trees (scan/select/project/join/group-by) and their
ingestion from query files.

Join predicates are conjunctive equalities; equated attribute pairs carry a
single shared name, so a join is fully described by its attribute set.  Join
order is taken as given by the query file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ParseError, UnknownRelation, ValidationError
from .order_algebra import EMPTY, AttrSet, SortOrder

#: Name of the synthetic column holding aggregate results below a group-by.
AGG_ATTR = "__agg__"


@dataclass(frozen=True)
class Scan:
    relation: str


@dataclass(frozen=True)
class Select:
    input: "LogicalExpr"
    selectivity: float
    touched: AttrSet


@dataclass(frozen=True)
class Project:
    input: "LogicalExpr"
    cols: AttrSet


@dataclass(frozen=True)
class Join:
    left: "LogicalExpr"
    right: "LogicalExpr"
    join_attrs: AttrSet
    full_outer: bool = False


@dataclass(frozen=True)
class GroupBy:
    input: "LogicalExpr"
    keys: AttrSet
    agg_width_bytes: int


LogicalExpr = Scan | Select | Project | Join | GroupBy


@dataclass(frozen=True)
class QuerySpec:
    root: LogicalExpr
    required_output_order: SortOrder


def children(e: LogicalExpr) -> tuple[LogicalExpr, ...]:
    if isinstance(e, Scan):
        return ()
    if isinstance(e, Join):
        return (e.left, e.right)
    return (e.input,)


def preorder(e: LogicalExpr) -> list[LogicalExpr]:
    """Nodes in preorder; positions serve as stable node ids in plan files."""
    out: list[LogicalExpr] = []
    stack = [e]
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(reversed(children(node)))
    return out


def schema(e: LogicalExpr, catalog) -> AttrSet:
    """The attribute set of the output of e."""
    if isinstance(e, Scan):
        return catalog.relation(e.relation).columns
    if isinstance(e, Select):
        return schema(e.input, catalog)
    if isinstance(e, Project):
        return e.cols
    if isinstance(e, Join):
        return schema(e.left, catalog) | schema(e.right, catalog)
    if isinstance(e, GroupBy):
        return e.keys | frozenset([AGG_ATTR])
    raise TypeError(f"not a logical expression: {e!r}")


def query_attrs(q: QuerySpec, catalog) -> AttrSet:
    """Every attribute the query references anywhere.

    Used as the coverage requirement for secondary indices: an index covers
    the query when it contains all attributes of its relation that appear in
    this set.
    """
    used: set[str] = set(q.required_output_order.attrs)
    used |= schema(q.root, catalog)
    for node in preorder(q.root):
        if isinstance(node, Select):
            used |= node.touched
        elif isinstance(node, Project):
            used |= node.cols
        elif isinstance(node, Join):
            used |= node.join_attrs
        elif isinstance(node, GroupBy):
            used |= node.keys
    used.discard(AGG_ATTR)
    return frozenset(used)


# --- parsing ---------------------------------------------------------------

_NODE_FIELDS = {
    "scan": {"op", "relation"},
    "select": {"op", "input", "selectivity", "touched"},
    "project": {"op", "input", "cols"},
    "join": {"op", "left", "right", "join_attrs", "full_outer"},
    "group_by": {"op", "input", "keys", "agg_width_bytes"},
}


def _fail(path: str, msg: str) -> ValidationError:
    return ValidationError(f"{path}: {msg}")


def _attr_list(value, path: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(a, str) and a for a in value):
        raise _fail(path, "expected a list of non-empty attribute names")
    return value


def _parse_node(doc, catalog, path: str) -> LogicalExpr:
    if not isinstance(doc, dict):
        raise _fail(path, "expected an object")
    op = doc.get("op")
    if op not in _NODE_FIELDS:
        raise _fail(path, f"unknown op {op!r}")
    extra = set(doc) - _NODE_FIELDS[op]
    if extra:
        raise _fail(path, f"unknown fields {sorted(extra)}")

    if op == "scan":
        rel = doc.get("relation")
        if not isinstance(rel, str) or not rel:
            raise _fail(path, "scan needs a relation name")
        if not catalog.has_relation(rel):
            raise UnknownRelation(f"{path}: unknown relation {rel!r}")
        return Scan(rel)

    if op == "select":
        node = _parse_node(doc.get("input"), catalog, path + ".input")
        sel = doc.get("selectivity", 1.0)
        if not isinstance(sel, (int, float)) or not (0.0 < sel <= 1.0):
            raise _fail(path, f"selectivity must be in (0, 1], got {sel!r}")
        touched = frozenset(_attr_list(doc.get("touched", []), path + ".touched"))
        missing = touched - schema(node, catalog)
        if missing:
            raise _fail(path + ".touched", f"attributes {sorted(missing)} not in input schema")
        return Select(node, float(sel), touched)

    if op == "project":
        node = _parse_node(doc.get("input"), catalog, path + ".input")
        cols = frozenset(_attr_list(doc.get("cols"), path + ".cols"))
        if not cols:
            raise _fail(path + ".cols", "projection list is empty")
        missing = cols - schema(node, catalog)
        if missing:
            raise _fail(path + ".cols", f"attributes {sorted(missing)} not in input schema")
        return Project(node, cols)

    if op == "join":
        left = _parse_node(doc.get("left"), catalog, path + ".left")
        right = _parse_node(doc.get("right"), catalog, path + ".right")
        attrs = frozenset(_attr_list(doc.get("join_attrs"), path + ".join_attrs"))
        if not attrs:
            raise _fail(path + ".join_attrs", "join needs at least one equated attribute pair")
        for side, sub in (("left", left), ("right", right)):
            missing = attrs - schema(sub, catalog)
            if missing:
                raise _fail(
                    path + ".join_attrs",
                    f"attributes {sorted(missing)} not in {side} schema",
                )
        full_outer = doc.get("full_outer", False)
        if not isinstance(full_outer, bool):
            raise _fail(path + ".full_outer", "expected a boolean")
        return Join(left, right, attrs, full_outer)

    # group_by
    node = _parse_node(doc.get("input"), catalog, path + ".input")
    keys = frozenset(_attr_list(doc.get("keys", []), path + ".keys"))
    missing = keys - schema(node, catalog)
    if missing:
        raise _fail(path + ".keys", f"attributes {sorted(missing)} not in input schema")
    width = doc.get("agg_width_bytes", 8)
    if not isinstance(width, int) or width < 1:
        raise _fail(path + ".agg_width_bytes", "expected a positive integer")
    return GroupBy(node, keys, width)


def parse_query(source, catalog) -> QuerySpec:
    """Parse and validate a query document (dict, JSON text, or bytes)."""
    if isinstance(source, (bytes, str)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed query JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise _fail("query", "expected a JSON object")
    extra = set(doc) - {"expr", "order_by"}
    if extra:
        raise _fail("query", f"unknown fields {sorted(extra)}")
    root = _parse_node(doc.get("expr"), catalog, "expr")
    order_by = _attr_list(doc.get("order_by", []), "order_by")
    if len(set(order_by)) != len(order_by):
        raise _fail("order_by", "duplicate attribute")
    out_order = SortOrder(tuple(order_by)) if order_by else EMPTY
    missing = out_order.attr_set() - schema(root, catalog)
    if missing:
        raise _fail("order_by", f"attributes {sorted(missing)} not in output schema")
    return QuerySpec(root, out_order)


def _node_to_dict(e: LogicalExpr) -> dict:
    if isinstance(e, Scan):
        return {"op": "scan", "relation": e.relation}
    if isinstance(e, Select):
        return {
            "op": "select",
            "input": _node_to_dict(e.input),
            "selectivity": e.selectivity,
            "touched": sorted(e.touched),
        }
    if isinstance(e, Project):
        return {"op": "project", "input": _node_to_dict(e.input), "cols": sorted(e.cols)}
    if isinstance(e, Join):
        return {
            "op": "join",
            "left": _node_to_dict(e.left),
            "right": _node_to_dict(e.right),
            "join_attrs": sorted(e.join_attrs),
            "full_outer": e.full_outer,
        }
    return {
        "op": "group_by",
        "input": _node_to_dict(e.input),
        "keys": sorted(e.keys),
        "agg_width_bytes": e.agg_width_bytes,
    }


def query_to_dict(q: QuerySpec) -> dict:
    return {"expr": _node_to_dict(q.root), "order_by": list(q.required_output_order.attrs)}
