import json

import pytest

import ordopt.logical_expr as lx
from ordopt import (
    EMPTY,
    ParseError,
    UnknownRelation,
    ValidationError,
    load_catalog,
    order,
    parse_query,
    query_attrs,
    query_to_dict,
    schema,
)

from conftest import load_pair


def test_schema_rules():
    catalog, query = load_pair("tpch_catalog.json", "q3_query.json")
    scan = lx.Scan("partsupp")
    assert schema(scan, catalog) == frozenset(["partkey", "suppkey", "availqty"])
    proj = lx.Project(scan, frozenset(["availqty"]))
    assert schema(proj, catalog) == frozenset(["availqty"])
    join = query.root.input
    assert schema(join, catalog) == (
        schema(join.left, catalog) | schema(join.right, catalog)
    )
    assert lx.AGG_ATTR in schema(query.root, catalog)


def test_parse_q3_analog_shape():
    catalog, query = load_pair("tpch_catalog.json", "q3_query.json")
    gb = query.root
    assert isinstance(gb, lx.GroupBy)
    assert gb.keys == frozenset(["availqty", "partkey", "suppkey"])
    join = gb.input
    assert isinstance(join, lx.Join)
    assert join.join_attrs == frozenset(["suppkey", "partkey"])
    assert isinstance(join.left, lx.Scan) and join.left.relation == "partsupp"
    assert isinstance(join.right, lx.Select)
    assert join.right.selectivity == 0.5
    assert query.required_output_order == order("partkey")


def test_parse_rejects_empty_join_attrs():
    catalog, _ = load_pair("tpch_catalog.json", "q3_query.json")
    doc = {
        "expr": {
            "op": "join",
            "left": {"op": "scan", "relation": "partsupp"},
            "right": {"op": "scan", "relation": "lineitem"},
            "join_attrs": [],
        },
        "order_by": [],
    }
    with pytest.raises(ValidationError) as err:
        parse_query(doc, catalog)
    assert "expr.join_attrs" in str(err.value)


def test_parse_rejects_order_by_outside_schema():
    catalog, _ = load_pair("tpch_catalog.json", "q3_query.json")
    doc = {
        "expr": {
            "op": "project",
            "input": {"op": "scan", "relation": "lineitem"},
            "cols": ["suppkey"],
        },
        "order_by": ["partkey"],
    }
    with pytest.raises(ValidationError) as err:
        parse_query(doc, catalog)
    assert "order_by" in str(err.value)


def test_parse_errors():
    catalog, _ = load_pair("tpch_catalog.json", "q3_query.json")
    with pytest.raises(ParseError):
        parse_query(b"{nope", catalog)
    with pytest.raises(UnknownRelation):
        parse_query({"expr": {"op": "scan", "relation": "ghost"}}, catalog)
    with pytest.raises(ValidationError):
        parse_query({"expr": {"op": "scan", "relation": "lineitem", "x": 1}}, catalog)
    with pytest.raises(ValidationError):
        parse_query(
            {
                "expr": {
                    "op": "select",
                    "input": {"op": "scan", "relation": "lineitem"},
                    "selectivity": 1.5,
                    "touched": [],
                }
            },
            catalog,
        )


@pytest.mark.parametrize(
    "cat,qry",
    [
        ("example1_catalog.json", "example1_query.json"),
        ("tpch_catalog.json", "q2_query.json"),
        ("tpch_catalog.json", "q3_query.json"),
        ("q4_catalog.json", "q4_query.json"),
        ("q5_catalog.json", "q5_query.json"),
        ("postopt_catalog.json", "postopt_query.json"),
    ],
)
def test_parse_serialize_round_trip(cat, qry):
    catalog, query = load_pair(cat, qry)
    doc = query_to_dict(query)
    again = parse_query(json.dumps(doc), catalog)
    assert again == query


def test_query_attrs_gathers_everything():
    catalog, query = load_pair("tpch_catalog.json", "q3_query.json")
    used = query_attrs(query, catalog)
    assert {"suppkey", "partkey", "availqty", "linestatus"} <= used
    assert lx.AGG_ATTR not in used


def test_full_outer_join_parses():
    catalog, query = load_pair("q4_catalog.json", "q4_query.json")
    assert query.root.full_outer
    assert query.required_output_order == EMPTY
