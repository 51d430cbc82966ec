import json

import pytest

from ordopt.cli import main

from conftest import fixture_path


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_optimize_plain_and_deterministic(capsys):
    argv = [
        "optimize",
        "--catalog", str(fixture_path("tpch_catalog.json")),
        "--query", str(fixture_path("q3_query.json")),
    ]
    code1, out1, _ = _run(capsys, *argv)
    code2, out2, _ = _run(capsys, *argv)
    assert code1 == code2 == 0
    assert out1 == out2
    assert "merge_join" in out1 and "sort_group_by" in out1


def test_optimize_json_round_trips(capsys, tmp_path):
    code, out, _ = _run(
        capsys,
        "optimize",
        "--catalog", str(fixture_path("postopt_catalog.json")),
        "--query", str(fixture_path("postopt_query.json")),
        "--json",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["format"] == "ordopt-plan/1"
    plan_file = tmp_path / "plan.json"
    plan_file.write_text(out)

    code, refined_out, _ = _run(capsys, "refine", "--plan", str(plan_file), "--json")
    assert code == 0
    refined = json.loads(refined_out)
    assert refined["plan"]["total_cost"] < doc["plan"]["total_cost"]


def test_optimize_refine_flag_matches_refine_command(capsys, tmp_path):
    code, out, _ = _run(
        capsys,
        "optimize",
        "--catalog", str(fixture_path("postopt_catalog.json")),
        "--query", str(fixture_path("postopt_query.json")),
        "--refine", "--json",
    )
    assert code == 0
    assert "(a,z,b)" in out.replace('"', "").replace(", ", ",") or json.loads(out)
    doc = json.loads(out)
    orders = []

    def walk(node):
        if node["op"] == "merge_join":
            orders.append(tuple(node["order"]))
        for c in node["children"]:
            walk(c)

    walk(doc["plan"])
    assert sorted(orders) == [("a", "z", "b"), ("a", "z", "d"), ("a", "z", "e")]


def test_optimize_example1_refined_shares_join_prefixes(capsys):
    code, out, _ = _run(
        capsys,
        "optimize",
        "--catalog", str(fixture_path("example1_catalog.json")),
        "--query", str(fixture_path("example1_query.json")),
        "--heuristic", "favorable", "--refine",
    )
    assert code == 0
    join_orders = [
        line.split("order=")[1].split()[0]
        for line in out.splitlines()
        if line.strip().startswith("merge_join")
    ]
    assert len(join_orders) == 2
    assert all(o.startswith("(make,year") for o in join_orders)


def test_explain_afm(capsys):
    code, out, _ = _run(
        capsys,
        "explain-afm",
        "--catalog", str(fixture_path("example1_catalog.json")),
        "--query", str(fixture_path("example1_query.json")),
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("join {make,year}")
    assert any(line.strip() == "make,year" for line in lines)
    assert any(line.strip() == "year" for line in lines)
    assert "scan rating" in out


def test_sort_json_zero_io(capsys):
    code, out, _ = _run(
        capsys,
        "sort", "--rows", "1000", "--segment-rows", "100", "--keys", "2",
        "--payload", "64", "--mem-blocks", "4", "--block-bytes", "4096",
        "--algo", "mrs", "--seed", "1", "--json",
    )
    assert code == 0
    met = json.loads(out)
    assert met["run_blocks_written"] == 0
    assert met["run_blocks_read"] == 0
    assert met["tuples_in_before_first_out"] == 100


def test_sort_deterministic_bytes(capsys):
    argv = ["sort", "--rows", "500", "--segment-rows", "50", "--algo", "srs",
            "--payload", "100", "--seed", "9", "--json"]
    code1, out1, _ = _run(capsys, *argv)
    code2, out2, _ = _run(capsys, *argv)
    assert code1 == code2 == 0 and out1 == out2


def test_bench_a3_csv(capsys):
    code, out, _ = _run(
        capsys,
        "bench", "a3", "--rows", "1000", "--payload", "64", "--mem-blocks", "4", "--seed", "2",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("segment_rows,algo,run_blocks_written")
    # sweep 1,10,100,1000 with two algorithms each
    assert len(lines) == 1 + 4 * 2


def test_bench_b3_csv(capsys):
    code, out, _ = _run(
        capsys,
        "bench", "b3",
        "--catalog", str(fixture_path("tpch_catalog.json")),
        "--query", str(fixture_path("q3_query.json")),
    )
    assert code == 0
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    norm = {r[0]: float(r[2]) for r in rows}
    assert norm["exhaustive"] == 100.0
    assert norm["favorable"] == pytest.approx(100.0, abs=1.0)
    assert norm["favorable+refine"] <= norm["favorable"]
    assert norm["arbitrary"] >= 100.0


def test_unknown_flag_exits_1(capsys):
    code, _, err = _run(capsys, "optimize", "--nonsense")
    assert code == 1
    assert "usage" in err.lower()


def test_validation_error_exits_1(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = _run(
        capsys, "optimize", "--catalog", str(bad), "--query", str(bad)
    )
    assert code == 1
    assert "error" in err


def test_guard_violation_exits_2(capsys, tmp_path):
    cols = list("abcdefg")
    cat = {
        "relations": [
            {"name": n, "row_count": 10, "tuple_bytes": 56, "columns": cols,
             "clustering_order": [], "distincts": {}}
            for n in ("x", "y")
        ],
        "indices": [],
    }
    qry = {
        "expr": {
            "op": "join",
            "left": {"op": "scan", "relation": "x"},
            "right": {"op": "scan", "relation": "y"},
            "join_attrs": cols,
        },
        "order_by": [],
    }
    catf = tmp_path / "cat.json"
    qryf = tmp_path / "qry.json"
    catf.write_text(json.dumps(cat))
    qryf.write_text(json.dumps(qry))
    code, _, err = _run(
        capsys, "optimize", "--catalog", str(catf), "--query", str(qryf),
        "--heuristic", "exhaustive",
    )
    assert code == 2
    assert "guard" in err
