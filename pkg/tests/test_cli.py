import csv
import json
import math

import numpy as np
import pytest

from tnapprox.cli import load_network, run, save_network
from tnapprox.models import ising_lnz_spin_sum, ising_network, random_network


def test_save_load_round_trip(tmp_path):
    net = random_network((2, 3), seed=3)
    path = tmp_path / "net.json"
    save_network(net, str(path))
    back = load_network(str(path))
    assert {str(v) for v in net.vertices} == set(back.vertices)
    for v in net.vertices:
        t, b = net.tensor(v), back.tensor(str(v))
        assert list(t.inds) == list(b.inds)
        assert np.allclose(t.data, b.data)


def test_load_minimal_file(tmp_path):
    path = tmp_path / "one.json"
    path.write_text(
        json.dumps(
            {
                "format_version": 1,
                "vertices": [
                    {
                        "id": "a",
                        "modes": [{"label": "x", "size": 2}],
                        "data": [1.0, 2.0],
                    },
                    {
                        "id": "b",
                        "modes": [{"label": "x", "size": 2}],
                        "data": [3.0, 4.0],
                    },
                ],
            }
        )
    )
    net = load_network(str(path))
    assert set(net.vertices) == {"a", "b"}
    assert net.size("x") == 2


def write_doc(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_load_rejects_bad_version(tmp_path):
    path = write_doc(tmp_path, {"format_version": 99, "vertices": []})
    with pytest.raises(ValueError, match="format_version"):
        load_network(path)


def test_load_rejects_missing_vertices(tmp_path):
    path = write_doc(tmp_path, {"format_version": 1})
    with pytest.raises(ValueError, match="vertices"):
        load_network(path)


def test_load_rejects_wrong_data_size(tmp_path):
    path = write_doc(
        tmp_path,
        {
            "format_version": 1,
            "vertices": [
                {
                    "id": "a",
                    "modes": [{"label": "x", "size": 2}],
                    "data": [1.0, 2.0, 3.0],
                }
            ],
        },
    )
    with pytest.raises(ValueError, match=r"vertices\[0\].data"):
        load_network(path)


def test_load_rejects_missing_field(tmp_path):
    path = write_doc(
        tmp_path,
        {
            "format_version": 1,
            "vertices": [{"id": "a", "data": [1.0]}],
        },
    )
    with pytest.raises(ValueError, match=r"vertices\[0\].modes"):
        load_network(path)


def test_load_rejects_edge_size_mismatch(tmp_path):
    path = write_doc(
        tmp_path,
        {
            "format_version": 1,
            "vertices": [
                {
                    "id": "a",
                    "modes": [{"label": "x", "size": 2}],
                    "data": [1.0, 2.0],
                },
                {
                    "id": "b",
                    "modes": [{"label": "x", "size": 3}],
                    "data": [1.0, 2.0, 3.0],
                },
            ],
        },
    )
    with pytest.raises(ValueError, match="x"):
        load_network(path)


def test_load_rejects_wrong_endpoints(tmp_path):
    path = write_doc(
        tmp_path,
        {
            "format_version": 1,
            "vertices": [
                {
                    "id": "a",
                    "modes": [{"label": "x", "size": 2}],
                    "data": [1.0, 2.0],
                },
                {
                    "id": "b",
                    "modes": [{"label": "x", "size": 2}],
                    "data": [1.0, 2.0],
                },
            ],
            "edges": [{"label": "x", "endpoints": ["a", "c"]}],
        },
    )
    with pytest.raises(ValueError, match="endpoints"):
        load_network(path)


def run_capture(capsys, argv):
    code = run(argv)
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1])


def test_run_ising_with_oracle(capsys):
    code, rec = run_capture(
        capsys,
        [
            "--model", "ising", "--dims", "2x2", "--beta", "0.3",
            "--chi", "16", "--oracle",
        ],
    )
    assert code == 0
    assert rec["rel_error"] <= 1e-10
    want = ising_lnz_spin_sum((2, 2), 0.3)
    assert abs(rec["ln_abs"] - want) <= 1e-10 * want
    for key in ("sign", "flops", "wall_seconds", "analysis_seconds", "chi"):
        assert key in rec
    assert rec["analysis_seconds"] >= 0.0


def test_run_deterministic(capsys):
    argv = [
        "--model", "random", "--dims", "3x3", "--chi", "8", "--seed", "5",
    ]
    _, a = run_capture(capsys, argv)
    _, b = run_capture(capsys, argv)
    assert a["ln_abs"] == b["ln_abs"]
    assert a["sign"] == b["sign"]


def test_run_network_file(capsys, tmp_path):
    net = ising_network((2, 2), 0.3)
    path = tmp_path / "net.json"
    save_network(net, str(path))
    code, rec = run_capture(
        capsys, ["--model", str(path), "--chi", "8", "--oracle"]
    )
    assert code == 0
    assert rec["rel_error"] <= 1e-10


def test_run_bad_args_exit_code(capsys):
    assert run(["--model", "ising"]) == 2
    assert "error" in capsys.readouterr().err
    assert run(["--model", "ising", "--dims", "4x"]) == 2
    assert run(["--model", "/nonexistent/net.json"]) == 2


def test_run_jsonl_output(capsys, tmp_path):
    out = tmp_path / "log.jsonl"
    argv = [
        "--model", "ising", "--dims", "2x2", "--chi", "8", "--out", str(out),
    ]
    assert run(argv) == 0
    assert run(argv) == 0
    capsys.readouterr()
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 2
    rec = json.loads(lines[0])
    assert rec["model"] == "ising"
    assert math.isfinite(rec["ln_abs"])


def test_run_csv_output(capsys, tmp_path):
    out = tmp_path / "log.csv"
    argv = [
        "--model", "ising", "--dims", "2x2", "--chi", "8", "--out", str(out),
    ]
    assert run(argv) == 0
    assert run(argv) == 0
    capsys.readouterr()
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert rows[0]["model"] == "ising"
    assert float(rows[0]["ln_abs"]) == float(rows[1]["ln_abs"])


def test_run_partition_size(capsys):
    code, rec = run_capture(
        capsys,
        [
            "--model", "ising", "--dims", "3x3", "--beta", "0.3",
            "--chi", "32", "--partition-size", "2", "--oracle",
        ],
    )
    assert code == 0
    assert rec["partition_size"] == 2
    assert rec["rel_error"] <= 1e-8
