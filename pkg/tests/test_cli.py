import csv
import json
import math

import numpy as np
import pytest

from statemerge.cli import CSV_COLUMNS, main
from statemerge.oracle import matrix_oracle, oracle_to_dict
from statemerge.statevector import H, X
from statemerge.verification import unitary_with_first_column


def write_oracle(path, matrix, name):
    path.write_text(json.dumps(oracle_to_dict(matrix_oracle(matrix, name))))
    return str(path)


@pytest.fixture
def ix(tmp_path):
    return (write_oracle(tmp_path / "u.json", np.eye(2), "U"),
            write_oracle(tmp_path / "v.json", X, "V"))


@pytest.fixture
def general_pair(tmp_path):
    rng = np.random.default_rng(12)
    psi = np.array([0.6, 0.0, 0.48, 0.64])
    phi = np.array([0.0, 0.8, -0.36, 0.48])
    phi = phi - psi @ phi * psi
    phi /= np.linalg.norm(phi)
    return (write_oracle(tmp_path / "gu.json", unitary_with_first_column(psi, rng, True), "U"),
            write_oracle(tmp_path / "gv.json", unitary_with_first_column(phi, rng, True), "V"))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_merge_identity_flip_is_exact(ix, tmp_path):
    out = tmp_path / "m.json"
    assert main(["merge", "--oracle-u", ix[0], "--oracle-v", ix[1], "--epsilon", "0.5",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["version"] == 1
    rep = doc["reports"][0]
    assert rep["path"].startswith("exact")
    assert rep["trace_distance_psi"] <= 1e-9 and rep["trace_distance_phi"] <= 1e-9
    assert doc["circuits"][0]["version"] == 1


def test_merge_prints_summary(ix, capsys):
    assert main(["merge", "--oracle-u", ix[0], "--oracle-v", ix[1], "--epsilon", "0.5"]) == 0
    assert "path=exact" in capsys.readouterr().out


def test_sweep_n1_pair_non_increasing(tmp_path):
    rng = np.random.default_rng(3)
    t = 0.7
    u = write_oracle(tmp_path / "u.json", unitary_with_first_column(
        np.array([math.cos(t), math.sin(t)]), rng, True), "U")
    v = write_oracle(tmp_path / "v.json", unitary_with_first_column(
        np.array([-math.sin(t), math.cos(t)]), rng, True), "V")
    out = tmp_path / "s.csv"
    assert main(["sweep", "--oracle-u", u, "--oracle-v", v, "--epsilon", "0.3,0.2,0.1",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == list(CSV_COLUMNS)
    assert [float(r["epsilon"]) for r in rows] == [0.3, 0.2, 0.1]
    for key in ("distance_psi", "distance_phi"):
        d = [float(r[key]) for r in rows]
        assert all(b <= a + 1e-9 for a, b in zip(d, d[1:]))
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["version"] == 1


def test_sweep_byte_identical_across_runs_and_jobs(general_pair, tmp_path):
    u, v = general_pair
    outs = []
    for i, jobs in enumerate(("1", "2", "1")):
        out = tmp_path / f"s{i}.csv"
        assert main(["sweep", "--oracle-u", u, "--oracle-v", v, "--epsilon", "0.3,0.2",
                     "--seed", "5", "--trials", "5", "--jobs", jobs, "--out", str(out)]) == 0
        outs.append((out.read_bytes(), out.with_suffix(".json").read_bytes()))
    assert outs[0] == outs[1] == outs[2]
    rows = read_csv(tmp_path / "s0.csv")
    assert {r["path"] for r in rows} == {"general"}


def test_random_sweep_deterministic(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.csv"
        assert main(["sweep", "--n", "1,2", "--instances", "2", "--epsilon", "0.3",
                     "--trials", "3", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert len(read_csv(tmp_path / "r0.csv")) == 4


def test_verify(tmp_path):
    u = write_oracle(tmp_path / "u.json", H, "U")
    v = write_oracle(tmp_path / "v.json", H @ X, "V")
    out = tmp_path / "v.csv"
    assert main(["verify", "--oracle-u", u, "--oracle-v", v, "--trials", "7",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 7 and list(rows[0]) == ["seed", "input_index", "leakage", "distance"]
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["max_leakage"] <= 1e-9
    assert summary["max_matrix_error"] <= 1e-8


def test_demo_final_line(capsys):
    assert main(["demo"]) == 0
    text = capsys.readouterr().out
    lines = text.splitlines()
    final = next(l for l in lines if l.strip().startswith("= (alpha|phi> + beta|psi>"))
    assert "alpha=0.600 beta=0.480 gamma=0.640" in final
    # the last swap line holds beta|00> + gamma|01> + alpha|10> with the ancilla at 0
    swap_end = lines[lines.index(final) - 1]
    assert "+0.480|00>|0> +0.640|01>|0> +0.600|10>|0>" in swap_end


def test_help_documents_columns(capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--help"])
    text = capsys.readouterr().out
    for col in CSV_COLUMNS:
        assert col in text


@pytest.mark.parametrize("argv", [
    ["merge", "--oracle-u", "/does/not/exist.json", "--oracle-v", "/nope.json"],
    ["merge", "--epsilon", "0.3"],
])
def test_config_errors(argv, capsys):
    assert main(argv) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("statemerge: config error")


def test_bad_epsilon(ix, capsys):
    assert main(["merge", "--oracle-u", ix[0], "--oracle-v", ix[1], "--epsilon", "1.5"]) == 2
    assert main(["merge", "--oracle-u", ix[0], "--oracle-v", ix[1], "--epsilon", "abc"]) == 2


def test_non_unitary_oracle(tmp_path, ix):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 1, "matrix": [[1, 0], [1, 0], [0, 0], [1, 0]]}))
    assert main(["merge", "--oracle-u", str(bad), "--oracle-v", ix[1]]) == 2


def test_contract_violation(tmp_path, capsys):
    u = write_oracle(tmp_path / "u.json", H, "U")
    v = write_oracle(tmp_path / "v.json", np.eye(2), "V")  # |+> and |0> overlap
    assert main(["merge", "--oracle-u", u, "--oracle-v", v]) == 3
    assert "contract violation" in capsys.readouterr().err


def test_infeasible_sampling(general_pair, capsys):
    u, v = general_pair
    assert main(["merge", "--oracle-u", u, "--oracle-v", v, "--mode", "sampled",
                 "--epsilon", "0.1"]) == 4
    assert "infeasible" in capsys.readouterr().err
