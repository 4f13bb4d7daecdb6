import json

import numpy as np
import pytest

from bplab.cli import main
from bplab.expanders import cycle_graph, petersen_graph
from bplab.pipeline import exact_diagonal


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_plane_dump(capsys):
    code, out, _ = run(capsys, "plane", "--l", "2")
    assert code == 0
    report = json.loads(out)
    assert report["ok"] and report["experiment"] == "plane"
    assert len(report["results"]["points"]) == 7


def test_non_prime_is_a_usage_error(capsys):
    code, out, err = run(capsys, "plane", "--l", "4")
    assert code == 2 and out == ""
    assert "not a prime" in err


def test_group_dump(capsys):
    code, out, _ = run(capsys, "group", "--l", "2", "--dump")
    results = json.loads(out)["results"]
    assert code == 0 and results["order"] == 168 and len(results["elements"]) == 168
    assert results["pair_orbits"] == [7, 42] and results["generators"] == 6


def test_spectral_on_cayley_and_files(capsys, tmp_path):
    code, out, _ = run(capsys, "spectral")
    results = json.loads(out)["results"]
    assert code == 0 and results["n"] == 168 and results["gap"] > 0
    path = tmp_path / "c6.txt"
    path.write_text(cycle_graph(6).to_edge_list())
    code, out, _ = run(capsys, "spectral", "--graph", str(path))
    results = json.loads(out)["results"]
    assert code == 0 and results["eigenvalues"][1] == pytest.approx(1)
    assert results["cheeger_exact"] == pytest.approx(2 / 3) and results["sandwich"]
    path = tmp_path / "petersen.json"
    path.write_text(json.dumps(petersen_graph().to_json()))
    code, out, _ = run(capsys, "spectral", "--graph", str(path), "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "index,eigenvalue" and len(lines) == 11


def test_disconnected_graph_is_rejected(capsys, tmp_path):
    path = tmp_path / "two_triangles.txt"
    path.write_text("0 1\n1 2\n0 2\n3 4\n4 5\n3 5\n")
    code, out, err = run(capsys, "spectral", "--graph", str(path))
    assert code == 2 and "error" in err


def test_missing_graph_file(capsys, tmp_path):
    code, _, err = run(capsys, "spectral", "--graph", str(tmp_path / "nope.txt"))
    assert code == 2


def test_column_bound_runs_and_flags_estimates(capsys):
    code, out, _ = run(capsys, "lemma21", "--p", "2", "--trials", "40")
    report = json.loads(out)
    assert code == 0 and report["ok"]
    code, out, _ = run(capsys, "lemma21", "--p", "1.5", "--trials", "10")
    report = json.loads(out)
    assert code == 0
    assert "estimate" in json.dumps(report["results"]).lower()


def test_bad_p_is_a_usage_error(capsys):
    code, _, _ = run(capsys, "lemma21", "--p", "0.5")
    assert code == 2


def test_l2_column_search_logs(capsys):
    code, out, _ = run(capsys, "remark22", "--trials", "30")
    assert code == 0 and "best_ratio" in out


def test_mazur_csv_and_reproducibility(capsys):
    args = ("mazur", "--trials", "30", "--modulus-samples", "200", "--seed", "5")
    code, first, _ = run(capsys, *args)
    assert code == 0 and json.loads(first)["ok"]
    _, second, _ = run(capsys, *args)
    assert first == second
    _, other, _ = run(capsys, "mazur", "--trials", "30", "--modulus-samples", "200", "--seed", "6")
    assert other != first
    code, text, _ = run(capsys, *args, "--format", "csv")
    assert code == 0 and text.splitlines()[0] == "t,envelope,theory_bound"


def test_csv_unavailable_is_usage_error(capsys):
    code, _, err = run(capsys, "plane", "--format", "csv")
    assert code == 2 and "csv" in err


def test_coarea_and_invariant(capsys):
    code, out, _ = run(capsys, "coarea", "--trials", "20")
    results = json.loads(out)["results"]
    assert code == 0 and results["Cayley(SL3F2)"]["holds"] == 20
    code, out, _ = run(capsys, "invariant", "--trials", "5")
    results = json.loads(out)["results"]
    assert code == 0 and results["tensor_invariant_dims"]["2"]["invariant_dim"] == 2


def test_concentration_clouds(capsys):
    code, out, _ = run(capsys, "concentration", "--cloud", "constant", "--modulus-samples", "200")
    banach = json.loads(out)["results"]["banach"]
    assert code == 0 and banach["analytic_moduli"]["mean_dev"] == pytest.approx(0, abs=1e-12)
    code, out, _ = run(capsys, "concentration", "--cloud", "orbit", "--modulus-samples", "200")
    assert code == 0 and json.loads(out)["results"]["banach"]["analytic_moduli"]["holds"]


def test_concentration_outside_ball_is_rejected(capsys):
    code, _, err = run(capsys, "concentration", "--cloud", "orbit", "--scale", "2", "--modulus-samples", "200")
    assert code == 2 and "unit ball" in err


def test_pipeline_builtins(capsys):
    code, out, _ = run(capsys, "pipeline", "--primes", "2", "--modulus-samples", "200")
    report = json.loads(out)
    assert code == 0 and report["results"]["consistent"]
    assert report["results"]["records"][0]["rank_lower_bound"] == 7
    code, out, _ = run(capsys, "pipeline", "--builtin", "rank1", "--primes", "2", "--modulus-samples", "200")
    assert code == 0 and json.loads(out)["results"]["records"][0]["vacuous"]
    code, out, _ = run(capsys, "pipeline", "--primes", "2", "--format", "csv", "--modulus-samples", "200")
    assert code == 0 and out.splitlines()[1].startswith("2,49,")


def test_pipeline_from_file(capsys, tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps(exact_diagonal(primes=(2,)).to_json()))
    out_path = tmp_path / "report.json"
    code, out, _ = run(capsys, "pipeline", "--input", str(path), "--modulus-samples", "200", "--out", str(out_path))
    assert code == 0 and out == ""
    assert json.loads(out_path.read_text())["results"]["consistent"]


@pytest.mark.parametrize("content", [
    "{not json",
    json.dumps({"pairs": [{"a": {"shape": [7, 7], "data": []}}]}),
    json.dumps({"primes": [2], "pairs": [{"a": {"shape": [2, 2], "data": [[0, 0]] * 4},
                                          "b": {"shape": [2, 2], "data": [[0, 0]] * 4}}]}),
])
def test_malformed_decomposition_file(capsys, tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    code, out, err = run(capsys, "pipeline", "--input", str(path))
    assert code == 2 and out == "" and err


def test_pipeline_rejects_product_defect(capsys, tmp_path):
    t = exact_diagonal(primes=(2,))
    t.a[0] *= 3
    path = tmp_path / "t.json"
    path.write_text(json.dumps(t.to_json()))
    code, _, err = run(capsys, "pipeline", "--input", str(path))
    assert code == 2 and "prod" in err


def test_assertion_failure_exit_code(capsys, monkeypatch):
    import bplab.experiments as ex
    monkeypatch.setattr(ex, "plane_experiment", lambda l, cfg: ({"forced": True}, False))
    code, out, _ = run(capsys, "plane")
    assert code == 1 and json.loads(out)["ok"] is False


def test_help_and_unknown_command(capsys):
    assert main(["--help"]) == 0
    assert main(["bogus"]) == 2
    capsys.readouterr()


def test_json_is_strict(capsys):
    code, out, _ = run(capsys, "invariant", "--trials", "2")
    json.loads(out, parse_constant=lambda c: pytest.fail(f"non-standard constant {c}"))
    assert np.isfinite(json.loads(out)["seed"])
