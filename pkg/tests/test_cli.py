import csv
import itertools
import json

import numpy as np
import pytest

from frontals import catalog
from frontals.cli import exit_code, main, write_obj
from frontals.specfile import dump_spec, parse_spec


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def summary(capsys, *argv):
    code, out = run(capsys, *argv)
    s = json.loads(out)
    assert s["exit_status"] == code
    return code, s


def read_nodes(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def nearest(rows, u, v):
    return min(rows, key=lambda r: (float(r["u"]) - u) ** 2 + (float(r["v"]) - v) ** 2)


# catalog -------------------------------------------------------------------------------


def test_catalog_lists_seven_entries(capsys):
    code, out = run(capsys, "catalog")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 7
    assert "(u, v^2, v^3)" in lines[1]
    assert "expect_violation" in lines[6]


def test_catalog_dump_round_trips(capsys):
    code, out = run(capsys, "catalog", "--dump", "all")
    assert code == 0
    chunks = ["name =" + c for c in out.split("name =")[1:]]
    assert [parse_spec(c) for c in chunks] == list(catalog.CATALOG.values())
    assert run(capsys, "catalog", "--dump", "nope")[0] == 2


# analyze -------------------------------------------------------------------------------


def test_analyze_plane(tmp_path, capsys):
    code, s = summary(capsys, "analyze", "plane", "--grid", "-1:1:11,-1:1:11", "--out", tmp_path)
    assert code == 0 and s["singular_nodes"] == 0
    rows = read_nodes(tmp_path / "nodes.csv")
    assert len(rows) == 121 and {r["verdict"] for r in rows} == {"Regular"}
    assert list(rows[0]) == ["u", "v", "lambda_det", "K_rel", "H_rel", "verdict"]
    assert json.loads((tmp_path / "summary.json").read_text()) == s


def test_analyze_corank_two_examples(tmp_path, capsys):
    summary(capsys, "analyze", "corank2_front", "--out", tmp_path / "a")
    assert nearest(read_nodes(tmp_path / "a" / "nodes.csv"), 0, 0)["verdict"] == "FrontRank0"
    summary(capsys, "analyze", "corank2_nonfront", "--out", tmp_path / "b")
    assert nearest(read_nodes(tmp_path / "b" / "nodes.csv"), -1, 0)["verdict"] == "NotFrontHere"


def test_analyze_output_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        run(capsys, "analyze", "swallowtail", "--grid", "-1:1:15,-1:1:15", "--out", tmp_path / d)
    for f in ("nodes.csv", "surface.obj"):
        data = (tmp_path / "a" / f).read_bytes()
        assert data == (tmp_path / "b" / f).read_bytes()
        assert b"\r\n" not in data


def test_obj_layout(tmp_path):
    x = np.arange(2 * 3 * 3, dtype=float).reshape(2, 3, 3)
    write_obj(tmp_path / "m.obj", x)
    lines = (tmp_path / "m.obj").read_text().splitlines()
    assert lines[:2] == ["v 0 1 2", "v 3 4 5"]
    assert lines[6:] == ["f 1 4 5 2", "f 2 5 6 3"]


def test_analyze_errors(tmp_path, capsys):
    assert summary(capsys, "analyze", tmp_path / "missing.spec")[0] == 2
    bad = tmp_path / "bad.spec"
    bad.write_text("name = bad\nx.1 = u +\n")
    code, s = summary(capsys, "analyze", bad)
    assert code == 2 and "bad.spec:2" in s["errors"][0]["message"]
    assert summary(capsys, "analyze", "plane", "--grid", "nonsense")[0] == 2
    # sqrt(u) fails on the left half of the domain: an evaluation error with a location.
    root = tmp_path / "root.spec"
    text = dump_spec(catalog.CATALOG["plane"]).replace("x.3 = 0", "x.3 = sqrt(u)")
    root.write_text(text)
    code, s = summary(capsys, "analyze", root, "--grid", "-1:1:5,-1:1:5")
    assert code == 3 and s["errors"][0]["u"] <= 0


# check ---------------------------------------------------------------------------------


def test_check_crosscap_all_suites(capsys):
    code, s = summary(capsys, "check", "cuspidal_crosscap", "--suite", "all", "--grid", "-1:1:41,-1:1:41")
    assert code == 0
    assert {"c1", "c9", "gaussT", "cs3", "cc5", "propE_v", "wo", "gauss_classical"} <= set(s["checks"])
    assert "ideal" in s


def test_check_whitney_is_an_expected_violation(capsys):
    code, s = summary(capsys, "check", "whitney_crosscap", "--suite", "ideal")
    assert code == 0
    assert any("MembershipViolation" in e["message"] for e in s["errors"])


def test_check_unexpected_success_of_a_negative_control(tmp_path, capsys):
    p = tmp_path / "plane.spec"
    p.write_text(dump_spec(catalog.CATALOG["plane"]) + "expect_violation = true\n")
    assert summary(capsys, "check", p, "--suite", "rce", "--grid", "-1:1:11,-1:1:11")[0] == 1


def test_check_failure_and_missing_file(tmp_path, capsys):
    code, s = summary(capsys, "check", "swallowtail", "--suite", "sce", "--tol", "-1")
    assert code == 1 and not any(c["passed"] for c in s["checks"].values())
    assert summary(capsys, "check", tmp_path / "none.spec")[0] == 2


def test_usage_errors_exit_two(capsys):
    assert main(["check", "plane", "--suite", "bogus"]) == 2
    assert main([]) == 2
    capsys.readouterr()


# roundtrip -----------------------------------------------------------------------------


@pytest.mark.parametrize("name, h, bound", [("plane", 0.05, 1e-10), ("cuspidal_edge", 0.01, 1e-5), ("corank2_front", 0.01, 1e-4)])
def test_roundtrip(name, h, bound, tmp_path, capsys):
    code, s = summary(capsys, "roundtrip", name, "--h", h, "--out", tmp_path)
    assert code == 0 and s["alignment_rms"] <= bound
    assert (tmp_path / "original.obj").exists() and (tmp_path / "reconstructed.obj").exists()


def test_roundtrip_tolerance_controls_the_exit(capsys):
    assert summary(capsys, "roundtrip", "cuspidal_edge", "--h", 0.05, "--tol", 1e-14)[0] == 1


# export / reconstruct -----------------------------------------------------------------


def test_export_and_reconstruct_edge(tmp_path, capsys):
    assert summary(capsys, "export", "cuspidal_edge", "--h", 0.02, "--out", tmp_path / "data")[0] == 0
    code, s = summary(capsys, "reconstruct", tmp_path / "data", "--out", tmp_path / "r")
    assert code == 0 and s["frobenius_residual"] <= 1e-6
    rows = list(csv.DictReader(open(tmp_path / "r" / "surface.csv")))
    x = np.array([[float(r[k]) for k in "xyz"] for r in rows])
    from frontals.reconstruct import align_rigid, sample_surface
    from frontals.grid import GridSpec

    ref = sample_surface(catalog.CATALOG["cuspidal_edge"], GridSpec.with_spacing(-1, 1, -1, 1, 0.02))
    assert align_rigid(x, ref.reshape(-1, 3)).rms_error <= 1e-6


def test_reconstruct_plane_is_planar(tmp_path, capsys):
    run(capsys, "export", "plane", "--grid", "-1:1:11,-1:1:11", "--out", tmp_path / "d")
    code, _ = summary(capsys, "reconstruct", tmp_path / "d", "--seed", "0,0,2", "--origin", "0.2,0.2", "--out", tmp_path / "r")
    assert code == 0
    z = [float(line.split()[3]) for line in (tmp_path / "r" / "surface.obj").read_text().splitlines() if line.startswith("v ")]
    assert np.allclose(z, 2.0, atol=1e-12)


def test_corrupted_data_exit_four(tmp_path, capsys):
    run(capsys, "export", "cuspidal_crosscap", "--h", 0.02, "--out", tmp_path)
    path = tmp_path / "g_Omega.csv"
    lines = path.read_text().splitlines()
    out = [lines[0]]
    for line in lines[1:]:
        cells = line.split(",")
        cells[2] = repr(float(cells[2]) + 0.1)
        out.append(",".join(cells))
    path.write_text("\n".join(out) + "\n")
    code, s = summary(capsys, "reconstruct", tmp_path)
    assert code == 4 and s["frobenius_residual"] > 1e-2


def test_reconstruct_input_errors(tmp_path, capsys):
    assert summary(capsys, "reconstruct", tmp_path)[0] == 2
    run(capsys, "export", "plane", "--grid", "-1:1:5,-1:1:5", "--out", tmp_path)
    assert summary(capsys, "reconstruct", tmp_path, "--origin", "9,9")[0] == 2
    assert summary(capsys, "reconstruct", tmp_path, "--seed", "1,2")[0] == 2


# exit status ---------------------------------------------------------------------------


def _summary(kinds, checks, expect):
    return {
        "errors": [{"kind": k} for k in kinds],
        "checks": {f"k{i}": {"passed": p} for i, p in enumerate(checks)},
        "expect_violation": expect,
    }


def test_exit_status_is_a_total_function_of_the_summary():
    kinds = ["input", "not_integrable", "eval", "violation"]
    for expect in (False, True):
        for r in range(len(kinds) + 1):
            for ks in itertools.combinations(kinds, r):
                for checks in ([], [True], [False], [True, False]):
                    code = exit_code(_summary(ks, checks, expect))
                    assert code in (0, 1, 2, 3, 4)
                    assert code == exit_code(_summary(ks, checks, expect))
                    if "input" in ks:
                        assert code == 2
                    elif "not_integrable" in ks:
                        assert code == 4
                    elif not expect:
                        passed = not ks and all(checks)
                        assert (code == 0) == passed
    assert exit_code(_summary([], [True], False)) == 0
    assert exit_code(_summary(["eval"], [True], False)) == 3
    assert exit_code(_summary([], [True], True)) == 1
    assert exit_code(_summary(["violation"], [True], True)) == 0
