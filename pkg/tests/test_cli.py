import json
import subprocess
import sys

import pytest

from baseline_odx import Design, frequencies
from baseline_odx.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_construct_d0_2x2x3(capsys):
    code, out = run(capsys, "construct", "--layout", "2x2x3", "--kind", "d0")
    assert code == 0
    d = Design.from_dict(json.loads(out))
    assert d.N == 11


def test_construct_family(capsys):
    code, out = run(capsys, "construct", "--layout", "2x2", "--kind", "family", "--N", "22", "--phi", "5")
    assert code == 0 and frequencies(Design.from_json(out)) == (6, 6, 0, 0, 5, 5)


def test_construct_collection_and_permute(capsys):
    code, out = run(capsys, "construct", "--layout", "2x3", "--kind", "collection")
    assert code == 0 and len(json.loads(out)) == 4
    code, out = run(capsys, "construct", "--layout", "2x2x3", "--kind", "d0", "--permute", "2,0,1")
    assert code == 0


@pytest.mark.parametrize(
    "argv",
    [
        ["construct", "--layout", "2y2"],
        ["construct", "--layout", "2x2", "--kind", "family"],
        ["construct", "--layout", "2x3", "--kind", "egd2x3", "--permute", "x"],
        ["construct", "--layout", "2x2", "--kind", "nonsense"],
        ["search", "--layout", "2x2"],
        ["approx", "--layout", "2x2", "--model", "dye"],
    ],
)
def test_invalid_input_exit_3(capsys, argv):
    with pytest.raises(SystemExit) as err:
        raise SystemExit(main(argv))
    assert err.value.code == 3


def test_evaluate_symmetric_human(capsys, tmp_path):
    _, out = run(capsys, "construct", "--layout", "2x2", "--kind", "symmetric")
    path = write(tmp_path, "s.json", out)
    code, out = run(capsys, "evaluate", "--design", path)
    assert code == 0
    assert "1/2 (≈0.5)" in out and "criterion: 2 (≈2)" in out


def test_evaluate_dswap_dye_csv(capsys, tmp_path):
    _, out = run(capsys, "construct", "--layout", "2x2", "--kind", "dswap")
    path = write(tmp_path, "d.json", out)
    code, out = run(capsys, "evaluate", "--design", path, "--model", "dye", "--csv")
    assert code == 0
    assert out.splitlines() == ["effect,order,variance", "01,1,1/2", "10,1,1/2", "11,2,1"]


def test_evaluate_not_estimable_exit_2(capsys, tmp_path):
    path = write(tmp_path, "bad.json", {"layout": [2, 2], "slides": [{"red": [0, 1], "green": [0, 0]}, {"red": [1, 1], "green": [1, 0]}]})
    code, _ = run(capsys, "evaluate", "--design", path)
    assert code == 2


def test_evaluate_malformed_exit_3(capsys, tmp_path):
    path = write(tmp_path, "bad.json", "{not json")
    assert run(capsys, "evaluate", "--design", path)[0] == 3
    assert run(capsys, "evaluate", "--design", str(tmp_path / "missing.json"))[0] == 3


def test_evaluate_hetero_and_replication(capsys, tmp_path):
    design = {"layout": [2, 2], "slides": [{"red": [0, 1], "green": [0, 0]}, {"red": [1, 0], "green": [0, 0]}, {"red": [1, 1], "green": [0, 1]}, {"red": [1, 1], "green": [1, 0]}]}
    path = write(tmp_path, "d.json", design)
    code, out = run(capsys, "evaluate", "--design", path, "--hetero", "00=2,01=3,10=4,11=6", "--json")
    assert code == 0 and json.loads(out)["unit"] == "delta^2"
    code, out2 = run(capsys, "evaluate", "--design", path, "--hetero", "2,3,4,6", "--json")
    assert json.loads(out) == json.loads(out2)
    plan = write(tmp_path, "p.json", {"subjects": [["a", "z"], ["b", "z"], ["y", "a"], ["y", "b"]]})
    code, out = run(capsys, "evaluate", "--design", path, "--replication", plan, "--ratio", "1", "--json")
    assert code == 0
    assert run(capsys, "evaluate", "--design", path, "--hetero", "00=2,01=3")[0] == 3


def test_search_json_roundtrips_through_evaluate(capsys, tmp_path):
    code, out = run(capsys, "search", "--layout", "2x2", "--slides", "6", "--w", "3", "--json")
    assert code == 0
    data = json.loads(out)
    assert data["criterion"] == "37/12" and data["optima_count"] == 3
    path = write(tmp_path, "r.json", out)
    code, out = run(capsys, "evaluate", "--design", path, "--w", "3", "--json")
    assert json.loads(out)["criterion"] == data["criterion"]
    assert json.loads(out)["design"] == data["design"]


def test_search_jobs_byte_identical(capsys):
    outs = [run(capsys, "search", "--layout", "2x3", "--slides", "7", "--w", "2", "--json", "--jobs", j)[1] for j in ("1", "4")]
    assert outs[0] == outs[1]


def test_search_admissible_excludes_symmetric(capsys):
    code, out = run(capsys, "search", "--layout", "2x2", "--slides", "6", "--admissible", "--json")
    front = [Design.from_dict(d) for d in json.loads(out)]
    symmetric = sorted(s.unordered() for s in Design.from_pairs((2, 2), [("01", "00"), ("10", "00"), ("11", "00"), ("10", "01"), ("11", "01"), ("11", "10")]).slides)
    assert code == 0 and front
    assert all(sorted(d.slides) != symmetric for d in front)


def test_search_restrict_dbar(capsys):
    code, out = run(capsys, "search", "--layout", "2x3", "--slides", "7", "--restrict", "dbar", "--w", "2", "--json")
    assert code == 0 and json.loads(out)["criterion"]


def test_augment(capsys):
    code, out = run(capsys, "augment", "--layout", "2x2", "--slides", "5", "--w", "2")
    assert code == 0 and "criterion:" in out


def test_approx_round_and_efficiency(capsys, tmp_path):
    _, fam = run(capsys, "construct", "--layout", "2x2", "--kind", "family", "--N", "22", "--phi", "5")
    path = write(tmp_path, "f.json", fam)
    code, out = run(capsys, "approx", "--layout", "2x2", "--w", "2", "--round", "22", "--efficiency-of", path, "--json", "--restarts", "3")
    assert code == 0
    data = json.loads(out)
    assert abs(data["efficiency"] - 99.44) < 0.01
    assert frequencies(Design.from_dict(data["rounded"])) == (6, 6, 0, 0, 5, 5)
    masses = {(tuple(e["red"]), tuple(e["green"])): e["pi"] for e in data["measure"]["mass"]}
    assert abs(masses[((0, 1), (1, 1))] - 0.207107) < 1e-6


def test_approx_exact_reference(capsys, tmp_path):
    _, d = run(capsys, "construct", "--layout", "2x2", "--kind", "family", "--N", "6", "--phi", "1")
    path = write(tmp_path, "t.json", d)
    code, out = run(capsys, "approx", "--layout", "2x2", "--w", "3", "--hetero", "2,3,4,6", "--efficiency-of", path, "--exact-reference", "--restarts", "2")
    assert code == 0 and "93.40" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "baseline_odx", "construct", "--layout", "2x2", "--kind", "reference"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["layout"] == [2, 2]
    proc = subprocess.run([sys.executable, "-m", "baseline_odx", "construct", "--layout", "bad"], capture_output=True, text=True)
    assert proc.returncode == 3
