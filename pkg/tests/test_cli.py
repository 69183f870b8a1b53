import json
import subprocess
import sys
from importlib import resources

import pytest

from stitchkit.cli import RunConfig, run


def invoke(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def checks(text):
    return {line.split()[1]: line.split()[2] for line in text.splitlines() if line.startswith("CHECK ")}


def fixture_text(name):
    return resources.files("stitchkit.fixtures").joinpath(name).read_text()


def test_verify_list(capsys):
    code, out, _ = invoke(capsys, "verify", "--list")
    assert code == 0
    for name in ("focus_focus", "leg", "amoeba"):
        assert name in out


def test_verify_focus_focus(capsys):
    code, out, _ = invoke(capsys, "verify", "focus_focus")
    assert code == 0
    result = checks(out)
    assert result["discrepancy_match"] == "PASS" and set(result.values()) == {"PASS"}
    assert "max_err=" in next(l for l in out.splitlines() if l.startswith("CHECK discrepancy_match"))


def test_verify_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert invoke(capsys, "verify", "leg", "--seed", "3", "--out", str(a))[0] == 0
    first = a.read_text()
    assert invoke(capsys, "verify", "leg", "--seed", "3", "--out", str(a))[0] == 0
    assert a.read_text() == first
    invoke(capsys, "verify", "leg", "--seed", "3", "--out", str(b))
    assert a.read_text().splitlines()[2:] == b.read_text().splitlines()[2:]
    assert first.startswith("# stitchkit ")


def test_trajectory_dump(capsys, tmp_path):
    path = tmp_path / "traj.csv"
    assert invoke(capsys, "verify", "focus_focus", "--dump-trajectory", str(path))[0] == 0
    header = path.read_text().splitlines()[0].split(",")
    assert header[0] == "t" and len(path.read_text().splitlines()) > 2


@pytest.mark.parametrize("name", ["ell_n2.json", "ell_n3.json"])
def test_convert_round_trip_is_byte_identical(capsys, tmp_path, name):
    src = tmp_path / name
    src.write_text(fixture_text(name))
    s_path, back = tmp_path / "s.json", tmp_path / "back.json"
    assert invoke(capsys, "seq", "convert", str(src), "--dir", "ell2s", "--out", str(s_path))[0] == 0
    assert invoke(capsys, "seq", "convert", str(s_path), "--dir", "s2ell", "--out", str(back))[0] == 0
    assert back.read_bytes() == src.read_bytes()


def test_seq_check_fixture(capsys):
    code, out, _ = invoke(capsys, "seq", "check", "fixture:ell_n3.json")
    assert code == 0
    result = checks(out)
    assert result["closed_iff_admissible"] == "PASS" and result["integrality"] == "PASS"


def test_seq_check_fails_on_non_integral(capsys, tmp_path):
    doc = json.loads(fixture_text("ell_n2.json"))
    doc["ell"][0] = [[{"alpha": [0], "k": [0], "re": 0.5, "im": 0.0}]]
    path = tmp_path / "half.json"
    path.write_text(json.dumps(doc))
    code, out, _ = invoke(capsys, "seq", "check", str(path))
    assert code == 1 and checks(out)["integrality"] == "FAIL"


def test_seq_act_identity_free(capsys, tmp_path):
    out_path = tmp_path / "acted.json"
    code, _, _ = invoke(capsys, "seq", "act", "fixture:ell_n2.json", "--germ", "fixture:germ_n2.json",
                        "--out", str(out_path))
    assert code == 0
    assert json.loads(out_path.read_text())["convention"] == "period-1"


def test_build_u(capsys):
    code, out, _ = invoke(capsys, "build-u", "--seq", "fixture:ell_n3.json", "--samples", "20")
    assert code == 0
    assert checks(out)["brackets"] == "PASS"


def test_monodromy_focus_focus(capsys):
    code, out, _ = invoke(capsys, "monodromy", "focus_focus")
    assert code == 0
    assert checks(out)["conjugate_to_unipotent"] == "PASS"


def test_amoeba_render(capsys, tmp_path):
    ppm = tmp_path / "line.ppm"
    code, out, _ = invoke(capsys, "amoeba", "render", "--bounds", "-2,2,-2,2", "--res", "100",
                          "--out", str(ppm), "--svg", str(tmp_path / "line.svg"))
    assert code == 0 and "components=3" in out
    assert ppm.read_bytes().startswith(b"P6\n100 100\n")


def test_report_selected(capsys):
    code, out, _ = invoke(capsys, "report", "--select", "2")
    assert code == 0 and "CHECK 02_low_order_formulas PASS" in out


@pytest.mark.parametrize("argv", [
    ["nonsense"],
    ["verify", "no_such_example"],
    ["seq", "convert", "fixture:ell_n2.json", "--dir", "sideways"],
    ["amoeba", "render", "--poly", ""],
    ["amoeba", "render", "--bounds", "1,1,0,1"],
    ["verify", "leg", "--tol", "energy=-1"],
    ["seq", "check", "/no/such/file.json"],
])
def test_usage_errors_exit_2(capsys, argv):
    assert invoke(capsys, *argv)[0] == 2


def test_run_config_rejects_nonpositive_tolerance():
    with pytest.raises(Exception):
        RunConfig("verify", tolerances={"energy": 0.0})


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "stitchkit", "verify", "--list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "amoeba" in proc.stdout
