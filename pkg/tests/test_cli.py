import csv
import json
import shutil
import subprocess
import sys

import pytest

from pcbfea.cli import main

# the shipped board keeps a battery modulus that trips the plausibility warning
pytestmark = pytest.mark.filterwarnings("ignore::pcbfea.errors.NonPhysicalMaterialWarning")

COARSE = ["--element-size", "12", "--layers", "1", "--facets", "8"]


def run(tmp_path, *args):
    return main([*args, *COARSE, "-o", str(tmp_path)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate_reports_warnings(capsys):
    assert main(["validate", "--supports", "8"]) == 0
    out = capsys.readouterr().out
    assert "aed_8support: ok (9 components, 8 supports)" in out
    assert "Lithium" in out


def test_invalid_model_file_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('name = "x"\nunit_system = "mm"\n[board]\nsize = [10.0, 10.0]\n')
    assert main(["validate", str(bad)]) == 2
    assert "board.size" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.toml")]) == 1
    broken = tmp_path / "broken.toml"
    broken.write_text("[board\n")
    assert main(["validate", str(broken)]) == 1
    assert "line 1" in capsys.readouterr().err


def test_mesh_and_static(tmp_path):
    assert run(tmp_path, "mesh") == 0
    assert (tmp_path / "mesh.vtk").exists()
    assert run(tmp_path, "static", "--load", "pressure") == 0
    rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "static_summary.csv")}
    assert float(rows["max_deformation_m"]) > 0
    assert float(rows["distance_to_supports_m"]) > 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "static"
    assert set(man["artifacts"]) == {"static_summary.csv", "static.vtk"}


def test_static_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "static") == 0 and run(b, "static") == 0
    assert (a / "static_summary.csv").read_bytes() == (b / "static_summary.csv").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["artifacts"] == mb["artifacts"] and ma["model_hash"] == mb["model_hash"]


def test_modal_with_participation_and_prestress(tmp_path):
    assert run(tmp_path, "modal", "--modes", "4", "--prestressed", "--participation", "part.csv") == 0
    freqs = read_csv(tmp_path / "frequencies.csv")
    assert len(freqs) == 4 and float(freqs[0]["frequency_hz"]) > 0
    cmp_ = read_csv(tmp_path / "prestress_comparison.csv")
    assert len(cmp_) == 4
    part = read_csv(tmp_path / "part.csv")
    assert part[-1]["mode"] == "total"
    assert (tmp_path / "part_curve.csv").exists()


SMALL = """
name = "small"
unit_system = "mm"

[board]
size = [60.0, 40.0, 0.5]

[[components]]
name = "chip"
material = "Silicon"
shape = "cuboid"
length = 10.0
width = 10.0
height = 1.0
position = [30.0, 20.0]

[[supports]]
center = [5.0, 5.0]

[[supports]]
center = [55.0, 5.0]

[[supports]]
center = [55.0, 35.0]

[[supports]]
center = [5.0, 35.0]

[[load_cases]]
name = "push"
type = "pressure"
pressure = 2000.0
face = "bottom"
"""


def test_nonlinear_writes_history(tmp_path):
    model = tmp_path / "small.toml"
    model.write_text(SMALL)
    assert main(["nonlinear", str(model), "--substeps", "1", "--element-size", "5", "-o", str(tmp_path)]) == 0
    hist = read_csv(tmp_path / "convergence.csv")
    assert float(hist[-1]["criterion"]) <= 1.0
    subs = read_csv(tmp_path / "substeps.csv")
    assert [s["converged"] for s in subs] == ["true"]


def test_transient_sweep(tmp_path):
    assert run(tmp_path, "transient", "--load", "shock", "--dt", "5e-4", "--t-end", "2e-3", "--sweep", "0.01:0.02:0.01") == 0
    for z in ("0.01", "0.02"):
        rows = read_csv(tmp_path / f"transient_zeta_{z}.csv")
        assert len(rows) == 5
        assert float(rows[0]["max_deformation_m"]) == 0.0


def test_thermal_and_report(tmp_path):
    assert run(tmp_path, "thermal") == 0
    rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "thermal_summary.csv")}
    assert rows["hotspot_region"] == "Battery"
    assert float(rows["energy_imbalance"]) < 1e-8
    assert run(tmp_path / "r", "report", "--modes", "3") == 0
    names = {p.name for p in (tmp_path / "r").iterdir()}
    assert {"frequencies.csv", "participation.csv", "prestress_comparison.csv", "thermal_summary.csv"} <= names


@pytest.mark.skipif(shutil.which("pcbfea") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["pcbfea", "validate"], capture_output=True, text=True, check=True)
    assert "aed_4support: ok" in out.stdout


def test_module_help():
    out = subprocess.run([sys.executable, "-m", "pcbfea.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "transient" in out.stdout
