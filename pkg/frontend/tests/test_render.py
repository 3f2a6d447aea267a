"""Figure rendering: determinism, schema errors, end-to-end from a
primary run's artifacts."""

import hashlib
import json
import pathlib
import subprocess
import sys

import pytest

from lorwave_plots import FigureSpec, MissingColumn, SchemaMismatch, render

FRONTEND = pathlib.Path(__file__).parents[1]
SPECS = FRONTEND / "specs"
SCENARIOS = FRONTEND.parents[0] / "src" / "lorwave" / "scenarios"


def run_primary(subcommand, scenario, out, extra=()):
    cmd = [sys.executable, "-m", "lorwave.cli", subcommand,
           "--config", str(SCENARIOS / scenario),
           "--out-dir", str(out), "--quiet", *extra]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """One completed primary run per producing subcommand."""
    root = tmp_path_factory.mktemp("artifacts")
    run_primary("verify-energy", "flat_standing_wave.json", root / "energy",
                extra=("--resolution", "48"))
    ce = json.loads((SCENARIOS / "null_line.json").read_text())
    ce["discretization"]["N"] = 384
    ce["problem"]["nt"] = 897
    ce_path = root / "ce.json"
    ce_path.write_text(json.dumps(ce))
    proc = subprocess.run(
        [sys.executable, "-m", "lorwave.cli", "counterexample",
         "--config", str(ce_path), "--out-dir", str(root / "counterexample"),
         "--quiet"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    run_primary("convergence", "convergence_mms.json", root / "convergence")
    go = json.loads((SCENARIOS / "goursat_cone.json").read_text())
    go["discretization"]["N"] = 128
    go["problem"]["probe"] = False
    go_path = root / "go.json"
    go_path.write_text(json.dumps(go))
    proc = subprocess.run(
        [sys.executable, "-m", "lorwave.cli", "solve-goursat",
         "--config", str(go_path), "--out-dir", str(root / "goursat"),
         "--quiet"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return root


def checksum_tree(root):
    out = {}
    for p in sorted(pathlib.Path(root).rglob("*")):
        if p.is_file():
            out[str(p)] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def test_all_shipped_specs_render(artifacts, tmp_path):
    before = checksum_tree(artifacts)
    for spec_path in sorted(SPECS.glob("*.json")):
        out = render(spec_path, artifacts=artifacts, out_dir=tmp_path)
        assert out.exists() and out.stat().st_size > 0, spec_path.name
    # rendering is read-only over its inputs
    assert checksum_tree(artifacts) == before


def test_heatmap_renders_byte_identical(artifacts, tmp_path):
    spec = SPECS / "counterexample_heatmap.json"
    a = render(spec, artifacts=artifacts, out_dir=tmp_path / "a")
    b = render(spec, artifacts=artifacts, out_dir=tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()


def test_cli_entry_point(artifacts, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lorwave_plots.render",
         "--spec", str(SPECS / "energy_flat.json"),
         "--artifacts", str(artifacts), "--out-dir", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "energy_flat.png").exists()


def test_unknown_kind_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "pie", "inputs": {}, "out": "x.png"}))
    with pytest.raises(SchemaMismatch):
        FigureSpec.from_file(bad)


def test_empty_csv_missing_column(tmp_path):
    empty = tmp_path / "field.csv"
    empty.write_text("")
    spec = FigureSpec(kind="heatmap", inputs={"field": "field.csv"},
                      out="x.png")
    with pytest.raises(MissingColumn):
        render(spec, artifacts=tmp_path, out_dir=tmp_path)


def test_wrong_columns_missing_column(tmp_path):
    csv_path = tmp_path / "trace.csv"
    csv_path.write_text("a,b\n1,2\n")
    spec = FigureSpec(kind="energy",
                      inputs={"trace": "trace.csv", "report": "r.json"},
                      out="x.png")
    with pytest.raises(MissingColumn):
        render(spec, artifacts=tmp_path, out_dir=tmp_path)


def test_cli_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "energy", "inputs": {}, "out": "x.png"}))
    proc = subprocess.run(
        [sys.executable, "-m", "lorwave_plots.render", "--spec", str(bad),
         "--artifacts", str(tmp_path), "--out-dir", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 1
    assert "error:" in proc.stderr
