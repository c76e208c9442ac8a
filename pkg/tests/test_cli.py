import json
from pathlib import Path

import numpy as np
import pytest

from levelilt.cli import run_command
from levelilt.fileio import read_pgm, read_raw_field

# Small, fast configuration shared by the CLI tests: coarse grid, few
# kernels, short optimization.
CFG = """
grid.width = 96
grid.height = 96
grid.pixel_size = 12.0
optics.kernel_size = 25
kernels.count = 6
ilt.kernel_count = 4
ilt.max_iters = 40
layouts.count = 2
layouts.max_rects = 3
pw.defocus = -80 0 80
pw.dose_step = 0.05
seed = 9
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.cfg"
    cfg.write_text(CFG + f"paths.kernels_dir = {root / 'kernels'}\n")
    assert run_command(["gen-kernels", "--config", str(cfg), "--out-dir", str(root / "kernels")]) == 0
    assert run_command(["gen-layouts", "--config", str(cfg), "--out-dir", str(root / "layouts")]) == 0
    return root, cfg


def test_gen_kernels_writes_expected_files(workspace):
    root, cfg = workspace
    names = sorted(p.name for p in (root / "kernels").glob("*.lkrn"))
    assert "kernels_f+0.lkrn" in names
    assert "kernels_f-80.lkrn" in names and "kernels_f+80.lkrn" in names


def test_gen_layouts_writes_rasters_and_json(workspace):
    root, _ = workspace
    rasters = sorted((root / "layouts").glob("layout_*.pgm"))
    assert len(rasters) == 2
    report = json.loads((root / "layouts" / "layouts.json").read_text())
    assert report["count"] == 2
    for entry in report["layouts"]:
        assert len(entry["rectangles"]) >= 2


def test_simulate_zero_mask_gives_zero_image(workspace, tmp_path):
    root, cfg = workspace
    from levelilt.fields import ScalarField
    from levelilt.fileio import write_pgm

    write_pgm(ScalarField(np.zeros((96, 96)), 12.0), tmp_path / "zero.pgm")
    out = tmp_path / "sim"
    assert run_command([
        "simulate", "--config", str(cfg),
        "--mask", str(tmp_path / "zero.pgm"), "--out-prefix", str(out),
    ]) == 0
    aerial = read_raw_field(f"{out}_aerial.raw")
    assert aerial.data.max() == 0.0
    resist = read_pgm(f"{out}_resist.pgm")
    assert resist.data.max() == 0.0


def test_ilt_then_metrics_improves_ede(workspace, tmp_path):
    root, cfg = workspace
    target = root / "layouts" / "layout_000.pgm"
    out = tmp_path / "opt"
    assert run_command([
        "ilt", "--config", str(cfg), "--target", str(target), "--out-prefix", str(out),
    ]) == 0
    assert Path(f"{out}_mask.pgm").exists()
    assert Path(f"{out}_psi.raw").exists()
    trace = Path(f"{out}_trace.csv").read_text().splitlines()
    assert trace[0] == "iteration,loss"
    assert len(trace) > 2

    # metrics for the optimized mask vs metrics for the raw target as mask
    opt_json = tmp_path / "opt.json"
    raw_json = tmp_path / "raw.json"
    assert run_command([
        "metrics", "--config", str(cfg),
        "--pair", f"{out}_mask.pgm:{target}", "--out", str(opt_json),
    ]) == 0
    assert run_command([
        "metrics", "--config", str(cfg),
        "--pair", f"{target}:{target}", "--out", str(raw_json),
    ]) == 0
    opt_ede = json.loads(opt_json.read_text())["aede_nm"]
    raw_ede = json.loads(raw_json.read_text())["aede_nm"]
    assert opt_ede < raw_ede


def test_pw_writes_curve(workspace, tmp_path):
    root, cfg = workspace
    target = root / "layouts" / "layout_001.pgm"
    out = tmp_path / "pw.json"
    assert run_command([
        "pw", "--config", str(cfg),
        "--mask", str(target), "--target", str(target), "--out", str(out),
    ]) == 0
    payload = json.loads(out.read_text())
    assert len(payload["samples"]) == 3
    assert payload["area"] >= 0.0
    assert "worst_ils_per_um" in payload


def test_export_grad_round_trip(workspace, tmp_path):
    root, cfg = workspace
    target = root / "layouts" / "layout_000.pgm"
    from levelilt.fileio import write_raw_field
    from levelilt.levelset import signed_distance

    psi = signed_distance(read_pgm(target))
    write_raw_field(psi.field, tmp_path / "psi.raw")
    out = tmp_path / "grad.raw"
    assert run_command([
        "export-grad", "--config", str(cfg),
        "--psi", str(tmp_path / "psi.raw"), "--target", str(target),
        "--out", str(out), "--loss-out", str(tmp_path / "loss.json"),
    ]) == 0
    grad = read_raw_field(out)
    assert grad.shape == (96, 96)
    assert np.abs(grad.data).max() > 0
    assert json.loads((tmp_path / "loss.json").read_text())["loss"] > 0


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self):
        assert run_command(["frobnicate"]) == 1

    def test_help_exits_zero(self):
        assert run_command(["--help"]) == 0

    def test_malformed_config_names_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("grid.width = banana\n")
        code = run_command(["gen-layouts", "--config", str(cfg), "--out-dir", str(tmp_path)])
        assert code == 1
        assert "grid.width" in capsys.readouterr().err

    def test_unknown_config_key_names_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("grid.depth = 4\n")
        code = run_command(["gen-layouts", "--config", str(cfg), "--out-dir", str(tmp_path)])
        assert code == 1
        assert "grid.depth" in capsys.readouterr().err

    def test_missing_input_is_runtime_error(self, tmp_path):
        code = run_command([
            "simulate", "--mask", str(tmp_path / "nope.pgm"),
            "--out-prefix", str(tmp_path / "x"),
        ])
        assert code == 2

    def test_missing_kernels_is_runtime_error(self, workspace, tmp_path):
        root, cfg = workspace
        target = root / "layouts" / "layout_000.pgm"
        code = run_command([
            "ilt", "--config", str(cfg), "--kernels-dir", str(tmp_path / "empty"),
            "--target", str(target), "--out-prefix", str(tmp_path / "y"),
        ])
        assert code == 2


def test_full_run_byte_determinism(tmp_path):
    """Identical config and seed produce byte-identical artifacts."""
    outputs = []
    for name in ("a", "b"):
        root = tmp_path / name
        root.mkdir()
        cfg = root / "run.cfg"
        cfg.write_text(CFG + f"paths.kernels_dir = {root / 'kernels'}\n")
        assert run_command(["gen-kernels", "--config", str(cfg), "--out-dir", str(root / "kernels")]) == 0
        assert run_command(["gen-layouts", "--config", str(cfg), "--out-dir", str(root / "layouts")]) == 0
        target = root / "layouts" / "layout_000.pgm"
        assert run_command([
            "ilt", "--config", str(cfg), "--target", str(target),
            "--out-prefix", str(root / "opt"),
        ]) == 0
        assert run_command([
            "metrics", "--config", str(cfg),
            "--pair", f"{root / 'opt_mask.pgm'}:{target}", "--out", str(root / "m.json"),
        ]) == 0
        blobs = {}
        for p in sorted(root.rglob("*")):
            if p.is_file() and p.suffix in (".pgm", ".raw", ".lkrn", ".csv", ".json"):
                blobs[str(p.relative_to(root))] = p.read_bytes()
        outputs.append(blobs)
    assert outputs[0].keys() == outputs[1].keys()
    for key in outputs[0]:
        assert outputs[0][key] == outputs[1][key], f"artifact {key} differs"
