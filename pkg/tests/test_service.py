import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from levelilt.cli import run_command
from levelilt.fileio import read_pgm, read_raw_field, write_raw_field
from levelilt.levelset import signed_distance
from levelilt.service import create_app
from levelilt.session import Session

CFG = """
grid.width = 64
grid.height = 64
grid.pixel_size = 12.0
optics.kernel_size = 21
kernels.count = 4
ilt.kernel_count = 3
layouts.count = 1
layouts.max_rects = 3
seed = 31
"""


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    cfg_path = root / "run.cfg"
    cfg_path.write_text(CFG + f"paths.kernels_dir = {root / 'kernels'}\n")
    assert run_command(["gen-kernels", "--config", str(cfg_path), "--out-dir", str(root / "kernels")]) == 0
    assert run_command(["gen-layouts", "--config", str(cfg_path), "--out-dir", str(root / "layouts")]) == 0
    target = root / "layouts" / "layout_000.pgm"
    kernel_files = sorted(str(p) for p in (root / "kernels").glob("*.lkrn"))
    return root, cfg_path, target, kernel_files


@pytest.fixture()
def client():
    return TestClient(create_app())


def b64_f64(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode()


def from_b64(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f8")


class TestSession:
    def test_create_and_eval(self, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        session = Session.create(CFG, kernel_files, target)
        psi = signed_distance(read_pgm(target))
        loss, grad = session.eval_loss_and_grad(psi.psi.ravel())
        assert loss > 0 and grad.shape == (64, 64)

    def test_matches_cli_export_grad_bytes(self, artifacts, tmp_path):
        root, cfg_path, target, kernel_files = artifacts
        psi = signed_distance(read_pgm(target))
        write_raw_field(psi.field, tmp_path / "psi.raw")
        out = tmp_path / "grad.raw"
        assert run_command([
            "export-grad", "--config", str(cfg_path),
            "--psi", str(tmp_path / "psi.raw"), "--target", str(target),
            "--out", str(out),
        ]) == 0
        cli_grad = read_raw_field(out)

        session = Session.create(CFG, kernel_files, target)
        _, grad = session.eval_loss_and_grad(psi.psi.ravel())
        assert grad.tobytes() == cli_grad.data.tobytes()

    def test_well_printing_psi_has_smaller_gradient(self, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        session = Session.create(CFG, kernel_files, target)
        good = signed_distance(read_pgm(target))
        loss_good, grad_good = session.eval_loss_and_grad(good.psi.ravel())
        # A coarse blob in the corner prints badly.
        bad_mask = np.zeros((64, 64))
        bad_mask[2:20, 2:20] = 1.0
        from levelilt.fields import ScalarField

        bad = signed_distance(ScalarField(bad_mask, 12.0))
        loss_bad, grad_bad = session.eval_loss_and_grad(bad.psi.ravel())
        assert loss_good < loss_bad
        assert np.abs(grad_good).max() < np.abs(grad_bad).max()

    def test_repeated_eval_identical_bytes(self, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        session = Session.create(CFG, kernel_files, target)
        psi = signed_distance(read_pgm(target)).psi.ravel()
        l1, g1 = session.eval_loss_and_grad(psi)
        l2, g2 = session.eval_loss_and_grad(psi)
        assert l1 == l2 and g1.tobytes() == g2.tobytes()

    def test_two_sessions_independent(self, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        a = Session.create(CFG, kernel_files, target)
        b = Session.create(CFG, kernel_files, target)
        assert a is not b
        psi = signed_distance(read_pgm(target)).psi.ravel()
        assert a.eval_loss_and_grad(psi)[0] == b.eval_loss_and_grad(psi)[0]

    def test_concurrent_evals_match_serial(self, artifacts):
        import threading

        root, cfg_path, target, kernel_files = artifacts
        sessions = [Session.create(CFG, kernel_files, target) for _ in range(3)]
        rng = np.random.default_rng(17)
        bufs = [
            signed_distance(read_pgm(target)).psi.ravel() + rng.normal(0, 0.01, 64 * 64)
            for _ in range(3)
        ]
        serial = [s.eval_loss_and_grad(b) for s, b in zip(sessions, bufs)]
        results = [None] * 3

        def work(i):
            results[i] = sessions[i].eval_loss_and_grad(bufs[i])

        threads = [threading.Thread(target=work, args=(i,)) for i in range(3)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for (l1, g1), (l2, g2) in zip(serial, results):
            assert l1 == l2
            assert g1.tobytes() == g2.tobytes()

    def test_uniform_sign_rejected(self, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        session = Session.create(CFG, kernel_files, target)
        with pytest.raises(ValueError, match="no interface"):
            session.eval_loss_and_grad(np.full(64 * 64, 3.0))

    def test_nonfinite_rejected(self, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        session = Session.create(CFG, kernel_files, target)
        buf = np.zeros(64 * 64) - 1.0
        buf[5] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            session.eval_loss_and_grad(buf)

    def test_truncated_kernel_file_rejected(self, artifacts, tmp_path):
        root, cfg_path, target, kernel_files = artifacts
        cut = tmp_path / "cut.lkrn"
        cut.write_bytes(open(kernel_files[0], "rb").read()[:50])
        with pytest.raises(ValueError, match="LKRN: unexpected end"):
            Session.create(CFG, [str(cut)], target)

    def test_missing_defocus_rejected(self, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        nominal_only = [f for f in kernel_files if "f+0" in f]
        with pytest.raises(ValueError, match="defocus"):
            Session.create(CFG + "ilt.pv = true\n", nominal_only, target)


class TestHttpService:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200 and r.json()["status"] == "ok"

    def test_session_lifecycle(self, client, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        r = client.post("/sessions", json={
            "config_text": CFG,
            "kernel_files": kernel_files,
            "target_file": str(target),
        })
        assert r.status_code == 200, r.text
        info = r.json()
        sid = info["session_id"]
        assert info["width"] == 64 and info["conditions"] == 1

        psi = signed_distance(read_pgm(target))
        r = client.post(f"/sessions/{sid}/eval", json={"psi_b64": b64_f64(psi.psi)})
        assert r.status_code == 200
        body = r.json()
        assert body["loss"] > 0
        grad = from_b64(body["grad_b64"])
        assert grad.size == 64 * 64

        # same bytes as the in-process session
        session = Session.create(CFG, kernel_files, target)
        _, grad_direct = session.eval_loss_and_grad(psi.psi.ravel())
        assert grad.tobytes() == grad_direct.tobytes()

        r = client.get(f"/sessions/{sid}/error")
        assert r.json()["detail"] == ""

        assert client.delete(f"/sessions/{sid}").status_code == 200
        assert client.post(f"/sessions/{sid}/eval", json={"psi_b64": b64_f64(psi.psi)}).status_code == 404

    def test_create_failure_gives_400_with_detail(self, client, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        r = client.post("/sessions", json={
            "config_text": "grid.width = banana",
            "kernel_files": kernel_files,
            "target_file": str(target),
        })
        assert r.status_code == 400
        assert "grid.width" in r.json()["detail"]

    def test_eval_error_sets_last_error(self, client, artifacts):
        root, cfg_path, target, kernel_files = artifacts
        sid = client.post("/sessions", json={
            "config_text": CFG,
            "kernel_files": kernel_files,
            "target_file": str(target),
        }).json()["session_id"]
        r = client.post(f"/sessions/{sid}/eval", json={"psi_b64": b64_f64(np.ones(64 * 64))})
        assert r.status_code == 422
        assert "no interface" in r.json()["detail"]
        assert "no interface" in client.get(f"/sessions/{sid}/error").json()["detail"]

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/deadbeef").status_code == 404
