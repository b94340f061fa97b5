import json
import os
import signal
import subprocess
import sys
import time

import numpy as np
import pytest

from maternspde.cli import main
from maternspde.mesh import icosphere, rectangle
from maternspde.vtkio import read_vtk, write_obj, write_vtk


def _files(path):
    return sorted(p.relative_to(path) for p in path.rglob("*.vtk"))


def test_sample_three_files(tmp_path):
    args = ["sample", "--grid", "16x16", "--nu", "1", "--l", "0.1", "--n", "3", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    files = _files(tmp_path / "a")
    assert [str(f) for f in files] == ["sample_0000.vtk", "sample_0001.vtk", "sample_0002.vtk"]
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["command"] == "sample" and len(manifest["outputs"]) == 3
    assert manifest["config"]["runs"][0]["grf"]["seed"] == 7


def test_sweep_with_shared_noise(tmp_path):
    out = tmp_path / "s"
    assert main(["sample", "--grid", "12x12", "--nu", "0.5", "1", "4", "--l", "0.05", "0.2",
                 "--reuse-noise", "--seed", "3", "--out", str(out)]) == 0
    dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert len(dirs) == 6
    seeds = {r["grf"]["seed"] for r in json.loads((out / "manifest.json").read_text())["config"]["runs"]}
    assert seeds == {3}


def test_sweep_without_reuse_uses_distinct_seeds(tmp_path):
    out = tmp_path / "s"
    assert main(["sample", "--grid", "8x8", "--nu", "1", "2", "--seed", "3", "--out", str(out)]) == 0
    runs = json.loads((out / "manifest.json").read_text())["config"]["runs"]
    assert [r["grf"]["seed"] for r in runs] == [3, 4]


def test_negative_nu_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["sample", "--grid", "8x8", "--nu", "-1"])
    assert info.value.code == 2
    assert "--nu" in capsys.readouterr().err


def test_missing_mesh_exit_3(tmp_path):
    assert main(["sample", "--mesh", str(tmp_path / "none.vtk"), "--out", str(tmp_path)]) == 3


def test_bad_lower_upper_exit_2(tmp_path):
    assert main(["sample", "--grid", "4x4", "--lower", "0", "--out", str(tmp_path)]) == 2


def test_verify_default_suite_passes(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "covariance.csv").read_text().splitlines()
    assert lines[0].startswith("pair_id,dist") and len(lines) == 5
    assert "4/4 pairs passed" in capsys.readouterr().out


def test_verify_probe_at_boundary_exit_2(tmp_path):
    assert main(["verify", "--grid", "100", "--center", "0.05", "--n", "20",
                 "--out", str(tmp_path)]) == 2


def test_verify_failure_exit_1(tmp_path, capsys):
    # ten cells cannot resolve l = 0.05
    assert main(["verify", "--grid", "10", "--l", "0.05", "--n", "2000",
                 "--out", str(tmp_path)]) == 1
    assert "FAIL pair" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["metrics"]["passed"] is False


def test_threshold_constant_field(tmp_path):
    mesh = rectangle(3, 3)
    write_vtk(tmp_path / "f.vtk", mesh, {"grf": np.full(16, 0.5)})
    assert main(["threshold", "--field", str(tmp_path / "f.vtk"), "--lo", "0", "--hi", "1",
                 "--out", str(tmp_path / "o" / "t.vtk")]) == 0
    _, data = read_vtk(tmp_path / "o" / "t.vtk")
    np.testing.assert_array_equal(data["grf"], 1.0)
    assert (tmp_path / "o" / "manifest.json").exists()


def test_combine_microstructure(tmp_path):
    paths = []
    for i, angle in enumerate(("0", "1.0472", "2.0944")):
        out = tmp_path / f"g{i}"
        assert main(["sample", "--grid", "32x32", "--nu", "4", "--l", "0.2,0.02",
                     "--rotation", angle, "--seed", str(i), "--out", str(out)]) == 0
        th = tmp_path / f"t{i}.vtk"
        assert main(["threshold", "--field", str(out / "sample_0000.vtk"), "--lo", "0.5",
                     "--out", str(th)]) == 0
        paths.append(str(th))
    assert main(["combine", "--fields", *paths, "--mode", "sum", "--lo", "0.5",
                 "--out", str(tmp_path / "c.vtk")]) == 0
    _, data = read_vtk(tmp_path / "c.vtk")
    assert set(np.unique(data["grf"])) == {0.0, 1.0}


def test_combine_mesh_mismatch_exit_2(tmp_path):
    write_vtk(tmp_path / "a.vtk", rectangle(2, 2), {"grf": np.zeros(9)})
    write_vtk(tmp_path / "b.vtk", rectangle(3, 3), {"grf": np.zeros(16)})
    assert main(["combine", "--fields", str(tmp_path / "a.vtk"), str(tmp_path / "b.vtk"),
                 "--out", str(tmp_path / "c.vtk")]) == 2


def test_perturb_sphere(tmp_path):
    mesh = icosphere(2)
    write_obj(tmp_path / "sphere.obj", mesh)
    write_vtk(tmp_path / "f.vtk", mesh, {"grf": np.ones(mesh.num_nodes)})
    assert main(["perturb", "--mesh", str(tmp_path / "sphere.obj"), "--field",
                 str(tmp_path / "f.vtk"), "--alpha", "0.1", "--out",
                 str(tmp_path / "out" / "p.obj")]) == 0
    text = (tmp_path / "out" / "p.obj").read_text().splitlines()
    v = np.array([[float(t) for t in line.split()[1:]] for line in text if line.startswith("v ")])
    assert np.max(np.abs(np.linalg.norm(v, axis=1) - 1.1)) < 1e-2


def test_perturb_planar_mesh_exit_2(tmp_path):
    mesh = rectangle(2, 2)
    write_vtk(tmp_path / "m.vtk", mesh, {"grf": np.zeros(9)})
    assert main(["perturb", "--mesh", str(tmp_path / "m.vtk"), "--field",
                 str(tmp_path / "m.vtk"), "--alpha", "0.1", "--out", str(tmp_path / "p.obj")]) == 2


def _write_cfg(path, extra=""):
    path.write_text("mesh = grid:16x16\ngamma = 0.5\nmax_iters = 4\n" + extra)
    return path


def test_optimize_outputs(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "opt.cfg")
    assert main(["optimize", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert {p.name for p in (tmp_path / "o").iterdir()} == {"history.csv", "design.vtk",
                                                           "manifest.json"}
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["metrics"]["iterations"] == 4
    assert manifest["config"]["realized_support_length"] == pytest.approx(0.25)
    assert "objective" in capsys.readouterr().out


def test_optimize_symmetrize_mirror_output(tmp_path):
    cfg = _write_cfg(tmp_path / "opt.cfg", "symmetrize = true\nnu = 1\nl = 0.2\nn_samples = 2\n")
    assert main(["optimize", str(cfg), "--out", str(tmp_path / "o")]) == 0
    mesh, data = read_vtk(tmp_path / "o" / "design.vtk")
    assert mesh.num_nodes == 17 * 17
    rho = data["rho"]
    image = mesh.nodes.copy()
    image[:, 0] *= -1
    np.testing.assert_array_equal(rho[np.lexsort(mesh.nodes.T[::-1])],
                                  rho[np.lexsort(image.T[::-1])])


def test_optimize_missing_mesh_exit_3(tmp_path):
    cfg = tmp_path / "opt.cfg"
    cfg.write_text(f"mesh = {tmp_path / 'missing.vtk'}\n")
    assert main(["optimize", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_optimize_missing_config_exit_3(tmp_path):
    assert main(["optimize", str(tmp_path / "none.cfg")]) == 3


def test_optimize_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "opt.cfg"
    cfg.write_text("mesh = grid:16x16\ngamma = 2\n")
    assert main(["optimize", str(cfg)]) == 2


def test_replay_is_bit_identical(tmp_path):
    assert main(["sample", "--grid", "10x10", "--nu", "0.7", "--n", "2", "--threads", "1",
                 "--out", str(tmp_path / "a")]) == 0
    assert main(["replay", str(tmp_path / "a" / "manifest.json"), "--out",
                 str(tmp_path / "b")]) == 0
    for f in _files(tmp_path / "a"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_optimize_sigint_writes_checkpoint(tmp_path):
    cfg = tmp_path / "opt.cfg"
    cfg.write_text("mesh = grid:64x64\nmax_iters = 100000\nstop_tol = 0\n")
    out = tmp_path / "o"
    env = dict(os.environ, PYTHONUNBUFFERED="1")
    proc = subprocess.Popen([sys.executable, "-m", "maternspde.cli", "optimize", str(cfg),
                             "--out", str(out)], env=env, stderr=subprocess.PIPE, text=True)
    deadline = time.time() + 60
    # the output directory appears once setup is done; give the loop a moment to start
    while time.time() < deadline and not out.exists() and proc.poll() is None:
        time.sleep(0.2)
    time.sleep(2.0)
    proc.send_signal(signal.SIGINT)
    _, err = proc.communicate(timeout=60)
    assert proc.returncode == 130
    assert (out / "checkpoint.vtk").exists() and (out / "history.csv").exists()
    assert "interrupted" in err
