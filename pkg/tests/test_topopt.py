import csv

import numpy as np
import pytest

from maternspde.errors import ConfigurationError, MeshIOError
from maternspde.grf import GrfConfig
from maternspde.mesh import rectangle
from maternspde.topopt import (OptConfig, SymmetrizedSampler, build_problem, evaluate,
                               heat_sink_mesh, initial_density, mirror_map, mirrored_pair,
                               multiplicity, optimize, reflect)
from maternspde.topopt.config import config_to_mapping, load_config, parse_config_text
from maternspde.vtkio import read_vtk


def test_heat_sink_mesh_support():
    mesh, length = heat_sink_mesh(64)
    assert length == pytest.approx(0.15625)
    nodes = mesh.boundary_nodes([5])
    assert np.all(mesh.nodes[nodes, 1] == -0.5)
    assert np.all(np.abs(mesh.nodes[nodes, 0]) <= length / 2 + 1e-12)
    half, hlen = heat_sink_mesh(64, half=True)
    assert hlen == length and half.nodes[:, 0].max() == 0.0
    assert len(half.boundary_nodes([2])) == 65


def test_heat_sink_mesh_needs_even_cells():
    with pytest.raises(ConfigurationError):
        heat_sink_mesh(7)


def test_mirror_map_and_multiplicity():
    full, _ = heat_sink_mesh(8)
    half, _ = heat_sink_mesh(8, half=True)
    idx, side = mirror_map(full, half)
    np.testing.assert_allclose(np.abs(full.nodes[:, 0]), np.abs(half.nodes[idx, 0]))
    assert np.all(side[full.nodes[:, 0] > 0] == -1) and np.all(side[full.nodes[:, 0] <= 0] == 1)
    w = multiplicity(half)
    assert set(np.unique(w)) == {1.0, 2.0}
    assert w.sum() == full.num_nodes


def test_mirrored_pair_reconstructs_parts(rng):
    full, _ = heat_sink_mesh(8)
    half, _ = heat_sink_mesh(8, half=True)
    idx, side = mirror_map(full, half)
    f_s = rng.standard_normal(half.num_nodes)
    f_a = rng.standard_normal(half.num_nodes)
    f_a[half.boundary_nodes([2])] = 0.0
    f, fbar = mirrored_pair(f_s, f_a, idx, side)
    # fbar is the mirror image of f
    image = full.nodes.copy()
    image[:, 0] *= -1
    order = np.lexsort(image.T[::-1])
    back = np.lexsort(full.nodes.T[::-1])
    np.testing.assert_allclose(fbar[back], f[order], atol=1e-14)


def test_symmetrized_sampler_boundary_conditions():
    half, _ = heat_sink_mesh(16, half=True)
    sampler = SymmetrizedSampler(half, GrfConfig(1.0, [0.2], seed=3))
    f_s, f_a = sampler.pair(0)
    center = half.boundary_nodes([2])
    assert np.all(f_a[center] == 0.0) and np.any(f_s[center] != 0.0)
    F_s, F_a = sampler.pairs(2)
    np.testing.assert_array_equal(F_s[:, 0], f_s)
    assert F_s.shape == (half.num_nodes, 2)


def test_symmetrized_sampler_needs_centerline():
    mesh, _ = heat_sink_mesh(8)
    with pytest.raises(ConfigurationError):
        SymmetrizedSampler(mesh, GrfConfig(1.0, [0.2]), centerline_attr=7)


def test_initial_designs():
    mesh, _ = heat_sink_mesh(8)
    np.testing.assert_array_equal(initial_density(mesh, OptConfig()), 0.5)
    rho = initial_density(mesh, OptConfig(init="sin5phi"))
    assert rho.min() >= 0 and rho.max() <= 1 and np.ptp(rho) > 0.5


def test_config_parsing(tmp_path):
    text = ("# heat sink\nmesh = grid:32x32\ngamma = 0.4\nsymmetrize = yes\n"
            "nu = 1\nl = 0.1\nseed = 4\nn_samples = 3\nbeta = 8\n")
    cfg, run = parse_config_text(text)
    assert run == {"mesh": "grid:32x32"}
    assert cfg.gamma == 0.4 and cfg.symmetrize and cfg.beta == 8.0
    assert cfg.load == "grf" and cfg.grf.lengths == (0.1,) and cfg.grf.seed == 4
    assert config_to_mapping(cfg)["grf"]["nu"] == 1.0
    path = tmp_path / "c.cfg"
    path.write_text(text)
    assert load_config(path)[0] == cfg


@pytest.mark.parametrize("text,match", [("gamma 0.5", "key=value"), ("colour = red", "unknown"),
                                        ("gamma = abc", "invalid"), ("gamma = 1.5", "gamma"),
                                        ("l = 0.1", "nu")])
def test_config_errors(text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config_text(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(MeshIOError):
        load_config(tmp_path / "none.cfg")


def test_problem_needs_support():
    with pytest.raises(ConfigurationError):
        build_problem(rectangle(4, 4), OptConfig())


def test_evaluate_gradient_fd(rng):
    mesh, _ = heat_sink_mesh(8)
    cfg = OptConfig(filter_r=0.05, beta=4.0)
    problem = build_problem(mesh, cfg)
    rho = rng.uniform(0.2, 0.8, mesh.num_nodes)
    ev = evaluate(problem, rho)
    h = 1e-6
    for i in rng.choice(mesh.num_nodes, 6, replace=False):
        e = np.zeros(mesh.num_nodes)
        e[i] = h
        jp, jm = evaluate(problem, rho + e), evaluate(problem, rho - e)
        assert ev.gradient[i] == pytest.approx((jp.objective - jm.objective) / (2 * h), rel=1e-5)
        assert ev.volume_gradient[i] == pytest.approx((jp.volume - jm.volume) / (2 * h),
                                                      rel=1e-6)


def test_optimize_writes_outputs(tmp_path):
    mesh, _ = heat_sink_mesh(16)
    problem = build_problem(mesh, OptConfig(max_iters=6, snapshot_every=3))
    state = optimize(problem, out_dir=tmp_path)
    with open(tmp_path / "history.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["iter", "objective", "volume", "max_density_change"]
    assert len(rows) == 7 and state.iterations == 6
    assert float(rows[-1]["objective"]) < float(rows[0]["objective"])
    assert (tmp_path / "design_0003.vtk").exists() and (tmp_path / "design_0006.vtk").exists()
    back, data = read_vtk(tmp_path / "design.vtk")
    np.testing.assert_array_equal(data["rho"], state.rho)
    assert state.volume <= 0.5 + 1e-6


def test_optimize_interrupt_writes_checkpoint(tmp_path):
    mesh, _ = heat_sink_mesh(8)
    problem = build_problem(mesh, OptConfig(max_iters=50))

    def stop(state):
        if state.iterations == 3:
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        optimize(problem, out_dir=tmp_path, callback=stop)
    assert (tmp_path / "checkpoint.vtk").exists()
    assert len((tmp_path / "history.csv").read_text().splitlines()) == 5


def test_symmetrized_output_is_mirror_symmetric(tmp_path):
    half, _ = heat_sink_mesh(16, half=True)
    full, _ = heat_sink_mesh(16)
    idx, _ = mirror_map(full, half)
    cfg = OptConfig(symmetrize=True, load="grf", n_samples=2, grf=GrfConfig(1.0, [0.2]),
                    max_iters=4)
    optimize(build_problem(half, cfg), out_dir=tmp_path, output_map=idx, output_mesh=full)
    mesh, data = read_vtk(tmp_path / "design.vtk")
    rho = data["rho_filtered"]
    image = mesh.nodes.copy()
    image[:, 0] *= -1
    j = np.lexsort(image.T[::-1])
    k = np.lexsort(mesh.nodes.T[::-1])
    np.testing.assert_allclose(rho[k], rho[j], atol=1e-10)
    np.testing.assert_array_equal(reflect(np.arange(half.num_nodes), idx), idx)
