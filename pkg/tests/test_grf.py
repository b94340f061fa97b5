import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from maternspde.errors import ConfigurationError
from maternspde.fem import BoundaryCondition
from maternspde.grf import (GrfConfig, GrfSampler, batch_matrix, matern_covariance,
                            normalization_eta, sample_batch, sample_grf)
from maternspde.mesh import rectangle, unit_interval


def test_eta_two_dimensional():
    eta = normalization_eta(GrfConfig(1.0, [0.1]), 2)
    assert eta == pytest.approx(math.sqrt(2 * math.pi * 0.01), rel=1e-14)
    assert eta == pytest.approx(0.250663, abs=1e-6)


def test_eta_one_dimensional():
    assert normalization_eta(GrfConfig(0.5, [1.0]), 1) == pytest.approx(math.sqrt(2), rel=1e-14)


def test_covariance_examples():
    cfg = GrfConfig(0.5, [1.0])
    assert matern_covariance(cfg, [0.3], [0.3]) == 1.0
    assert matern_covariance(cfg, [0.0], [1.0]) == pytest.approx(math.exp(-1), rel=1e-13)
    cfg = GrfConfig(1.5, [1.0])
    expected = (1 + math.sqrt(3)) * math.exp(-math.sqrt(3))
    assert matern_covariance(cfg, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(0.48335, abs=1e-5)


def test_covariance_uses_sigma_and_anisotropy():
    cfg = GrfConfig(0.5, [2.0, 0.5], sigma=3.0)
    assert matern_covariance(cfg, [0, 0], [0, 0]) == pytest.approx(9.0)
    assert matern_covariance(cfg, [0, 0], [1.0, 0]) > matern_covariance(cfg, [0, 0], [0, 1.0])


@pytest.mark.parametrize("kwargs", [dict(nu=0.0, lengths=[0.1]), dict(nu=1.0, lengths=[-1.0]),
                                    dict(nu=1.0, lengths=[0.1], sigma=0.0),
                                    dict(nu=1.0, lengths=[0.1], seed=-1),
                                    dict(nu=1.0, lengths=[0.1], solver_tol=0.0)])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigurationError):
        GrfConfig(**kwargs)


def test_length_count_must_match_dimension():
    with pytest.raises(ConfigurationError):
        GrfSampler(unit_interval(4), GrfConfig(1.0, [0.1, 0.2]))


def test_fingerprint_tracks_config():
    a, b = GrfConfig(1.0, [0.1]), GrfConfig(1.0, [0.1])
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != GrfConfig(1.0, [0.1], seed=1).fingerprint()


def test_zero_noise_zero_field():
    mesh = rectangle(6, 6)
    s = sample_grf(mesh, GrfConfig(0.7, [0.2]), z=np.zeros((36, 4)))
    np.testing.assert_array_equal(s.values, 0.0)


def test_linearity_in_noise(rng):
    mesh = rectangle(6, 6)
    sampler = GrfSampler(mesh, GrfConfig(0.7, [0.2]))
    z1, z2 = rng.standard_normal((2, 36, 4))
    u = sampler.sample(0, z1 + z2).values
    np.testing.assert_allclose(u, sampler.sample(0, z1).values + sampler.sample(0, z2).values,
                               rtol=1e-8, atol=1e-12)


def test_integer_sequence_structure():
    # k = 2: u = sigma S^-1 M S^-1 (eta b), noise only in the first solve
    mesh = rectangle(5, 5)
    cfg = GrfConfig(3.0, [0.3], sigma=2.0, solver="direct")
    sampler = GrfSampler(mesh, cfg)
    assert (sampler.n_integer, sampler.alpha) == (2, 0.0)
    b = sampler.white_noise(4)
    S, M = sampler.S.csr.tocsc(), sampler.M.csr
    expected = 2.0 * spla.spsolve(S, M @ spla.spsolve(S, sampler.eta * b))
    np.testing.assert_allclose(sampler.sample(4).values, expected, rtol=1e-12)


def test_fractional_split():
    sampler = GrfSampler(unit_interval(50), GrfConfig(1.0, [0.1]))
    assert sampler.exponent == 0.75 and sampler.n_integer == 0 and sampler.alpha == 0.75
    assert sampler.ra is not None and sampler.interval.lam_min == 1.0


def test_route_equivalence():
    mesh = rectangle(16, 16)
    cfg = GrfConfig(1.0, [0.1])
    direct = GrfSampler(mesh, cfg)
    forced = GrfSampler(mesh, cfg, route="rational")
    assert direct.ra is None and forced.alpha == 1.0
    u, v = direct.sample(3).values, forced.sample(3).values
    M = direct.M
    rel = math.sqrt((u - v) @ (M @ (u - v)) / (u @ (M @ u)))
    assert rel <= 1e-5


def test_dirichlet_boundary_is_zero():
    mesh = rectangle(8, 8)
    cfg = GrfConfig(1.0, [0.2], bc=[BoundaryCondition("dirichlet", [1, 2, 3, 4])])
    u = sample_grf(mesh, cfg).values
    assert np.all(u[mesh.boundary_nodes()] == 0.0)
    assert np.any(u != 0.0)


def test_batch_determinism_and_threads():
    mesh = rectangle(8, 8)
    cfg = GrfConfig(1.2, [0.2], seed=9)
    a = batch_matrix(sample_batch(mesh, cfg, 5))
    b = batch_matrix(sample_batch(mesh, cfg, 5, threads=3))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (5, mesh.num_nodes)
    single = GrfSampler(mesh, cfg).sample(3).values
    np.testing.assert_array_equal(single, a[3])


def test_sample_metadata():
    s = sample_grf(unit_interval(4), GrfConfig(1.0, [0.3], seed=5), sample_index=2)
    assert (s.seed, s.index, len(s)) == (5, 2, 5)


def test_invalid_route_and_batch():
    mesh = unit_interval(4)
    with pytest.raises(ConfigurationError):
        GrfSampler(mesh, GrfConfig(1.0, [0.3]), route="magic")
    with pytest.raises(ConfigurationError):
        GrfSampler(mesh, GrfConfig(1.0, [0.3])).batch(0)


def test_cg_and_direct_agree():
    mesh = rectangle(10, 10)
    a = sample_grf(mesh, GrfConfig(0.8, [0.2], solver="cg")).values
    b = sample_grf(mesh, GrfConfig(0.8, [0.2], solver="direct")).values
    np.testing.assert_allclose(a, b, rtol=1e-7, atol=1e-9)


@pytest.mark.slow
def test_center_variance_centered_square():
    mesh = rectangle(64, 64, (-0.5, -0.5), (0.5, 0.5))
    sampler = GrfSampler(mesh, GrfConfig(1.0, [0.05], solver="direct"))
    center = int(np.argmin(np.linalg.norm(mesh.nodes, axis=1)))
    values = np.array([sampler.sample(i).values[center] for i in range(5000)])
    assert 0.9 <= np.mean(values ** 2) <= 1.1
