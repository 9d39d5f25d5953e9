import time
import warnings

import numpy as np
import pytest

from subspace_mds.laplace import cotan_matrices, eigenbasis, mesh_basis
from subspace_mds.mesh_io import generate_sphere_mesh
from subspace_mds.metric import MeshGeodesics, SamplingSet, farthest_point_sampling
from subspace_mds.smacof import SolverOptions, smacof_solve, smacof_step
from subspace_mds.spectral import (MultiresSchedule, SubspaceState, geodesic_problem_builder, multires_solve,
                                   regularized_interpolate, spectral_interpolate, spectral_smacof, spectral_step)
from subspace_mds.stress import StressProblem, stress_value, unit_weights

from conftest import random_problem, torus_mesh


@pytest.fixture(scope="module")
def sphere2():
    return generate_sphere_mesh(2)


@pytest.fixture(scope="module")
def sphere4_setup():
    mesh = generate_sphere_mesh(4)
    oracle = MeshGeodesics(mesh)
    D = oracle.all_pairs()
    prob = StressProblem(D, unit_weights(mesh.n_vertices), 3)
    return mesh, oracle, prob


def test_oracle_equivalence_full_basis(rng):
    n = 20
    prob = random_problem(rng, n, dim=2)
    Phi, _ = np.linalg.qr(rng.standard_normal((n, n)))
    X0 = rng.standard_normal((n, 2))
    alpha = 0.3 * rng.standard_normal((n, 2))
    state = SubspaceState.build(Phi, X0, prob, alpha)
    new_alpha = spectral_step(state, prob)
    X_spec = X0 + Phi @ new_alpha
    X_full = smacof_step(X0 + Phi @ alpha, prob)
    np.testing.assert_allclose(X_spec - X_spec.mean(axis=0), X_full, atol=1e-8)


def test_fixed_point_at_perfect_fit(rng):
    n, p = 15, 6
    P = rng.standard_normal((n, 3))
    D = np.linalg.norm(P[:, None] - P[None], axis=2)
    prob = StressProblem(D, unit_weights(n), 3)
    Phi = rng.standard_normal((n, p))
    alpha = rng.standard_normal((p, 3))
    # X0 chosen so that X0 + Phi alpha is the exact configuration
    X0 = P - Phi @ alpha
    state = SubspaceState.build(Phi, X0, prob, alpha)
    np.testing.assert_allclose(spectral_step(state, prob), alpha, atol=1e-9)


def test_constant_basis_leaves_stress_unchanged(rng):
    n = 12
    prob = random_problem(rng, n, dim=2)
    X0 = rng.standard_normal((n, 2))
    Phi = np.ones((n, 1)) / np.sqrt(n)
    state = SubspaceState.build(Phi, X0, prob)
    alpha = spectral_step(state, prob)
    assert stress_value(X0 + Phi @ alpha, prob) == pytest.approx(stress_value(X0, prob), rel=1e-12)


def test_spectral_smacof_monotone(sphere2):
    X0 = sphere2.vertices * np.array([1.5, 1.0, 0.6])
    _, log = spectral_smacof(sphere2, X0, geodesic_problem_builder(), 20, 40,
                             SolverOptions(r_tol=0, maxiter=200))
    assert log.n_steps > 0
    assert np.all(np.diff(log.stresses) <= 0)


def test_full_resolution_matches_smacof():
    mesh = torus_mesh(6, 5)
    n = mesh.n_vertices
    X0 = mesh.vertices
    opts = SolverOptions(r_tol=1e-10, maxiter=3000)
    X, log = spectral_smacof(mesh, X0, geodesic_problem_builder(), n, n, opts)
    prob = StressProblem(MeshGeodesics(mesh).all_pairs(), unit_weights(n), 3)
    _, ref = smacof_solve(X0, prob, opts)
    assert n == 30
    assert stress_value(X, prob) == pytest.approx(ref.stresses[-1], rel=1e-6)


def test_sampling_criterion_warning(sphere2):
    with pytest.warns(UserWarning, match="sampling criterion"):
        spectral_smacof(sphere2, sphere2.vertices, geodesic_problem_builder(), 20, 30,
                        SolverOptions(maxiter=1))


def test_spectral_smacof_preconditions(sphere2):
    with pytest.raises(ValueError):
        spectral_smacof(sphere2, sphere2.vertices, geodesic_problem_builder(), 10, sphere2.n_vertices + 1)


def test_sphere_close_to_full_smacof(sphere4_setup):
    mesh, oracle, prob = sphere4_setup
    X0 = mesh.vertices
    X_full, _ = smacof_solve(X0, prob, SolverOptions(r_tol=1e-6, maxiter=2000))
    s_full = stress_value(X_full, prob)
    X_spec, _ = spectral_smacof(mesh, X0, geodesic_problem_builder(), 100, 200, geodesics=oracle)
    assert stress_value(X_spec, prob) <= 1.05 * s_full


def test_schedule_from_experiments(sphere2):
    n = sphere2.n_vertices
    sched = MultiresSchedule([20, 60, "N"], [10, 30, "N"])
    assert sched.resolve(n) == [(20, 10), (60, 30), (n, n)]
    with pytest.raises(ValueError, match="sampling criterion"):
        MultiresSchedule([20, 50], [10, 30]).resolve(n)
    with pytest.raises(ValueError):
        MultiresSchedule([60, 20], [10, 10]).resolve(n)
    with pytest.warns(UserWarning):
        MultiresSchedule([100], [30], c=3.0).resolve(n)


def test_default_schedule_three_segments(sphere4_setup):
    mesh, oracle, prob = sphere4_setup
    sched = MultiresSchedule([200, 600, "N"], [100, 300, "N"])
    X, log = multires_solve(mesh, mesh.vertices, geodesic_problem_builder(), sched, geodesics=oracle,
                            full_problem=prob)
    assert sorted(set(log.levels.tolist())) == [0, 1, 2]
    assert len(log.boundaries) == 3
    # the final full level is plain SMACOF, so the last boundary equals the full stress of X
    assert log.boundaries[-1][1] == pytest.approx(stress_value(X, prob), rel=1e-12)


def test_fixed_q_growing_p_monotone(sphere2):
    n = sphere2.n_vertices
    D = MeshGeodesics(sphere2).all_pairs()
    prob = StressProblem(D, unit_weights(n), 3)
    X0 = sphere2.vertices * np.array([1.4, 1.0, 0.7])
    sched = MultiresSchedule([n], [10, 30, 60])
    opts = [SolverOptions(r_tol=0, maxiter=30)] * 3
    _, log = multires_solve(sphere2, X0, geodesic_problem_builder(), sched, opts, full_problem=prob)
    # q = N, so the sampled stress is the full stress and the whole trace is comparable
    s = log.stresses
    assert np.all(np.diff(s) <= 1e-12 * s[0])
    ends = [b[1] for b in log.boundaries]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(ends, ends[1:]))


def test_single_level_equals_spectral_smacof(sphere2):
    X0 = sphere2.vertices * np.array([1.4, 1.0, 0.7])
    opts = SolverOptions(r_tol=1e-4, maxiter=50)
    a, la = spectral_smacof(sphere2, X0, geodesic_problem_builder(), 20, 40, opts)
    b, lb = multires_solve(sphere2, X0, geodesic_problem_builder(), MultiresSchedule([40], [20]), [opts])
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(la.stresses, lb.stresses, rtol=1e-12)


def test_spectral_interpolate(sphere2, rng):
    basis = mesh_basis(sphere2, 12)
    np.testing.assert_array_equal(spectral_interpolate(basis, np.zeros((12, 3))), np.zeros((sphere2.n_vertices, 3)))
    e = np.zeros((12, 1))
    e[4] = 2.5
    np.testing.assert_allclose(spectral_interpolate(basis, e)[:, 0], 2.5 * basis.vectors[:, 4])
    alpha = rng.standard_normal((12, 3))
    idx = np.array([3, 50, 7])
    np.testing.assert_allclose(spectral_interpolate(basis, alpha)[idx], basis.take(idx) @ alpha, atol=1e-14)
    with pytest.raises(ValueError):
        spectral_interpolate(basis, np.zeros((11, 3)))


def _interp_setup(mesh, q):
    W, _ = cotan_matrices(mesh)
    sampling = farthest_point_sampling(mesh, q, 0)
    return W, sampling


def test_regularized_energy_decreases_with_lambda(sphere2, rng):
    W, sampling = _interp_setup(sphere2, 20)
    target = rng.standard_normal((20, 2))
    energies = []
    for lam in (1e-3, 1e-1, 1e1, 1e3):
        d = regularized_interpolate(sampling, target, W, lam)
        energies.append(float(np.sum(d * (W @ d))))
    assert all(b < a for a, b in zip(energies, energies[1:]))
    # the large-lambda limit is the constant field at the data mean
    d = regularized_interpolate(sampling, target, W, 1e8)
    np.testing.assert_allclose(d, np.broadcast_to(target.mean(axis=0), d.shape), atol=1e-4)


def test_regularized_all_points_reproduces_target(sphere2, rng):
    n = sphere2.n_vertices
    W, _ = cotan_matrices(sphere2)
    sampling = SamplingSet(np.arange(n), np.zeros((n, n)), n)
    target = rng.standard_normal(n)
    np.testing.assert_allclose(regularized_interpolate(sampling, target, W, 1e-10), target, atol=1e-7)


def test_regularized_preconditions(sphere2):
    W, sampling = _interp_setup(sphere2, 5)
    with pytest.raises(ValueError):
        regularized_interpolate(sampling, np.zeros(5), W, 0.0)


@pytest.mark.parametrize("index", [3, 8])
def test_regularized_recovers_band_limited_field(index):
    # stated target: a single low eigenvector recovered to 1% from q = 2 * index samples at lambda = 1e-6
    mesh = generate_sphere_mesh(3)
    W, A = cotan_matrices(mesh)
    field = eigenbasis(W, A, index + 1).vectors[:, index]
    sampling = farthest_point_sampling(mesh, 2 * index, 0)
    delta = regularized_interpolate(sampling, field[sampling.indices], W, 1e-6)
    err = np.linalg.norm(delta - field) / np.linalg.norm(field)
    assert err <= 0.01, f"relative recovery error {err:.3f}"


def test_per_iteration_time_independent_of_n():
    # fixed q and p, N roughly doubled; sizes are interleaved and the best of
    # several median step times is kept, which filters scheduler noise
    q, p, iters, repeats = 800, 100, 30, 3
    meshes = [torus_mesh(48, 36), torus_mesh(68, 50)]
    assert 1.9 < meshes[1].n_vertices / meshes[0].n_vertices < 2.1
    bases = [mesh_basis(m, p) for m in meshes]
    best = [np.inf, np.inf]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(repeats):
            for k, (mesh, basis) in enumerate(zip(meshes, bases)):
                _, log = spectral_smacof(mesh, mesh.vertices, geodesic_problem_builder(), p, q,
                                         SolverOptions(r_tol=0, maxiter=iters), basis=basis)
                best[k] = min(best[k], float(np.median(np.diff(log.seconds))))
    ratio = best[1] / best[0]
    assert abs(ratio - 1.0) < 0.20, f"per-iteration seconds {best}"


def test_level_timing_includes_setup(sphere2):
    t0 = time.perf_counter()
    _, log = spectral_smacof(sphere2, sphere2.vertices, geodesic_problem_builder(), 10, 20,
                             SolverOptions(maxiter=5, r_tol=0))
    wall = time.perf_counter() - t0
    assert log.setup_seconds > 0
    assert log.records[0].seconds == pytest.approx(log.setup_seconds)
    assert log.records[-1].seconds <= wall
