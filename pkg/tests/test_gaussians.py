from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussmia.errors import DimensionMismatch, FactorizationError, InconsistentConstraints, InvalidParameter
from gaussmia.gaussians import (
    Dense,
    GaussianPopulation,
    Identity,
    RngStream,
    Spiked,
    constrained_projection_sample,
    haar_rotation,
    log_det,
    quad_form_inverse,
    rotate_samples,
    sample_population,
    sample_uniform_projection,
    whiten,
)

E1_2D = np.array([[1.0], [0.0]])


def random_spd(gen, dim):
    a = gen.standard_normal((dim, dim))
    return a @ a.T + dim * np.eye(dim)


# --- RngStream ----------------------------------------------------------------


def test_rng_same_stream_same_draws():
    a = RngStream(3, 5).generator().standard_normal(10)
    b = RngStream(3, 5).generator().standard_normal(10)
    np.testing.assert_array_equal(a, b)


def test_rng_distinct_substreams_differ():
    a = RngStream(3, 5).generator().standard_normal(10)
    b = RngStream(3, 6).generator().standard_normal(10)
    assert not np.array_equal(a, b)


def test_rng_derive_is_stable_and_key_sensitive():
    r = RngStream(11)
    assert r.derive(1, "x") == r.derive(1, "x")
    assert r.derive(1, "x") != r.derive(1, "y")
    assert r.derive(1, 0) != r.derive(0, 1)


def test_rng_rejects_out_of_range_seed():
    with pytest.raises(InvalidParameter):
        RngStream(-1)
    with pytest.raises(InvalidParameter):
        RngStream(1 << 64)


def test_rng_substreams_uncorrelated():
    a = RngStream(1).derive(0).generator().standard_normal(100_000)
    b = RngStream(1).derive(1).generator().standard_normal(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 5 / math.sqrt(100_000)


# --- covariance models --------------------------------------------------------


def test_dense_rejects_asymmetric():
    with pytest.raises(FactorizationError):
        Dense(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_dense_rejects_non_pd():
    with pytest.raises(FactorizationError):
        Dense(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_spiked_rejects_non_orthonormal_basis():
    with pytest.raises(InvalidParameter):
        Spiked(np.array([[1.0], [1.0]]), 1.0)


def test_population_dimension_check():
    with pytest.raises(DimensionMismatch):
        GaussianPopulation(np.zeros(3), Identity(2))


def test_quad_form_examples():
    assert quad_form_inverse(Identity(3), np.array([1.0, 2.0, 2.0])) == pytest.approx(9.0)
    assert quad_form_inverse(Spiked(E1_2D, 3.0), np.array([1.0, 1.0])) == pytest.approx(1.25)
    assert quad_form_inverse(Dense(2 * np.eye(2)), np.array([1.0, 0.0])) == pytest.approx(0.5)


def test_log_det_examples():
    assert log_det(Identity(5)) == 0.0
    basis = sample_uniform_projection(6, 3, RngStream(0))
    assert log_det(Spiked(basis, 1.0)) == pytest.approx(3 * math.log(2), rel=1e-12)
    assert log_det(Dense(2 * np.eye(2))) == pytest.approx(2 * math.log(2), rel=1e-12)


def test_whiten_examples():
    x = np.array([0.3, -1.2, 2.0])
    np.testing.assert_array_equal(whiten(Identity(3), x), x)
    np.testing.assert_allclose(whiten(Spiked(E1_2D, 3.0), np.array([1.0, 0.0])), [0.5, 0.0], atol=1e-15)


def test_dense_whiten_matches_dense_inverse():
    gen = np.random.default_rng(0)
    for _ in range(20):
        mat = random_spd(gen, 5)
        cov = Dense(mat)
        x, y = gen.standard_normal(5), gen.standard_normal(5)
        oracle = x @ np.linalg.inv(mat) @ y
        got = whiten(cov, x) @ whiten(cov, y)
        assert abs(got - oracle) <= 1e-8 * max(1.0, abs(oracle))


def test_whiten_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        whiten(Identity(3), np.zeros(4))


@settings(max_examples=40, deadline=None)
@given(
    dim=st.integers(2, 50),
    data=st.data(),
    sigma2=st.floats(0.0, 100.0),
    seed=st.integers(0, 2**32),
)
def test_spiked_quad_form_matches_dense(dim, data, sigma2, seed):
    k = data.draw(st.integers(1, dim))
    basis = sample_uniform_projection(dim, k, RngStream(seed))
    spiked = Spiked(basis, sigma2)
    dense = Dense(spiked.to_dense())
    y = np.random.default_rng(seed).standard_normal(dim)
    a, b = quad_form_inverse(spiked, y), quad_form_inverse(dense, y)
    assert abs(a - b) <= 1e-8 * abs(b)


@settings(max_examples=40, deadline=None)
@given(dim=st.integers(1, 20), data=st.data(), sigma2=st.floats(0.0, 50.0), seed=st.integers(0, 2**32))
def test_spiked_log_det_matches_materialized(dim, data, sigma2, seed):
    k = data.draw(st.integers(1, dim))
    spiked = Spiked(sample_uniform_projection(dim, k, RngStream(seed)), sigma2)
    det = np.linalg.det(spiked.to_dense())
    assert abs(math.exp(spiked.log_det()) - det) <= 1e-8 * det


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    a=st.floats(-10, 10),
    b=st.floats(-10, 10),
    kind=st.sampled_from(["identity", "dense", "spiked"]),
)
def test_whiten_is_linear(seed, a, b, kind):
    gen = np.random.default_rng(seed)
    dim = 6
    cov = {
        "identity": Identity(dim),
        "dense": Dense(random_spd(gen, dim)),
        "spiked": Spiked(sample_uniform_projection(dim, 2, RngStream(seed)), 4.0),
    }[kind]
    x, y = gen.standard_normal(dim), gen.standard_normal(dim)
    lhs = whiten(cov, a * x + b * y)
    rhs = a * whiten(cov, x) + b * whiten(cov, y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


# --- sampling -----------------------------------------------------------------


def test_sample_population_empty():
    out = sample_population(GaussianPopulation.centered(Identity(4)), 0, RngStream(0))
    assert out.shape == (0, 4)


def test_sample_population_deterministic():
    pop = GaussianPopulation(np.arange(3.0), Spiked(sample_uniform_projection(3, 1, RngStream(1)), 2.0))
    a = sample_population(pop, 50, RngStream(9))
    b = sample_population(pop, 50, RngStream(9))
    np.testing.assert_array_equal(a, b)


def test_sample_population_thread_independent():
    pop = GaussianPopulation.centered(Dense(random_spd(np.random.default_rng(2), 4)))
    serial = [sample_population(pop, 20, RngStream(5, s)) for s in range(16)]
    with ThreadPoolExecutor(8) as ex:
        parallel = list(ex.map(lambda s: sample_population(pop, 20, RngStream(5, s)), range(16)))
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a, b)


def test_spiked_sample_variances():
    pop = GaussianPopulation.centered(Spiked(E1_2D, 3.0))
    rows = sample_population(pop, 100_000, RngStream(123))
    var = rows.var(axis=0, ddof=1)
    # stderr of a normal sample variance is sigma^2 * sqrt(2/(N-1))
    se = np.array([4.0, 1.0]) * math.sqrt(2 / (rows.shape[0] - 1))
    assert np.all(np.abs(var - [4.0, 1.0]) <= 5 * se)


def test_dense_sample_covariance():
    mat = np.array([[2.0, 0.6], [0.6, 1.0]])
    rows = sample_population(GaussianPopulation.centered(Dense(mat)), 100_000, RngStream(4))
    cov = np.cov(rows.T)
    se = np.sqrt((mat**2 + np.outer(np.diag(mat), np.diag(mat))) / rows.shape[0])
    assert np.all(np.abs(cov - mat) <= 5 * se)


# --- projections --------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(dim=st.integers(1, 40), data=st.data(), seed=st.integers(0, 2**32))
def test_uniform_projection_orthonormal(dim, data, seed):
    k = data.draw(st.integers(1, dim))
    u = sample_uniform_projection(dim, k, RngStream(seed))
    assert u.shape == (dim, k)
    assert np.max(np.abs(u.T @ u - np.eye(k))) <= 1e-10


def test_uniform_projection_full_space():
    u = sample_uniform_projection(7, 7, RngStream(0))
    assert np.max(np.abs(u @ u.T - np.eye(7))) <= 1e-10


def test_uniform_projection_rejects_bad_rank():
    with pytest.raises(InvalidParameter):
        sample_uniform_projection(3, 4, RngStream(0))
    with pytest.raises(InvalidParameter):
        sample_uniform_projection(3, 0, RngStream(0))


def test_uniform_projection_mean_is_scaled_identity():
    dim, k, draws = 6, 2, 10_000
    projs = np.stack([(lambda u: u @ u.T)(sample_uniform_projection(dim, k, RngStream(8, i))) for i in range(draws)])
    mean = projs.mean(axis=0)
    se = projs.std(axis=0, ddof=1) / math.sqrt(draws)
    assert np.all(np.abs(mean - (k / dim) * np.eye(dim)) <= 5 * se + 1e-12)


def check_projection(proj, m, pairs):
    assert np.max(np.abs(proj - proj.T)) <= 1e-10
    assert np.max(np.abs(proj @ proj - proj)) <= 1e-8
    assert abs(np.trace(proj) - m) <= 1e-6
    for x, y in pairs:
        assert np.max(np.abs(proj @ np.asarray(x, float) - np.asarray(y, float))) <= 1e-8


def test_constrained_projection_example():
    pairs = [((1, 0, 1, 0, 0, 0), (1, 0, 0, 0, 0, 0))]
    for s in range(20):
        proj = constrained_projection_sample(pairs, 2, RngStream(s))
        check_projection(proj, 2, pairs)
        assert np.linalg.matrix_rank(proj, tol=1e-8) == 2


def test_constrained_projection_fixed_points():
    eye = np.eye(10)
    pairs = [(eye[0], eye[0]), (eye[3], eye[3])]
    proj = constrained_projection_sample(pairs, 4, RngStream(1))
    np.testing.assert_allclose(proj @ eye[0], eye[0], atol=1e-12)
    np.testing.assert_allclose(proj @ eye[3], eye[3], atol=1e-12)


def test_constrained_projection_inconsistent():
    # y . (x - y) = 0.25 - 0.09 != 0, so no orthogonal projection maps x to y
    pairs = [((1, 0, 0, 0, 0, 0), (0.5, 0.3, 0, 0, 0, 0))]
    with pytest.raises(InconsistentConstraints, match="inconsistent constraints"):
        constrained_projection_sample(pairs, 2, RngStream(0))


def test_constrained_projection_half_half_is_consistent():
    # (0.5, 0.5) is the projection of e1 onto span{(1, 1)}, so this is a valid constraint
    pairs = [((1, 0, 0, 0, 0, 0), (0.5, 0.5, 0, 0, 0, 0))]
    proj = constrained_projection_sample(pairs, 2, RngStream(0))
    check_projection(proj, 2, pairs)


def test_constrained_projection_m_range():
    pairs = [((1, 0, 1, 0, 0, 0), (1, 0, 0, 0, 0, 0))]
    with pytest.raises(InvalidParameter):
        constrained_projection_sample(pairs, 1, RngStream(0))
    with pytest.raises(InvalidParameter):
        constrained_projection_sample(pairs, 3, RngStream(0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 3), extra=st.integers(1, 4))
def test_constrained_projection_random_constraints(seed, n, extra):
    # Build consistent constraints from a hidden projection P: y_i = P x_i.
    gen = np.random.default_rng(seed)
    m = n + extra
    dim = 2 * m + 3
    u = sample_uniform_projection(dim, m, RngStream(seed))
    hidden = u @ u.T
    pairs = []
    for _ in range(n):
        x = gen.standard_normal(dim)
        pairs.append((x, hidden @ x))
    proj = constrained_projection_sample(pairs, m, RngStream(seed, 1))
    check_projection(proj, m, pairs)


def test_rotate_identity_and_permutation():
    samples = np.random.default_rng(0).standard_normal((5, 4))
    np.testing.assert_array_equal(rotate_samples(samples, np.eye(4)), samples)
    perm = np.eye(4)[[2, 0, 3, 1]]
    np.testing.assert_array_equal(rotate_samples(samples, perm), samples[:, [2, 0, 3, 1]])


def test_rotate_rejects_non_orthogonal():
    with pytest.raises(InvalidParameter):
        rotate_samples(np.zeros((2, 2)), np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_haar_rotation_orthogonal():
    r = haar_rotation(9, RngStream(3))
    assert np.max(np.abs(r.T @ r - np.eye(9))) <= 1e-10


def test_rotation_preserves_spiked_moments():
    dim, count = 8, 100_000
    pop = GaussianPopulation.centered(Spiked(sample_uniform_projection(dim, 2, RngStream(1)), 5.0))
    x = sample_population(pop, count, RngStream(2))
    mu = sample_population(pop, count, RngStream(3)) / 4 + x / 4
    rot = haar_rotation(dim, RngStream(4))
    xr, mur = rotate_samples(x, rot), rotate_samples(mu, rot)
    stats = lambda a, b: np.stack([np.sum(a * a, 1), np.sum(b * b, 1), np.sum(a * b, 1)])
    # orthogonal maps preserve the triple exactly up to rounding
    np.testing.assert_allclose(stats(x, mu), stats(xr, mur), rtol=1e-9, atol=1e-9)
    # against a fresh independent sample the moments agree within MC error
    x2 = sample_population(pop, count, RngStream(5))
    mu2 = sample_population(pop, count, RngStream(6)) / 4 + x2 / 4
    s1, s2 = stats(xr, mur), stats(x2, mu2)
    se = np.sqrt(s1.var(axis=1) / count + s2.var(axis=1) / count)
    assert np.all(np.abs(s1.mean(axis=1) - s2.mean(axis=1)) <= 5 * se)
