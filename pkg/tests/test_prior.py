import numpy as np
import pytest

from catstyle.prior import PriorSample, interpolate, sample_prior


def test_category_rows_are_one_hot():
    ps = sample_prior(500, 10, 50, 0.1, np.random.default_rng(0))
    assert ps.z_c.shape == (500, 10)
    assert np.array_equal(ps.z_c.sum(axis=1), np.ones(500, dtype=np.float32))
    assert np.array_equal((ps.z_c != 0).sum(axis=1), np.ones(500))


def test_category_frequencies_near_uniform():
    # binomial bound at n=100000: each frequency within 0.1 +/- 0.01
    ps = sample_prior(100000, 10, 1, 0.1, np.random.default_rng(1))
    freqs = ps.z_c.mean(axis=0)
    assert np.all(np.abs(freqs - 0.1) < 0.01)


def test_style_standard_deviation_matches_sigma():
    # chi-square bound at n=100000: per-coordinate sd within 0.1 +/- 0.005
    ps = sample_prior(100000, 2, 8, 0.1, np.random.default_rng(2))
    sds = ps.z_s.std(axis=0)
    assert np.all(np.abs(sds - 0.1) < 0.005)


def test_concatenated_vector_length():
    ps = sample_prior(7, 10, 50, 0.1, np.random.default_rng(3))
    assert ps.as_matrix().shape == (7, 60)


def test_sample_prior_argument_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="n must"):
        sample_prior(0, 10, 5, 0.1, rng)
    with pytest.raises(ValueError, match="num_clusters"):
        sample_prior(5, 1, 5, 0.1, rng)
    with pytest.raises(ValueError, match="sigma"):
        sample_prior(5, 10, 5, 0.0, rng)


class TestInterpolate:
    def test_eps_one_returns_first(self):
        z = np.array([0.2, 0.8, 0.1])
        zt = np.array([1.0, 0.0, 0.0])
        assert np.array_equal(interpolate(z, zt, 1.0), z)

    def test_eps_zero_returns_second(self):
        z = np.array([0.2, 0.8, 0.1])
        zt = np.array([1.0, 0.0, 0.0])
        assert np.array_equal(interpolate(z, zt, 0.0), zt)

    def test_quarter_point(self):
        out = interpolate(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.25)
        assert np.allclose(out, [0.25, 0.75])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            interpolate(np.zeros(3), np.zeros(4), 0.5)

    def test_per_row_eps_broadcasts(self):
        z = np.ones((4, 2))
        zt = np.zeros((4, 2))
        out = interpolate(z, zt, np.array([0.0, 0.5, 1.0, 0.25]))
        assert np.allclose(out[:, 0], [0.0, 0.5, 1.0, 0.25])

    def test_simplex_block_stays_in_unit_box(self):
        rng = np.random.default_rng(4)
        k, ds_dim = 5, 3
        for _ in range(200):
            z_c = rng.dirichlet(np.ones(k))
            z = np.concatenate([z_c, rng.normal(size=ds_dim)])
            prior = sample_prior(1, k, ds_dim, 0.1, rng)
            zt = prior.as_matrix()[0]
            mix = interpolate(z, zt, float(rng.uniform()))
            assert np.all(mix[:k] >= 0.0) and np.all(mix[:k] <= 1.0)
