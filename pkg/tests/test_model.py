"""Tests for the domain types and synthetic generators."""
import numpy as np
import pytest

from dvarimax import (GroundTruth, NoiseCovariance, ObservationMatrix,
                      SyntheticConfig, generate_dataset, generate_factors,
                      generate_loading, realize_noise_covariance, substream)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

def test_observation_matrix_validates():
    ObservationMatrix(np.zeros((3, 5)))
    with pytest.raises(ValueError):
        ObservationMatrix(np.zeros((3, 1)))          # n < 2
    with pytest.raises(ValueError):
        ObservationMatrix(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        ObservationMatrix(np.zeros(4))               # not 2-D
    obs = ObservationMatrix(np.ones((2, 3)))
    assert (obs.p, obs.n) == (2, 3)


def test_noise_covariance_validates():
    NoiseCovariance.identity()
    NoiseCovariance.heteroscedastic(0.1)
    NoiseCovariance.toeplitz(0.5)
    with pytest.raises(ValueError):
        NoiseCovariance("weird")
    with pytest.raises(ValueError):
        NoiseCovariance.toeplitz(1.0)
    with pytest.raises(ValueError):
        NoiseCovariance.heteroscedastic(-1.0)


def test_synthetic_config_validates():
    SyntheticConfig(n=10, p=4, r=2, seed=1)
    with pytest.raises(ValueError):
        SyntheticConfig(n=10, p=4, r=5, seed=1)      # r > min(p, n)
    with pytest.raises(ValueError):
        SyntheticConfig(n=10, p=4, r=2, theta=0.0, seed=1)
    with pytest.raises(ValueError):
        SyntheticConfig(n=10, p=4, r=2, varepsilon2=-0.1, seed=1)


# ---------------------------------------------------------------------------
# generate_loading
# ---------------------------------------------------------------------------

def test_loading_scalar_is_sign():
    loading, _ = generate_loading(1, 1, substream(3, "loading"))
    assert loading.shape == (1, 1)
    assert abs(abs(loading[0, 0]) - 1.0) < 1e-15


@pytest.mark.parametrize("p,r,seed", [(300, 5, 7), (10, 3, 0), (50, 50, 2)])
def test_loading_unit_operator_norm_and_full_rank(p, r, seed):
    loading, _ = generate_loading(p, r, substream(seed, "loading"))
    singulars = np.linalg.svd(loading, compute_uv=False)
    assert abs(singulars[0] - 1.0) <= 1e-12
    assert singulars[-1] > 0


def test_loading_deterministic():
    a, da = generate_loading(20, 4, substream(11, "loading"))
    b, db = generate_loading(20, 4, substream(11, "loading"))
    assert np.array_equal(a, b) and np.array_equal(da, db)


def test_loading_rejects_r_above_p():
    with pytest.raises(ValueError):
        generate_loading(3, 4, substream(0, "loading"))


# ---------------------------------------------------------------------------
# generate_factors
# ---------------------------------------------------------------------------

def test_factors_rejects_bad_theta():
    rng = substream(0, "factors")
    for theta in (0.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            generate_factors(2, 10, theta, rng)


def test_factors_theta_one_is_gaussian():
    z = generate_factors(1, 200_000, 1.0, substream(5, "factors"))
    assert np.all(z != 0)  # no mask zeros
    m2 = np.mean(z ** 2)
    m4 = np.mean(z ** 4)
    excess = (m4 / m2 ** 2 - 3.0) / 3.0
    assert abs(excess) < 0.05


def test_factors_excess_kurtosis_matches_moment_identity():
    # For mask probability theta: E[Z^2] = theta, E[Z^4] = 3 theta, so the
    # excess kurtosis (m4 / m2^2 - 3) / 3 equals (3/theta - 3) / 3 = 9 at
    # theta = 0.1.  Monte-Carlo on 10^6 draws.
    z = generate_factors(1, 1_000_000, 0.1, substream(42, "factors"))
    m2 = np.mean(z ** 2)
    m4 = np.mean(z ** 4)
    excess = (m4 / m2 ** 2 - 3.0) / 3.0
    assert abs(excess - 9.0) <= 0.5


def test_factors_zero_fraction():
    theta, n = 0.3, 100_000
    z = generate_factors(1, n, theta, substream(9, "factors"))
    frac_zero = np.mean(z == 0.0)
    sd = np.sqrt(theta * (1 - theta) / n)
    assert abs(frac_zero - (1 - theta)) <= 3 * sd


def test_factors_rows_uncorrelated():
    n = 100_000
    z = generate_factors(4, n, 0.2, substream(13, "factors"))
    cov = z @ z.T / n
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) <= 4 / np.sqrt(n)


# ---------------------------------------------------------------------------
# realize_noise_covariance
# ---------------------------------------------------------------------------

def test_identity_covariance():
    sigma = realize_noise_covariance(NoiseCovariance.identity(), 3, substream(0, "cov"))
    assert np.array_equal(sigma, np.eye(3))


def test_heteroscedastic_alpha_zero_is_identity():
    sigma = realize_noise_covariance(NoiseCovariance.heteroscedastic(0.0), 4,
                                     substream(1, "cov"))
    assert np.allclose(sigma, np.eye(4), atol=1e-12)


def test_heteroscedastic_trace_is_p():
    for seed in range(5):
        sigma = realize_noise_covariance(NoiseCovariance.heteroscedastic(0.7), 31,
                                         substream(seed, "cov"))
        assert abs(np.trace(sigma) - 31) <= 1e-10
        assert np.all(np.diag(sigma) >= 0)


def test_toeplitz_explicit_values():
    sigma = realize_noise_covariance(NoiseCovariance.toeplitz(0.5), 3, substream(2, "cov"))
    expected = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]])
    assert np.allclose(sigma, expected, atol=1e-15)


def test_toeplitz_positive_semidefinite():
    sigma = realize_noise_covariance(NoiseCovariance.toeplitz(0.9), 40, substream(3, "cov"))
    assert np.min(np.linalg.eigvalsh(sigma)) > 0
    assert np.allclose(sigma, sigma.T)


# ---------------------------------------------------------------------------
# generate_dataset
# ---------------------------------------------------------------------------

def test_noiseless_dataset_is_exact_product():
    config = SyntheticConfig(n=40, p=10, r=3, theta=0.5, varepsilon2=0.0, seed=21)
    observed, truth = generate_dataset(config)
    assert np.array_equal(observed.data, truth.loading @ truth.factors)
    assert np.linalg.matrix_rank(observed.data) <= 3


def test_dataset_paper_grid_point_shapes():
    config = SyntheticConfig(n=900, p=300, r=5, theta=0.1, varepsilon2=0.1, seed=1)
    observed, truth = generate_dataset(config)
    assert observed.data.shape == (300, 900)
    assert truth.loading.shape == (300, 5)
    assert truth.factors.shape == (5, 900)
    assert truth.kappa == pytest.approx(9.0)
    assert truth.sigma2 == pytest.approx(0.1)
    assert truth.eps2 == pytest.approx(0.1 / (300 * 0.1))


def test_dataset_deterministic():
    config = SyntheticConfig(n=50, p=8, r=2, seed=77,
                             noise_kind=NoiseCovariance.toeplitz(0.5))
    obs_a, truth_a = generate_dataset(config)
    obs_b, truth_b = generate_dataset(config)
    assert np.array_equal(obs_a.data, obs_b.data)
    assert np.array_equal(truth_a.loading, truth_b.loading)
    assert np.array_equal(truth_a.noise, truth_b.noise)


def test_ground_truth_svd_reconstruction_and_scaling():
    for seed in range(4):
        config = SyntheticConfig(n=60, p=20, r=4, seed=seed)
        _, truth = generate_dataset(config)
        rebuilt = truth.svd_left @ np.diag(truth.svd_singulars) @ truth.svd_right
        assert np.linalg.norm(rebuilt - truth.loading) <= 1e-10
        assert abs(np.linalg.norm(truth.loading, 2) - 1.0) <= 1e-10
        gram_left = truth.svd_left.T @ truth.svd_left
        gram_right = truth.svd_right.T @ truth.svd_right
        assert np.linalg.norm(gram_left - np.eye(4)) <= 1e-10
        assert np.linalg.norm(gram_right - np.eye(4)) <= 1e-10
        assert np.all(np.diff(truth.svd_singulars) <= 0)


def test_ground_truth_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        GroundTruth(loading=np.zeros((4, 2)), factors=np.zeros((3, 5)),
                    noise=np.zeros((4, 5)), svd_left=np.zeros((4, 2)),
                    svd_singulars=np.ones(2), svd_right=np.eye(2),
                    sigma2=0.1, eps2=0.0, theta=0.1, kappa=9.0)
