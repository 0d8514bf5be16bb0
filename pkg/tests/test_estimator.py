"""Tests for the end-to-end loading estimation pipelines."""
import numpy as np
import pytest
from helpers import random_orthogonal

from dvarimax import (CorrectionInfeasibleError, EstimatorVariant, InitScheme,
                      PcaDecomposition, RotationSolveConfig, SyntheticConfig,
                      eigendecompose, estimate_loading, generate_dataset,
                      generate_factors, loading_from_rotation, predict_factors,
                      signed_permutation_error, substream)

FAST = RotationSolveConfig(step_size=1e-2, grad_tol=1e-6, max_iters=5000)
MOM = InitScheme.method_of_moments()


def _dataset(n=600, p=12, r=3, theta=0.2, eps2=0.1, seed=0):
    config = SyntheticConfig(n=n, p=p, r=r, theta=theta, varepsilon2=eps2, seed=seed)
    return generate_dataset(config)


def _orthogonal_loading_dataset(n, r, theta, seed):
    """Noiseless X = A Z with an orthogonal loading of unit operator norm."""
    rng = substream(seed, "ortho")
    loading = random_orthogonal(r, rng)
    factors = generate_factors(r, n, theta, rng)
    return loading @ factors, loading


# ---------------------------------------------------------------------------
# assembly and normalization
# ---------------------------------------------------------------------------

def test_identity_rotation_reproduces_pca_columns():
    observed, _ = _dataset()
    decomp = eigendecompose(observed.data, 3)
    loading = loading_from_rotation(decomp, np.eye(3))
    raw = decomp.eigvecs_r * np.sqrt(decomp.top_eigvals)[None, :]
    assert np.allclose(loading, raw / np.linalg.norm(raw, 2), atol=1e-14)


def test_every_variant_has_unit_operator_norm():
    observed, _ = _dataset(eps2=0.2)
    for variant in EstimatorVariant:
        est = estimate_loading(observed.data, 3, variant, MOM, FAST,
                               substream(1, "est", variant.value))
        assert abs(np.linalg.norm(est.lambda_hat, 2) - 1.0) <= 1e-10
        q = est.q_check
        assert np.linalg.norm(q.T @ q - np.eye(3)) <= 1e-10


def test_estimate_deterministic():
    observed, _ = _dataset(seed=5)
    a = estimate_loading(observed.data, 3, "base", MOM, FAST, substream(9, "est"))
    b = estimate_loading(observed.data, 3, "base", MOM, FAST, substream(9, "est"))
    assert np.array_equal(a.lambda_hat, b.lambda_hat)
    assert np.array_equal(a.q_check, b.q_check)


def test_column_space_matches_pca_subspace():
    observed, _ = _dataset(seed=7)
    est = estimate_loading(observed.data, 3, "base", MOM, FAST, substream(2, "est"))
    basis, _ = np.linalg.qr(est.lambda_hat)
    principal_cosines = np.linalg.svd(est.decomposition.eigvecs_r.T @ basis,
                                      compute_uv=False)
    assert np.max(np.abs(principal_cosines - 1.0)) <= 1e-10


def test_noiseless_improved1_equals_base_bitwise():
    observed, _ = _dataset(eps2=0.0, seed=11)
    base = estimate_loading(observed.data, 3, "base", MOM, FAST,
                            substream(3, "est"))
    improved = estimate_loading(observed.data, 3, "improved1", MOM, FAST,
                                substream(3, "est"))
    assert improved.decomposition.noise_var_hat == 0.0
    assert np.array_equal(base.lambda_hat, improved.lambda_hat)
    assert np.array_equal(base.q_check, improved.q_check)


def test_noiseless_orthogonal_loading_recovery():
    errors = []
    for seed in range(1, 21):
        x, loading = _orthogonal_loading_dataset(20000, 3, 0.1, seed)
        est = estimate_loading(x, 3, "base", MOM, FAST, substream(seed, "est"))
        err, _ = signed_permutation_error(est.lambda_hat, loading)
        errors.append(err)
    assert np.median(errors) <= 0.15


# ---------------------------------------------------------------------------
# fallback behavior
# ---------------------------------------------------------------------------

def _infeasible_input():
    # p = r leaves no trailing eigenvalues, so the correction is undefined
    rng = substream(4, "est")
    return rng.standard_normal((3, 200))


def test_improved_without_fallback_raises():
    x = _infeasible_input()
    with pytest.raises(ZeroDivisionError):
        estimate_loading(x, 3, "improved1", MOM, FAST, substream(5, "est"))


def test_improved_with_fallback_runs_base():
    x = _infeasible_input()
    est = estimate_loading(x, 3, "improved2", MOM, FAST, substream(5, "est"),
                           auto_fallback=True)
    diag = est.diagnostics
    assert diag.fallback
    assert diag.requested_variant == "improved2"
    assert diag.effective_variant == "base"


def test_infeasible_correction_falls_back():
    # Because the eigenvalues are sorted, the tail mean can only reach the
    # r-th eigenvalue when the spectrum is flat across it, e.g. for
    # orthogonal data where all eigenvalues coincide and the correction
    # subtracts everything.
    x = np.eye(4)
    decomp = eigendecompose(x, 2)
    from dvarimax import corrected_decomposition
    with pytest.raises(CorrectionInfeasibleError):
        corrected_decomposition(decomp, x)
    est = estimate_loading(x, 2, "improved1", MOM, FAST, substream(7, "est"),
                           auto_fallback=True)
    assert est.diagnostics.fallback


def test_diagnostics_fields_populated():
    observed, _ = _dataset(seed=13)
    est = estimate_loading(observed.data, 3, "improved2", MOM, FAST,
                           substream(8, "est"))
    diag = est.diagnostics
    assert diag.iter_counts.shape == (3,)
    assert diag.grad_norms.shape == (3,)
    assert diag.converged_flags.shape == (3,)
    assert diag.noise_var_hat is not None and diag.noise_var_hat >= 0
    assert diag.runtime_ms > 0
    assert isinstance(diag.near_duplicate, bool)


# ---------------------------------------------------------------------------
# predict_factors
# ---------------------------------------------------------------------------

def test_predict_factors_identity_case():
    scores = substream(10, "est").standard_normal((2, 6))
    decomp = PcaDecomposition(eigvals=np.ones(4), eigvecs_r=np.eye(4)[:, :2],
                              scores=scores, r=2)
    assert np.array_equal(predict_factors(decomp, np.eye(2)), scores)


def test_predict_factors_frobenius_identity():
    observed, _ = _dataset(seed=15)
    est = estimate_loading(observed.data, 3, "base", MOM, FAST, substream(11, "est"))
    z_hat = predict_factors(est.decomposition, est.q_check)
    d1 = est.decomposition.eigvals[0]
    expected = np.sqrt(d1 * observed.n * 3)
    assert np.linalg.norm(z_hat) == pytest.approx(expected, rel=1e-8)


def test_predict_factors_row_correlation_noiseless():
    from scipy.optimize import linear_sum_assignment
    rng = substream(3, "ortho")
    loading = random_orthogonal(3, rng)
    truth_factors = generate_factors(3, 20000, 0.1, rng)
    x = loading @ truth_factors
    est = estimate_loading(x, 3, "base", MOM, FAST, substream(12, "est"))
    z_hat = predict_factors(est.decomposition, est.q_check)
    corr = np.abs(np.corrcoef(z_hat, truth_factors)[:3, 3:])
    rows, cols = linear_sum_assignment(-corr)
    assert corr[rows, cols].min() >= 0.9
