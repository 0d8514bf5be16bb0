"""End-to-end loading estimation: PCA, deflation rotation, normalization.

Three pipeline variants share the same structure and differ in which
eigenvalues and scores feed the rotation:

- ``base``: raw eigenvalues and whitened scores, plain gradient.
- ``improved1``: noise-corrected eigenvalues and scores, plain gradient.
- ``improved2``: as improved1, plus the bias-corrected gradient using the
  estimated score-noise covariance.

The final estimate is V D^{1/2} Q (with D the variant's eigenvalues and Q
the orthogonalized rotation), rescaled to unit operator norm.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .exceptions import CorrectionInfeasibleError
from .initialization import InitScheme, make_init_provider
from .rotation import RotationSolveConfig, deflate
from .spectral import PcaDecomposition, corrected_decomposition, eigendecompose

__all__ = [
    "EstimatorVariant",
    "EstimateDiagnostics",
    "LoadingEstimate",
    "estimate_loading",
    "loading_from_rotation",
    "predict_factors",
]

# Smallest singular value of the stacked rotation columns below which the
# deflation likely recovered duplicate directions.
_NEAR_DUPLICATE_THRESHOLD = 0.1


class EstimatorVariant(str, Enum):
    BASE = "base"
    IMPROVED1 = "improved1"
    IMPROVED2 = "improved2"


@dataclass(frozen=True)
class EstimateDiagnostics:
    """Per-run bookkeeping for the estimation pipeline."""

    iter_counts: np.ndarray
    grad_norms: np.ndarray
    converged_flags: np.ndarray
    noise_var_hat: Optional[float]
    requested_variant: str
    effective_variant: str
    init_label: str
    fallback: bool
    near_duplicate: bool
    runtime_ms: float


@dataclass(frozen=True)
class LoadingEstimate:
    """Estimated loading matrix with its rotation and PCA byproducts."""

    lambda_hat: np.ndarray       # p x r, unit operator norm
    q_check: np.ndarray          # r x r, orthogonal
    decomposition: PcaDecomposition
    diagnostics: EstimateDiagnostics


def loading_from_rotation(decomposition: PcaDecomposition, q_check: np.ndarray,
                          corrected: bool = False) -> np.ndarray:
    """Assemble V D^{1/2} Q and rescale it to unit operator norm."""
    if corrected:
        if decomposition.eigvals_corrected is None:
            raise ValueError("decomposition carries no corrected eigenvalues")
        d = decomposition.eigvals_corrected
    else:
        d = decomposition.top_eigvals
    basis = decomposition.eigvecs_r * np.sqrt(d)[None, :]
    raw = basis @ q_check
    opnorm = np.linalg.norm(raw, 2)
    if opnorm <= 0:
        raise ValueError("degenerate loading with zero operator norm")
    return raw / opnorm


def predict_factors(decomposition: PcaDecomposition, q_check: np.ndarray) -> np.ndarray:
    """Predict the factor matrix from the rotated principal components.

    Returns ``Q^T U * sqrt(d_1)``: the rotation applied to the whitened
    scores, rescaled by the top eigenvalue's square root so the scale
    removed by whitening is restored.  Uses the uncorrected scores and
    eigenvalue for every pipeline variant.
    """
    q_check = np.asarray(q_check, dtype=float)
    if q_check.shape[0] != decomposition.r:
        raise ValueError("rotation and decomposition dimensions differ")
    return (q_check.T @ decomposition.scores) * np.sqrt(decomposition.eigvals[0])


def estimate_loading(x: np.ndarray, r: int,
                     variant: EstimatorVariant | str = EstimatorVariant.BASE,
                     init_scheme: Optional[InitScheme] = None,
                     solve_config: Optional[RotationSolveConfig] = None,
                     rng: Optional[np.random.Generator] = None,
                     *,
                     auto_fallback: bool = False,
                     mom_subtraction: str = "as_written") -> LoadingEstimate:
    """Estimate the p x r loading matrix of ``x`` (features x samples).

    Runs the PCA step, solves r rotation columns by deflation with the
    chosen initialization scheme, orthogonalizes them, and assembles the
    unit-operator-norm loading estimate.

    Parameters
    ----------
    variant : EstimatorVariant or str
        Pipeline variant; the improved variants require p > r and all
        corrected eigenvalues positive.
    auto_fallback : bool
        When the correction is infeasible, fall back to the base variant
        (and to the plain moment init) instead of raising; the fallback
        is flagged in the diagnostics.
    rng : np.random.Generator
        Drives every random draw of the initialization scheme.  The
        output is a pure function of (x, r, options, rng state).

    Raises
    ------
    CorrectionInfeasibleError, ZeroDivisionError
        If an improved variant is requested, the correction cannot be
        formed, and ``auto_fallback`` is off.
    """
    t_start = time.perf_counter()
    x = np.asarray(x, dtype=float)
    variant = EstimatorVariant(variant)
    if init_scheme is None:
        init_scheme = InitScheme.method_of_moments()
    if solve_config is None:
        solve_config = RotationSolveConfig()
    if rng is None:
        rng = np.random.default_rng()

    decomp = eigendecompose(x, r)
    effective_variant = variant
    effective_scheme = init_scheme
    fallback = False
    if variant != EstimatorVariant.BASE or init_scheme.improved:
        try:
            decomp = corrected_decomposition(decomp, x)
        except (CorrectionInfeasibleError, ZeroDivisionError):
            if not auto_fallback:
                raise
            effective_variant = EstimatorVariant.BASE
            if init_scheme.improved:
                effective_scheme = replace(init_scheme, improved=False)
            fallback = True

    if effective_variant == EstimatorVariant.BASE:
        scores = decomp.scores
        config = replace(solve_config, correction=None)
    else:
        scores = decomp.scores_corrected
        correction = decomp.sigma_n_hat if effective_variant == EstimatorVariant.IMPROVED2 else None
        config = replace(solve_config, correction=correction)

    sigma_u = None
    if effective_scheme.improved:
        sigma_u = np.eye(r) + decomp.sigma_n_hat
    provider = make_init_provider(effective_scheme, scores, rng,
                                  sigma_u=sigma_u, subtraction=mom_subtraction)
    rotation = deflate(scores, r, provider, config)

    lambda_hat = loading_from_rotation(
        decomp, rotation.q_check,
        corrected=effective_variant != EstimatorVariant.BASE)

    near_duplicate = bool(
        np.linalg.svd(rotation.q_hat, compute_uv=False)[-1] < _NEAR_DUPLICATE_THRESHOLD)
    diagnostics = EstimateDiagnostics(
        iter_counts=rotation.iter_counts,
        grad_norms=rotation.grad_norms,
        converged_flags=rotation.converged_flags,
        noise_var_hat=decomp.noise_var_hat,
        requested_variant=variant.value,
        effective_variant=effective_variant.value,
        init_label=effective_scheme.label,
        fallback=fallback,
        near_duplicate=near_duplicate,
        runtime_ms=(time.perf_counter() - t_start) * 1000.0,
    )
    return LoadingEstimate(
        lambda_hat=lambda_hat,
        q_check=rotation.q_check,
        decomposition=decomp,
        diagnostics=diagnostics,
    )
