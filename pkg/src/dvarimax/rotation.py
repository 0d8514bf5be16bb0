"""Deflation varimax rotation: quartic maximization on the unit sphere.

Each rotation column solves

    min_{|q|=1}  F(q; U) = -(1/(12 n)) * sum_t (q^T U_t)^4

by projected gradient descent with the Riemannian gradient

    grad F(q; U) = -(1/(3 n)) * P_q ( sum_t (q^T U_t)^3 U_t ),

where P_q = I - q q^T projects onto the tangent space of the sphere.
Columns are solved one at a time with NO orthogonality constraint against
previously solved columns; a single symmetric orthogonalization at the
end replaces the stacked solutions by the nearest orthonormal-column
matrix.

A bias-corrected gradient variant adds ``(1 + q^T S q) * P_q S q`` for a
symmetric matrix S estimating the covariance of the additive error in the
scores; for S proportional to the identity the correction vanishes.

Population-level counterparts of the objective and gradient (exact
expectations under the independent leptokurtic factor model) are provided
as test oracles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSolutionsError, DivergenceError

__all__ = [
    "RotationSolveConfig",
    "RotationResult",
    "objective",
    "riemannian_gradient",
    "corrected_gradient",
    "pgd_solve",
    "deflate",
    "symmetric_orthogonalize",
    "population_objective",
    "population_gradient_h",
]

_UNIT_TOL = 1e-8       # how far |q|_2 may sit from 1 on input
_MIN_ITERATE_NORM = 1e-14


def _check_unit(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise ValueError("q must be a 1-D vector")
    nrm = np.linalg.norm(q)
    if not np.isfinite(nrm) or abs(nrm - 1.0) > _UNIT_TOL:
        raise ValueError(f"q must be unit-norm (got |q| = {nrm!r})")
    return q


def _check_scores(q: np.ndarray, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise ValueError("score matrix must be 2-D (r x n)")
    if u.shape[0] != q.shape[0]:
        raise ValueError(f"dimension mismatch: q has {q.shape[0]} entries, "
                         f"scores have {u.shape[0]} rows")
    return u


@dataclass(frozen=True)
class RotationSolveConfig:
    """Projected-gradient-descent settings for one column solve.

    ``correction``, when given, must be a symmetric r x r matrix; the
    solver then uses the bias-corrected gradient.
    """

    step_size: float = 1e-5
    grad_tol: float = 1e-6
    max_iters: int = 5000
    correction: np.ndarray | None = None

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.correction is not None:
            c = np.asarray(self.correction, dtype=float)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise ValueError("correction must be a square matrix")
            if np.max(np.abs(c - c.T)) > 1e-10:
                raise ValueError("correction must be symmetric within 1e-10")
            object.__setattr__(self, "correction", c)


@dataclass(frozen=True)
class RotationResult:
    """Stacked column solutions and their orthogonalized version."""

    q_hat: np.ndarray            # r x s, unit-norm columns
    q_check: np.ndarray          # r x s, orthonormal columns
    iter_counts: np.ndarray      # iterations used per column
    grad_norms: np.ndarray       # final gradient norm per column
    converged_flags: np.ndarray  # whether grad_tol was reached per column


def _plain_gradient(q: np.ndarray, u: np.ndarray) -> np.ndarray:
    proj = u.T @ q
    w = u @ (proj ** 3)
    return -(w - q * (q @ w)) / (3 * u.shape[1])


def _bias_term(q: np.ndarray, sigma_n: np.ndarray) -> np.ndarray:
    s = sigma_n @ q
    return (1.0 + q @ s) * (s - q * (q @ s))


def _check_sigma_n(q: np.ndarray, sigma_n) -> np.ndarray:
    sigma_n = np.asarray(sigma_n, dtype=float)
    if sigma_n.shape != (q.shape[0], q.shape[0]):
        raise ValueError("sigma_n must be r x r")
    if np.max(np.abs(sigma_n - sigma_n.T)) > 1e-10:
        raise ValueError("sigma_n must be symmetric within 1e-10")
    return sigma_n


def objective(q: np.ndarray, u: np.ndarray) -> float:
    """Quartic objective F(q; U) = -(1/(12 n)) * sum_t (q^T U_t)^4.

    Always <= 0; more negative means the projections are spikier.
    """
    q = _check_unit(q)
    u = _check_scores(q, u)
    proj = u.T @ q
    return -float(np.sum(proj ** 4)) / (12 * u.shape[1])


def riemannian_gradient(q: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Gradient of the quartic objective on the sphere, tangent at q."""
    q = _check_unit(q)
    u = _check_scores(q, u)
    return _plain_gradient(q, u)


def corrected_gradient(q: np.ndarray, u: np.ndarray,
                       sigma_n: np.ndarray) -> np.ndarray:
    """Riemannian gradient plus the additive-noise bias term.

    Adds ``(1 + q^T S q) * P_q S q`` with S = ``sigma_n``; the result
    stays tangent at q.  With S = c * I the extra term vanishes and the
    result equals :func:`riemannian_gradient` exactly.
    """
    q = _check_unit(q)
    u = _check_scores(q, u)
    sigma_n = _check_sigma_n(q, sigma_n)
    return _plain_gradient(q, u) + _bias_term(q, sigma_n)


def pgd_solve(q0: np.ndarray, u: np.ndarray, config: RotationSolveConfig):
    """Run projected gradient descent on the sphere from ``q0``.

    Iterates ``q <- normalize(q - step_size * g(q))`` where g is the
    plain or bias-corrected gradient depending on ``config.correction``.
    Stops as soon as the gradient norm is at most ``grad_tol`` (checked
    before stepping, so a stationary start returns at iteration 0), or
    after ``max_iters`` updates with ``converged = False``.

    Returns
    -------
    (q, iters, grad_norm, converged)

    Raises
    ------
    DivergenceError
        If an iterate becomes non-finite or its norm collapses below
        1e-14 before renormalization.
    """
    q = _check_unit(q0)
    u = _check_scores(q, u)
    q = q / np.linalg.norm(q)

    sigma_n = None
    if config.correction is not None:
        sigma_n = _check_sigma_n(q, config.correction)

    def grad(v):
        g = _plain_gradient(v, u)
        return g if sigma_n is None else g + _bias_term(v, sigma_n)

    gnorm = np.inf
    for iters in range(config.max_iters + 1):
        g = grad(q)
        gnorm = float(np.linalg.norm(g))
        if not np.isfinite(gnorm):
            raise DivergenceError(
                f"non-finite gradient at iteration {iters}", iteration=iters)
        if gnorm <= config.grad_tol:
            return q, iters, gnorm, True
        if iters == config.max_iters:
            break
        step = q - config.step_size * g
        nrm = np.linalg.norm(step)
        if not np.isfinite(nrm) or nrm < _MIN_ITERATE_NORM:
            raise DivergenceError(
                f"iterate norm collapsed at iteration {iters + 1}",
                iteration=iters + 1)
        q = step / nrm
    return q, config.max_iters, gnorm, False


def deflate(u: np.ndarray, s: int, init_provider,
            config: RotationSolveConfig) -> RotationResult:
    """Solve ``s`` rotation columns sequentially, then orthogonalize.

    ``init_provider(k, prior)`` must return a unit r-vector for round
    k = 1..s given the r x (k-1) block of previously solved columns.
    The column solves themselves are unconstrained; orthogonality is
    imposed only once at the end via :func:`symmetric_orthogonalize`.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise ValueError("score matrix must be 2-D (r x n)")
    r, n = u.shape
    if not 1 <= s <= min(r, n):
        raise ValueError(f"s={s} must lie in [1, min(r, n)={min(r, n)}]")

    columns: list[np.ndarray] = []
    iter_counts, grad_norms, flags = [], [], []
    for k in range(1, s + 1):
        prior = np.column_stack(columns) if columns else np.zeros((r, 0))
        q0 = np.asarray(init_provider(k, prior), dtype=float)
        try:
            q, iters, gnorm, converged = pgd_solve(q0, u, config)
        except DivergenceError as err:
            raise DivergenceError(f"column {k}: {err}",
                                  iteration=err.iteration, column=k) from err
        columns.append(q)
        iter_counts.append(iters)
        grad_norms.append(gnorm)
        flags.append(converged)

    q_hat = np.column_stack(columns)
    q_check = symmetric_orthogonalize(q_hat)
    return RotationResult(
        q_hat=q_hat,
        q_check=q_check,
        iter_counts=np.asarray(iter_counts, dtype=int),
        grad_norms=np.asarray(grad_norms, dtype=float),
        converged_flags=np.asarray(flags, dtype=bool),
    )


def symmetric_orthogonalize(q_hat: np.ndarray) -> np.ndarray:
    """Nearest orthonormal-column matrix to ``q_hat`` in Frobenius norm.

    Computed as U @ V^T from the thin SVD of ``q_hat``.

    Raises
    ------
    DegenerateSolutionsError
        If ``q_hat`` is numerically rank deficient, which signals that
        two solved columns (nearly) coincide.
    """
    q_hat = np.asarray(q_hat, dtype=float)
    if q_hat.ndim != 2 or q_hat.shape[0] < q_hat.shape[1] or q_hat.shape[1] < 1:
        raise ValueError("q_hat must be r x s with r >= s >= 1")
    left, singulars, right_t = np.linalg.svd(q_hat, full_matrices=False)
    if singulars[-1] <= 1e-12 * singulars[0]:
        raise DegenerateSolutionsError(
            "stacked columns are rank deficient; two deflation rounds "
            "recovered (nearly) the same column"
        )
    return left @ right_t


def population_objective(q: np.ndarray, a: np.ndarray, kappa: float,
                         sigma_n: np.ndarray | None = None) -> float:
    """Exact expectation of the quartic objective under the factor model.

    For scores A Z + N with unit-variance independent factor coordinates
    of excess kurtosis ``kappa``, an orthogonal A, and Gaussian noise with
    covariance ``sigma_n``:

        f(q) = -(1/4) * (kappa * |A^T q|_4^4 + 1 + 2 t + t^2),
        t = q^T sigma_n q.
    """
    q = _check_unit(q)
    a = np.asarray(a, dtype=float)
    if a.shape != (q.shape[0], q.shape[0]):
        raise ValueError("a must be r x r")
    if np.max(np.abs(a.T @ a - np.eye(q.shape[0]))) > 1e-8:
        raise ValueError("a must be orthogonal")
    quartic = float(np.sum((a.T @ q) ** 4))
    t = float(q @ (np.asarray(sigma_n, dtype=float) @ q)) if sigma_n is not None else 0.0
    return -0.25 * (kappa * quartic + 1.0 + 2.0 * t + t * t)


def population_gradient_h(q: np.ndarray, a: np.ndarray, kappa: float) -> np.ndarray:
    """Noise-free population gradient, ``-kappa * P_q A (A^T q)^(o3)``.

    Vanishes at every column of A, and also at the balanced points where
    A^T q has k equal entries 1/sqrt(k) and zeros elsewhere.
    """
    q = _check_unit(q)
    a = np.asarray(a, dtype=float)
    w = a @ ((a.T @ q) ** 3)
    return -kappa * (w - q * (q @ w))
