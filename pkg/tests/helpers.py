"""Shared test utilities: brute-force oracles and small fixtures."""
from __future__ import annotations

from itertools import permutations, product

import numpy as np


def brute_force_signed_permutation_error(lambda_hat, lambda_true):
    """Exhaustive minimum of |lambda_hat - lambda_true @ P|_F over signed perms."""
    est = np.asarray(lambda_hat, float)
    true = np.asarray(lambda_true, float)
    r = est.shape[1]
    best = np.inf
    for perm in permutations(range(r)):
        for signs in product((1.0, -1.0), repeat=r):
            p = np.zeros((r, r))
            for k in range(r):
                p[perm[k], k] = signs[k]
            best = min(best, np.linalg.norm(est - true @ p))
    return best


def random_orthogonal(r, rng):
    """Haar-ish orthogonal matrix from the QR of a Gaussian draw."""
    q, rmat = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(rmat))


def hand_instance():
    """The 2 x 4 score matrix with columns (+-sqrt(2), 0) and (0, +-sqrt(2)).

    Its quartic objective has value -1/6 at the axes and -1/12 at the
    balanced directions, and both are stationary.
    """
    s = np.sqrt(2.0)
    return np.array([[s, -s, 0.0, 0.0], [0.0, 0.0, s, -s]])


def projected_finite_difference_gradient(q, u, h=1e-5):
    """Central finite differences of the quartic objective, projected at q.

    Independent of the analytic gradient: differences the raw (ambient)
    objective along coordinate directions, then projects the estimated
    gradient onto the tangent space at q.
    """
    q = np.asarray(q, float)
    r = q.size
    n = u.shape[1]

    def raw(v):
        proj = u.T @ v
        return -float(np.sum(proj ** 4)) / (12 * n)

    grad = np.empty(r)
    for i in range(r):
        e = np.zeros(r)
        e[i] = h
        grad[i] = (raw(q + e) - raw(q - e)) / (2 * h)
    return grad - q * (q @ grad)
