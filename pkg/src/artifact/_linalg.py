"""Small shared linear-algebra helpers (jittered Cholesky, safe MVN draws)."""

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky

from .errors import SingularCovariance

# Escalation schedule: start at 1e-10 * trace/n, multiply by 10 up to 1e-4 * trace/n.
_JITTER_START = 1e-10
_JITTER_MAX = 1e-4


def chol_jitter(a):
    """Cholesky factor of a symmetric matrix, adding escalating diagonal jitter.

    Returns (c, lower) usable with scipy.linalg.cho_solve.  Raises
    SingularCovariance if the factorization still fails at the maximum
    jitter level.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    scale = max(np.trace(a) / n, np.finfo(float).tiny)
    try:
        return cho_factor(a, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = _JITTER_START
    eye = np.eye(n)
    while jitter <= _JITTER_MAX * (1 + 1e-12):
        try:
            return cho_factor(a + jitter * scale * eye, lower=True)
        except np.linalg.LinAlgError:
            jitter *= 10
    raise SingularCovariance(
        f"Cholesky failed after jitter up to {_JITTER_MAX:g}*trace/n"
    )


def solve_psd(factor, b):
    """Solve A x = b given a factor from chol_jitter."""
    return cho_solve(factor, b)


def mvn_draw(rng, mean, cov):
    """One draw from N(mean, cov), robust to nearly-singular PSD cov.

    Tries a jittered Cholesky first; falls back to an eigenvalue clip when
    cov is indefinite at machine precision (e.g. conditional covariances
    assembled from quadrature).
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    z = rng.standard_normal(mean.shape[0])
    try:
        c = cholesky(cov + 1e-12 * max(np.trace(cov), 0.0) / cov.shape[0] * np.eye(cov.shape[0]),
                     lower=True)
        return mean + c @ z
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh((cov + cov.T) / 2)
        w = np.clip(w, 0.0, None)
        return mean + (v * np.sqrt(w)) @ z


def mvn_draws_stacked(rng, means, covs):
    """Vectorized draws from a stack of small Gaussians.

    means: (n, k), covs: (n, k, k) -> (n, k).  Uses an eigendecomposition
    with eigenvalue clipping so exactly-singular conditionals (e.g. a grid
    point coinciding with a datum) sample correctly.
    """
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    covs = (covs + np.swapaxes(covs, -1, -2)) / 2
    w, v = np.linalg.eigh(covs)
    w = np.clip(w, 0.0, None)
    z = rng.standard_normal(means.shape)
    return means + np.einsum("nij,nj->ni", v * np.sqrt(w)[:, None, :], z)
