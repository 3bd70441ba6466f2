"""Conditional inference for the gradient and curvature of a smooth GP.

The field and its derivatives are jointly Gaussian.  With data locations
s_1..s_L and target s_0, write delta_i = s_i - s_0.  Using the stationary
covariance K and the sign rule cov(D^a Y(s), D^b Y(s')) =
(-1)^|b| D^{a+b} K(s - s'),

    cov(Y(s_i), grad Y(s_0))      = -g(delta_i)          (2-vector)
    cov(Y(s_i), vech hess Y(s_0)) = +vech h(delta_i)     (3-vector)

while at zero lag the differential vector (grad, vech hess) has prior
covariance blockdiag(-h(0), t4(0)) and is uncorrelated with grad (odd
orders vanish).  Conditioning the joint Gaussian yields the exact law at
any target; sampling composes that law over retained MCMC draws.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import chol_jitter, solve_psd
from .errors import ConfigError, EmptySamples
from .kernels import (
    Displacement,
    KernelSpec,
    cross_cov_blocks,
    gram,
    kernel_value,
    radial_factors,
)
from .mcmc import PosteriorChains
from .posterior_summary import hpd, significance

FIELDS = (
    "z",
    "grad1",
    "grad2",
    "hess11",
    "hess12",
    "hess22",
    "divergence",
    "laplacian",
    "eigen1",
    "eigen2",
    "gaussian",
    "theta_pc",
)


@dataclass(frozen=True)
class DifferentialLaw:
    """Gaussian law of (grad, vech hess) at one location: 5-vector + 5x5."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "cov", cov)
        if self.mean.shape != (5,) or cov.shape != (5, 5):
            raise ConfigError("law must be 5-dimensional")
        w = np.linalg.eigvalsh(cov)
        if w[0] < -1e-8 * max(w[-1], 1e-300):
            raise ConfigError("conditional covariance is not PSD")


@dataclass(frozen=True)
class DifferentialDraw:
    location: np.ndarray
    grad: np.ndarray
    hess_vech: np.ndarray  # (11, 12, 22)


@dataclass
class GridSummary:
    """Pointwise posterior summaries over a grid: median, HPD, significance."""

    grid: np.ndarray  # (G, 2)
    alpha: float
    median: dict  # field -> (G,)
    lower: dict
    upper: dict
    flag: dict  # field -> (G,) array of {"positive","negative","none"}


def _unit_prior(family, phi, with_field):
    """Zero-lag covariance of (field?, grad, vech hess) at sigma2=1."""
    blocks = cross_cov_blocks(
        KernelSpec(family, 1.0, phi), Displacement(np.zeros(2), 0.0)
    )
    h0 = blocks.h
    t40 = blocks.t4
    n = 6 if with_field else 5
    v = np.zeros((n, n))
    o = 1 if with_field else 0
    if with_field:
        v[0, 0] = 1.0
        v[0, o + 2 :] = v[o + 2 :, 0] = np.array([h0[0, 0], h0[0, 1], h0[1, 1]])
    v[o : o + 2, o : o + 2] = -h0
    v[o + 2 :, o + 2 :] = t40
    return v


def _unit_cross(family, phi, locations, targets, with_field):
    """cov(Y(s_i), [Z(t), grad(t), vech hess(t)]) at sigma2=1: (L, T, 5|6).

    phi enters through the radial factors; the sigma2 scale is applied by
    callers (it cancels in conditional means).
    """
    spec = KernelSpec(family, 1.0, phi)
    delta = locations[:, None, :] - targets[None, :, :]  # (L, T, 2)
    r = np.linalg.norm(delta, axis=-1)
    f1, f2, _, _ = radial_factors(spec, r, need_higher=False)
    d1, d2 = delta[..., 0], delta[..., 1]
    cols = []
    if with_field:
        cols.append(kernel_value(spec, r))
    cols.append(-f1 * d1)
    cols.append(-f1 * d2)
    cols.append(f2 * d1 * d1 + f1)
    cols.append(f2 * d1 * d2)
    cols.append(f2 * d2 * d2 + f1)
    return np.stack(cols, axis=-1)


def conditional_differential(
    spec: KernelSpec,
    locations,
    field_values,
    field_mean,
    mean_derivs,
    s0,
) -> DifferentialLaw:
    """Exact Gaussian law of (grad, vech hess) at s0 given field values.

    mean_derivs = (grad of the mean at s0, vech hess of the mean at s0);
    pass zeros when inferring a zero-mean latent surface.
    """
    locations = np.asarray(locations, dtype=float).reshape(-1, 2)
    field_values = np.asarray(field_values, dtype=float).ravel()
    field_mean = np.asarray(field_mean, dtype=float).ravel()
    s0 = np.asarray(s0, dtype=float).ravel()
    if locations.shape[0] < 1 or field_values.shape != (locations.shape[0],):
        raise ConfigError("locations/field_values shape mismatch")
    mg, mh = (np.asarray(v, dtype=float).ravel() for v in mean_derivs)
    prior_mean = np.concatenate([mg, mh])
    if prior_mean.shape != (5,):
        raise ConfigError("mean_derivs must be a (2-vector, 3-vector) pair")

    cross = spec.sigma2 * _unit_cross(
        spec.family, spec.phi, locations, s0[None, :], with_field=False
    )[:, 0, :]
    v0 = spec.sigma2 * _unit_prior(spec.family, spec.phi, with_field=False)
    factor = chol_jitter(gram(spec, locations))
    solved = solve_psd(factor, cross)  # Sigma^-1 C
    mean = prior_mean + solved.T @ (field_values - field_mean)
    cov = v0 - cross.T @ solved
    return DifferentialLaw(mean=mean, cov=cov)


def _raw_samples(chains: PosteriorChains, grid, thin=1, seed=0):
    """Composition draws of (z, grad, vech hess) per retained chain draw.

    Returns (n, G, 6).  Work keyed on phi is cached across consecutive
    draws (Metropolis rejections leave phi unchanged).
    """
    if chains.locations is None:
        raise ConfigError("chains carry no locations; attach the dataset first")
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    G = grid.shape[0]
    loc = chains.locations
    idx = np.arange(0, chains.n_draws, thin)
    rng = np.random.default_rng(seed)
    out = np.empty((idx.size, G, 6))

    prev_phi = None
    solved = cov_eigw = cov_eigv = None
    for row, i in enumerate(idx):
        phi = chains.phi[i]
        s2 = chains.sigma2[i]
        if phi != prev_phi:
            v0 = _unit_prior(chains.family, phi, with_field=True)
            factor = chol_jitter(gram(KernelSpec(chains.family, 1.0, phi), loc))
            cross = _unit_cross(chains.family, phi, loc, grid, with_field=True)
            flat = cross.reshape(loc.shape[0], G * 6)
            solved = solve_psd(factor, flat)  # R^-1 C, (L, G*6)
            cov_unit = v0[None, :, :] - np.einsum(
                "lgi,lgj->gij",
                cross,
                solved.reshape(loc.shape[0], G, 6),
            )
            cov_unit = 0.5 * (cov_unit + np.transpose(cov_unit, (0, 2, 1)))
            cov_eigw, cov_eigv = np.linalg.eigh(cov_unit)
            cov_eigw = np.clip(cov_eigw, 0.0, None)
            prev_phi = phi
        mean = (solved.T @ chains.z[i]).reshape(G, 6)
        scale = np.sqrt(s2 * cov_eigw)  # (G, 6)
        xi = rng.standard_normal((G, 6))
        out[row] = mean + np.einsum("gij,gj->gi", cov_eigv * scale[:, None, :], xi)
    return out


def divergence(d: DifferentialDraw) -> float:
    return float(d.grad[0] + d.grad[1])


def laplacian(d: DifferentialDraw) -> float:
    return float(d.hess_vech[0] + d.hess_vech[2])


def _theta_pc(h11, h12, h22):
    """Direction in [0, pi) maximizing |u' H u| over unit vectors (vectorized)."""
    h11, h12, h22 = np.broadcast_arrays(
        np.asarray(h11, dtype=float),
        np.asarray(h12, dtype=float),
        np.asarray(h22, dtype=float),
    )
    scale = np.maximum.reduce([np.abs(h11), np.abs(h22), np.ones_like(h11)])
    diag = np.abs(h12) <= 1e-12 * scale
    theta_diag = np.where(np.abs(h11) >= np.abs(h22), 0.0, np.pi / 2)

    h1 = (h11 - h22) / np.where(diag, 1.0, h12)
    root = np.sqrt(h1 * h1 + 4.0)
    tp = np.arctan(0.5 * (-h1 + root)) % np.pi
    tm = np.arctan(0.5 * (-h1 - root)) % np.pi

    def val(t):
        c, s = np.cos(t), np.sin(t)
        return np.abs(c * c * h11 + 2 * c * s * h12 + s * s * h22)

    vp, vm = val(tp), val(tm)
    tie = np.abs(vp - vm) <= 1e-12 * np.maximum(scale, np.maximum(vp, vm))
    theta = np.where(tie, np.minimum(tp, tm), np.where(vp >= vm, tp, tm))
    return np.where(diag, theta_diag, theta)


def curvature_summary(d: DifferentialDraw):
    """(eigen1 >= eigen2, gaussian curvature, theta_pc in [0, pi))."""
    h11, h12, h22 = (float(v) for v in d.hess_vech)
    m = 0.5 * (h11 + h22)
    r = np.hypot(0.5 * (h11 - h22), h12)
    return (
        float(m + r),
        float(m - r),
        float(h11 * h22 - h12 * h12),
        float(_theta_pc(h11, h12, h22)),
    )


def _derived(samples):
    """Map raw (n, G, 6) samples to all summarized fields, each (n, G)."""
    z, g1, g2, h11, h12, h22 = (samples[..., k] for k in range(6))
    m = 0.5 * (h11 + h22)
    r = np.hypot(0.5 * (h11 - h22), h12)
    return {
        "z": z,
        "grad1": g1,
        "grad2": g2,
        "hess11": h11,
        "hess12": h12,
        "hess22": h22,
        "divergence": g1 + g2,
        "laplacian": h11 + h22,
        "eigen1": m + r,
        "eigen2": m - r,
        "gaussian": h11 * h22 - h12 * h12,
        "theta_pc": _theta_pc(h11, h12, h22),
    }


def summarize_fields(per_field, grid, alpha):
    """Median/HPD/flag per field from per-draw arrays of shape (n, G)."""
    med, lo, hi, fl = {}, {}, {}, {}
    for name, arr in per_field.items():
        if arr.shape[0] < 1:
            raise EmptySamples("no draws to summarize")
        med[name] = np.median(arr, axis=0)
        ivs = [hpd(arr[:, j], 1 - alpha) for j in range(arr.shape[1])]
        lo[name] = np.array([iv.lower for iv in ivs])
        hi[name] = np.array([iv.upper for iv in ivs])
        fl[name] = np.array([significance(iv) for iv in ivs])
    return GridSummary(
        grid=np.asarray(grid, dtype=float),
        alpha=alpha,
        median=med,
        lower=lo,
        upper=hi,
        flag=fl,
    )


def sample_differentials(
    chains: PosteriorChains, grid, alpha: float = 0.05, thin: int = 1, seed: int = 0
) -> GridSummary:
    """Posterior grid summary of the latent surface and its differentials.

    One composition draw of (z, grad, vech hess) per retained chain draw at
    every grid point, plus derived operators (divergence, Laplacian,
    principal/Gaussian curvature, principal direction), each reduced to
    median, 100(1-alpha)% HPD and a significance flag.
    """
    if not 0 < alpha < 1:
        raise ConfigError("alpha must be in (0,1)")
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    samples = _raw_samples(chains, grid, thin=thin, seed=seed)
    return summarize_fields(_derived(samples), grid, alpha)
