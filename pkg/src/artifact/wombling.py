"""Posterior wombling measures along partitioned curves.

For segment i (start s_{i-1}, unit tangent u, normal n, length t_i) on a
zero-mean field Z, the segment measures are

    G1_i = int_0^{t_i} n' grad Z(s(t)) dt        (total gradient)
    G2_i = int_0^{t_i} n' hess Z(s(t)) n dt      (total curvature)

Both are linear functionals of Z, so (G, Z) is jointly Gaussian.  With the
radial factors f1..f4, unit vectors p, q and displacement d (r = |d|,
a = p'd, b = q'd, g = p'q) the needed contractions reduce to scalars:

    p' grad K            = f1 a
    p' hess K q          = f2 a b + f1 g
    sum p p q [D3 K]     = f3 a^2 b + f2 (2 a g + b)
    sum p p q q [D4 K]   = f4 a^2 b^2 + f3 (a^2 + b^2 + 4 a b g) + f2 (1 + 2 g^2)

Covariance blocks then follow the derivative-pair sign rule: cross terms
with the field carry +, gradient-gradient and curvature-gradient carry -,
curvature-curvature carries +.  All integrals use fixed Gauss-Legendre
nodes.  Per retained MCMC draw the measures are sampled from

    G | Z, theta ~ N( gamma' Sigma^-1 Z,  K_G - gamma' Sigma^-1 gamma ).

Everything scales linearly in sigma2, so per-phi geometry work is cached
and shared across consecutive draws.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ._linalg import chol_jitter, solve_psd
from .errors import (
    ConfigError,
    UnsupportedSmoothness,
    WrongFamily,
)
from .kernels import Family, KernelSpec, gram, radial_factors
from .mcmc import PosteriorChains
from .posterior_summary import hpd, significance

_DEGENERATE = 1e-12


def _gl01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _require_curvature(spec_or_family):
    fam = getattr(spec_or_family, "family", spec_or_family)
    if fam == Family.MATERN32:
        raise UnsupportedSmoothness(
            "curvature wombling needs a twice-differentiable field"
        )


@dataclass(frozen=True)
class WomblingLaw:
    """Per-segment joint law pieces: mean (2,), cov (2,2), cross (L,2)."""

    mean: np.ndarray
    cov: np.ndarray
    cross: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (2, 2) or abs(cov[0, 1] - cov[1, 0]) > 1e-8 * (
            1 + np.abs(cov).max()
        ):
            raise ConfigError("cov must be symmetric 2x2")
        if min(cov[0, 0], cov[1, 1]) < -1e-10:
            raise ConfigError("cov diagonal must be nonnegative")


# ---------------------------------------------------------------------------
# quadrature building blocks (public, one segment at a time)

def segment_cross_cov(spec: KernelSpec, seg, s_j, n_quad_1d: int = 10):
    """cov((G1_i, G2_i), Z(s_j)) by Gauss-Legendre quadrature."""
    _require_curvature(spec)
    if n_quad_1d < 1:
        raise ConfigError("n_quad_1d must be >= 1")
    xi, w = _gl01(n_quad_1d)
    pts = seg.start + (seg.length * xi)[:, None] * seg.direction
    delta = pts - np.asarray(s_j, dtype=float)
    r = np.linalg.norm(delta, axis=1)
    f1, f2, _, _ = radial_factors(spec, r, need_higher=False)
    nd = delta @ seg.normal
    wt = seg.length * w
    return np.array(
        [np.sum(wt * f1 * nd), np.sum(wt * (f2 * nd * nd + f1))]
    )


def analytic_cross_cov_sqexp(spec: KernelSpec, seg, s_j):
    """Closed form of segment_cross_cov for the squared-exponential kernel.

    With a = n'(s_{i-1} - s_j) constant along the segment and
    b(t) = u'(s_{i-1} - s_j) + t, the integrals collapse to a difference of
    Gaussian CDFs times

        c1 = -2 sigma2 sqrt(pi phi) a exp(-phi a^2)
        c2 = -2 sigma2 sqrt(pi phi) (1 - 2 phi a^2) exp(-phi a^2).
    """
    if spec.family != Family.SQUARED_EXPONENTIAL:
        raise WrongFamily("analytic cross-covariance requires squared_exponential")
    d0 = seg.start - np.asarray(s_j, dtype=float)
    a = float(seg.normal @ d0)
    b = float(seg.direction @ d0)
    phi, s2 = spec.phi, spec.sigma2
    root = np.sqrt(2.0 * phi)
    dphi = float(ndtr(root * (b + seg.length)) - ndtr(root * b))
    e = np.exp(-phi * a * a)
    c1 = -2.0 * s2 * np.sqrt(np.pi * phi) * a * e
    c2 = -2.0 * s2 * np.sqrt(np.pi * phi) * (1.0 - 2.0 * phi * a * a) * e
    return dphi * np.array([c1, c2])


def segment_womb_cov(spec: KernelSpec, seg_a, seg_b, n_quad_2d: int = 100):
    """cov((G1_a, G2_a), (G1_b, G2_b)) by 2-D Gauss-Legendre quadrature."""
    _require_curvature(spec)
    g2 = int(round(np.sqrt(n_quad_2d)))
    if g2 < 1:
        raise ConfigError("n_quad_2d must be >= 1")
    xi, w = _gl01(g2)
    pa = seg_a.start + (seg_a.length * xi)[:, None] * seg_a.direction
    pb = seg_b.start + (seg_b.length * xi)[:, None] * seg_b.direction
    W = np.outer(seg_a.length * w, seg_b.length * w)
    delta = pa[:, None, :] - pb[None, :, :]
    r = np.linalg.norm(delta, axis=-1)
    f1, f2, f3, f4 = radial_factors(spec, r, need_higher=True)
    na, nb = seg_a.normal, seg_b.normal
    alpha = delta @ na
    beta = delta @ nb
    g = float(na @ nb)
    k11 = -np.sum(W * (f2 * alpha * beta + f1 * g))
    k12 = np.sum(W * (f3 * beta * beta * alpha + f2 * (2 * beta * g + alpha)))
    k21 = -np.sum(W * (f3 * alpha * alpha * beta + f2 * (2 * alpha * g + beta)))
    k22 = np.sum(
        W
        * (
            f4 * alpha**2 * beta**2
            + f3 * (alpha**2 + beta**2 + 4 * alpha * beta * g)
            + f2 * (1 + 2 * g * g)
        )
    )
    return np.array([[k11, k12], [k21, k22]])


def segment_womb_law(spec, seg, locations, n_quad_1d=10, n_quad_2d=100):
    """Unconditional per-segment law pieces against the data locations."""
    cross = np.stack(
        [segment_cross_cov(spec, seg, sj, n_quad_1d) for sj in locations]
    )
    cov = segment_womb_cov(spec, seg, seg, n_quad_2d)
    return WomblingLaw(mean=np.zeros(2), cov=cov, cross=cross)


# ---------------------------------------------------------------------------
# vectorized partition-level machinery (unit sigma2; scale applied by caller)

def _geometry(partition):
    segs = [s for s in partition.segments if s.length > _DEGENERATE]
    if not segs:
        raise ConfigError("partition has no usable segments")
    return (
        np.array([s.start for s in segs]),
        np.array([s.direction for s in segs]),
        np.array([s.normal for s in segs]),
        np.array([s.length for s in segs]),
    )


def _cross_geometry(locations, geom, n_quad_1d):
    starts, units, normals, lengths = geom
    xi, w = _gl01(n_quad_1d)
    nodes = (
        starts[:, None, :]
        + (lengths[:, None] * xi[None, :])[:, :, None] * units[:, None, :]
    )  # (n, q, 2)
    wts = lengths[:, None] * w[None, :]
    delta = nodes[None, :, :, :] - locations[:, None, None, :]  # (L, n, q, 2)
    r = np.linalg.norm(delta, axis=-1)
    nd = np.einsum("lnqk,nk->lnq", delta, normals)
    return r, nd, wts


def _cross_from_geometry(family, phi, cg):
    r, nd, wts = cg
    f1, f2, _, _ = radial_factors(
        KernelSpec(family, 1.0, phi), r, need_higher=False
    )
    g1 = np.einsum("nq,lnq->ln", wts, f1 * nd)
    g2 = np.einsum("nq,lnq->ln", wts, f2 * nd * nd + f1)
    return np.concatenate([g1, g2], axis=1)


def _cross_matrix(family, phi, locations, geom, n_quad_1d):
    """(L, 2n) cross-covariances, measure-major: [G1 cols | G2 cols]."""
    return _cross_from_geometry(
        family, phi, _cross_geometry(locations, geom, n_quad_1d)
    )


# pooled-geometry cap: above this many quadrature node pairs the joint
# covariance falls back to the row-by-row loop instead of caching geometry
_POOL_LIMIT = 8_000_000


def _quad_nodes(geom, n_quad_2d):
    starts, units, normals, lengths = geom
    g2 = int(round(np.sqrt(n_quad_2d)))
    xi, w = _gl01(max(1, g2))
    nodes = (
        starts[:, None, :]
        + (lengths[:, None] * xi[None, :])[:, :, None] * units[:, None, :]
    )
    wts = lengths[:, None] * w[None, :]
    return nodes, wts


def _pooled_womb_geometry(geom, n_quad_2d, joint):
    """Phi-independent quadrature geometry, precomputed once per partition.

    Returns None when the pooled arrays would be too large; callers then
    fall back to _womb_matrix's row loop.
    """
    starts, units, normals, lengths = geom
    n = lengths.size
    nodes, wts = _quad_nodes(geom, n_quad_2d)
    q = nodes.shape[1]
    if joint:
        if n * n * q * q > _POOL_LIMIT:
            return None
        delta = nodes[:, None, :, None, :] - nodes[None, :, None, :, :]
        r = np.linalg.norm(delta, axis=-1)  # (a, b, q, p)
        alpha = np.einsum("abqpk,ak->abqp", delta, normals)
        beta = np.einsum("abqpk,bk->abqp", delta, normals)
        g = (normals @ normals.T)[:, :, None, None]
        W = wts[:, None, :, None] * wts[None, :, None, :]
    else:
        delta = nodes[:, :, None, :] - nodes[:, None, :, :]
        r = np.linalg.norm(delta, axis=-1)  # (a, q, p)
        alpha = np.einsum("aqpk,ak->aqp", delta, normals)
        beta = alpha
        g = np.ones((n, 1, 1))
        W = wts[:, :, None] * wts[:, None, :]
    return n, joint, r, alpha, beta, g, W


def _womb_from_pooled(family, phi, pooled):
    n, joint, r, alpha, beta, gg, W = pooled
    f1, f2, f3, f4 = radial_factors(
        KernelSpec(family, 1.0, phi), r, need_higher=True
    )
    k11 = -(W * (f2 * alpha * beta + f1 * gg)).sum(axis=(-2, -1))
    k12 = (W * (f3 * beta * beta * alpha + f2 * (2 * beta * gg + alpha))).sum(
        axis=(-2, -1)
    )
    k22 = (
        W
        * (
            f4 * alpha**2 * beta**2
            + f3 * (alpha**2 + beta**2 + 4 * alpha * beta * gg)
            + f2 * (1 + 2 * gg * gg)
        )
    ).sum(axis=(-2, -1))
    if not joint:
        k11, k12, k22 = np.diag(k11), np.diag(k12), np.diag(k22)
    full = np.block([[k11, k12], [k12.T, k22]])
    return 0.5 * (full + full.T)


def _womb_matrix(family, phi, geom, n_quad_2d, joint):
    """(2n, 2n) measure-major covariance of the segment measures.

    joint=False fills only per-segment diagonal blocks (independent mode).
    """
    starts, units, normals, lengths = geom
    n = lengths.size
    nodes, wts = _quad_nodes(geom, n_quad_2d)
    spec = KernelSpec(family, 1.0, phi)
    K11 = np.zeros((n, n))
    K12 = np.zeros((n, n))
    K22 = np.zeros((n, n))
    for a in range(n):
        rows = np.arange(n) if joint else np.array([a])
        delta = nodes[a][None, :, None, :] - nodes[rows][:, None, :, :]
        # delta[b, q, p] = node_a(q) - node_b(p)
        r = np.linalg.norm(delta, axis=-1)
        f1, f2, f3, f4 = radial_factors(spec, r, need_higher=True)
        alpha = np.einsum("bqpk,k->bqp", delta, normals[a])
        beta = np.einsum("bqpk,bk->bqp", delta, normals[rows])
        g = normals[rows] @ normals[a]  # (nb,)
        W = wts[a][None, :, None] * wts[rows][:, None, :]
        gg = g[:, None, None]
        K11[a, rows] = -np.sum(W * (f2 * alpha * beta + f1 * gg), axis=(1, 2))
        K12[a, rows] = np.sum(
            W * (f3 * beta * beta * alpha + f2 * (2 * beta * gg + alpha)),
            axis=(1, 2),
        )
        K22[a, rows] = np.sum(
            W
            * (
                f4 * alpha**2 * beta**2
                + f3 * (alpha**2 + beta**2 + 4 * alpha * beta * gg)
                + f2 * (1 + 2 * gg * gg)
            ),
            axis=(1, 2),
        )
    full = np.block([[K11, K12], [K12.T, K22]])
    return 0.5 * (full + full.T)


# ---------------------------------------------------------------------------
# results

@dataclass
class MeasureSummary:
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    flag: np.ndarray


@dataclass
class WomblingResult:
    alpha: float
    mode: str
    starts: np.ndarray  # (n, 2)
    lengths: np.ndarray  # (n,)
    total_draws: np.ndarray  # (D, n, 2)
    segment_total: MeasureSummary  # arrays (n, 2)
    segment_average: MeasureSummary  # arrays (n, 2)
    curve_total: MeasureSummary  # arrays (2,)
    curve_average: MeasureSummary  # arrays (2,)
    failed: np.ndarray  # (n,) bool

    @property
    def curve_length(self):
        return float(self.lengths.sum())


def _summarize(draws, alpha):
    """draws (D, ...) -> MeasureSummary over axis 0."""
    flat = draws.reshape(draws.shape[0], -1)
    med = np.median(flat, axis=0)
    ivs = [hpd(flat[:, j], 1 - alpha) for j in range(flat.shape[1])]
    lo = np.array([iv.lower for iv in ivs])
    hi = np.array([iv.upper for iv in ivs])
    fl = np.array([significance(iv) for iv in ivs], dtype=object)
    shape = draws.shape[1:]
    return MeasureSummary(
        median=med.reshape(shape),
        lower=lo.reshape(shape),
        upper=hi.reshape(shape),
        flag=fl.reshape(shape),
    )


def _build_result(total_draws, geom, alpha, mode, failed=None):
    starts, _, _, lengths = geom
    n = lengths.size
    if failed is None:
        failed = np.zeros(n, dtype=bool)
    avg_draws = total_draws / lengths[None, :, None]
    curve_total = total_draws.sum(axis=1)  # (D, 2)
    curve_avg = curve_total / lengths.sum()
    seg_total = _summarize(total_draws, alpha)
    seg_avg = _summarize(avg_draws, alpha)
    for summ in (seg_total, seg_avg):
        for arr in (summ.median, summ.lower, summ.upper):
            arr[failed] = np.nan
        summ.flag[failed] = "failed"
    return WomblingResult(
        alpha=alpha,
        mode=mode,
        starts=starts,
        lengths=lengths,
        total_draws=total_draws,
        segment_total=seg_total,
        segment_average=seg_avg,
        curve_total=_summarize(curve_total, alpha),
        curve_average=_summarize(curve_avg, alpha),
        failed=failed,
    )


def sample_wombling(
    chains: PosteriorChains,
    partition,
    n_quad_1d: int = 10,
    n_quad_2d: int = 100,
    alpha: float = 0.05,
    mode: str = "joint",
    thin: int = 1,
    seed: int = 0,
) -> WomblingResult:
    """One (G1, G2) draw per segment per retained chain draw, summarized.

    mode="joint" conditions on the full cross-segment covariance; {mode=
    "independent"} treats segments as independent 2-D laws (faster,
    approximate: curve aggregates ignore cross-segment covariance).
    """
    _require_curvature(chains.family)
    if chains.locations is None:
        raise ConfigError("chains carry no locations; attach the dataset first")
    if mode not in ("joint", "independent"):
        raise ConfigError("mode must be 'joint' or 'independent'")
    if not 0 < alpha < 1:
        raise ConfigError("alpha must be in (0,1)")
    geom = _geometry(partition)
    lengths = geom[3]
    n = lengths.size
    loc = chains.locations
    idx = np.arange(0, chains.n_draws, thin)
    rng = np.random.default_rng(seed)
    joint = mode == "joint"
    cross_geom = _cross_geometry(loc, geom, n_quad_1d)
    pooled = _pooled_womb_geometry(geom, n_quad_2d, joint)

    totals = np.empty((idx.size, n, 2))
    failed = np.zeros(n, dtype=bool)
    prev_phi = None
    S = eig_w = eig_v = None
    for row, i in enumerate(idx):
        phi = chains.phi[i]
        s2 = chains.sigma2[i]
        if phi != prev_phi:
            factor = chol_jitter(gram(KernelSpec(chains.family, 1.0, phi), loc))
            cross = _cross_from_geometry(chains.family, phi, cross_geom)
            K = (
                _womb_from_pooled(chains.family, phi, pooled)
                if pooled is not None
                else _womb_matrix(chains.family, phi, geom, n_quad_2d, joint)
            )
            S = solve_psd(factor, cross)  # (L, 2n)
            T = cross.T @ S
            bad = ~(
                np.all(np.isfinite(cross), axis=0)
                & np.isfinite(np.diag(K))
                & np.isfinite(np.diag(T))
            )
            failed |= bad[:n] | bad[n:]
            if joint:
                cov_unit = K - T
                cov_unit = 0.5 * (cov_unit + cov_unit.T)
                cov_unit = np.nan_to_num(cov_unit)
                eig_w, eig_v = np.linalg.eigh(cov_unit)
                eig_w = np.clip(eig_w, 0.0, None)
            else:
                ar = np.arange(n)
                cov_seg = np.empty((n, 2, 2))
                cov_seg[:, 0, 0] = K[ar, ar] - T[ar, ar]
                cov_seg[:, 0, 1] = K[ar, n + ar] - T[ar, n + ar]
                cov_seg[:, 1, 0] = cov_seg[:, 0, 1]
                cov_seg[:, 1, 1] = K[n + ar, n + ar] - T[n + ar, n + ar]
                cov_seg = np.nan_to_num(cov_seg)
                eig_w, eig_v = np.linalg.eigh(cov_seg)
                eig_w = np.clip(eig_w, 0.0, None)
            prev_phi = phi
        mean = S.T @ chains.z[i]  # (2n,)
        if joint:
            xi = rng.standard_normal(2 * n)
            x = mean + eig_v @ (np.sqrt(s2 * eig_w) * xi)
            totals[row, :, 0] = x[:n]
            totals[row, :, 1] = x[n:]
        else:
            mean_seg = np.stack([mean[:n], mean[n:]], axis=1)  # (n, 2)
            xi = rng.standard_normal((n, 2))
            scale = np.sqrt(s2 * eig_w)  # (n, 2)
            totals[row] = mean_seg + np.einsum(
                "nij,nj->ni", eig_v * scale[:, None, :], xi
            )
    return _build_result(totals, geom, alpha, mode, failed)


def true_wombling(oracle, partition, direction="normal", n_quad: int = 64):
    """Deterministic line integrals of an analytic surface's differentials.

    direction="normal" contracts with each segment's normal (wombling
    proper); "tangent" contracts with the tangent (path-independence
    checks).  Returns (per-segment totals (n,2), curve total, curve average).
    """
    if direction not in ("normal", "tangent"):
        raise ConfigError("direction must be 'normal' or 'tangent'")
    starts, units, normals, lengths = _geometry(partition)
    v = normals if direction == "normal" else units
    xi, w = _gl01(n_quad)
    nodes = (
        starts[:, None, :]
        + (lengths[:, None] * xi[None, :])[:, :, None] * units[:, None, :]
    )
    wts = lengths[:, None] * w[None, :]
    grad = oracle.grad(nodes)  # (n, q, 2)
    hess = oracle.hess(nodes)  # (n, q, 3)
    dg = np.einsum("nqk,nk->nq", grad, v)
    v1, v2 = v[:, 0], v[:, 1]
    dh = (
        hess[..., 0] * (v1 * v1)[:, None]
        + 2 * hess[..., 1] * (v1 * v2)[:, None]
        + hess[..., 2] * (v2 * v2)[:, None]
    )
    totals = np.stack([np.sum(wts * dg, axis=1), np.sum(wts * dh, axis=1)], axis=1)
    curve_total = totals.sum(axis=0)
    return totals, curve_total, curve_total / lengths.sum()


def riemann_wombling(deriv_draws, partition, alpha: float = 0.05) -> WomblingResult:
    """Left-endpoint Riemann alternative: per draw and segment,
    G1 = t_i n'grad, G2 = t_i n'hess n from differential draws (D, n, 5)
    taken at segment starts (columns grad1, grad2, hess11, hess12, hess22).
    """
    geom = _geometry(partition)
    starts, units, normals, lengths = geom
    deriv_draws = np.asarray(deriv_draws, dtype=float)
    n = lengths.size
    if deriv_draws.ndim != 3 or deriv_draws.shape[1:] != (n, 5):
        raise ConfigError("need derivative draws of shape (D, n_segments, 5)")
    g = deriv_draws[..., 0:2]
    h = deriv_draws[..., 2:5]
    n1, n2 = normals[:, 0], normals[:, 1]
    dg = g[..., 0] * n1 + g[..., 1] * n2
    dh = h[..., 0] * n1 * n1 + 2 * h[..., 1] * n1 * n2 + h[..., 2] * n2 * n2
    totals = np.stack([lengths * dg, lengths * dh], axis=-1)
    return _build_result(totals, geom, alpha, "riemann")
