"""Isotropic covariance kernels and their derivative tensors up to fourth order.

Everything here is assembled from radial factors of the kernel profile
K(r):

    f1 = K'(r)/r
    f2 = (K''(r) - K'(r)/r) / r^2
    f3 = f2'(r)/r
    f4 = f3'(r)/r

in terms of which, for a displacement d (2-vector) with r = ||d||,

    dK/di          = f1 d_i
    d2K/didj       = f2 d_i d_j + f1 I_ij
    d3K/didjdk     = f3 d_i d_j d_k + f2 (d_i I_jk + d_j I_ik + d_k I_ij)
    d4K/didjdkdl   = f4 d_i d_j d_k d_l
                     + f3 (six two-d / Kronecker pairings)
                     + f2 (I_ij I_kl + I_ik I_jl + I_il I_jk)

The 1/r factors are removable: below the switch radius EPS_R the exact
r -> 0 limits are used (odd blocks vanish, even blocks reduce to f1(0),
f2(0) combinations).

vech ordering is (11, 12, 22) everywhere.  The third-derivative block is
stored 3x2 (rows = vech index, columns = differentiation coordinate).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnsupportedSmoothness

# Switch radius for the singular 1/r terms; below it the analytic limits apply.
EPS_R = 1e-8

# vech index pairs in the fixed (11, 12, 22) order.
_VECH = ((0, 0), (0, 1), (1, 1))

_EYE2 = np.eye(2)


class Family(str, Enum):
    SQUARED_EXPONENTIAL = "squared_exponential"
    MATERN32 = "matern32"
    MATERN52 = "matern52"


def _as_family(family):
    if isinstance(family, Family):
        return family
    return Family(str(family))


@dataclass(frozen=True)
class KernelSpec:
    """Covariance family with variance sigma2 and decay phi."""

    family: Family
    sigma2: float = 1.0
    phi: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", _as_family(self.family))
        if not (self.sigma2 > 0 and self.phi > 0):
            raise ValueError("sigma2 and phi must be positive")

    @property
    def nu(self):
        """Smoothness index for the Matern members; None for SqExp."""
        return {Family.MATERN32: 1.5, Family.MATERN52: 2.5}.get(self.family)

    @property
    def curvature_capable(self):
        """True iff the fourth derivative of K exists at 0."""
        return self.family in (Family.SQUARED_EXPONENTIAL, Family.MATERN52)


def spectral_capability(family, nu=None) -> bool:
    """Existence of the curvature process: spectral density has a finite
    fourth moment.  True for SqExp; true for Matern iff nu > 2."""
    family = _as_family(family)
    if family == Family.SQUARED_EXPONENTIAL:
        return True
    if nu is None:
        nu = {Family.MATERN32: 1.5, Family.MATERN52: 2.5}[family]
    return nu > 2


@dataclass(frozen=True)
class Displacement:
    """A displacement d = s - s' with its cached norm."""

    delta: np.ndarray
    norm: float

    @classmethod
    def of(cls, delta):
        delta = np.asarray(delta, dtype=float)
        return cls(delta=delta, norm=float(np.linalg.norm(delta)))

    @classmethod
    def between(cls, s, s_prime):
        return cls.of(np.asarray(s, dtype=float) - np.asarray(s_prime, dtype=float))


@dataclass
class RadialDerivatives:
    """Kernel profile K and its radial derivatives at a radius r.

    k3/k4 are NaN with has_higher=False where the family does not admit
    them (Matern 3/2); that is a flag, not an error.
    """

    k0: float
    k1: float
    k2: float
    k3: float
    k4: float
    has_higher: bool = True


@dataclass
class CrossCovBlocks:
    """Derivative blocks of K at one displacement.

    k: scalar; g: (2,) gradient; h: (2,2) Hessian; t3: (3,2); t4: (3,3).
    t3/t4 are None when not requested/available.
    """

    k: float
    g: np.ndarray
    h: np.ndarray
    t3: np.ndarray | None
    t4: np.ndarray | None


def kernel_value(spec: KernelSpec, r):
    """K(r), vectorized over radii."""
    r = np.asarray(r, dtype=float)
    s2, phi = spec.sigma2, spec.phi
    if spec.family == Family.SQUARED_EXPONENTIAL:
        return s2 * np.exp(-phi * r * r)
    if spec.family == Family.MATERN32:
        a = math.sqrt(3.0) * phi
        return s2 * (1 + a * r) * np.exp(-a * r)
    a = math.sqrt(5.0) * phi
    return s2 * (1 + a * r + (a * r) ** 2 / 3.0) * np.exp(-a * r)


def gram(spec: KernelSpec, locations, locations2=None):
    """Kernel Gram matrix K(||s_i - s_j||)."""
    x = np.asarray(locations, dtype=float)
    y = x if locations2 is None else np.asarray(locations2, dtype=float)
    d = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=-1)
    return kernel_value(spec, d)


def radial_derivs(spec: KernelSpec, r: float) -> RadialDerivatives:
    """K and its radial derivatives at r >= 0."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    s2, phi = spec.sigma2, spec.phi
    if spec.family == Family.SQUARED_EXPONENTIAL:
        e = s2 * math.exp(-phi * r * r)
        return RadialDerivatives(
            k0=e,
            k1=-2 * phi * r * e,
            k2=(4 * phi**2 * r**2 - 2 * phi) * e,
            k3=(12 * phi**2 * r - 8 * phi**3 * r**3) * e,
            k4=(12 * phi**2 - 48 * phi**3 * r**2 + 16 * phi**4 * r**4) * e,
        )
    if spec.family == Family.MATERN52:
        a = math.sqrt(5.0) * phi
        e = s2 * math.exp(-a * r)
        return RadialDerivatives(
            k0=(1 + a * r + (a * r) ** 2 / 3.0) * e,
            k1=-(a**2 / 3.0) * r * (1 + a * r) * e,
            k2=-(a**2 / 3.0) * (1 + a * r - (a * r) ** 2) * e,
            k3=(a**4 / 3.0) * r * (3 - a * r) * e,
            k4=(a**4 / 3.0) * (3 - 5 * a * r + (a * r) ** 2) * e,
        )
    # Matern 3/2: K'' has a kink at 0, so third/fourth radial derivatives
    # are flagged unavailable rather than raised here.
    a = math.sqrt(3.0) * phi
    e = s2 * math.exp(-a * r)
    return RadialDerivatives(
        k0=(1 + a * r) * e,
        k1=-(a**2) * r * e,
        k2=-(a**2) * (1 - a * r) * e,
        k3=float("nan"),
        k4=float("nan"),
        has_higher=False,
    )


def radial_factors(spec: KernelSpec, r, need_higher=True):
    """(f1, f2, f3, f4) vectorized over radii, with r < EPS_R masked to the
    r -> 0 limits (f3/f4 set to 0 there: they only ever multiply odd powers
    of the displacement, which vanish at the origin).

    When need_higher is False, f3 and f4 are returned as None (Matern 3/2
    path); when True, Matern 3/2 raises UnsupportedSmoothness.
    """
    r = np.asarray(r, dtype=float)
    s2, phi = spec.sigma2, spec.phi
    small = r < EPS_R
    safe = np.where(small, 1.0, r)

    if spec.family == Family.SQUARED_EXPONENTIAL:
        e = s2 * np.exp(-phi * r * r)
        f1 = -2 * phi * e
        f2 = 4 * phi**2 * e
        if not need_higher:
            return f1, f2, None, None
        return f1, f2, -8 * phi**3 * e, 16 * phi**4 * e

    if spec.family == Family.MATERN52:
        a = math.sqrt(5.0) * phi
        e = s2 * np.exp(-a * r)
        f1 = -(a**2 / 3.0) * (1 + a * r) * e
        f2 = (a**4 / 3.0) * e
        if not need_higher:
            return f1, f2, None, None
        f3 = np.where(small, 0.0, -(a**5 / 3.0) * e / safe)
        f4 = np.where(small, 0.0, (a**5 / 3.0) * (1 + a * r) * e / safe**3)
        return f1, f2, f3, f4

    # Matern 3/2
    if need_higher:
        raise UnsupportedSmoothness(
            "Matern 3/2 does not admit third/fourth kernel derivatives at 0"
        )
    a = math.sqrt(3.0) * phi
    e = s2 * np.exp(-a * r)
    f1 = -(a**2) * e
    f2 = np.where(small, 0.0, a**3 * s2 * np.exp(-a * r) / safe)
    return f1, f2, None, None


def _limit_f(spec: KernelSpec):
    """(f1(0), f2(0)) for the origin branch."""
    s2, phi = spec.sigma2, spec.phi
    if spec.family == Family.SQUARED_EXPONENTIAL:
        return -2 * s2 * phi, 4 * s2 * phi**2
    if spec.family == Family.MATERN52:
        return -(5.0 / 3.0) * s2 * phi**2, (25.0 / 3.0) * s2 * phi**4
    return -3 * s2 * phi**2, None  # Matern 3/2: f2(0) undefined/not needed


# t4(0) = f2(0) * S with S[(ij),(kl)] = I_ij I_kl + I_ik I_jl + I_il I_jk.
_T4_SHAPE = np.array([[3.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 3.0]])


def _limit_blocks(spec: KernelSpec, need_curvature=True) -> CrossCovBlocks:
    f1_0, f2_0 = _limit_f(spec)
    t3 = t4 = None
    if need_curvature:
        if not spec.curvature_capable:
            raise UnsupportedSmoothness(
                f"{spec.family.value} does not admit curvature blocks"
            )
        t3 = np.zeros((3, 2))
        t4 = f2_0 * _T4_SHAPE
    return CrossCovBlocks(
        k=spec.sigma2, g=np.zeros(2), h=f1_0 * _EYE2.copy(), t3=t3, t4=t4
    )


def _general_blocks(spec: KernelSpec, delta, r, need_curvature=True) -> CrossCovBlocks:
    d = np.asarray(delta, dtype=float)
    if need_curvature and not spec.curvature_capable:
        raise UnsupportedSmoothness(
            f"{spec.family.value} does not admit curvature blocks"
        )
    f1, f2, f3, f4 = radial_factors(spec, r, need_higher=need_curvature)
    f1, f2 = float(f1), float(f2)
    k = float(kernel_value(spec, r))
    g = f1 * d
    h = f2 * np.outer(d, d) + f1 * _EYE2

    t3 = t4 = None
    if need_curvature:
        f3, f4 = float(f3), float(f4)
        t3 = np.empty((3, 2))
        for a, (i, j) in enumerate(_VECH):
            for kk in range(2):
                t3[a, kk] = f3 * d[i] * d[j] * d[kk] + f2 * (
                    d[i] * _EYE2[j, kk] + d[j] * _EYE2[i, kk] + d[kk] * _EYE2[i, j]
                )
        t4 = np.empty((3, 3))
        for a, (i, j) in enumerate(_VECH):
            for b, (kk, ll) in enumerate(_VECH):
                pair3 = (
                    d[i] * d[j] * _EYE2[kk, ll]
                    + d[i] * d[kk] * _EYE2[j, ll]
                    + d[i] * d[ll] * _EYE2[j, kk]
                    + d[j] * d[kk] * _EYE2[i, ll]
                    + d[j] * d[ll] * _EYE2[i, kk]
                    + d[kk] * d[ll] * _EYE2[i, j]
                )
                pair2 = (
                    _EYE2[i, j] * _EYE2[kk, ll]
                    + _EYE2[i, kk] * _EYE2[j, ll]
                    + _EYE2[i, ll] * _EYE2[j, kk]
                )
                t4[a, b] = (
                    f4 * d[i] * d[j] * d[kk] * d[ll] + f3 * pair3 + f2 * pair2
                )
    return CrossCovBlocks(k=k, g=g, h=h, t3=t3, t4=t4)


def cross_cov_blocks(spec: KernelSpec, d: Displacement, need_curvature=True) -> CrossCovBlocks:
    """All derivative blocks of K at displacement d.

    With need_curvature=True (default) the t3/t4 blocks are included and
    Matern 3/2 raises UnsupportedSmoothness; with False only k/g/h are
    filled, for any family.
    """
    if d.norm < EPS_R:
        return _limit_blocks(spec, need_curvature)
    return _general_blocks(spec, d.delta, d.norm, need_curvature)


def duplication_contraction(u, v):
    """c_{u,v}: contraction of vech of a symmetric 2x2 against directions u, v.

    Ordered (v1*u1, v1*u2 + v2*u1, v2*u2) to match the (11, 12, 22) vech
    convention, so c_{u,u}^T vech(H) = u^T H u.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.array([v[0] * u[0], v[0] * u[1] + v[1] * u[0], v[1] * u[1]])


def directional_curvature_cov(spec: KernelSpec, u, d: Displacement) -> float:
    """Cov(u'H(s)u, u'H(s')u) for the curvature process, via the closed
    radial form; equals c_{u,u}^T t4(d) c_{u,u}."""
    if not spec.curvature_capable:
        raise UnsupportedSmoothness(
            f"{spec.family.value} does not admit a curvature process"
        )
    u = np.asarray(u, dtype=float)
    if d.norm < EPS_R:
        c = duplication_contraction(u, u)
        t4 = _limit_blocks(spec).t4
        return float(c @ t4 @ c)
    r = d.norm
    rd = radial_derivs(spec, r)
    a0_coef = rd.k2 - rd.k1 / r
    w = float(u @ d.delta) ** 2 / r**2
    return (
        (3.0 / r**2) * (1 - 5 * w) * (1 - w) * a0_coef
        + (6.0 / r) * w * (1 - w) * rd.k3
        + w**2 * rd.k4
    )
