"""Synthetic test surfaces on the unit square with analytic derivatives.

Pattern 1: mu(s) = 10[sin(3 pi s1) + cos(3 pi s2)]   (additive, separable)
Pattern 2: mu(s) = 10 sin(3 pi s1) cos(3 pi s2)      (multiplicative)

Both come with closed-form gradient, Hessian (vech order 11, 12, 22) and
third derivatives (order 111, 112, 122, 222) so downstream estimates can be
scored against exact truth.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .mcmc import SpatialDataset

_A = 3.0 * np.pi


@dataclass(frozen=True)
class PatternOracle:
    id: int
    tau2: float
    mean: Callable
    grad: Callable
    hess: Callable  # vech order (11, 12, 22)
    third: Callable  # order (111, 112, 122, 222)


def _p1_mean(s):
    s = np.asarray(s, dtype=float)
    return 10.0 * (np.sin(_A * s[..., 0]) + np.cos(_A * s[..., 1]))


def _p1_grad(s):
    s = np.asarray(s, dtype=float)
    return 30.0 * np.pi * np.stack(
        [np.cos(_A * s[..., 0]), -np.sin(_A * s[..., 1])], axis=-1
    )


def _p1_hess(s):
    s = np.asarray(s, dtype=float)
    sin1 = np.sin(_A * s[..., 0])
    return -90.0 * np.pi**2 * np.stack(
        [sin1, np.zeros_like(sin1), np.cos(_A * s[..., 1])], axis=-1
    )


def _p1_third(s):
    s = np.asarray(s, dtype=float)
    cos1 = np.cos(_A * s[..., 0])
    zero = np.zeros_like(cos1)
    return 270.0 * np.pi**3 * np.stack(
        [-cos1, zero, zero, np.sin(_A * s[..., 1])], axis=-1
    )


def _p2_mean(s):
    s = np.asarray(s, dtype=float)
    return 10.0 * np.sin(_A * s[..., 0]) * np.cos(_A * s[..., 1])


def _p2_grad(s):
    s = np.asarray(s, dtype=float)
    s1, s2 = _A * s[..., 0], _A * s[..., 1]
    return 30.0 * np.pi * np.stack(
        [np.cos(s1) * np.cos(s2), -np.sin(s1) * np.sin(s2)], axis=-1
    )


def _p2_hess(s):
    s = np.asarray(s, dtype=float)
    s1, s2 = _A * s[..., 0], _A * s[..., 1]
    sc = np.sin(s1) * np.cos(s2)
    return -90.0 * np.pi**2 * np.stack([sc, np.cos(s1) * np.sin(s2), sc], axis=-1)


def _p2_third(s):
    s = np.asarray(s, dtype=float)
    s1, s2 = _A * s[..., 0], _A * s[..., 1]
    cc = np.cos(s1) * np.cos(s2)
    ss = np.sin(s1) * np.sin(s2)
    return 270.0 * np.pi**3 * np.stack([-cc, ss, -cc, ss], axis=-1)


def get_pattern(pattern_id: int, tau2: float = 1.0) -> PatternOracle:
    if tau2 <= 0:
        raise ConfigError("tau2 must be positive")
    if pattern_id == 1:
        return PatternOracle(1, tau2, _p1_mean, _p1_grad, _p1_hess, _p1_third)
    if pattern_id == 2:
        return PatternOracle(2, tau2, _p2_mean, _p2_grad, _p2_hess, _p2_third)
    raise ConfigError(f"unknown pattern id {pattern_id}")


def generate(pattern: PatternOracle, L: int, seed: int) -> SpatialDataset:
    """L noisy observations of the pattern surface at uniform random
    locations on the unit square; design matrix is the intercept column."""
    if L < 1:
        raise ConfigError("L must be >= 1")
    rng = np.random.default_rng(seed)
    locations = rng.uniform(0.0, 1.0, size=(L, 2))
    y = pattern.mean(locations) + rng.normal(0.0, np.sqrt(pattern.tau2), size=L)
    return SpatialDataset(locations=locations, X=np.ones((L, 1)), y=y)


def oracle_derivatives(pattern: PatternOracle, s):
    """Exact (grad, hess_vech, third) of the pattern mean at s (shape (..,2))."""
    return pattern.grad(s), pattern.hess(s), pattern.third(s)
