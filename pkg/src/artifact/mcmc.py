"""Gibbs sampler for the hierarchical model Y(s) = x(s)'beta + Z(s) + eps(s).

Updates per sweep:

    beta  ~ N(M_b m_b, M_b),  M_b^-1 = Sigma_b^-1 + X'S^-1 X,
                              m_b = Sigma_b^-1 mu_b + X'S^-1 Y,
                              S = sigma2 R + tau2 I   (Z integrated out,
            so the intercept direction mixes instead of random-walking
            against the level of Z)
    Z     ~ N(P^-1 (Y - X beta)/tau2, P^-1),  P = I/tau2 + R^-1/sigma2
            (beta then Z is one joint draw of the (beta, Z) block)
    sigma2 ~ IG(a_s + L/2, b_s + Z'R^-1 Z / 2)
    tau2   ~ IG(a_t + L/2, b_t + ||Y - X beta - Z||^2 / 2)
    phi    : random-walk Metropolis on log phi targeting
             N_L(Z | 0, sigma2 R(phi)) restricted to [a_phi, b_phi],
             step size adapted toward target acceptance during burn-in.

R(phi) is the correlation matrix of the chosen family at unit variance.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from ._linalg import chol_jitter
from .errors import ConfigError, DuplicateLocation, ParseError
from .kernels import Family, KernelSpec, _as_family, gram


@dataclass
class SpatialDataset:
    """Point-referenced data: locations (L,2), design X (L,p) with intercept, y (L,)."""

    locations: np.ndarray
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        L = self.locations.shape[0]
        if self.locations.shape != (L, 2):
            raise ConfigError("locations must be (L, 2)")
        if self.X.shape[0] != L or self.y.shape != (L,):
            raise ConfigError("X/y shapes inconsistent with locations")
        if not (
            np.all(np.isfinite(self.locations))
            and np.all(np.isfinite(self.X))
            and np.all(np.isfinite(self.y))
        ):
            raise ConfigError("dataset contains non-finite entries")
        if L < self.X.shape[1]:
            raise ConfigError("need at least as many rows as covariates")
        d = np.linalg.norm(
            self.locations[:, None, :] - self.locations[None, :, :], axis=-1
        )
        np.fill_diagonal(d, np.inf)
        if np.any(d <= 1e-12):
            raise DuplicateLocation("coincident locations in dataset")

    @property
    def L(self):
        return self.locations.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass
class PriorConfig:
    a_phi: float
    b_phi: float
    a_sigma: float = 2.0
    b_sigma: float = 1.0
    a_tau: float = 2.0
    b_tau: float = 0.1
    mu_beta: np.ndarray = field(default_factory=lambda: np.zeros(1))
    Sigma_beta: np.ndarray = field(default_factory=lambda: 1e6 * np.eye(1))

    def __post_init__(self):
        self.mu_beta = np.asarray(self.mu_beta, dtype=float)
        self.Sigma_beta = np.asarray(self.Sigma_beta, dtype=float)
        if not self.a_phi < self.b_phi:
            raise ConfigError("need a_phi < b_phi")
        for v in (self.a_phi, self.a_sigma, self.b_sigma, self.a_tau, self.b_tau):
            if v <= 0:
                raise ConfigError("prior shapes/rates/bounds must be positive")
        if np.any(np.linalg.eigvalsh(self.Sigma_beta) <= 0):
            raise ConfigError("Sigma_beta must be SPD")


def default_priors(data: SpatialDataset, applications=False) -> PriorConfig:
    """Weakly informative defaults; a_phi = 3 / max pairwise distance.

    applications=True switches to the looser variant (b_phi=300, b_tau=1).
    """
    d = np.linalg.norm(
        data.locations[:, None, :] - data.locations[None, :, :], axis=-1
    )
    max_dist = float(d.max())
    if max_dist <= 0:
        raise ConfigError("need at least two distinct locations")
    p = data.p
    return PriorConfig(
        a_phi=3.0 / max_dist,
        b_phi=300.0 if applications else 30.0,
        a_sigma=2.0,
        b_sigma=1.0,
        a_tau=2.0,
        b_tau=1.0 if applications else 0.1,
        mu_beta=np.zeros(p),
        Sigma_beta=1e6 * np.eye(p),
    )


@dataclass
class PosteriorChains:
    family: Family
    beta: np.ndarray  # (n, p)
    sigma2: np.ndarray  # (n,)
    tau2: np.ndarray  # (n,)
    phi: np.ndarray  # (n,)
    z: np.ndarray  # (n, L)
    accept_rate: np.ndarray  # (n,) running phi-acceptance fraction
    burn_in: int
    thin: int
    seed: int
    priors: PriorConfig
    locations: np.ndarray | None = None
    X: np.ndarray | None = None
    y: np.ndarray | None = None

    @property
    def n_draws(self):
        return self.sigma2.shape[0]

    def attach(self, data: SpatialDataset):
        """Attach the dataset a loaded chain was fitted to."""
        if data.L != self.z.shape[1]:
            raise ConfigError("dataset size does not match chain Z dimension")
        self.locations, self.X, self.y = data.locations, data.X, data.y
        return self


def _corr_chol(family, phi, locations):
    spec = KernelSpec(family, 1.0, phi)
    r = gram(spec, locations)
    factor = chol_jitter(r)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return r, factor, logdet


def fit(
    data: SpatialDataset,
    family,
    priors: PriorConfig | None = None,
    iters: int = 10000,
    burn_in: int | None = None,
    thin: int = 1,
    seed: int = 0,
    target_accept: float = 0.44,
    fixed: dict | None = None,
) -> PosteriorChains:
    """Run the Gibbs sampler and return retained draws.

    burn_in defaults to iters // 2.  `fixed` may hold any of
    {"sigma2", "tau2", "phi", "beta"} to freeze a parameter at a value
    (used for validation runs).
    """
    family = _as_family(family)
    if priors is None:
        priors = default_priors(data)
    if burn_in is None:
        burn_in = iters // 2
    if not (iters > burn_in >= 0):
        raise ConfigError("need iters > burn_in >= 0")
    if thin < 1:
        raise ConfigError("thin must be >= 1")
    fixed = fixed or {}

    rng = np.random.default_rng(seed)
    L, p = data.L, data.p
    X, y = data.X, data.y
    Sb_inv = np.linalg.inv(priors.Sigma_beta)
    Sb_inv_mu = Sb_inv @ priors.mu_beta
    eye_L = np.eye(L)

    # init
    beta = np.asarray(fixed.get("beta", np.zeros(p)), dtype=float)
    z = np.zeros(L)
    var_y = float(np.var(y)) + 1e-6
    sigma2 = float(fixed.get("sigma2", var_y / 2))
    tau2 = float(fixed.get("tau2", var_y / 2))
    phi = float(fixed.get("phi", np.sqrt(priors.a_phi * priors.b_phi)))
    if not priors.a_phi <= phi <= priors.b_phi:
        phi = 0.5 * (priors.a_phi + priors.b_phi)

    r_mat, r_factor, logdet_r = _corr_chol(family, phi, data.locations)
    r_inv = cho_solve(r_factor, eye_L)

    log_step = np.log(0.5)
    accepted = 0
    n_keep = len(range(burn_in, iters, thin))
    out_beta = np.empty((n_keep, p))
    out_sigma2 = np.empty(n_keep)
    out_tau2 = np.empty(n_keep)
    out_phi = np.empty(n_keep)
    out_z = np.empty((n_keep, L))
    out_acc = np.empty(n_keep)
    kept = 0

    for it in range(iters):
        # beta | sigma2, tau2, phi  (Z marginalized out)
        if "beta" not in fixed:
            cs = np.linalg.cholesky(sigma2 * r_mat + tau2 * eye_L)
            wxy = solve_triangular(cs, np.column_stack([X, y]), lower=True)
            prec = Sb_inv + wxy[:, :p].T @ wxy[:, :p]
            rhs = Sb_inv_mu + wxy[:, :p].T @ wxy[:, p]
            c = np.linalg.cholesky(prec)
            mean = cho_solve((c, True), rhs)
            beta = mean + solve_triangular(c.T, rng.standard_normal(p), lower=False)

        # Z | beta, sigma2, tau2, phi
        prec_z = eye_L / tau2 + r_inv / sigma2
        cz = np.linalg.cholesky(prec_z)
        mean_z = cho_solve((cz, True), (y - X @ beta) / tau2)
        z = mean_z + solve_triangular(cz.T, rng.standard_normal(L), lower=False)

        # sigma2 | Z, phi
        quad_r = float(z @ cho_solve(r_factor, z))
        if "sigma2" not in fixed:
            sigma2 = (priors.b_sigma + 0.5 * quad_r) / rng.gamma(
                priors.a_sigma + 0.5 * L
            )

        # tau2 | beta, Z
        if "tau2" not in fixed:
            resid = y - X @ beta - z
            tau2 = (priors.b_tau + 0.5 * float(resid @ resid)) / rng.gamma(
                priors.a_tau + 0.5 * L
            )

        # phi | Z, sigma2 : log-scale random walk Metropolis
        if "phi" not in fixed:
            prop = float(np.exp(np.log(phi) + np.exp(log_step) * rng.standard_normal()))
            acc_prob = 0.0
            if priors.a_phi <= prop <= priors.b_phi:
                prop_mat, prop_factor, prop_logdet = _corr_chol(
                    family, prop, data.locations
                )
                prop_quad = float(z @ cho_solve(prop_factor, z))
                log_ratio = (
                    -0.5 * (prop_logdet - logdet_r)
                    - 0.5 * (prop_quad - quad_r) / sigma2
                    + (np.log(prop) - np.log(phi))  # Jacobian of the log walk
                )
                acc_prob = float(min(1.0, np.exp(min(log_ratio, 0.0))))
                if rng.uniform() < acc_prob:
                    phi = prop
                    r_mat, r_factor, logdet_r = prop_mat, prop_factor, prop_logdet
                    r_inv = cho_solve(r_factor, eye_L)
                    accepted += 1
            else:
                rng.uniform()  # keep the draw stream aligned on rejects
            if it < burn_in:  # diminishing adaptation, frozen afterwards
                gamma = min(0.2, (it + 1.0) ** -0.6)
                log_step += gamma * (acc_prob - target_accept)

        if it >= burn_in and (it - burn_in) % thin == 0:
            out_beta[kept] = beta
            out_sigma2[kept] = sigma2
            out_tau2[kept] = tau2
            out_phi[kept] = phi
            out_z[kept] = z
            out_acc[kept] = accepted / (it + 1.0)
            kept += 1

    return PosteriorChains(
        family=family,
        beta=out_beta,
        sigma2=out_sigma2,
        tau2=out_tau2,
        phi=out_phi,
        z=out_z,
        accept_rate=out_acc,
        burn_in=burn_in,
        thin=thin,
        seed=seed,
        priors=priors,
        locations=data.locations.copy(),
        X=X.copy(),
        y=y.copy(),
    )


def log_joint_density(data, family, priors, beta, sigma2, tau2, phi, z):
    """Log of the (unnormalized) joint density of one state; used to check
    that every retained state has finite posterior mass."""
    family = _as_family(family)
    if not (sigma2 > 0 and tau2 > 0 and priors.a_phi <= phi <= priors.b_phi):
        return -np.inf
    L = data.L
    _, r_factor, logdet_r = _corr_chol(family, phi, data.locations)
    resid = data.y - data.X @ beta - z
    quad_r = float(z @ cho_solve(r_factor, z))
    lp = -0.5 * (L * np.log(2 * np.pi * tau2) + float(resid @ resid) / tau2)
    lp += -0.5 * (L * np.log(2 * np.pi * sigma2) + logdet_r + quad_r / sigma2)
    db = beta - priors.mu_beta
    lp += -0.5 * float(db @ np.linalg.solve(priors.Sigma_beta, db))
    lp += -(priors.a_sigma + 1) * np.log(sigma2) - priors.b_sigma / sigma2
    lp += -(priors.a_tau + 1) * np.log(tau2) - priors.b_tau / tau2
    return float(lp)


# ---------------------------------------------------------------------------
# chain persistence: one '#' JSON header line, a column-name line, numeric rows

def save_chains(chains: PosteriorChains, path):
    p = chains.beta.shape[1]
    L = chains.z.shape[1]
    header = {
        "family": chains.family.value,
        "priors": {
            "a_phi": chains.priors.a_phi,
            "b_phi": chains.priors.b_phi,
            "a_sigma": chains.priors.a_sigma,
            "b_sigma": chains.priors.b_sigma,
            "a_tau": chains.priors.a_tau,
            "b_tau": chains.priors.b_tau,
            "mu_beta": chains.priors.mu_beta.tolist(),
            "Sigma_beta": chains.priors.Sigma_beta.tolist(),
        },
        "seed": chains.seed,
        "burn_in": chains.burn_in,
        "thin": chains.thin,
    }
    cols = (
        [f"beta_{i + 1}" for i in range(p)]
        + ["sigma2", "tau2", "phi"]
        + [f"z_{i + 1}" for i in range(L)]
    )
    table = np.column_stack(
        [chains.beta, chains.sigma2, chains.tau2, chains.phi, chains.z]
    )
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header) + "\n")
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, table, fmt="%.17g", delimiter=",")


def load_chains(path, data: SpatialDataset | None = None) -> PosteriorChains:
    with open(path) as fh:
        head = fh.readline()
        if not head.startswith("# "):
            raise ParseError("chain file missing header line")
        try:
            meta = json.loads(head[2:])
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad chain header: {exc}") from exc
        cols = fh.readline().strip().split(",")
        try:
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ParseError(f"bad chain table: {exc}") from exc
    p = sum(c.startswith("beta_") for c in cols)
    L = sum(c.startswith("z_") for c in cols)
    if table.size == 0:
        raise ParseError("chain file has no draws")
    if table.shape[1] != p + 3 + L:
        raise ParseError("chain file column mismatch")
    pr = meta["priors"]
    priors = PriorConfig(
        a_phi=pr["a_phi"],
        b_phi=pr["b_phi"],
        a_sigma=pr["a_sigma"],
        b_sigma=pr["b_sigma"],
        a_tau=pr["a_tau"],
        b_tau=pr["b_tau"],
        mu_beta=np.array(pr["mu_beta"]),
        Sigma_beta=np.array(pr["Sigma_beta"]),
    )
    chains = PosteriorChains(
        family=Family(meta["family"]),
        beta=table[:, :p],
        sigma2=table[:, p],
        tau2=table[:, p + 1],
        phi=table[:, p + 2],
        z=table[:, p + 3 :],
        accept_rate=np.full(table.shape[0], np.nan),  # not persisted
        burn_in=int(meta["burn_in"]),
        thin=int(meta["thin"]),
        seed=int(meta["seed"]),
        priors=priors,
    )
    if data is not None:
        chains.attach(data)
    return chains
