"""Synthetic causal datasets with analytically known ground truth.

Covariates are drawn from a two-component Gaussian mixture, one component per
treatment arm, whose center separation ``theta`` controls how much the treated
and control populations overlap. Response surfaces are linear functions of a
normalized radial-basis expansion of the covariates, so the true propensity
score, both potential-outcome means and the treatment effect are available in
closed form for every simulated row.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DataError

PROPENSITY_FLOOR = 1e-300
PROPENSITY_CEIL = 1.0 - 1e-16


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulated dataset.

    Attributes
    ----------
    seed : int
        Seed of the generator; the dataset is a pure function of this config.
    n : int
        Number of rows, at least 2.
    theta : float
        Half-distance between the two Gaussian arm centers. 0 gives identical
        populations (randomized treatment); larger values weaken overlap.
    p_a : float
        Marginal treatment probability, in (0, 1).
    d_basis : int
        Number of radial-basis representers used for the response surfaces.
    gamma : float
        Bandwidth of the Gaussian kernel ``exp(-gamma * ||x - b||^2)``.
    sigma_noise : float or None
        Outcome noise standard deviation. ``None`` resolves, per instance, to
        ``sigma_noise_rel`` times the sample standard deviation of the
        untreated surface.
    sigma_noise_rel : float
        Relative noise level used when ``sigma_noise`` is ``None``.
    sigma0_sq, sigma1_sq : float
        Axis variances of the (shared) arm covariance before rotation.
    coef_scale : float
        Standard deviation of the surface coefficients.
    """

    seed: int
    n: int = 5000
    theta: float = 1.0
    p_a: float = 0.5
    d_basis: int = 2
    gamma: float = 1.0
    sigma_noise: float | None = None
    sigma_noise_rel: float = 0.1
    sigma0_sq: float = 2.0
    sigma1_sq: float = 5.0
    coef_scale: float = 1.0

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigurationError(f"n must be >= 2, got {self.n}")
        if not 0.0 < self.p_a < 1.0:
            raise ConfigurationError(f"p_a must be in (0, 1), got {self.p_a}")
        if self.theta < 0.0:
            raise ConfigurationError(f"theta must be >= 0, got {self.theta}")
        if self.d_basis < 1:
            raise ConfigurationError(f"d_basis must be >= 1, got {self.d_basis}")
        if self.gamma <= 0.0:
            raise ConfigurationError(f"gamma must be > 0, got {self.gamma}")
        if self.sigma_noise is not None and self.sigma_noise < 0.0:
            raise ConfigurationError(
                f"sigma_noise must be >= 0, got {self.sigma_noise}"
            )
        if self.sigma_noise_rel < 0.0:
            raise ConfigurationError(
                f"sigma_noise_rel must be >= 0, got {self.sigma_noise_rel}"
            )
        if self.sigma0_sq <= 0.0 or self.sigma1_sq <= 0.0:
            raise ConfigurationError("axis variances must be > 0")


@dataclass(frozen=True)
class ResponseSurface:
    """Normalized radial-basis featurization shared by the two surfaces.

    ``z(x) = [K_gamma(x, b_1), ..., K_gamma(x, b_D)] @ z_norm.T`` where
    ``z_norm`` is the inverse square root of the representer Gram matrix, so
    inner products of featurized representers reproduce the Gram matrix.
    """

    representers: np.ndarray  # (D, d)
    gamma: float
    z_norm: np.ndarray  # (D, D), symmetric


@dataclass(frozen=True)
class TreatmentMixture:
    """Two rotated Gaussians with shared covariance, one per treatment arm."""

    p_a: float
    means: np.ndarray  # (2, d); row a is the center of arm a
    cov: np.ndarray  # (d, d)
    precision: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "precision", np.linalg.inv(self.cov))

    def propensity(self, x: np.ndarray) -> np.ndarray:
        """Posterior treatment probability of each row, by Bayes' rule.

        Both components share a covariance so the normalization constants
        cancel and only the quadratic forms remain. Values are clamped to
        (1e-300, 1 - 1e-16) so downstream ratios stay finite.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d0 = x - self.means[0]
        d1 = x - self.means[1]
        q0 = np.einsum("ij,jk,ik->i", d0, self.precision, d0)
        q1 = np.einsum("ij,jk,ik->i", d1, self.precision, d1)
        logit = np.log(self.p_a / (1.0 - self.p_a)) - 0.5 * (q1 - q0)
        e = _sigmoid(logit)
        return np.clip(e, PROPENSITY_FLOOR, PROPENSITY_CEIL)


@dataclass(frozen=True)
class GroundTruth:
    """Analytic oracle functions attached to a simulated dataset."""

    surface: ResponseSurface
    beta_mu: np.ndarray  # (D + 1,), last entry intercept
    beta_tau: np.ndarray
    mixture: TreatmentMixture

    def mu0(self, x: np.ndarray) -> np.ndarray:
        z = rbf_featurize(x, self.surface)
        return z @ self.beta_mu[:-1] + self.beta_mu[-1]

    def tau(self, x: np.ndarray) -> np.ndarray:
        z = rbf_featurize(x, self.surface)
        return z @ self.beta_tau[:-1] + self.beta_tau[-1]

    def mu1(self, x: np.ndarray) -> np.ndarray:
        return self.mu0(x) + self.tau(x)

    def propensity(self, x: np.ndarray) -> np.ndarray:
        return self.mixture.propensity(x)


@dataclass
class Dataset:
    """Observed arrays plus optional oracle columns.

    ``mu0``, ``mu1``, ``e`` and ``cate`` are populated for simulated data and
    may be absent (``None``) for ingested files. ``cate`` always equals
    ``mu1 - mu0`` exactly when present.
    """

    x: np.ndarray  # (n, d)
    a: np.ndarray  # (n,) in {0, 1}
    y: np.ndarray  # (n,)
    mu0: np.ndarray | None = None
    mu1: np.ndarray | None = None
    e: np.ndarray | None = None
    cate: np.ndarray | None = None
    sigma_noise: float | None = None
    truth: GroundTruth | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def has_oracle(self) -> bool:
        return all(v is not None for v in (self.mu0, self.mu1, self.e, self.cate))

    def require_oracle(self) -> None:
        if not self.has_oracle:
            raise DataError("dataset has no oracle columns (mu_0, mu_1, e, cate)")

    def subset(self, idx: np.ndarray) -> "Dataset":
        """Row subset sharing the same noise level and ground truth."""
        pick = lambda v: None if v is None else v[idx]
        return Dataset(
            x=self.x[idx],
            a=self.a[idx],
            y=self.y[idx],
            mu0=pick(self.mu0),
            mu1=pick(self.mu1),
            e=pick(self.e),
            cate=pick(self.cate),
            sigma_noise=self.sigma_noise,
            truth=self.truth,
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """Gaussian kernel matrix ``exp(-gamma * ||a_i - b_j||^2)``."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def root_inverse(k: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of a positive-definite matrix."""
    vals, vecs = np.linalg.eigh(k)
    vals = np.maximum(vals, 1e-12)
    return (vecs * vals**-0.5) @ vecs.T


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random rotation matrix: a uniform angle in 2-d, QR beyond."""
    if dim == 2:
        angle = rng.uniform(0.0, 2.0 * np.pi)
        c, s = np.cos(angle), np.sin(angle)
        return np.array([[c, -s], [s, c]])
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rbf_featurize(x: np.ndarray, surface: ResponseSurface) -> np.ndarray:
    """Kernel features against the representers, normalized by ``z_norm``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != surface.representers.shape[1]:
        raise ValueError(
            f"x has {x.shape[1]} columns, representers have "
            f"{surface.representers.shape[1]}"
        )
    k = rbf_kernel(x, surface.representers, surface.gamma)
    return k @ surface.z_norm.T


def oracle_propensity(x: np.ndarray, mixture: TreatmentMixture) -> np.ndarray:
    """Analytic propensity of arbitrary points under a fitted mixture."""
    return mixture.propensity(x)


def simulate(cfg: SimConfig) -> Dataset:
    """Generate one dataset; a pure, bit-reproducible function of ``cfg``.

    Draw order is fixed: rotation, treatment arms, covariates, representers,
    surface coefficients, outcome noise. All oracle columns are populated and
    ``e`` is computed analytically from the two-Gaussian mixture.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    d = 2  # the arm mixture lives in the plane

    w = random_rotation(d, rng)
    chol = w * np.array([np.sqrt(cfg.sigma0_sq), np.sqrt(cfg.sigma1_sq)])
    cov = chol @ chol.T
    means = np.stack([w @ np.array([cfg.theta, 0.0]),
                      w @ np.array([-cfg.theta, 0.0])])
    mixture = TreatmentMixture(p_a=cfg.p_a, means=means, cov=cov)

    a = (rng.random(cfg.n) < cfg.p_a).astype(np.int64)
    x = means[a] + rng.standard_normal((cfg.n, d)) @ chol.T

    comp = (rng.random(cfg.d_basis) < cfg.p_a).astype(np.int64)
    representers = means[comp] + rng.standard_normal((cfg.d_basis, d)) @ chol.T
    gram = rbf_kernel(representers, representers, cfg.gamma)
    surface = ResponseSurface(
        representers=representers, gamma=cfg.gamma, z_norm=root_inverse(gram)
    )

    beta_mu = rng.standard_normal(cfg.d_basis + 1) * cfg.coef_scale
    beta_tau = rng.standard_normal(cfg.d_basis + 1) * cfg.coef_scale

    z = rbf_featurize(x, surface)
    mu0 = z @ beta_mu[:-1] + beta_mu[-1]
    tau = z @ beta_tau[:-1] + beta_tau[-1]
    mu1 = mu0 + tau
    e = mixture.propensity(x)

    sigma = cfg.sigma_noise
    if sigma is None:
        sigma = cfg.sigma_noise_rel * float(np.std(mu0))
    y = mu0 + a * tau + rng.standard_normal(cfg.n) * sigma

    return Dataset(
        x=x,
        a=a,
        y=y,
        mu0=mu0,
        mu1=mu1,
        e=e,
        cate=mu1 - mu0,
        sigma_noise=float(sigma),
        truth=GroundTruth(
            surface=surface, beta_mu=beta_mu, beta_tau=beta_tau, mixture=mixture
        ),
    )


def child_config(cfg: SimConfig, campaign_seed: int, index: int) -> SimConfig:
    """Config for instance ``index`` of a campaign, order-independent."""
    return replace(cfg, seed=child_seed(campaign_seed, index))


def child_seed(*path: int) -> int:
    """Stable integer seed derived from a tuple of non-negative integers."""
    ss = np.random.SeedSequence([int(p) for p in path])
    return int(ss.generate_state(1)[0])
