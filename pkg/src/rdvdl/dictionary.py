"""Sparse Bayesian dictionary learning trained by variational EM.

Each standardized sample x_i (length P) is modeled as D (z_i * s_i) + eps_i
with a K-column dictionary D, binary atom selectors z_ik under a
beta-Bernoulli prior, Gaussian weights s_ik, and isotropic Gaussian noise.
The factorized posterior

    q = prod_k N(d_k; mu_k, sig2_k I) Beta(pi_k; tau1_k, tau2_k)
        * prod_ik N(s_ik; nu_ik, omega_ik) Bernoulli(z_ik; eta_ik)
        * Gamma(gamma_s; c', d') Gamma(gamma_eps; e', f')

is optimized by exact coordinate updates, so the evidence lower bound is
non-decreasing at every step.  Gamma distributions are shape/rate, so the
posterior means are c'/d' and e'/f'.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import betaln, gammaln

from .data import ProcessDataset
from .errors import NumericalError
from .special import digamma, sigmoid

_LN2PI = math.log(2.0 * math.pi)
_ACTIVE_USAGE = 0.01


@dataclass(frozen=True)
class Hyperparams:
    """Prior constants (a0, b0, c0, d0, e0, f0) and the atom budget K."""

    K: int
    a0: float = 1.0
    b0: float = 1.0
    c0: float = 1e-6
    d0: float = 1e-6
    e0: float = 1e-6
    f0: float = 1e-6

    def __post_init__(self):
        if self.K < 1 or self.K != int(self.K):
            raise ValueError("K must be a positive integer")
        for name in ("a0", "b0", "c0", "d0", "e0", "f0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"hyperparameter {name} must be strictly positive")

    def beta_prior(self) -> tuple[float, float]:
        """Per-atom Beta prior (a0/K, b0(K-1)/K).

        The standard K-scaled construction degenerates at K = 1 (second
        parameter 0, improper prior), so that corner falls back to the plain
        Beta(a0, b0).
        """
        if self.K == 1:
            return self.a0, self.b0
        return self.a0 / self.K, self.b0 * (self.K - 1) / self.K


@dataclass
class VbPosterior:
    """All variational parameters for one training set.

    Atom covariances are isotropic (sig2_k * I_P): both the prior P^-1 I and
    the likelihood contribution are isotropic under the chosen update, so a
    scalar per atom is exact.
    """

    hp: Hyperparams
    mu: np.ndarray        # (K, P) atom posterior means
    sigma2: np.ndarray    # (K,)   isotropic atom posterior variances
    nu: np.ndarray        # (N, K) weight posterior means
    omega: np.ndarray     # (N, K) weight posterior variances
    eta: np.ndarray       # (N, K) selector activation probabilities
    tau1: np.ndarray      # (K,)   Beta posterior first parameters
    tau2: np.ndarray      # (K,)   Beta posterior second parameters
    c_prime: float
    d_prime: float
    e_prime: float
    f_prime: float

    @property
    def n_samples(self) -> int:
        return self.nu.shape[0]

    @property
    def n_features(self) -> int:
        return self.mu.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.mu.shape[0]

    @property
    def gamma_s_mean(self) -> float:
        return self.c_prime / self.d_prime

    @property
    def gamma_eps_mean(self) -> float:
        return self.e_prime / self.f_prime

    def copy(self) -> "VbPosterior":
        return replace(self, mu=self.mu.copy(), sigma2=self.sigma2.copy(),
                       nu=self.nu.copy(), omega=self.omega.copy(), eta=self.eta.copy(),
                       tau1=self.tau1.copy(), tau2=self.tau2.copy())

    def check_invariants(self):
        """Range checks on every parameter; used by debug-mode training."""
        if np.any(self.eta < 0) or np.any(self.eta > 1):
            raise NumericalError("eta left [0, 1]")
        for name in ("omega", "sigma2", "tau1", "tau2"):
            if np.any(getattr(self, name) <= 0):
                raise NumericalError(f"{name} must stay strictly positive")
        for name in ("c_prime", "d_prime", "e_prime", "f_prime"):
            if getattr(self, name) <= 0:
                raise NumericalError(f"{name} must stay strictly positive")


@dataclass(frozen=True)
class DictionaryModel:
    """Frozen result of a fit: posterior-mean dictionary plus bookkeeping."""

    dictionary: np.ndarray          # (P, K), columns are atom means
    active_mask: np.ndarray         # (K,) usage above threshold
    noise_precision: float          # E[gamma_eps]
    hyperparams: Hyperparams
    elbo_trace: np.ndarray
    mean_atoms_per_sample: float
    posterior: VbPosterior = field(repr=False, default=None)

    def __post_init__(self):
        D = np.asarray(self.dictionary, dtype=float)
        mask = np.asarray(self.active_mask, dtype=bool)
        trace = np.asarray(self.elbo_trace, dtype=float)
        if D.shape[1] != self.hyperparams.K or mask.shape != (D.shape[1],):
            raise ValueError("dictionary / mask shapes inconsistent with K")
        for name, arr in (("dictionary", D), ("active_mask", mask), ("elbo_trace", trace)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def active_dictionary(self) -> np.ndarray:
        """Columns whose training usage exceeded the activity threshold."""
        return self.dictionary[:, self.active_mask]


def _as_matrix(data) -> np.ndarray:
    return data.values if isinstance(data, ProcessDataset) else np.asarray(data, dtype=float)


def init_model(data, hp: Hyperparams, seed: int) -> VbPosterior:
    """Seeded starting point: atoms are data samples rescaled to the prior norm.

    mu_k is a randomly chosen sample scaled to ||mu_k|| = 1/sqrt(P), matching
    the N(0, P^-1 I) prior scale; sig2_k = 1/P; nu = 0, omega = 1, eta = 0.5;
    Beta and Gamma parameters start at their prior values.
    """
    X = _as_matrix(data)
    n, p = X.shape
    k_atoms = hp.K
    rng = np.random.default_rng(seed)
    if k_atoms > n:
        warnings.warn(f"K={k_atoms} exceeds N={n}; initial atoms may duplicate")
    idx = rng.choice(n, size=k_atoms, replace=k_atoms > n)
    mu = X[idx].astype(float).copy()
    target = 1.0 / math.sqrt(p)
    for k in range(k_atoms):
        norm = np.linalg.norm(mu[k])
        if norm < 1e-12:
            direction = rng.standard_normal(p)
            norm = np.linalg.norm(direction)
            mu[k] = direction
        mu[k] *= target / norm
    a_pi, b_pi = hp.beta_prior()
    return VbPosterior(
        hp=hp,
        mu=mu,
        sigma2=np.full(k_atoms, 1.0 / p),
        nu=np.zeros((n, k_atoms)),
        omega=np.ones((n, k_atoms)),
        eta=np.full((n, k_atoms), 0.5),
        tau1=np.full(k_atoms, a_pi),
        tau2=np.full(k_atoms, b_pi),
        c_prime=hp.c0, d_prime=hp.d0, e_prime=hp.e0, f_prime=hp.f0,
    )


def _expected_log_pi(post: VbPosterior) -> tuple[np.ndarray, np.ndarray]:
    total = digamma(post.tau1 + post.tau2)
    return digamma(post.tau1) - total, digamma(post.tau2) - total


def vb_e_step(post: VbPosterior, data) -> VbPosterior:
    """Update every selector probability eta_ik given the rest of the posterior.

    log q(z=1) - log q(z=0) = E[ln pi_k] - E[ln(1 - pi_k)]
        - (E[gamma_eps]/2) (E[s_ik^2] E[d_k'd_k] - 2 nu_ik mu_k' x_i^{-k})
    where x_i^{-k} is the expected residual excluding atom k.  The two-way
    normalization runs through a log-domain sigmoid, so extreme exponents
    underflow to exact 0/1 instead of producing NaN.
    """
    X = _as_matrix(data)
    post = post.copy()
    p = post.n_features
    ge = post.gamma_eps_mean
    ln_pi, ln_1mpi = _expected_log_pi(post)
    edd = np.sum(post.mu * post.mu, axis=1) + p * post.sigma2      # E[d_k' d_k]
    B = post.eta * post.nu
    Xhat = B @ post.mu
    for k in range(post.n_atoms):
        mu_k = post.mu[k]
        resid_k = X - Xhat + np.outer(B[:, k], mu_k)
        proj = resid_k @ mu_k
        es2 = post.nu[:, k] ** 2 + post.omega[:, k]
        log_odds = (ln_pi[k] - ln_1mpi[k]) - 0.5 * ge * (es2 * edd[k] - 2.0 * post.nu[:, k] * proj)
        eta_k = sigmoid(log_odds)
        new_b = eta_k * post.nu[:, k]
        Xhat += np.outer(new_b - B[:, k], mu_k)
        B[:, k] = new_b
        post.eta[:, k] = eta_k
    return post


def vb_m_step(post: VbPosterior, data) -> VbPosterior:
    """Sweep the remaining factors: per atom q(s), q(d_k), q(pi_k); then the Gammas.

    Residuals excluding the current atom are maintained after every atom so
    each update is an exact coordinate maximization.  The weight posterior is
    refreshed before the atom posterior: with the zero-mean weight
    initialization the reverse order annihilates the dictionary (mu_k = 0 is
    a fixed point of the d-first sweep).
    """
    X = _as_matrix(data)
    post = post.copy()
    n, p = X.shape
    hp = post.hp
    gs = post.gamma_s_mean
    ge = post.gamma_eps_mean
    a_pi, b_pi = hp.beta_prior()
    B = post.eta * post.nu
    Xhat = B @ post.mu
    for k in range(post.n_atoms):
        eta_k = post.eta[:, k]
        resid_k = X - Xhat + np.outer(B[:, k], post.mu[k])
        # q(s_ik): precision gamma_s + gamma_eps * eta * E[d_k'd_k]
        edd_k = float(post.mu[k] @ post.mu[k]) + p * post.sigma2[k]
        omega_k = 1.0 / (gs + ge * eta_k * edd_k)
        nu_k = ge * omega_k * eta_k * (resid_k @ post.mu[k])
        post.omega[:, k] = omega_k
        post.nu[:, k] = nu_k
        # q(d_k): isotropic precision P + gamma_eps * sum_i eta * E[s^2]
        es2_k = nu_k ** 2 + omega_k
        post.sigma2[k] = 1.0 / (p + ge * float(np.sum(eta_k * es2_k)))
        mu_k = ge * post.sigma2[k] * (resid_k.T @ (eta_k * nu_k))
        new_b = eta_k * nu_k
        Xhat += np.outer(new_b, mu_k) - np.outer(B[:, k], post.mu[k])
        B[:, k] = new_b
        post.mu[k] = mu_k
    # q(pi_k): conjugate Beta counts from the soft selectors
    usage = post.eta.sum(axis=0)
    post.tau1 = a_pi + usage
    post.tau2 = b_pi + n - usage
    # q(gamma_s), q(gamma_eps)
    es2 = post.nu ** 2 + post.omega
    post.c_prime = hp.c0 + 0.5 * n * post.n_atoms
    post.d_prime = hp.d0 + 0.5 * float(np.sum(es2))
    post.e_prime = hp.e0 + 0.5 * n * p
    post.f_prime = hp.f0 + 0.5 * _expected_squared_error(post, X)
    return post


def _expected_squared_error(post: VbPosterior, X: np.ndarray) -> float:
    """E[sum_i ||x_i - D (z_i * s_i)||^2] under the posterior.

    Expanded as the squared error of the posterior-mean reconstruction plus
    nonnegative variance corrections, so the result cannot go negative.
    """
    p = post.n_features
    B = post.eta * post.nu
    diff = X - B @ post.mu
    total = float(np.sum(diff * diff))
    mu_sq = np.sum(post.mu * post.mu, axis=1)                 # (K,)
    es2 = post.nu ** 2 + post.omega
    spread = post.eta * (post.nu ** 2 * (1.0 - post.eta) + post.omega)   # E[w^2]-E[w]^2
    total += float(np.sum(spread.sum(axis=0) * mu_sq))
    total += float(np.sum((post.eta * es2).sum(axis=0) * (p * post.sigma2)))
    return total


def compute_elbo(post: VbPosterior, data) -> float:
    """Full evidence lower bound; raises if any term is non-finite."""
    X = _as_matrix(data)
    n, p = X.shape
    k_atoms = post.n_atoms
    hp = post.hp
    a_pi, b_pi = hp.beta_prior()
    ln_pi, ln_1mpi = _expected_log_pi(post)
    e_gs, e_ge = post.gamma_s_mean, post.gamma_eps_mean
    e_ln_gs = digamma(post.c_prime) - math.log(post.d_prime)
    e_ln_ge = digamma(post.e_prime) - math.log(post.f_prime)
    es2 = post.nu ** 2 + post.omega
    edd = np.sum(post.mu * post.mu, axis=1) + p * post.sigma2

    terms = {}
    terms["likelihood"] = 0.5 * n * p * (e_ln_ge - _LN2PI) \
        - 0.5 * e_ge * _expected_squared_error(post, X)
    terms["prior_dictionary"] = 0.5 * p * k_atoms * (math.log(p) - _LN2PI) \
        - 0.5 * p * float(np.sum(edd))
    terms["prior_weights"] = 0.5 * n * k_atoms * (e_ln_gs - _LN2PI) \
        - 0.5 * e_gs * float(np.sum(es2))
    usage = post.eta.sum(axis=0)
    terms["prior_selectors"] = float(np.sum(usage * ln_pi + (n - usage) * ln_1mpi))
    terms["prior_pi"] = float(np.sum((a_pi - 1.0) * ln_pi + (b_pi - 1.0) * ln_1mpi)) \
        - k_atoms * betaln(a_pi, b_pi)
    terms["prior_gamma_s"] = hp.c0 * math.log(hp.d0) - gammaln(hp.c0) \
        + (hp.c0 - 1.0) * e_ln_gs - hp.d0 * e_gs
    terms["prior_gamma_eps"] = hp.e0 * math.log(hp.f0) - gammaln(hp.e0) \
        + (hp.e0 - 1.0) * e_ln_ge - hp.f0 * e_ge

    terms["entropy_dictionary"] = 0.5 * p * k_atoms * (1.0 + _LN2PI) \
        + 0.5 * p * float(np.sum(np.log(post.sigma2)))
    terms["entropy_weights"] = 0.5 * float(np.sum(1.0 + _LN2PI + np.log(post.omega)))
    eta = post.eta
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(eta > 0, eta * np.log(eta), 0.0) \
            - np.where(eta < 1, (1.0 - eta) * np.log1p(-eta), 0.0)
    terms["entropy_selectors"] = float(np.sum(h))
    terms["entropy_pi"] = float(np.sum(
        betaln(post.tau1, post.tau2)
        - (post.tau1 - 1.0) * digamma(post.tau1)
        - (post.tau2 - 1.0) * digamma(post.tau2)
        + (post.tau1 + post.tau2 - 2.0) * digamma(post.tau1 + post.tau2)))
    terms["entropy_gamma_s"] = _gamma_entropy(post.c_prime, post.d_prime)
    terms["entropy_gamma_eps"] = _gamma_entropy(post.e_prime, post.f_prime)

    for name, value in terms.items():
        if not math.isfinite(value):
            raise NumericalError(f"ELBO term {name!r} is non-finite ({value})")
    return float(sum(terms.values()))


def _gamma_entropy(shape: float, rate: float) -> float:
    return shape - math.log(rate) + gammaln(shape) + (1.0 - shape) * digamma(shape)


def fit(data, hp: Hyperparams | None = None, seed: int = 0, max_iter: int = 300,
        tol: float = 1e-6, debug_checks: bool = False) -> DictionaryModel:
    """Run variational EM to convergence and freeze the dictionary.

    Iterates the M sweep then the E sweep, tracking the lower bound from the
    initial state; stops once the relative bound change drops below ``tol``
    or after ``max_iter`` iterations.  Atoms whose mean activation
    sum_i eta_ik / N exceeds 1% are marked active.
    """
    X = _as_matrix(data)
    if hp is None:
        hp = Hyperparams(K=2 * X.shape[1])
    post = init_model(X, hp, seed)
    trace = [compute_elbo(post, X)]
    for _ in range(max_iter):
        post = vb_m_step(post, X)
        post = vb_e_step(post, X)
        if debug_checks:
            post.check_invariants()
        trace.append(compute_elbo(post, X))
        if abs(trace[-1] - trace[-2]) < tol * max(abs(trace[-2]), 1e-30):
            break
    usage = post.eta.mean(axis=0)
    hard_counts = (post.eta >= 0.5).sum(axis=1)
    return DictionaryModel(
        dictionary=post.mu.T.copy(),
        active_mask=usage > _ACTIVE_USAGE,
        noise_precision=post.gamma_eps_mean,
        hyperparams=hp,
        elbo_trace=np.array(trace),
        mean_atoms_per_sample=float(hard_counts.mean()),
        posterior=post,
    )
