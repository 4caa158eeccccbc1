"""Vector autoregression on reconstructed samples.

The stacked coefficient matrix A ((n_psi * d) x n_psi) predicts the current
sample from d past samples, psi_t ~= A.T v_t with v_t = [psi_{t-1}; ...;
psi_{t-d}].  Two regularized estimators are provided: elementwise-L1
penalized least squares solved by proximal gradient, and reduced-rank
regression with an explicit rank cap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import LagMatrices
from .errors import NumericalError

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class VarModel:
    """Stacked VAR coefficients with the settings used to estimate them."""

    A: np.ndarray
    d: int
    mode: str                      # "ols" | "l1" | "rank"
    achieved_rank: int
    lam: float = 0.0
    rank_cap: int | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] * self.d:
            raise ValueError("A must have shape (n_psi * d, n_psi)")
        if self.mode not in ("ols", "l1", "rank"):
            raise ValueError(f"unknown mode {self.mode!r}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n_psi(self) -> int:
        return self.A.shape[1]

    def blocks(self) -> list[np.ndarray]:
        """Per-lag blocks B_k such that psi_t ~= sum_k B_k.T psi_{t-k}."""
        p = self.n_psi
        return [self.A[k * p:(k + 1) * p, :] for k in range(self.d)]

    def predict(self, past: np.ndarray) -> np.ndarray:
        """One-step prediction from ``past`` rows ordered newest first."""
        v = np.concatenate([np.asarray(row, dtype=float) for row in past])
        if v.shape[0] != self.A.shape[0]:
            raise ValueError("past window does not match lag order")
        return self.A.T @ v


def numerical_rank(A: np.ndarray) -> int:
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > _RANK_TOL * s[0]))


def _ols(Q: np.ndarray, Z: np.ndarray) -> np.ndarray:
    A, *_ = np.linalg.lstsq(Q, Z, rcond=_RANK_TOL)
    return A


def _largest_eigenvalue(G: np.ndarray, iters: int = 100, tol: float = 1e-10) -> float:
    """Power iteration on a symmetric PSD matrix."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = G @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v_next = w / norm
        lam_next = float(v_next @ G @ v_next)
        if abs(lam_next - lam) <= tol * max(1.0, abs(lam_next)):
            return lam_next
        v, lam = v_next, lam_next
    return lam


def _soft_threshold(A: np.ndarray, t: float) -> np.ndarray:
    return np.sign(A) * np.maximum(np.abs(A) - t, 0.0)


def fit_var_l1(lags: LagMatrices, lam: float, max_iter: int = 10000,
               rel_tol: float = 1e-8) -> VarModel:
    """Minimize 0.5 ||Z - Q A||_F^2 + lam * ||A||_1 (elementwise L1).

    Solved by ISTA started at A = 0 with step size 1/lambda_max(Q.T Q); the
    step is halved if an iterate ever increases the objective.  ``lam = 0``
    falls back to the ordinary least-squares solution.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    Z, Q = lags.Z, lags.Q
    if Z.shape[0] < Q.shape[1]:
        warnings.warn(f"only {Z.shape[0]} rows to estimate {Q.shape[1]} lag coefficients")
    if lam == 0.0:
        A = _ols(Q, Z)
        return VarModel(A=A, d=lags.d, mode="l1", achieved_rank=numerical_rank(A), lam=0.0)

    G = Q.T @ Q
    QtZ = Q.T @ Z
    lipschitz = _largest_eigenvalue(G)
    if lipschitz <= 0.0:
        return VarModel(A=np.zeros((Q.shape[1], Z.shape[1])), d=lags.d, mode="l1",
                        achieved_rank=0, lam=lam)
    step = 1.0 / lipschitz

    def objective(A):
        r = Z - Q @ A
        return 0.5 * float(np.sum(r * r)) + lam * float(np.sum(np.abs(A)))

    A = np.zeros((Q.shape[1], Z.shape[1]))
    obj = objective(A)
    floor = step * 1e-12
    for _ in range(max_iter):
        grad = G @ A - QtZ
        while True:
            A_next = _soft_threshold(A - step * grad, step * lam)
            obj_next = objective(A_next)
            if obj_next <= obj + 1e-12 * max(1.0, abs(obj)):
                break
            step *= 0.5
            if step < floor:
                raise NumericalError("ISTA backtracking floor reached; objective diverges")
        done = abs(obj - obj_next) <= rel_tol * max(abs(obj), 1e-30)
        A, obj = A_next, obj_next
        if done:
            break
    return VarModel(A=A, d=lags.d, mode="l1", achieved_rank=numerical_rank(A), lam=lam)


def fit_var_rank(lags: LagMatrices, s: int) -> VarModel:
    """Reduced-rank regression: min ||Z - Q A||_F^2 s.t. rank(A) <= s.

    The optimum is the OLS estimate projected on the top-s right singular
    vectors of Q @ A_ols.
    """
    Z, Q = lags.Z, lags.Q
    if s < 1:
        raise ValueError("rank cap s must be >= 1")
    if s > min(Q.shape[1], Z.shape[1]):
        raise ValueError(f"rank cap {s} exceeds min dimension {min(Q.shape[1], Z.shape[1])}")
    if numerical_rank(Q) < Q.shape[1]:
        warnings.warn("rank-deficient lag matrix Q; using pseudo-inverse solution")
    A_ols = _ols(Q, Z)
    fitted = Q @ A_ols
    _, _, vt = np.linalg.svd(fitted, full_matrices=False)
    V_s = vt[:s, :].T
    A = A_ols @ V_s @ V_s.T
    return VarModel(A=A, d=lags.d, mode="rank", achieved_rank=numerical_rank(A),
                    rank_cap=s)


def fit_var_ols(lags: LagMatrices) -> VarModel:
    A = _ols(lags.Q, lags.Z)
    return VarModel(A=A, d=lags.d, mode="ols", achieved_rank=numerical_rank(A))


def var_residual(model: VarModel, lags: LagMatrices) -> np.ndarray:
    """One-step innovations r_t = z_t - A.T v_t, one row per usable sample."""
    if lags.Q.shape[1] != model.A.shape[0]:
        raise ValueError("lag matrices do not match the model's lag order")
    return lags.Z - lags.Q @ model.A


def elbow_rank(A_ols: np.ndarray) -> int:
    """Rank at the largest singular-value gap ratio of the OLS estimate."""
    s = np.linalg.svd(A_ols, compute_uv=False)
    s = s[s > _RANK_TOL * max(s[0], 1e-300)]
    if s.size <= 1:
        return max(1, s.size)
    ratios = s[:-1] / s[1:]
    return int(np.argmax(ratios)) + 1
