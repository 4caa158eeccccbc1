"""Greedy sparse coding of samples against a frozen dictionary.

The encoder is plain orthogonal matching pursuit: atoms are ranked by the
correlation of their normalized columns with the residual, coefficients are
re-solved by least squares on the growing support, and construction stops at
a sparsity cap or once the residual is negligible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SparseCode:
    """Ordered support, least-squares coefficients, and final residual norm."""

    support: tuple[int, ...]
    coefficients: np.ndarray
    residual_norm: float

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=float)
        if coeff.shape != (len(self.support),):
            raise ValueError("one coefficient per support index required")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support indices must be unique")
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))

    def dense(self, n_atoms: int) -> np.ndarray:
        w = np.zeros(n_atoms)
        w[list(self.support)] = self.coefficients
        return w


def validate_dictionary(dictionary: np.ndarray) -> np.ndarray:
    """Reject dictionaries with (near-)zero columns; meant for model load time."""
    D = np.asarray(dictionary, dtype=float)
    if D.ndim != 2:
        raise ValueError("dictionary must be a P x K matrix")
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms < 1e-12):
        dead = np.nonzero(norms < 1e-12)[0]
        raise ValueError(f"dictionary has zero columns at indices {dead.tolist()}")
    return D


def omp_encode(dictionary: np.ndarray, sample: np.ndarray, t_max: int,
               residual_tol: float | None = None) -> SparseCode:
    """Encode one sample with at most ``t_max`` atoms.

    Selection uses normalized columns so atom scale does not bias the ranking;
    the coefficients are solved against the unnormalized columns, so the
    reconstruction is ``dictionary @ code.dense(K)``.  Ties in the correlation
    ranking break toward the lowest index.  ``residual_tol`` defaults to
    1e-6 times the norm of the sample.
    """
    D = np.asarray(dictionary, dtype=float)
    y = np.asarray(sample, dtype=float)
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if D.shape[0] != y.shape[0]:
        raise ValueError("sample length must match dictionary rows")
    k_atoms = D.shape[1]
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms < 1e-12):
        raise ValueError("dictionary has zero columns; validate at model load time")
    if residual_tol is None:
        residual_tol = 1e-6 * float(np.linalg.norm(y))
    unit = D / norms

    support: list[int] = []
    selected = np.zeros(k_atoms, dtype=bool)
    residual = y.copy()
    coeffs = np.zeros(0)
    res_norm = float(np.linalg.norm(residual))
    while len(support) < min(t_max, k_atoms) and res_norm > residual_tol:
        corr = np.abs(unit.T @ residual)
        corr[selected] = -np.inf
        best = int(np.argmax(corr))
        if not np.isfinite(corr[best]) or corr[best] <= 0.0:
            break
        support.append(best)
        selected[best] = True
        sub = D[:, support]
        coeffs, *_ = np.linalg.lstsq(sub, y, rcond=None)
        residual = y - sub @ coeffs
        res_norm = float(np.linalg.norm(residual))
    return SparseCode(support=tuple(support), coefficients=coeffs, residual_norm=res_norm)


def reconstruct(dictionary: np.ndarray, codes: list[SparseCode]) -> np.ndarray:
    """Stack per-sample reconstructions D w_i into an N x P matrix."""
    D = np.asarray(dictionary, dtype=float)
    p, k_atoms = D.shape
    out = np.zeros((len(codes), p))
    for i, code in enumerate(codes):
        if code.support:
            idx = list(code.support)
            if max(idx) >= k_atoms or min(idx) < 0:
                raise IndexError(f"code {i} references atom outside 0..{k_atoms - 1}")
            out[i] = D[:, idx] @ code.coefficients
    return out


def encode_matrix(dictionary: np.ndarray, samples: np.ndarray, t_max: int,
                  residual_tol: float | None = None) -> list[SparseCode]:
    """Encode each row of ``samples``; deterministic and order-preserving."""
    X = np.asarray(samples, dtype=float)
    return [omp_encode(dictionary, X[i], t_max, residual_tol) for i in range(X.shape[0])]
