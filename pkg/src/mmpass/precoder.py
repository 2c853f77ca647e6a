"""KKT-parameterized linear beamforming, power normalization, SINR and sum rate.

Channels are stored rows-as-users: ``H_eff`` is ``(K, M)`` and ``H_eff[k]`` is
``h_eff,k^H``. Precoders are ``(M, K)`` with one column per user stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# A = I + PSD has eigenvalues >= 1, so trace(A) bounds its condition number.
MAX_CONDITION = 1e13


class ConditioningError(ArithmeticError):
    """The regularized Gram matrix is too ill-conditioned to solve reliably."""


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class KpbfParams:
    """Unconstrained search coordinates for the dual weights and power split."""

    z_lambda: np.ndarray
    z_p: np.ndarray

    @property
    def lam(self) -> np.ndarray:
        return np.exp(np.asarray(self.z_lambda, dtype=float))

    @property
    def p_rel(self) -> np.ndarray:
        return softmax(self.z_p)


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("noise power must be positive")


@dataclass(frozen=True)
class Precoder:
    W: np.ndarray
    degenerate: bool = False

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.W) ** 2))


def kpbf_unnormalized(H_eff, lam, p_rel, sigma2) -> np.ndarray:
    """Unnormalized KPBF precoder (M x K).

    Column k is ``sqrt(p_k) A^{-1} h_k`` with
    ``A = I + (1/sigma2) sum_j lam_j h_j h_j^H``, solved by Cholesky.
    """
    H = np.atleast_2d(np.asarray(H_eff, dtype=complex))
    lam = np.asarray(lam, dtype=float)
    p_rel = np.asarray(p_rel, dtype=float)
    K, M = H.shape
    if lam.shape != (K,) or p_rel.shape != (K,):
        raise ValueError("lam and p_rel must have one entry per user")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(lam)) and np.all(np.isfinite(p_rel))):
        raise ValueError("non-finite input to the KPBF precoder")
    if np.any(lam < 0) or np.any(p_rel < 0):
        raise ValueError("lam and p_rel must be nonnegative")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")

    Hh = H.conj().T  # columns are h_eff,k
    with np.errstate(over="ignore", invalid="ignore"):
        A = np.eye(M) + (Hh * (lam / sigma2)) @ H
        A = 0.5 * (A + A.conj().T)
    if not np.all(np.isfinite(A)):
        raise ConditioningError("regularized Gram matrix overflowed")
    bound = float(np.trace(A).real)
    if bound > MAX_CONDITION:
        raise ConditioningError(f"regularized Gram matrix condition bound {bound:.3e}")
    factor = scipy.linalg.cho_factor(A, lower=True)
    return scipy.linalg.cho_solve(factor, Hh) * np.sqrt(p_rel)[None, :]


def normalize_power(W_tilde, P_max: float) -> Precoder:
    """Scale ``W_tilde`` so that its squared Frobenius norm equals ``P_max``."""
    if not P_max > 0:
        raise ValueError("P_max must be positive")
    W_tilde = np.asarray(W_tilde, dtype=complex)
    energy = float(np.sum(W_tilde.real**2 + W_tilde.imag**2))
    if energy == 0.0:
        return Precoder(np.zeros_like(W_tilde), degenerate=True)
    return Precoder(W_tilde * np.sqrt(P_max / energy))


def _as_matrix(W) -> np.ndarray:
    if isinstance(W, Precoder):
        W = W.W
    return np.atleast_2d(np.asarray(W, dtype=complex))


def sinr(H_eff, W, sigma2: float, k: int) -> float:
    H = np.atleast_2d(np.asarray(H_eff, dtype=complex))
    W = _as_matrix(W)
    if not 0 <= k < H.shape[0]:
        raise IndexError(f"user index {k} out of range")
    gains = np.abs(H[k] @ W) ** 2
    interference = np.delete(gains, k).sum()
    return float(gains[k] / (interference + sigma2))


def sinrs(H_eff, W, sigma2: float) -> np.ndarray:
    """All users' SINRs at once."""
    H = np.atleast_2d(np.asarray(H_eff, dtype=complex))
    gains = np.abs(H @ _as_matrix(W)) ** 2
    signal = np.diag(gains).copy()
    np.fill_diagonal(gains, 0.0)
    return signal / (gains.sum(axis=1) + sigma2)


def sum_rate(H_eff, W, sigma2: float) -> float:
    """Sum over users of log2(1 + SINR), in bits/s/Hz."""
    return float(np.sum(np.log2(1.0 + sinrs(H_eff, W, sigma2))))


def kpbf_precoder(H_eff, params: KpbfParams, sigma2: float, P_max: float) -> Precoder:
    return normalize_power(kpbf_unnormalized(H_eff, params.lam, params.p_rel, sigma2), P_max)
