"""Vectorized numpy versions of the batch fitness kernels.

Used when the compiled ``_kernels`` extension is unavailable. Both backends
share the same signatures and status codes.
"""

from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_ILL_CONDITIONED = 2


def heff_batch(positions, beta_pa, mode_betas, kappa, pa_length, users, pa_height, k0, amp):
    """Effective channels for a batch of PA configurations, shape (P, K, M).

    ``positions`` must be sorted ascending along axis 1.
    """
    x = np.asarray(positions, dtype=float)
    b = np.asarray(beta_pa, dtype=float)
    betas = np.asarray(mode_betas, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    users = np.asarray(users, dtype=float)

    delta = b[:, :, None] - betas[None, None, :]
    phi = np.hypot(kappa[None], 0.5 * delta)
    safe = np.where(phi > 0, phi, 1.0)
    mag = np.where(phi > 0, kappa[None] / safe * np.sin(phi * pa_length), 0.0)
    residual = np.sqrt(np.maximum(1.0 - mag * mag, 0.0))
    upstream = np.ones_like(residual)
    upstream[:, 1:] = np.cumprod(residual[:, :-1], axis=1)
    G = (mag * upstream) * np.exp(-1j * (0.5 * pa_length * delta + x[:, :, None] * betas))

    dx = x[:, None, :] - users[None, :, 0:1]
    dist = np.sqrt(dx**2 + users[None, :, 1:2] ** 2 + (pa_height - users[None, :, 2:3]) ** 2)
    h = amp / dist * np.exp(-1j * k0 * dist)
    return np.einsum("pkn,pnm->pkm", h.conj(), G)


def kpbf_rate_batch(H, lam, p_rel, sigma2, p_max, max_condition):
    """Sum rates of the normalized KPBF precoders for a batch of channels.

    Returns ``(rates, status)``; failed or degenerate entries score 0.
    """
    H = np.asarray(H, dtype=complex)
    lam = np.asarray(lam, dtype=float)
    p_rel = np.asarray(p_rel, dtype=float)
    P, K, M = H.shape
    Hh = np.conj(np.swapaxes(H, 1, 2))
    with np.errstate(over="ignore", invalid="ignore"):
        A = np.eye(M)[None] + np.einsum("pmk,pk,pkn->pmn", Hh, lam / sigma2, H)
        bound = np.einsum("pmm->p", A).real
    status = np.zeros(P, dtype=np.int8)
    bad = ~(bound <= max_condition)
    status[bad] = STATUS_ILL_CONDITIONED
    A[bad] = np.eye(M)

    L = np.linalg.cholesky(A)
    Y = np.linalg.solve(L, Hh)
    Wt = np.linalg.solve(np.conj(np.swapaxes(L, 1, 2)), Y) * np.sqrt(p_rel)[:, None, :]
    energy = np.sum(Wt.real**2 + Wt.imag**2, axis=(1, 2))
    zero = (energy == 0.0) & ~bad
    status[zero] = STATUS_DEGENERATE
    scale = np.sqrt(p_max / np.where(energy > 0, energy, 1.0))
    W = Wt * scale[:, None, None]

    gains = np.abs(H @ W) ** 2
    signal = np.einsum("pkk->pk", gains).copy()
    gains[:, np.arange(K), np.arange(K)] = 0.0
    sinr = signal / (gains.sum(axis=2) + sigma2)
    rates = np.log2(1.0 + sinr).sum(axis=1)
    rates[status != STATUS_OK] = 0.0
    return rates, status
