"""Backend selection for the batch fitness kernels.

The compiled extension is used when importable; set ``MMPASS_PURE_PYTHON=1``
to force the numpy fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback
from ._fallback import STATUS_DEGENERATE, STATUS_ILL_CONDITIONED, STATUS_OK  # noqa: F401

_backend = _fallback
BACKEND = "python"
if os.environ.get("MMPASS_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels as _backend  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _backend = _fallback


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("compiled", "python" or None for default)."""
    if name is None:
        return _backend
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def heff_batch(positions, beta_pa, mode_betas, kappa, pa_length, users, pa_height, k0, amp):
    return _backend.heff_batch(
        np.ascontiguousarray(positions, dtype=float),
        np.ascontiguousarray(beta_pa, dtype=float),
        np.ascontiguousarray(mode_betas, dtype=float),
        np.ascontiguousarray(kappa, dtype=float),
        float(pa_length),
        np.ascontiguousarray(users, dtype=float),
        float(pa_height),
        float(k0),
        float(amp),
    )


def kpbf_rate_batch(H, lam, p_rel, sigma2, p_max, max_condition):
    return _backend.kpbf_rate_batch(
        np.ascontiguousarray(H, dtype=complex),
        np.ascontiguousarray(lam, dtype=float),
        np.ascontiguousarray(p_rel, dtype=float),
        float(sigma2),
        float(p_max),
        float(max_condition),
    )
