"""Coupled-mode radiation model of a multi-mode dielectric waveguide.

A pinching antenna (PA) is a short dielectric segment whose fundamental mode has
a tunable propagation constant ``beta_pa``. The field it extracts from guided
mode ``m`` is set by the phase mismatch against that mode's constant; the power
left in the mode after each PA is what reaches the next one downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class GeometryError(ValueError):
    """Raised when a waveguide or placement description is infeasible."""


@dataclass(frozen=True)
class WaveguideSpec:
    """Static description of the waveguide and its PAs.

    ``kappa`` is an ``(N, M)`` array of overlap-integral coupling strengths in
    rad/m. Units are SI throughout.
    """

    mode_betas: np.ndarray
    kappa: np.ndarray
    pa_length: float
    x_min: float
    x_max: float
    d_min: float
    pa_height: float = 3.0
    carrier_freq: float = 28e9

    def __post_init__(self):
        betas = np.atleast_1d(np.asarray(self.mode_betas, dtype=float))
        kappa = np.atleast_2d(np.asarray(self.kappa, dtype=float))
        object.__setattr__(self, "mode_betas", betas)
        object.__setattr__(self, "kappa", kappa)

        if betas.size < 1:
            raise GeometryError("at least one guided mode is required")
        if np.any(betas <= 0) or not np.all(np.isfinite(betas)):
            raise GeometryError("mode propagation constants must be positive")
        if np.unique(betas).size != betas.size:
            raise GeometryError("mode propagation constants must be distinct")
        if kappa.shape[1] != betas.size:
            raise GeometryError(
                f"kappa has {kappa.shape[1]} columns but there are {betas.size} modes"
            )
        if np.any(kappa < 0) or not np.all(np.isfinite(kappa)):
            raise GeometryError("coupling strengths kappa must be nonnegative")
        if not self.pa_length > 0:
            raise GeometryError("pa_length must be positive")
        if not self.x_min < self.x_max:
            raise GeometryError("x_min must be smaller than x_max")
        if not self.d_min > 0:
            raise GeometryError("d_min must be positive")
        if not self.pa_height > 0 or not self.carrier_freq > 0:
            raise GeometryError("pa_height and carrier_freq must be positive")
        n = kappa.shape[0]
        if (n - 1) * self.d_min > self.x_max - self.x_min + 1e-12:
            raise GeometryError(
                f"{n} PAs with d_min={self.d_min} do not fit in "
                f"[{self.x_min}, {self.x_max}]"
            )

    @property
    def n_pas(self) -> int:
        return self.kappa.shape[0]

    @property
    def n_modes(self) -> int:
        return self.mode_betas.size

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass
class PaConfiguration:
    """Per-PA decision variables: positions (m) and propagation constants (rad/m)."""

    positions: np.ndarray
    beta_pa: np.ndarray
    selector: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).ravel()
        self.beta_pa = np.asarray(self.beta_pa, dtype=float).ravel()
        if self.positions.shape != self.beta_pa.shape:
            raise GeometryError("positions and beta_pa must have the same length")

    def check_feasible(self, spec: WaveguideSpec, tol: float = 1e-9) -> None:
        x = self.positions
        if x.size != spec.n_pas:
            raise GeometryError(f"expected {spec.n_pas} positions, got {x.size}")
        if np.any(x < spec.x_min - tol) or np.any(x > spec.x_max + tol):
            raise GeometryError("PA position outside the waveguide")
        if np.any(np.diff(x) < spec.d_min - tol):
            raise GeometryError("PA positions unsorted or closer than d_min")

    def sorted(self) -> "PaConfiguration":
        order = np.argsort(self.positions, kind="stable")
        sel = None if self.selector is None else np.asarray(self.selector)[order]
        return PaConfiguration(self.positions[order], self.beta_pa[order], sel)


def coupling_coefficient(kappa, delta_beta, pa_length):
    """Complex field coupling between a PA of length ``pa_length`` and one mode.

    eta = (kappa/phi) sin(phi L) exp(-j L delta_beta / 2),
    phi = sqrt(kappa^2 + (delta_beta/2)^2).

    Broadcasts over array inputs. ``kappa == 0`` yields exactly 0, including the
    removable singularity at ``kappa == delta_beta == 0``.
    """
    kappa = np.asarray(kappa, dtype=float)
    delta_beta = np.asarray(delta_beta, dtype=float)
    if np.any(kappa < 0):
        raise ValueError("kappa must be nonnegative")
    if not pa_length > 0:
        raise ValueError("pa_length must be positive")
    phi = np.hypot(kappa, 0.5 * delta_beta)
    safe_phi = np.where(phi > 0, phi, 1.0)
    mag = np.where(phi > 0, kappa / safe_phi * np.sin(phi * pa_length), 0.0)
    eta = mag * np.exp(-0.5j * pa_length * delta_beta)
    if eta.ndim == 0:
        return complex(eta)
    return eta


def coupling_matrix(spec: WaveguideSpec, beta_pa) -> np.ndarray:
    """(N, M) matrix of coupling coefficients for the given PA constants."""
    beta_pa = np.asarray(beta_pa, dtype=float)
    delta = beta_pa[:, None] - spec.mode_betas[None, :]
    return np.asarray(coupling_coefficient(spec.kappa, delta, spec.pa_length))


def cascaded_gain_matrix(spec: WaveguideSpec, config: PaConfiguration) -> np.ndarray:
    """In-waveguide gain ``G`` (N x M) from each feed to each PA.

    Row ``n`` is the PA with the ``n``-th smallest position; every PA sees the
    mode power left over by the ones upstream of it.
    """
    config.check_feasible(spec)
    eta = coupling_matrix(spec, config.beta_pa)
    residual = np.sqrt(np.clip(1.0 - np.abs(eta) ** 2, 0.0, None))
    upstream = np.ones_like(residual)
    upstream[1:] = np.cumprod(residual[:-1], axis=0)
    phase = np.exp(-1j * np.outer(config.positions, spec.mode_betas))
    return eta * phase * upstream


def radiated_power_profile(spec: WaveguideSpec, config: PaConfiguration) -> np.ndarray:
    """Fraction of each mode's injected power radiated at each PA, ``|g_nm|^2``."""
    return np.abs(cascaded_gain_matrix(spec, config)) ** 2


def residual_power(spec: WaveguideSpec, config: PaConfiguration) -> np.ndarray:
    """Per-mode power fraction left in the waveguide past the last PA."""
    eta = coupling_matrix(spec, config.beta_pa)
    return np.prod(1.0 - np.abs(eta) ** 2, axis=0)
