"""Free-space line-of-sight user channels and the mode-domain effective channel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .waveguide import PaConfiguration, WaveguideSpec, cascaded_gain_matrix


@dataclass(frozen=True)
class UserLayout:
    """K ground users, one ``(x, y, 0)`` row each, in meters."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[1] == 2:
            pos = np.hstack([pos, np.zeros((pos.shape[0], 1))])
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("user positions must be a (K, 2) or (K, 3) array")
        if np.any(pos[:, 2] != 0.0):
            raise ValueError("users must lie on the ground plane (z = 0)")
        object.__setattr__(self, "positions", pos)

    @property
    def n_users(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def random(cls, n_users: int, x_range, y_range=(-5.0, 5.0), seed: int = 0):
        rng = np.random.default_rng(seed)
        ux = rng.uniform(x_range[0], x_range[1], n_users)
        uy = rng.uniform(y_range[0], y_range[1], n_users)
        return cls(np.column_stack([ux, uy, np.zeros(n_users)]))


@dataclass(frozen=True)
class EffectiveChannel:
    """``G`` (N x M), user channels ``h`` (K x N) and ``H_eff`` (K x M).

    Row ``k`` of ``H_eff`` is ``(G^H h_k)^H``, so ``H_eff @ w`` gives the
    noiseless received amplitudes for a mode-domain beam ``w``.
    """

    G: np.ndarray
    h: np.ndarray
    H_eff: np.ndarray


def pa_user_distances(spec: WaveguideSpec, positions, users) -> np.ndarray:
    """(K, N) distances from each PA at height ``pa_height`` to each user."""
    x = np.asarray(positions, dtype=float)
    u = np.atleast_2d(np.asarray(users, dtype=float))
    dx = x[None, :] - u[:, 0:1]
    dy = u[:, 1:2]
    dz = spec.pa_height - (u[:, 2:3] if u.shape[1] > 2 else 0.0)
    return np.sqrt(dx**2 + dy**2 + dz**2)


def los_channel(spec: WaveguideSpec, config: PaConfiguration, user) -> np.ndarray:
    """Spherical-wave LoS vector from the N PAs to one user."""
    dist = pa_user_distances(spec, config.positions, np.asarray(user, dtype=float))[0]
    if np.any(dist <= 0.0):
        raise ZeroDivisionError("user coincides with a PA position")
    lam = spec.wavelength
    return lam / (4.0 * math.pi) * np.exp(-1j * spec.wavenumber * dist) / dist


def effective_channel(G, user_channels) -> EffectiveChannel:
    """Combine the in-waveguide gains with the K user channels."""
    G = np.asarray(G, dtype=complex)
    h = np.atleast_2d(np.asarray(user_channels, dtype=complex))
    if G.ndim != 2 or h.shape[1] != G.shape[0]:
        raise ValueError(
            f"G is {G.shape} but user channels have length {h.shape[1]}"
        )
    # row k: (G^H h_k)^H = h_k^H G
    H_eff = h.conj() @ G
    return EffectiveChannel(G=G, h=h, H_eff=H_eff)


def build_effective_channel(
    spec: WaveguideSpec, config: PaConfiguration, users: UserLayout
) -> EffectiveChannel:
    G = cascaded_gain_matrix(spec, config)
    h = np.array([los_channel(spec, config, u) for u in users.positions])
    return effective_channel(G, h)
