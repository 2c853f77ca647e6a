import cmath
import math

import numpy as np
import pytest

from mmpass.channel import (
    UserLayout,
    build_effective_channel,
    effective_channel,
    los_channel,
)
from mmpass.waveguide import PaConfiguration, WaveguideSpec, cascaded_gain_matrix

C = 299_792_458.0


@pytest.fixture
def spec():
    return WaveguideSpec([1009.2378, 645.7996], np.full((4, 2), 150.0), 0.006, 0.0, 20.0, 0.01)


def los_oracle(x, h_pa, user, freq):
    lam = C / freq
    k0 = 2 * math.pi * freq / C
    out = []
    for xn in x:
        r = math.sqrt((xn - user[0]) ** 2 + user[1] ** 2 + h_pa**2)
        out.append(lam / (4 * math.pi) * cmath.exp(-1j * k0 * r) / r)
    return np.array(out)


def test_user_directly_below_pa(spec):
    cfg = PaConfiguration([2.0, 5.0, 8.0, 11.0], [1000.0] * 4)
    h = los_channel(spec, cfg, (5.0, 0.0, 0.0))
    assert abs(h[1]) == pytest.approx(spec.wavelength / (4 * math.pi * 3.0), rel=1e-14)


def test_equidistant_users_match(spec):
    cfg = PaConfiguration([2.0, 5.0, 8.0, 11.0], [1000.0] * 4)
    a = los_channel(spec, cfg, (5.0, 2.0, 0.0))
    b = los_channel(spec, cfg, (5.0, -2.0, 0.0))
    np.testing.assert_array_equal(a, b)


def test_los_matches_scalar_oracle(spec):
    cfg = PaConfiguration([0.3, 4.1, 9.7, 15.2], [1000.0] * 4)
    user = (7.3, -2.4, 0.0)
    np.testing.assert_allclose(
        los_channel(spec, cfg, user), los_oracle(cfg.positions, 3.0, user, 28e9), rtol=1e-12
    )


def test_los_magnitude_decays(spec):
    cfg = PaConfiguration([1.0, 2.0, 3.0, 4.0], [1000.0] * 4)
    mags = np.abs(los_channel(spec, cfg, (0.0, 0.0, 0.0)))
    assert np.all(np.diff(mags) < 0)


def test_coincident_user_rejected(spec):
    cfg = PaConfiguration([2.0, 5.0, 8.0, 11.0], [1000.0] * 4)
    # pa_height > 0 keeps PAs off the ground plane; force a zero-height spec
    object.__setattr__(spec, "pa_height", 0.0)
    with pytest.raises(ZeroDivisionError):
        los_channel(spec, cfg, (5.0, 0.0, 0.0))


def test_effective_channel_zero_gain():
    eff = effective_channel(np.zeros((3, 2)), np.ones((2, 3)))
    assert np.all(eff.H_eff == 0)


def test_effective_channel_scalar():
    g, h = 0.3 - 0.4j, 1e-4 * (0.6 + 0.8j)
    eff = effective_channel([[g]], [[h]])
    assert eff.H_eff[0, 0] == pytest.approx((np.conj(g) * h).conjugate(), abs=1e-20)
    # h_eff = conj(g) h, stored as its conjugate
    assert np.conj(eff.H_eff[0, 0]) == pytest.approx(np.conj(g) * h, abs=1e-20)


def test_effective_channel_triple_loop():
    rng = np.random.default_rng(3)
    N, M, K = 4, 2, 2
    G = rng.normal(size=(N, M)) + 1j * rng.normal(size=(N, M))
    h = rng.normal(size=(K, N)) + 1j * rng.normal(size=(K, N))
    H = effective_channel(G, h).H_eff
    for k in range(K):
        for m in range(M):
            heff_km = 0j  # (G^H h_k)[m]
            for n in range(N):
                heff_km += np.conj(G[n, m]) * h[k, n]
            assert H[k, m] == pytest.approx(np.conj(heff_km), abs=1e-12)


def test_effective_channel_dimension_mismatch():
    with pytest.raises(ValueError):
        effective_channel(np.ones((3, 2)), np.ones((2, 4)))


def test_conjugation_consistency(spec):
    rng = np.random.default_rng(11)
    cfg = PaConfiguration([0.7, 5.2, 12.9, 18.4], rng.uniform(600, 1100, 4))
    users = UserLayout.random(2, (0, 20), seed=4)
    eff = build_effective_channel(spec, cfg, users)
    for _ in range(10):
        w = rng.normal(size=2) + 1j * rng.normal(size=2)
        w /= np.linalg.norm(w)
        for k in range(2):
            direct = eff.h[k].conj() @ eff.G @ w
            assert eff.H_eff[k] @ w == pytest.approx(direct, rel=1e-12, abs=1e-25)


def test_triangle_bound(spec):
    cfg = PaConfiguration([1.0, 6.0, 11.0, 16.0], [900.0, 700.0, 1000.0, 650.0])
    users = UserLayout([[3.0, 1.0], [12.0, -2.0]])
    eff = build_effective_channel(spec, cfg, users)
    bound = np.abs(eff.h) @ np.abs(eff.G)
    assert np.all(np.abs(eff.H_eff) <= bound * (1 + 1e-12))


def test_translation_leaves_distances(spec):
    cfg = PaConfiguration([1.0, 6.0, 11.0, 16.0], [900.0] * 4)
    moved = PaConfiguration(cfg.positions + 2.5, cfg.beta_pa)
    user = np.array([3.0, 1.0, 0.0])
    a = los_channel(spec, cfg, user)
    b = los_channel(spec, moved, user + [2.5, 0, 0])
    np.testing.assert_allclose(np.abs(a), np.abs(b), rtol=1e-12)
    np.testing.assert_allclose(a, b, rtol=1e-9)
    Ga = cascaded_gain_matrix(spec, cfg)
    Gb = cascaded_gain_matrix(spec, moved)
    np.testing.assert_allclose(np.abs(Ga), np.abs(Gb), rtol=1e-12)


def test_user_layout_validation():
    with pytest.raises(ValueError):
        UserLayout([[1.0, 2.0, 3.0]])
    lay = UserLayout.random(3, (0, 20), seed=1)
    assert lay.n_users == 3
    assert np.all((lay.positions[:, 1] >= -5) & (lay.positions[:, 1] <= 5))
