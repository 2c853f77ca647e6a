import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmpass.waveguide import (
    GeometryError,
    PaConfiguration,
    WaveguideSpec,
    cascaded_gain_matrix,
    coupling_coefficient,
    radiated_power_profile,
    residual_power,
)

BETA1, BETA2 = 1009.2378, 645.7996
L_PA = 0.006


def make_spec(n=3, kappa=150.0, betas=(BETA1, BETA2), x_max=20.0, d_min=0.01):
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (n, len(betas)))
    return WaveguideSpec(betas, kappa, L_PA, 0.0, x_max, d_min)


def eta_scalar(kappa, delta, length):
    """Straight-line scalar evaluation of the coupling formula."""
    phi = math.sqrt(kappa * kappa + (delta / 2.0) ** 2)
    if kappa == 0.0 or phi == 0.0:
        return 0j
    return kappa / phi * math.sin(phi * length) * cmath.exp(-1j * length * delta / 2.0)


def gain_oracle(spec, x, beta_pa):
    """Per-entry cascade with the residual product accumulated in its own loop."""
    n_pa, n_mode = spec.kappa.shape
    G = np.zeros((n_pa, n_mode), dtype=complex)
    for m in range(n_mode):
        for n in range(n_pa):
            eta_n = eta_scalar(spec.kappa[n, m], beta_pa[n] - spec.mode_betas[m], spec.pa_length)
            upstream = 1.0
            for i in range(n):
                eta_i = eta_scalar(spec.kappa[i, m], beta_pa[i] - spec.mode_betas[m], spec.pa_length)
                upstream *= math.sqrt(1.0 - abs(eta_i) ** 2)
            G[n, m] = eta_n * cmath.exp(-1j * spec.mode_betas[m] * x[n]) * upstream
    return G


class TestCouplingCoefficient:
    def test_zero_overlap_is_zero(self):
        assert coupling_coefficient(0.0, 123.0, L_PA) == 0
        assert coupling_coefficient(0.0, 0.0, L_PA) == 0

    def test_matched_case(self):
        # mpmath at 40 digits
        eta = coupling_coefficient(150.0, 0.0, L_PA)
        assert abs(eta) == pytest.approx(0.7833269096274834, rel=1e-14)
        assert abs(eta) == pytest.approx(abs(math.sin(150.0 * L_PA)), rel=1e-14)

    def test_mismatched_between_default_modes(self):
        delta = BETA1 - BETA2
        assert delta == pytest.approx(363.4382, abs=1e-9)
        eta = coupling_coefficient(150.0, delta, L_PA)
        assert abs(eta) == pytest.approx(0.6287586044837474, rel=1e-12)
        assert abs(eta) < abs(math.sin(0.9))
        assert cmath.phase(eta) == pytest.approx(-delta * L_PA / 2, abs=1e-12)

    def test_broadcasts(self):
        out = coupling_coefficient(np.array([0.0, 150.0]), np.array([0.0, 0.0]), L_PA)
        assert out.shape == (2,)
        assert out[0] == 0

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            coupling_coefficient(-1.0, 0.0, L_PA)
        with pytest.raises(ValueError):
            coupling_coefficient(1.0, 0.0, 0.0)

    @given(
        st.floats(0, 1e4, allow_nan=False),
        st.floats(-1e4, 1e4, allow_nan=False),
        st.floats(1e-5, 0.1),
    )
    def test_magnitude_bounded_and_phase(self, kappa, delta, length):
        eta = coupling_coefficient(kappa, delta, length)
        assert abs(eta) <= 1.0 + 1e-15
        assert eta == pytest.approx(eta_scalar(kappa, delta, length), abs=1e-12)
        if abs(eta) > 1e-9:
            # arg(eta) = -L delta / 2 modulo pi
            r = (cmath.phase(eta) + length * delta / 2) / math.pi
            assert abs(r - round(r)) < 1e-6

    @given(st.floats(1.0, 261.0), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_first_lobe(self, kappa, f1, f2):
        length = L_PA
        assert kappa * length <= math.pi / 2
        # sin(y)/y decreases on (0, pi): stay inside phi L <= pi
        d_edge = 2.0 * math.sqrt((math.pi / length) ** 2 - kappa**2)
        a, b = sorted((f1 * d_edge, f2 * d_edge))
        for sign in (1, -1):
            assert abs(coupling_coefficient(kappa, sign * a, length)) >= abs(
                coupling_coefficient(kappa, sign * b, length)
            ) - 1e-12


class TestCascade:
    def test_single_pa(self):
        spec = make_spec(n=1)
        cfg = PaConfiguration([4.2], [BETA1])
        G = cascaded_gain_matrix(spec, cfg)
        for m, beta in enumerate(spec.mode_betas):
            eta = eta_scalar(150.0, BETA1 - beta, L_PA)
            assert G[0, m] == pytest.approx(eta * cmath.exp(-1j * beta * 4.2), abs=1e-14)

    def test_zero_kappa_gives_zero_matrix(self):
        spec = make_spec(n=4, kappa=0.0)
        cfg = PaConfiguration([1, 2, 3, 4], [BETA1] * 4)
        assert np.all(cascaded_gain_matrix(spec, cfg) == 0)
        assert np.all(radiated_power_profile(spec, cfg) == 0)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(7)
        kappa = rng.uniform(20, 300, (3, 2))
        spec = make_spec(n=3, kappa=kappa)
        x = np.sort(rng.uniform(0, 20, 3))
        beta_pa = rng.uniform(600, 1100, 3)
        G = cascaded_gain_matrix(spec, PaConfiguration(x, beta_pa))
        np.testing.assert_allclose(G, gain_oracle(spec, x, beta_pa), rtol=0, atol=1e-12)

    def test_matched_single_pa_profile(self):
        spec = make_spec(n=1)
        prof = radiated_power_profile(spec, PaConfiguration([3.0], [BETA1]))
        assert prof[0, 0] == pytest.approx(math.sin(0.9) ** 2, rel=1e-14)

    def test_infeasible_configuration_rejected(self):
        spec = make_spec(n=2)
        with pytest.raises(GeometryError):
            cascaded_gain_matrix(spec, PaConfiguration([5.0, 5.001], [BETA1, BETA1]))
        with pytest.raises(GeometryError):
            cascaded_gain_matrix(spec, PaConfiguration([6.0, 5.0], [BETA1, BETA1]))

    def test_sorting_then_evaluating(self):
        spec = make_spec(n=3)
        cfg = PaConfiguration([9.0, 1.0, 5.0], [700.0, 1000.0, 800.0])
        s = cfg.sorted()
        np.testing.assert_array_equal(s.positions, [1.0, 5.0, 9.0])
        np.testing.assert_array_equal(s.beta_pa, [1000.0, 800.0, 700.0])
        G = cascaded_gain_matrix(spec, s)
        np.testing.assert_allclose(G, gain_oracle(spec, s.positions, s.beta_pa), atol=1e-12)

    @settings(max_examples=200)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 4))
    def test_power_conservation(self, seed, n, m):
        rng = np.random.default_rng(seed)
        betas = np.sort(rng.uniform(300, 1500, m))
        if np.unique(betas).size < m:
            return
        spec = WaveguideSpec(betas, rng.uniform(0, 600, (n, m)), L_PA, 0.0, 20.0, 0.01)
        x = np.linspace(0, 19.0, n) + rng.uniform(0, 0.5)
        cfg = PaConfiguration(x, rng.uniform(300, 1500, n))
        prof = radiated_power_profile(spec, cfg)
        col = prof.sum(axis=0)
        assert np.all(prof >= 0) and np.all(prof <= 1)
        np.testing.assert_allclose(col + residual_power(spec, cfg), 1.0, rtol=1e-12)


class TestSpecValidation:
    def test_rejects_duplicate_modes(self):
        with pytest.raises(GeometryError):
            WaveguideSpec([500.0, 500.0], np.ones((2, 2)), L_PA, 0, 1, 0.01)

    def test_rejects_infeasible_spacing(self):
        with pytest.raises(GeometryError):
            WaveguideSpec([500.0], np.ones((11, 1)), L_PA, 0, 1, 0.11)

    def test_rejects_negative_kappa(self):
        with pytest.raises(GeometryError):
            WaveguideSpec([500.0], -np.ones((1, 1)), L_PA, 0, 1, 0.1)

    def test_wavelength(self):
        spec = make_spec()
        assert spec.wavelength == pytest.approx(299_792_458.0 / 28e9)
        assert spec.wavenumber == pytest.approx(2 * math.pi * 28e9 / 299_792_458.0)
