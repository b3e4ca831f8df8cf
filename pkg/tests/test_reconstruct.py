import warnings

import numpy as np
import pytest

from gwpt_uq.observables import gamma_norm
from gwpt_uq.packet import PacketParams, heller_closed_form, integrate_packets
from gwpt_uq.potentials import Potential
from gwpt_uq.quadrature import build_grid
from gwpt_uq.reconstruct import (XGrid, heller_exact, normalization, reconstruct_psi,
                                 upsample_periodic)
from gwpt_uq.reference import gaussian_initial
from gwpt_uq.wprop import EtaGrid, propagate_w, w_initial

HARMONIC = Potential("harmonic", 1.0, (0.95,))


def initial_state(eps, q0=np.pi / 2, p0=0.3, n=1):
    A = normalization(eps)
    s = PacketParams.initial(q0, p0, 1j, n=n)
    return A, s, w_initial(A, EtaGrid(), n)


class TestNormalization:
    @pytest.mark.parametrize("eps", [1 / 32, 1 / 256])
    def test_unit_mass(self, eps):
        g = XGrid(n=4096)
        psi = gaussian_initial(g, 0.2, 0.0, 1j, eps, normalization(eps), periodic=True)
        assert psi.mass()[0] == pytest.approx(1.0, abs=1e-12)

    def test_width_dependence(self):
        assert normalization(0.1, 2j) == pytest.approx((4 / (np.pi * 0.1)) ** 0.25)


class TestUpsample:
    def test_trigonometric_polynomial_exact(self):
        n, f = 32, 4
        x = 2 * np.pi * np.arange(n) / n
        xf = 2 * np.pi * np.arange(n * f) / (n * f)
        # includes a cosine at the Nyquist frequency, which must be split evenly
        g = lambda t: np.exp(3j * t) + 0.5 * np.cos(7 * t) + 0.3 * np.cos(16 * t)
        out = upsample_periodic(g(x)[None, :], f)[0]
        np.testing.assert_allclose(out, g(xf), atol=1e-13)

    def test_factor_one(self):
        a = np.arange(8.0)[None, :]
        assert upsample_periodic(a, 1) is a


class TestRoundTrip:
    @pytest.mark.parametrize("eps", [1 / 32, 1 / 256])
    def test_initial_data(self, eps):
        A, s, w = initial_state(eps)
        g = XGrid(n=9600)
        psi = reconstruct_psi(w, s, g, eps)
        ref = gaussian_initial(g, s.q, s.p, 1j, eps, A)
        assert np.abs(psi.values - ref.values).max() <= 1e-8 * A
        assert psi.mass()[0] == pytest.approx(1.0, abs=1e-8)

    def test_modulus_only(self):
        A, s, w = initial_state(1 / 64)
        g = XGrid(n=2048)
        full = reconstruct_psi(w, s, g, 1 / 64)
        mod = reconstruct_psi(w, s, g, 1 / 64, modulus_only=True)
        np.testing.assert_allclose(np.abs(mod.values), np.abs(full.values), atol=1e-13)

    def test_node_count_mismatch(self):
        A, s, w = initial_state(1 / 64, n=2)
        with pytest.raises(ValueError, match="node counts"):
            reconstruct_psi(w, s.take(0), XGrid(n=256), 1 / 64)

    def test_requires_positive_width(self):
        A, s, w = initial_state(1 / 64)
        s.alpha = np.array([0.1 - 0.1j])
        with pytest.raises(ValueError, match="Im"):
            reconstruct_psi(w, s, XGrid(n=256), 1 / 64)

    def test_support_warning(self):
        eps = 1 / 64
        A, s, w = initial_state(eps, q0=3.0)
        with pytest.warns(RuntimeWarning, match="outside the x domain"):
            reconstruct_psi(w, s, XGrid(n=1024), eps, periodic=False)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            reconstruct_psi(w, s, XGrid(n=1024), eps, periodic=True)

    def test_periodic_wrap(self):
        eps = 1 / 64
        A, s, w = initial_state(eps, q0=3.0)
        g = XGrid(n=2048)
        psi = reconstruct_psi(w, s, g, eps, periodic=True)
        assert psi.mass()[0] == pytest.approx(1.0, abs=1e-8)
        assert np.abs(psi.values[0, 0]) > 1e-3 * np.abs(psi.values).max()


class TestHeller:
    def test_initial_time_is_initial_gaussian(self):
        eps = 1 / 64
        s = heller_closed_form(HARMONIC, np.ones(1), eps, np.pi / 2, 0.3, 1j, 0.0)
        g = XGrid(n=2048)
        ex = heller_exact(s, g, eps, normalization(eps))
        ref = gaussian_initial(g, np.pi / 2, 0.3, 1j, eps, normalization(eps), periodic=False)
        np.testing.assert_allclose(ex.values, ref.values, atol=1e-14)

    def test_half_period_mirror(self):
        V = Potential("harmonic")
        eps = 1 / 64
        T = np.pi / np.sqrt(2.0)
        s = heller_closed_form(V, np.ones(1), eps, np.pi / 2, 0.0, 1j, T)
        assert s.q[0] == pytest.approx(-np.pi / 2, abs=1e-12)
        assert s.p[0] == pytest.approx(0.0, abs=1e-12)
        assert s.alpha[0] == pytest.approx(1j, abs=1e-12)
        g = XGrid(-np.pi, np.pi, 2048)
        psi = np.abs(heller_exact(s, g, eps, normalization(eps)).values[0])
        psi0 = np.abs(gaussian_initial(g, np.pi / 2, 0.0, 1j, eps, normalization(eps),
                                       periodic=False).values[0])
        # x -> -x maps grid index i to n - i
        np.testing.assert_allclose(psi[1:], psi0[:0:-1], atol=1e-10)

    def test_gamma_norm_is_one(self):
        eps = 1 / 128
        grid = build_grid("uniform", 12)
        amp = HARMONIC.amplitude(grid.nodes)
        s = heller_closed_form(HARMONIC, amp, eps, np.pi / 2, 0.0, 1j, 1.0)
        psi = heller_exact(s, XGrid(n=4096), eps, normalization(eps))
        assert gamma_norm(psi, grid) == pytest.approx(1.0, abs=1e-8)

    def test_refuses_non_quadratic(self):
        s = PacketParams.initial(0.0, 0.0, 1j, n=1)
        with pytest.raises(ValueError, match="quadratic"):
            heller_exact(s, XGrid(n=64), 0.1, V=Potential("cosine"))

    @pytest.mark.parametrize("delta", [1e-6, 3e-4])
    def test_phase_sensitivity(self, delta):
        eps = 1 / 64
        s = heller_closed_form(HARMONIC, np.ones(1), eps, np.pi / 2, 0.0, 1j, 0.5)
        g = XGrid(n=2048)
        a = heller_exact(s, g, eps).values
        s.gamma = s.gamma + delta
        b = heller_exact(s, g, eps).values
        rel = np.linalg.norm(b - a) / np.linalg.norm(a)
        assert rel == pytest.approx(abs(np.exp(1j * delta / eps) - 1), rel=1e-8)

    @pytest.mark.parametrize("eps", [1 / 32, 1 / 256])
    def test_gwpt_matches_heller(self, eps):
        grid = build_grid("uniform", 4)
        amp = HARMONIC.amplitude(grid.nodes)
        dt_w, dt_ode = 1.25e-3, 2.5e-4 / 2
        ic = PacketParams.initial(np.pi / 2, 0.0, 1j, n=4)
        tr = integrate_packets(HARMONIC, grid.nodes, eps, ic, dt_ode, 1.0, record_every=5)
        A = normalization(eps)
        w, _ = propagate_w(w_initial(A, EtaGrid(), 4), tr, HARMONIC, amp, eps, dt_w, 1.0)
        g = XGrid(n=9600)
        psi = reconstruct_psi(w, tr.at(1.0), g, eps, periodic=False)
        ex = heller_exact(heller_closed_form(HARMONIC, amp, eps, np.pi / 2, 0.0, 1j, 1.0), g,
                          eps, A)
        err = np.linalg.norm(psi.values - ex.values, axis=1) / np.linalg.norm(ex.values, axis=1)
        assert err.max() <= 1e-6
        np.testing.assert_allclose(psi.mass(), 1.0, atol=1e-8)
