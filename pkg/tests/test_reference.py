import numpy as np
import pytest

from gwpt_uq.packet import heller_closed_form
from gwpt_uq.potentials import Potential
from gwpt_uq.reconstruct import WaveField, XGrid, heller_exact, normalization
from gwpt_uq.reference import ds_solve, ds_step, gaussian_initial

FREE = Potential("free")
COS = Potential("cosine", 1.0, (0.9,))


def gaussian(eps, n_x=1024, n=1, q0=np.pi / 2, p0=0.0):
    g = XGrid(n=n_x)
    return gaussian_initial(g, np.full(n, q0), p0, 1j, eps, normalization(eps))


class TestStep:
    def test_plane_wave(self):
        eps, m = 0.1, 3
        g = XGrid(n=128)
        x = g.points
        psi = WaveField(g, np.exp(1j * m * x)[None, :], 0.0, eps)
        dt = 0.37
        out = ds_step(psi, FREE, np.ones(1), eps, dt)
        exact = np.exp(1j * m * x - 0.5j * eps * m ** 2 * dt)
        assert np.abs(out.values[0] - exact).max() <= 1e-12

    def test_mass_per_step(self):
        psi = gaussian(1 / 64)
        out = ds_step(psi, COS, np.array([1.4]), 1 / 64, 1 / 600)
        assert abs(out.mass()[0] - psi.mass()[0]) <= 1e-12

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            ds_step(gaussian(0.1), FREE, np.ones(1), 0.1, 0.0)


class TestSolve:
    def test_matches_step_chain(self):
        eps = 1 / 32
        psi = gaussian(eps, n=2)
        amp = np.array([0.5, 1.5])
        f, _ = ds_solve(psi, COS, amp, eps, 0.01, 0.05)
        s = psi
        for _ in range(5):
            s = ds_step(s, COS, amp, eps, 0.01)
        np.testing.assert_allclose(f.values, s.values, atol=1e-13)
        assert f.time == pytest.approx(0.05)

    def test_constant_in_z(self):
        eps = 1 / 32
        f, _ = ds_solve(gaussian(eps, n=3), COS, np.ones(3), eps, 0.01, 0.2)
        assert np.all(f.values == f.values[:1])

    def test_chunking_does_not_change_results(self):
        eps = 1 / 32
        psi = gaussian(eps, n=5)
        amp = np.linspace(0.2, 1.8, 5)
        a, _ = ds_solve(psi, COS, amp, eps, 0.01, 0.1, chunk=2)
        b, _ = ds_solve(psi, COS, amp, eps, 0.01, 0.1, chunk=64)
        np.testing.assert_array_equal(a.values, b.values)

    def test_mass_conserved(self):
        eps = 1 / 64
        psi = gaussian(eps, n_x=2048, n=3)
        f, _ = ds_solve(psi, COS, np.array([0.1, 1.0, 1.9]), eps, 1 / 600, 1.0)
        np.testing.assert_allclose(f.mass(), psi.mass(), atol=1e-10)

    def test_snapshots(self):
        eps = 1 / 32
        psi = gaussian(eps)
        f, snaps = ds_solve(psi, COS, np.ones(1), eps, 0.01, 0.1, output_times=[0.0, 0.05, 0.1])
        assert sorted(snaps) == pytest.approx([0.0, 0.05, 0.1])
        np.testing.assert_array_equal(snaps[0.0].values, psi.values)
        np.testing.assert_allclose(snaps[0.1].values, f.values, atol=1e-15)
        g, _ = ds_solve(psi, COS, np.ones(1), eps, 0.01, 0.05)
        np.testing.assert_allclose(snaps[0.05].values, g.values, atol=1e-13)

    def test_rejects_bad_inputs(self):
        psi = gaussian(0.1)
        with pytest.raises(ValueError, match="divide"):
            ds_solve(psi, COS, np.ones(1), 0.1, 0.3, 1.0)
        with pytest.raises(ValueError, match="amplitude"):
            ds_solve(psi, COS, np.ones(2), 0.1, 0.1, 1.0)

    def test_second_order_in_time(self):
        eps = 1 / 32
        psi = gaussian(eps)
        ref, _ = ds_solve(psi, COS, np.ones(1), eps, 1 / 1600, 0.5)
        errs = [np.linalg.norm(ds_solve(psi, COS, np.ones(1), eps, dt, 0.5)[0].values - ref.values)
                for dt in (1 / 100, 1 / 200)]
        assert 3.8 < errs[0] / errs[1] < 4.2


class TestHellerOracle:
    eps = 1 / 128

    def error(self, N):
        V = Potential("harmonic")
        g = XGrid(n=2048)
        A = normalization(self.eps)
        ex = heller_exact(heller_closed_form(V, np.ones(1), self.eps, np.pi / 2, 0.0, 1j, 1.0),
                          g, self.eps, A)
        psi0 = gaussian_initial(g, np.pi / 2, 0.0, 1j, self.eps, A, periodic=False)
        f, _ = ds_solve(psi0, V, np.ones(1), self.eps, 1 / N, 1.0)
        return np.linalg.norm(f.values - ex.values) / np.linalg.norm(ex.values)

    def test_converges_at_second_order(self):
        e1, e2 = self.error(600), self.error(1200)
        assert 3.8 < e1 / e2 < 4.2

    def test_fine_step_reaches_tolerance(self):
        # Strang error at dt = 1/600 is about 5e-5 here; 1/12800 brings it below 1e-6
        assert self.error(12800) <= 1e-6
