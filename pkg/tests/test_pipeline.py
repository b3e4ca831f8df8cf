import numpy as np
import pytest

from gwpt_uq import builtin_config
from gwpt_uq import pipeline as P
from gwpt_uq.config import PotentialSpec


@pytest.fixture(scope="module")
def tiny():
    return builtin_config("a1ii", 1 / 32, nz1=8, nz2=4, nz3=8, nz4=8, n_x=512, T=0.2,
                          ds_dt=0.2 / 120)


class TestStages:
    def test_stage_wraps_and_times(self):
        timings = {}
        with pytest.raises(P.StageError) as info:
            with P.stage("wprop", timings):
                raise FloatingPointError("boom")
        assert info.value.stage == "wprop"
        assert isinstance(info.value.cause, FloatingPointError)
        assert "[wprop] boom" in str(info.value)
        assert timings["wprop"] >= 0

    def test_inner_tag_wins(self):
        with pytest.raises(P.StageError) as info:
            with P.stage("stats", {}):
                with P.stage("ode", {}):
                    raise ValueError("x")
        assert info.value.stage == "ode"

    def test_stage_names(self):
        assert P.STAGES == ("ode", "wprop", "reconstruct", "reference", "stats", "classical",
                            "output")

    def test_failure_in_reconstruct_is_tagged(self, tiny, monkeypatch):
        def broken(*a, **k):
            raise RuntimeError("spline failed")
        monkeypatch.setattr(P, "reconstruct_psi", broken)
        with pytest.raises(P.StageError) as info:
            P.run_gwpt(tiny)
        assert info.value.stage == "reconstruct"


class TestRuns:
    def test_single_node(self, tiny):
        cfg = tiny.replace(nz1=1, nz2=1, nz3=1)
        gw = P.run_gwpt(cfg)
        psi = gw.psi[cfg.T]
        assert psi.values.shape == (1, cfg.n_x)
        assert np.all(np.isfinite(psi.values))

    def test_constant_in_z_matches_deterministic(self, tiny):
        cfg = tiny.replace(potential=PotentialSpec("cosine", 1.0, (0.0,)))
        psi = P.run_gwpt(cfg).psi[cfg.T].values
        np.testing.assert_allclose(psi, np.broadcast_to(psi[0], psi.shape), atol=1e-12)

    def test_mass_conserved(self, tiny):
        cfg = tiny.replace(nz2=8)
        gw = P.run_gwpt(cfg)
        m = gw.psi[cfg.T].mass()
        np.testing.assert_allclose(m, m.mean(), rtol=1e-6)

    def test_output_times(self, tiny):
        gw = P.run_gwpt(tiny, output_times=[0.1, 0.2])
        assert sorted(gw.psi) == [0.1, 0.2]

    def test_comparison_row(self, tiny):
        rows = P.run_comparison(tiny)
        assert len(rows) == 1
        r = rows[0]
        assert r.eps == tiny.eps and r.nz2 == 4 and r.T == tiny.T
        assert 0 < r.er_psi < 0.1
        assert set(r.as_dict()) == {"eps", "Nz2", "T", "Er_psi", "Er1_j", "Er2_j"}
        assert "wall_ds_s" in r.as_dict(with_timing=True)

    def test_self_compare_zero(self, tiny):
        gw = P.run_gwpt(tiny)
        r = P.self_compare(gw, gw)
        assert r.er_psi == 0 and r.er1_j == 0 and r.er2_j == 0

    def test_nz2_sweep_never_runs_reference(self, tiny, monkeypatch):
        def forbidden(*a, **k):
            raise AssertionError("reference called")
        monkeypatch.setattr(P, "run_reference", forbidden)
        rows = P.run_comparison(tiny, "nz2", [2, 4])
        assert [r.nz2 for r in rows] == [2, 4]
        assert rows[0].er_psi > rows[1].er_psi

    def test_unknown_sweep(self, tiny):
        with pytest.raises(ValueError, match="sweep"):
            P.run_comparison(tiny, "dt", [1])

    def test_time_sweep_steps_divide(self, tiny):
        c = P.config_for_time(tiny, 0.15)
        assert c.T == 0.15
        assert round(c.T / c.dt_w) * c.dt_w == pytest.approx(0.15, abs=1e-14)
        assert round(c.T / c.ds_dt) * c.ds_dt == pytest.approx(0.15, abs=1e-14)
        assert c.w_ratio == tiny.w_ratio

    def test_summary(self, tiny):
        gw = P.run_gwpt(tiny)
        s = P.summarize(gw.psi[tiny.T], gw.grids["M3"])
        assert set(s.scalars) == {"jtilde", "q", "p"}
        assert s.gamma_norm == pytest.approx(np.sqrt(np.sum(gw.grids["M3"].weights * s.mass)))

    def test_heller_needs_quadratic(self, tiny):
        with pytest.raises(ValueError, match="quadratic"):
            P.heller_errors(tiny)


class TestTiming:
    @pytest.mark.parametrize("n", [400, 600, 800])
    def test_config(self, n):
        c = P.timing_config(builtin_config("a1ii"), 1 / 256, n)
        assert c.nz1 == c.nz3 == c.nz4 == n and c.n_x == 6 * n and c.T == 0.3
        assert c.T / c.ds_dt == pytest.approx(round(c.T * n), abs=1e-9)

    def test_rows(self, tiny):
        rows = P.run_timing(tiny, [(1 / 32, 8)], T=0.1, warmup=False)
        assert len(rows) == 1
        r = rows[0]
        assert r.wall_gwpt_s > 0 and r.wall_ds_s > 0
        assert r.ratio == r.wall_ds_s / r.wall_gwpt_s
        assert np.isfinite(r.er_psi)


def test_zdiag_positive(tiny):
    cfg = tiny.replace(nz2=8, nz3=8)
    z = P.zdiag(cfg)
    assert z.psi_max > 0 and z.w_max > 0 and z.eps == cfg.eps


def test_classical_distance_small(tiny):
    d = P.classical_distance(tiny.replace(nz3=64), "histogram")
    assert 0 < d < 2
