import csv
import json

import pytest

from gwpt_uq import __version__, builtin_config
from gwpt_uq.cli import EXIT_CONFIG, EXIT_STAGE, build_parser, load_config, main
from gwpt_uq import output

TINY = ["--test", "a1ii", "--eps", "1/32", "--set", "nz1=8", "--set", "nz2=8", "--set", "nz3=8",
        "--set", "nz4=8", "--set", "n_x=512", "--set", "T=0.2", "--set", "ds_dt=0.2/120"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfigLoading:
    def test_set_overrides(self):
        args = build_parser().parse_args(["run", *TINY, "--set", 'potential.coef=["0.5"]'])
        cfg = load_config(args)
        assert cfg.nz2 == 8 and cfg.ds_dt == pytest.approx(0.2 / 120)
        assert cfg.potential.coef == (0.5,)

    def test_config_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(builtin_config("b", 1 / 64).to_dict()))
        cfg = load_config(build_parser().parse_args(["run", "--config", str(p)]))
        assert cfg == builtin_config("b", 1 / 64)

    def test_bad_override_syntax(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--test", "a2", "--set", "nz2"])


class TestExitCodes:
    def test_missing_source(self, tmp_path, capsys):
        assert main(["run", "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "error [config]" in capsys.readouterr().err

    def test_invalid_field(self, tmp_path, capsys):
        assert main(["run", *TINY, "--set", "nz2=0", "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "nz2" in capsys.readouterr().err

    def test_unreadable_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG

    def test_stage_failure(self, tmp_path, monkeypatch, capsys):
        import gwpt_uq.pipeline as P

        def broken(*a, **k):
            raise RuntimeError("diverged")
        monkeypatch.setattr(P, "propagate_w", broken)
        assert main(["run", *TINY, "--out", str(tmp_path)]) == EXIT_STAGE
        assert "error [wprop]: diverged" in capsys.readouterr().err


class TestRun:
    def test_files_and_provenance(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", *TINY, "--set", 'outputs=["stats","errors","psi","zdiag","classical"]',
                     "--out", str(out)]) == 0
        names = {p.name for p in out.iterdir()}
        assert {"stats.csv", "rho.csv", "j.csv", "re_psi.csv", "zdiag.csv", "errors.csv",
                "classical_density.csv", "classical_current.csv", "classical_moments.csv",
                "provenance.json"} <= names
        prov = json.loads((out / "provenance.json").read_text())
        assert prov["command"] == "run"
        assert prov["package_version"] == __version__
        assert prov["config"]["nz2"] == 8
        assert "timings_s" not in prov
        assert "wall_ds_s" not in read_csv(out / "errors.csv")[0]
        assert {r["observable"] for r in read_csv(out / "stats.csv")} == \
            {"jtilde", "q", "p", "gamma_norm"}

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert main(["run", *TINY, "--out", str(d)]) == 0
        for f in a.iterdir():
            assert f.read_bytes() == (b / f.name).read_bytes(), f.name

    def test_timing_columns_opt_in(self, tmp_path):
        assert main(["run", *TINY, "--set", 'outputs=["errors","timing"]',
                     "--out", str(tmp_path)]) == 0
        row = read_csv(tmp_path / "errors.csv")[0]
        assert float(row["wall_ds_s"]) > 0
        assert "timings_s" in json.loads((tmp_path / "provenance.json").read_text())


class TestSubcommands:
    def test_compare_nz2(self, tmp_path):
        assert main(["compare", *TINY, "--sweep", "nz2", "--values", "2", "4",
                     "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "errors_nz2.csv")
        assert [r["Nz2"] for r in rows] == ["2", "4"]
        assert "self-convergence" in json.loads((tmp_path / "provenance.json").read_text())["note"]

    @pytest.mark.parametrize("est", ["histogram", "derivative", "auto"])
    def test_classical(self, tmp_path, est):
        assert main(["classical", *TINY, "--estimator", est, "--out", str(tmp_path)]) == 0
        m = read_csv(tmp_path / "classical_moments.csv")[0]
        assert set(m) == {"E_q", "Var_q", "E_p", "Var_p"}

    def test_zdiag(self, tmp_path):
        assert main(["zdiag", *TINY, "--eps-list", "1/32", "1/64", "--out", str(tmp_path)]) == 0
        assert [float(r["eps"]) for r in read_csv(tmp_path / "zdiag.csv")] == [1 / 32, 1 / 64]

    def test_timing(self, tmp_path):
        assert main(["timing", *TINY, "--pair", "1/32", "8", "--T", "0.1", "--no-warmup",
                     "--out", str(tmp_path)]) == 0
        row = read_csv(tmp_path / "timing.csv")[0]
        assert int(row["N"]) == 8 and float(row["ratio"]) > 0


class TestOutput:
    def test_profile_columns(self, tmp_path):
        p = output.write_profile(tmp_path / "p.csv", [0.0, 0.5], [1.0, 2.0])
        assert p.read_text() == "x,mean\n0.0,1.0\n0.5,2.0\n"

    def test_repr_round_trip(self, tmp_path):
        v = 0.1 + 0.2
        output.write_table(tmp_path / "t.csv", [{"v": v}])
        assert float(read_csv(tmp_path / "t.csv")[0]["v"]) == v

    def test_empty_table(self, tmp_path):
        with pytest.raises(ValueError, match="no rows"):
            output.write_table(tmp_path / "t.csv", [])

    def test_provenance_timings(self):
        cfg = builtin_config("b")
        assert "timings_s" not in output.provenance(cfg, "run", timings={"ode": 1.0})
        cfg = cfg.replace(outputs=("timing",))
        assert output.provenance(cfg, "run", timings={"ode": 1.0})["timings_s"] == {"ode": 1.0}
