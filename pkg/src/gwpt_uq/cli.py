"""Command line entry point: ``gwpt-uq {run,compare,classical,zdiag,timing}``.

Every subcommand takes either ``--config file.json`` or ``--test ID`` (with
optional ``--eps``), plus ``--set key=value`` overrides, and writes CSV
files and a ``provenance.json`` sidecar into ``--out``.

Exit codes: 0 success, 2 invalid configuration, 3 failure inside a
pipeline stage. Failures print ``error [stage]: message`` to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import observables as obs
from . import output
from . import pipeline as P
from .config import ConfigError, ExperimentConfig, TEST_IDS, parse_number

log = logging.getLogger("gwpt_uq")

EXIT_CONFIG = 2
EXIT_STAGE = 3

DEFAULT_SWEEPS = {
    "eps": ["1/32", "1/64", "1/128", "1/256"],
    "nz2": ["2", "4", "8", "16", "32"],
    "time": ["1", "2", "4", "8"],
}
DEFAULT_TIMING = [("1/256", 400), ("1/512", 600), ("1/640", 800)]


def _override(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(args) -> ExperimentConfig:
    """Config from ``--config`` or ``--test``, with ``--eps`` and ``--set`` applied."""
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from None
    elif args.test:
        data = {"test_id": args.test}
    else:
        raise ConfigError("config: give --config FILE or --test ID")
    if args.eps is not None:
        data["eps"] = args.eps
    for key, value in args.set or ():
        if "." in key:
            outer, inner = key.split(".", 1)
            data.setdefault(outer, {})[inner] = value
        else:
            data[key] = value
    return ExperimentConfig.from_dict(data)


def _finish(out: Path, cfg: ExperimentConfig, command: str, files, timings=None, extra=None):
    with P.stage("output", {}):
        prov = output.provenance(cfg, command, files, timings, extra)
        output.write_provenance(out / "provenance.json", prov)
    for f in files:
        print(f)
    print(out / "provenance.json")


def _error_rows(rows, cfg):
    with_t = "timing" in cfg.outputs
    return [r.as_dict(with_timing=with_t) for r in rows]


def cmd_run(args, cfg: ExperimentConfig, out: Path) -> None:
    outs = set(cfg.outputs)
    gw = P.run_gwpt(cfg)
    t, g3 = cfg.T, gw.grids["M3"]
    psi = gw.psi[t]
    timings = dict(gw.timings)
    files = []
    with P.stage("stats", timings):
        x = cfg.x_grid.points
        if "stats" in outs:
            s = P.summarize(psi, g3)
            rows = [{"observable": k, "mean": float(v.mean), "sd": float(v.sd)}
                    for k, v in s.scalars.items()]
            rows.append({"observable": "gamma_norm", "mean": s.gamma_norm, "sd": 0.0})
            files.append(output.write_table(out / "stats.csv", rows))
        if "rho" in outs or "stats" in outs:
            r = obs.stats("rho", obs.density(psi), g3)
            files.append(output.write_profile(out / "rho.csv", x, r.mean, r.sd))
        if "j" in outs or "stats" in outs:
            j = obs.stats("j", obs.current(psi), g3)
            files.append(output.write_profile(out / "j.csv", x, j.mean, j.sd))
        if "psi" in outs:
            re = obs.stats("re_psi", psi.values.real, g3)
            files.append(output.write_profile(out / "re_psi.csv", x, re.mean, re.sd))
        if "zdiag" in outs:
            z = P.ZDiag(cfg.eps, obs.z_derivative_max(psi.values, g3.z),
                        obs.z_derivative_max(gw.w[t].values, gw.grids["M2"].z))
            files.append(output.write_table(out / "zdiag.csv", [vars(z)]))
    if "errors" in outs:
        ref = P.run_reference(cfg)
        row = P.compare(gw, ref)
        timings.update(row.timings)
        files.append(output.write_table(out / "errors.csv", _error_rows([row], cfg)))
    if "classical" in outs:
        files += _classical_files(cfg, out)
    _finish(out, cfg, "run", files, timings)


def cmd_compare(args, cfg: ExperimentConfig, out: Path) -> None:
    sweep = args.sweep
    values = args.values or (DEFAULT_SWEEPS[sweep] if sweep else None)
    if values is not None:
        values = [parse_number(v) for v in values]
    rows = P.run_comparison(cfg, sweep, values)
    name = f"errors_{sweep}.csv" if sweep else "errors.csv"
    f = output.write_table(out / name, _error_rows(rows, cfg))
    extra = {"sweep": sweep, "values": values}
    if sweep == "nz2":
        extra["note"] = "each row compares N_z,2 with 2 N_z,2 (self-convergence)"
    _finish(out, cfg, "compare", [f], extra=extra)


def _classical_files(cfg: ExperimentConfig, out: Path, estimator: str = "histogram"):
    with P.stage("classical", {}):
        x = None if estimator == "histogram" else cfg.x_grid.points
        res = P.run_classical(cfg, estimator=estimator, x=x)
        files = [
            output.write_profile(out / "classical_density.csv", res.density.x, res.density.values),
            output.write_profile(out / "classical_current.csv", res.current.x, res.current.values),
            output.write_table(out / "classical_moments.csv", [dict(zip(
                ("E_q", "Var_q", "E_p", "Var_p"), res.moments))]),
        ]
    return files


def cmd_classical(args, cfg: ExperimentConfig, out: Path) -> None:
    files = _classical_files(cfg, out, args.estimator)
    _finish(out, cfg, "classical", files, extra={"estimator": args.estimator})


def cmd_zdiag(args, cfg: ExperimentConfig, out: Path) -> None:
    eps_list = [parse_number(e) for e in args.eps_list] if args.eps_list else [cfg.eps]
    rows = [vars(P.zdiag(cfg.replace(eps=e), order=args.order)) for e in eps_list]
    f = output.write_table(out / "zdiag.csv", rows)
    _finish(out, cfg, "zdiag", [f], extra={"order": args.order})


def cmd_timing(args, cfg: ExperimentConfig, out: Path) -> None:
    pairs = [(parse_number(e), int(n)) for e, n in (args.pair or DEFAULT_TIMING)]
    rows = P.run_timing(cfg, pairs, T=args.T, warmup=not args.no_warmup)
    table = [{"eps": r.eps, "N": r.n, "wall_gwpt_s": r.wall_gwpt_s, "wall_ds_s": r.wall_ds_s,
              "ratio": r.ratio, "Er_psi": r.er_psi} for r in rows]
    f = output.write_table(out / "timing.csv", table)
    _finish(out, cfg, "timing", [f], extra={"T": args.T, "note": "wall-clock values vary by run"})


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("configuration")
    src.add_argument("--config", help="JSON configuration file")
    src.add_argument("--test", choices=[t for t in TEST_IDS if t != "custom"],
                     help="built-in test problem")
    src.add_argument("--eps", help="semiclassical parameter, e.g. 1/256")
    src.add_argument("--set", action="append", type=_override, metavar="KEY=VALUE",
                     help="override a config field (JSON value; nested as potential.coef)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gwpt-uq", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the GWPT pipeline")
    c = sub.add_parser("compare", parents=[common], help="error tables against the reference")
    c.add_argument("--sweep", choices=sorted(DEFAULT_SWEEPS))
    c.add_argument("--values", nargs="+", help="sweep values (eps, N_z,2 or output times)")
    k = sub.add_parser("classical", parents=[common], help="classical-limit profiles")
    k.add_argument("--estimator", choices=("histogram", "derivative", "auto"),
                   default="histogram")
    z = sub.add_parser("zdiag", parents=[common], help="max |d/dz Re| of psi and w")
    z.add_argument("--eps-list", nargs="+", help="eps values (default: the config eps)")
    z.add_argument("--order", type=int, default=1, choices=(1, 2))
    t = sub.add_parser("timing", parents=[common], help="wall-clock GWPT vs reference")
    t.add_argument("--pair", nargs=2, action="append", metavar=("EPS", "N"),
                   help="eps and matched mesh size N (repeatable)")
    t.add_argument("--T", type=float, default=0.3, help="final time (default 0.3)")
    t.add_argument("--no-warmup", action="store_true")
    return p


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "classical": cmd_classical,
            "zdiag": cmd_zdiag, "timing": cmd_timing}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except (ConfigError, TypeError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        COMMANDS[args.command](args, cfg, out)
    except P.StageError as exc:
        print(f"error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return EXIT_STAGE
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
