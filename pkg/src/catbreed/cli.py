"""Command-line entry point.

Every option mirrors a :class:`~catbreed.pipeline.RunConfig` key
(``--phases-deg`` ↔ ``phases_deg``). Values come from, in increasing
priority: built-in defaults, ``--config FILE`` (``key = value`` lines) and
explicit flags. ``CATBREED_OUTDIR`` sets the default output directory.

Exit status: 0 success, 2 usage error, 3 domain error, 4 numerical-accuracy
failure, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import io
from .errors import CatBreedError, OutputError
from .pipeline import (
    RunConfig,
    StageError,
    cmd_breed,
    cmd_condition,
    cmd_fit,
    cmd_iterate,
    cmd_joint_grid,
    cmd_photon_model,
    cmd_pipeline,
    cmd_sample,
    cmd_tomo,
    render_report,
)

COMMANDS = {
    "photon-model": "derive (sigma, delta) from source parameters g, h, eta, xi",
    "joint-grid": "write model joint-density grids, one per phase",
    "sample": "draw synthetic joint homodyne samples",
    "condition": "apply the |x0| <= window selection to a sample file",
    "fit": "maximum-likelihood (sigma, delta) from a sample file",
    "breed": "breed two model photons (Fock and/or Wigner route)",
    "tomo": "maximum-likelihood tomography of a conditioned sample file",
    "iterate": "iterated breeding growth table",
    "pipeline": "full model-to-tomography run with the reproduction report",
    "report": "print the table of a pipeline report.json",
}


def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key = value configuration file")
    grp = p.add_argument_group("configuration (each also settable in the config file)")
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if isinstance(f.default, bool):
            grp.add_argument(flag, dest=f.name, nargs="?", const="true", default=None, metavar="BOOL")
        else:
            grp.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper(),
                             help=f"default: {_show(f.default)}")


def _show(v):
    return ",".join(f"{x:g}" for x in v) if isinstance(v, tuple) else repr(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catbreed", description="Simulate homodyne-heralded cat-state breeding.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in COMMANDS.items():
        _add_config_options(sub.add_parser(name, help=helptext, description=helptext))
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    vals = RunConfig.parse_text(io._read(ns.config)) if ns.config else {}
    for f in dataclasses.fields(RunConfig):
        raw = getattr(ns, f.name, None)
        if raw is not None:
            vals[f.name] = RunConfig.coerce(f.name, raw)
    return RunConfig(**vals)


def _print_json(obj) -> None:
    sys.stdout.write(io.dumps_json(obj))


def _require_input(cfg: RunConfig, default_name: str):
    path = cfg.input or str(cfg.out(default_name))
    return path


def run(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        cmd = ns.command
        if cmd == "photon-model":
            _print_json(cmd_photon_model(cfg.g, cfg.h, cfg.eta, cfg.xi))
        elif cmd == "joint-grid":
            _print_json(cmd_joint_grid(cfg))
        elif cmd == "sample":
            _print_json(cmd_sample(cfg))
        elif cmd == "condition":
            _print_json(cmd_condition(cfg, _require_input(cfg, "samples.txt")))
        elif cmd == "fit":
            _print_json(cmd_fit(cfg, _require_input(cfg, "samples.txt")))
        elif cmd == "breed":
            _print_json(cmd_breed(cfg))
        elif cmd == "tomo":
            _print_json(cmd_tomo(cfg, _require_input(cfg, "conditioned.txt")))
        elif cmd == "iterate":
            _print_json(cmd_iterate(cfg, ideal=cfg.ideal))
            sys.stdout.write(io._read(cfg.out("iterate.txt")))
        elif cmd == "pipeline":
            rep = cmd_pipeline(cfg, progress=lambda s: print(f"[stage] {s}", file=sys.stderr))
            sys.stdout.write(rep.render())
        elif cmd == "report":
            sys.stdout.write(render_report(_require_input(cfg, "report.json")))
    except StageError as exc:
        print(f"catbreed: {exc}", file=sys.stderr)
        return exc.exit_code
    except CatBreedError as exc:
        print(f"catbreed: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"catbreed: {OutputError(str(exc))}", file=sys.stderr)
        return OutputError.exit_code
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
