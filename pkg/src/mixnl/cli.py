"""Command-line entry point (``mixnl``)."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .config import jsonable, load_config, preset
from .exceptions import ConfigError
from .pipeline import run, write_outputs
from .worked_examples import run_appendix_example, run_remark_example

log = logging.getLogger("mixnl")


def _config_args(p):
    p.add_argument("--config", type=Path, help="TOML (or .json) run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a dotted config key; repeatable")
    p.add_argument("--preset", choices=["cor1", "cor2", "cor3", "cor4"], help="start from a preset operator")
    p.add_argument("--param", dest="params", action="append", default=[], metavar="KEY=VALUE",
                   help="preset parameter; repeatable")
    p.add_argument("--out", type=Path, help="output directory (default: output_dir from the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixnl", description="Mixed local/nonlocal Neumann problems in 1D.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assemble", help="assemble the mass, stiffness and nonlocal matrices")
    _config_args(p)
    p.add_argument("--dump-matrices", type=Path, metavar="DIR", help="write M.coo, K.coo, B.coo to DIR")

    for name, text in [("eigs", "Neumann eigenvalues (eigs.csv)"),
                       ("verify-geometry", "certify mountain-pass or linking geometry, chosen by lambda"),
                       ("solve-mp", "mountain-pass solve (lambda < 1)"),
                       ("solve-link", "linking solve (lambda >= 1)"),
                       ("run", "full pipeline with the branch chosen by lambda")]:
        p = sub.add_parser(name, help=text)
        _config_args(p)
        p.add_argument("--dump-matrices", type=Path, metavar="DIR")

    p = sub.add_parser("verify-paper", help="recompute the two worked examples and check every claim")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("preset", help="print the configuration of a preset as JSON")
    p.add_argument("name", choices=["cor1", "cor2", "cor3", "cor4"])
    p.add_argument("--param", dest="params", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return parser


def _params(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"parameter {item!r} is not KEY=VALUE", key=item)
        key, val = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(val)
        except json.JSONDecodeError:
            out[key.strip()] = val
    return out


def _resolve_config(args):
    base = None
    if getattr(args, "preset", None):
        base = preset(args.preset, _params(args.params)).raw
    return load_config(args.config, args.overrides, base=base)


_STOP = {"assemble": "assemble", "eigs": "eigs", "verify-geometry": "geometry", "solve-mp": "solve",
         "solve-link": "solve", "run": "solve"}
_BRANCH = {"solve-mp": "mountain_pass", "solve-link": "linking"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("MIXNL_THREADS")
    limit = int(threads) if threads and threads.isdigit() and int(threads) > 0 else None
    with threadpool_limits(limits=limit):
        try:
            return _dispatch(args)
        except ConfigError as exc:
            print(f"config error ({exc.key}): {exc}", file=sys.stderr)
            return 2


def _dispatch(args) -> int:
    if args.command == "preset":
        cfg = preset(args.name, _params(args.params))
        if args.overrides:
            cfg = load_config(None, args.overrides, base=cfg.raw)
        print(json.dumps(jsonable(cfg.raw), indent=2, sort_keys=True))
        return 0

    if args.command == "verify-paper":
        reports = [run_remark_example(), run_appendix_example()]
        for rep in reports:
            print("\n".join(rep.lines()))
        ok = all(r.passed for r in reports)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            payload = {"passed": ok, "examples": [r.to_dict() for r in reports]}
            (args.out / "report.json").write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")
        return 0 if ok else 1

    config = _resolve_config(args)
    out = args.out if args.out is not None else Path(config.raw["output_dir"])
    report = run(config, stop_after=_STOP[args.command], branch=_BRANCH.get(args.command),
                 dump_dir=getattr(args, "dump_matrices", None))
    for path in write_outputs(report, out):
        log.info("wrote %s", path)
    for name, chk in report.checks.items():
        print(f"[{'PASS' if chk['passed'] else 'FAIL'}] {name}: {chk['value']!r} (limit {chk['limit']!r})")
    if report.error:
        print(f"[FAIL] {report.error['stage']}: {report.error['type']}: {report.error['message']}")
    print(f"{'PASS' if report.passed else 'FAIL'} -> {out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
