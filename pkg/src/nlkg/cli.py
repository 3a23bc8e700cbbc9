"""Command-line entry point: ``nlkg <subcommand> [--config PATH] [--out DIR] ...``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 incomplete
output.  A run directory is owned by one process through a ``.lock`` file;
an ``INCOMPLETE`` marker stays behind unless the run finished cleanly.
"""
import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager

from . import __version__
from .config import load_config
from .errors import ConfigError, NLKGError

log = logging.getLogger("nlkg")

SUBCOMMANDS = ("spectral", "decay-probe", "evolve", "scan", "eject", "onepass", "shoot",
               "manifold", "report")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INCOMPLETE = 0, 2, 3, 4
MARKER = "INCOMPLETE"


class RunDirLocked(ConfigError):
    pass


def fmt(v):
    """Deterministic text form of a table cell."""
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return fmt(v.item())
    return str(v).replace("\t", " ").replace("\n", " ")


def header_lines(cfg, subcommand):
    h = cfg.header()
    lines = [f"# nlkg {__version__} {subcommand}"]
    for key in ("p", "L", "N", "dt"):
        lines.append(f"# {key}: {fmt(h[key])}")
    lines.append("# constants: " + json.dumps(h["constants"], sort_keys=True))
    lines.append(f"# config_hash: {h['config_hash']}")
    return lines


def write_table(path, table, cfg, subcommand):
    lines = header_lines(cfg, subcommand)
    lines.append("\t".join(table.columns))
    for row in table.rows:
        lines.append("\t".join(fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


@contextmanager
def run_directory(out):
    os.makedirs(out, exist_ok=True)
    lock = os.path.join(out, ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise RunDirLocked(f"run directory {out} is locked by another process") from exc
    os.write(fd, str(os.getpid()).encode())
    os.close(fd)
    try:
        yield out
    finally:
        os.remove(lock)


def _mark(out, reasons):
    _atomic_write(os.path.join(out, MARKER), "".join(r + "\n" for r in reasons))


def execute(subcommand, cfg, out, progress=None):
    """Run one subcommand into ``out``; returns the :class:`RunResult`."""
    from . import experiments as ex

    runners = {"spectral": ex.run_spectral, "decay-probe": ex.run_decay_probe,
               "evolve": ex.run_evolve, "scan": ex.run_scan, "eject": ex.run_eject,
               "onepass": ex.run_onepass, "shoot": ex.run_shoot, "manifold": ex.run_manifold,
               "report": lambda c: ex.run_report(c, progress)}
    res = runners[subcommand](cfg)
    stem = subcommand.replace("-", "_")
    for t in res.tables:
        write_table(os.path.join(out, f"{stem}_{t.name}.tsv"), t, cfg, subcommand)
    if subcommand == "evolve":
        tr = res.extra["trajectory"]
        tr.export(os.path.join(out, "evolve_series.ndjson"), config_hash=cfg.hash)
    summary = dict(cfg.header(), subcommand=subcommand, summary=_jsonable(res.summary),
                   incomplete=list(res.incomplete))
    _atomic_write(os.path.join(out, f"{stem}_summary.json"),
                  json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return res


def build_parser():
    ap = argparse.ArgumentParser(prog="nlkg", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", metavar="PATH", help="YAML config overriding the defaults")
    ap.add_argument("--out", metavar="DIR", default="runs/default", help="output directory")
    ap.add_argument("--threads", type=int, metavar="N", help="BLAS thread limit")
    ap.add_argument("--seed", type=int, metavar="U64", help="seed for sampled ensembles")
    ap.add_argument("--horizon-scale", type=float, metavar="F",
                    help="multiplier on classification horizons")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    over = {}
    run = {k: v for k, v in (("threads", args.threads), ("seed", args.seed),
                             ("horizon_scale", args.horizon_scale)) if v is not None}
    if run:
        over["run"] = run
    try:
        cfg = load_config(args.config, over)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    from threadpoolctl import threadpool_limits

    try:
        with run_directory(args.out) as out, threadpool_limits(cfg.run["threads"]):
            _mark(out, ["running"])
            try:
                res = execute(args.subcommand, cfg, out,
                              progress=lambda i: log.info("criterion %s", i))
            except NLKGError as exc:
                _mark(out, [f"{type(exc).__name__}: {exc}"])
                print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
                return EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_NUMERICAL
            if res.incomplete:
                _mark(out, res.incomplete)
                print("incomplete: " + "; ".join(res.incomplete), file=sys.stderr)
                return EXIT_INCOMPLETE
            os.remove(os.path.join(out, MARKER))
    except RunDirLocked as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
