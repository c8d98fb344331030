"""Command line entry point: ``pqtls-sim`` or ``python3 -m pqtls_sim``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis, model_fit, runner
from .errors import PqtlsSimError
from .kem import KEY_SHARE_LIMIT, default_catalog


def _cmd_run(args) -> int:
    cfg = runner.load_run_config(args.config) if args.config else runner.RunnerConfig()
    cfg = replace(cfg, output_root=Path(args.out))
    if args.pool_size is not None:
        cfg = replace(cfg, pool_size=args.pool_size)
    catalog = runner.load_catalog(cfg.catalog_file) if cfg.catalog_file else default_catalog()
    scenario_path = Path(args.scenario)
    rows = runner.read_scenario_file(scenario_path, cfg.extended_format)
    algs_text = (Path(args.algorithms).read_text(encoding="utf-8") if args.algorithms
                 else runner.emit_algorithms(runner.default_algorithms(catalog)))
    algorithms = runner.parse_algorithms(algs_text, catalog)
    root = runner.run_matrix({scenario_path.stem: rows}, algorithms, cfg, catalog)
    print(root)
    return 0


def _cmd_presets(args) -> int:
    for name, path in runner.write_presets(args.out).items():
        print(f"{name:7} {path}")
    return 0


def _cmd_catalog(args) -> int:
    cat = default_catalog()
    print(f"{'id':28} {'family':10} {'level':>5} {'role':18} {'pk':>8} {'ct':>8} {'sk':>8}")
    for spec in cat:
        mark = "  (exceeds key_share)" if max(spec.pk_bytes, spec.ct_bytes) > KEY_SHARE_LIMIT else ""
        print(f"{spec.id:28} {spec.family.value:10} {spec.nist_level:>5} {spec.role.value:18} "
              f"{spec.pk_bytes:>8} {spec.ct_bytes:>8} {spec.sk_bytes:>8}{mark}")
    return 0


def _cmd_analyze(args) -> int:
    print(analysis.analyze_tree(args.input, args.out))
    return 0


def _cmd_plot_data(args) -> int:
    stats = args.statistic or analysis.STATISTICS
    text = analysis.plot_data(args.input, args.group, stats, args.scenario)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    return 0


def _cmd_check_models(args) -> int:
    rows = model_fit.check_models(args.analyzed)
    for r in rows:
        print(r.line())
    failed = sum(r.status == "fail" for r in rows)
    print(f"{len(rows)} fits, {failed} failed")
    return 1 if failed or not rows else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pqtls-sim", description="Simulated TLS 1.3 KEM handshake benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario against a set of algorithms")
    r.add_argument("--scenario", required=True)
    r.add_argument("--algorithms", help="algorithms CSV (default: every shipped variant)")
    r.add_argument("--config", help="key=value run configuration")
    r.add_argument("--out", required=True)
    r.add_argument("--pool-size", type=int)
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("presets", help="write the standard scenario sweeps")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_presets)

    c = sub.add_parser("catalog", help="inspect the algorithm catalog")
    c.add_argument("action", choices=["list"])
    c.set_defaults(func=_cmd_catalog)

    a = sub.add_parser("analyze", help="summarize a results tree")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_analyze)

    d = sub.add_parser("plot-data", help="long-format data from an analyzed tree")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--group", choices=analysis.GROUPINGS, default="per-algorithm")
    d.add_argument("--out", required=True, help="output file, or - for stdout")
    d.add_argument("--statistic", action="append", choices=analysis.STATISTICS)
    d.add_argument("--scenario")
    d.set_defaults(func=_cmd_plot_data)

    m = sub.add_parser("check-models", help="fit delay and rate laws to an analyzed tree")
    m.add_argument("--analyzed", required=True)
    m.set_defaults(func=_cmd_check_models)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PqtlsSimError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
