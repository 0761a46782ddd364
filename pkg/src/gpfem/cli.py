"""Command line interface: ``gpfem {run,selftest,table1,table2,lowerbound}``.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 selftest failure.
The worker count for independent rows is read from ``GPFEM_WORKERS``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .elements import ElementKind
from .experiments import (
    EXAMPLE_NUMBERS,
    ConfigError,
    ExampleId,
    ExperimentReport,
    ReferenceSpec,
    load_config,
    preset_config,
    run_experiment,
)
from .gpe import NonConvergenceError
from .linalg import NotPositiveDefiniteError, SolverError
from .selftest import run_selftest

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SELFTEST = 0, 2, 3, 4


def _levels(max_level: int, start: int = 8) -> tuple[int, ...]:
    if max_level < start or max_level & (max_level - 1):
        raise ConfigError([f"max-level: must be a power of two >= {start}"])
    out, n = [], start
    while n <= max_level:
        out.append(n)
        n *= 2
    return tuple(out)


def _fmt(x, spec):
    if x is None:
        return "-".rjust(int(spec.split(".")[0]))
    return format(x, spec)


def print_report(report: ExperimentReport, out=None):
    out = out or sys.stdout
    cfg = report.config
    for kind in cfg.elements:
        rows = report.rows(kind)
        print(f"[{kind.value}]", file=out)
        if cfg.reference is not None:
            print(f"  reference {cfg.reference.element.value} N={cfg.reference.level}: "
                  f"E={report.reference_energy:.9f} lambda={report.reference_eigenvalue:.9f}", file=out)
        print(f"  {'N':>5} {'DOFs':>8} {'iters':>5} {'cpu_s':>8} {'energy':>12} {'eigenvalue':>12}"
              f" {'l2_error':>10} {'h1_error':>10} {'E_error':>10} {'lam_error':>10}  status", file=out)
        for r in rows:
            print(
                f"  {r.N:>5} {r.dofs:>8} {r.iterations:>5} {r.cpu_s:>8.2f} {_fmt(r.energy, '12.7f')}"
                f" {_fmt(r.eigenvalue, '12.7f')} {_fmt(r.l2_error, '10.3e')} {_fmt(r.h1_error, '10.3e')}"
                f" {_fmt(r.energy_error, '10.3e')} {_fmt(r.eigenvalue_error, '10.3e')}  {r.status}",
                file=out,
            )
    for kind, lb in report.lower_bound.items():
        print(f"lower bound [{kind}] against E_ref={lb.reference:.9f}", file=out)
        for n, e, m, b in zip(lb.levels, lb.energies, lb.margins, lb.below):
            print(f"  N={n:<5} E={e:.9f} margin={m:+.3e} below={'yes' if b else 'no'}", file=out)
        print(f"  monotone={'yes' if lb.monotone else 'no'} "
              f"threshold={lb.threshold if lb.threshold is not None else 'none'}", file=out)
    print(f"output written to {cfg.output_dir}", file=out)


def _execute(cfg) -> int:
    try:
        report = run_experiment(cfg)
    except (NonConvergenceError, SolverError, NotPositiveDefiniteError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print_report(report)
    if report.failed:
        bad = ", ".join(f"{r.element} N={r.N}" for r in report.records if r.status != "ok")
        print(f"solver failure in rows: {bad}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    return _execute(cfg)


def cmd_selftest(args) -> int:
    results = run_selftest(args.seed, corrupt_basis=args.corrupt_basis)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name:<22} {r.detail} ({r.seconds:.2f}s)")
    ok = all(r.passed for r in results)
    print("selftest " + ("passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_SELFTEST


def _reference(level):
    return None if not level else ReferenceSpec(ElementKind.Q2, level)


def cmd_table1(args) -> int:
    cfg = preset_config(
        ExampleId.TABLE_CONV,
        levels=_levels(args.max_level),
        reference=_reference(args.reference_level),
        output_dir=Path(args.output_dir or "out/table1"),
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
    )
    return _execute(cfg)


def cmd_table2(args) -> int:
    cfg = preset_config(
        ExampleId.TABLE_CONV,
        levels=_levels(args.max_level),
        reference=_reference(args.reference_level),
        output_dir=Path(args.output_dir or "out/table2"),
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
    )
    return _execute(cfg)


def cmd_lowerbound(args) -> int:
    example = EXAMPLE_NUMBERS[args.example]
    cfg = preset_config(
        example,
        elements=(ElementKind.EQ1ROT,),
        levels=_levels(args.max_level),
        reference=ReferenceSpec(ElementKind.Q2, args.reference_level),
        lower_bound=True,
        fields=False,
        output_dir=Path(args.output_dir or f"out/lowerbound_{args.example}"),
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
    )
    return _execute(cfg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpfem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log flow iterations")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("selftest", help="run the property suites")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--corrupt-basis", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_selftest)

    def common(q, max_level, ref):
        q.add_argument("--max-level", type=int, default=max_level)
        q.add_argument("--reference-level", type=int, default=ref,
                       help="Q2 reference level (0 disables the reference)")
        q.add_argument("--output-dir")
        q.add_argument("--cache-dir", help="reuse reference solutions stored here")

    t1 = sub.add_parser("table1", help="L2/H1 errors of the EQ1rot ground state")
    common(t1, 128, 512)
    t1.set_defaults(func=cmd_table1)

    t2 = sub.add_parser("table2", help="EQ1rot energies and eigenvalues")
    common(t2, 256, 0)
    t2.set_defaults(func=cmd_table2)

    lb = sub.add_parser("lowerbound", help="EQ1rot energies against a conforming reference")
    lb.add_argument("--example", choices=sorted(EXAMPLE_NUMBERS), required=True)
    common(lb, 256, 512)
    lb.set_defaults(func=cmd_lowerbound)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.command == "lowerbound" and not args.reference_level:
            raise ConfigError(["reference-level: required for the lower-bound check"])
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
