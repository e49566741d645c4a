"""Command-line front end.

``mclsquad run`` executes one convergence sweep and writes the delimited
report; optionally it also emits a standalone gnuplot script and/or a
rendered figure.  Exit codes: 0 success, 1 usage error, 2 when at least
one (method, N, seed) cell failed (the CSV still contains every cell that
succeeded).
"""
from __future__ import annotations

import argparse
import sys

from .bench import (
    METHOD_NAMES,
    MethodSpec,
    convergence_sweep,
    register_standard_problems,
    render_plot,
    write_csv,
    write_gnuplot,
)

__all__ = ["build_parser", "parse_n_grid", "main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for cell failures here
    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def parse_n_grid(text: str) -> list[int]:
    """Either a comma list ``1000,5000,20000`` or
    ``logspace:START:STOP:COUNT`` (inclusive, rounded, deduplicated)."""
    text = text.strip()
    if text.startswith("logspace:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError("logspace spec must look like logspace:START:STOP:COUNT")
        start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
        if start <= 0 or stop <= 0 or count < 2 or stop <= start:
            raise ValueError("logspace needs 0 < START < STOP and COUNT >= 2")
        import numpy as np

        vals = np.logspace(np.log10(start), np.log10(stop), count)
        return sorted({int(round(v)) for v in vals})
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            out.append(int(tok))
    if not out or any(v < 1 for v in out):
        raise ValueError("N must be a list of positive integers")
    return sorted(set(out))


def _parse_split(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError("split must look like BUILD:REGRESSION, e.g. 1:1")
    a, b = int(parts[0]), int(parts[1])
    if a < 1 or b < 1:
        raise ValueError("split shares must be positive")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mclsquad", description="Monte Carlo / least-squares integration sweeps")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    run = sub.add_parser("run", help="run one convergence sweep and write a CSV report")
    run.add_argument("--problem", required=True, help="registered problem name")
    run.add_argument("--dim", type=int, default=1, help="problem dimension (default 1)")
    run.add_argument("--method", required=True, choices=METHOD_NAMES)
    run.add_argument("--degree", type=int, default=2,
                     help="polynomial degree for fixed-degree methods (default 2)")
    run.add_argument("--degree-kind", choices=("total", "euclidean", "max"), default="total")
    run.add_argument("--level", type=int, default=None, help="sparse-grid level (sgmcls)")
    run.add_argument("--N", required=True,
                     help="sample sizes: comma list or logspace:START:STOP:COUNT")
    run.add_argument("--seeds", type=int, default=1, help="number of independent seeds")
    run.add_argument("--seed0", type=int, default=0, help="first seed (default 0)")
    run.add_argument("--split", default=None,
                     help="BUILD:REGRESSION budget split for sgmcls when --level is omitted")
    run.add_argument("--ratio", type=float, default=10.0,
                     help="samples-per-basis-function ratio for mclsa (default 10)")
    run.add_argument("--cuts", type=int, default=2,
                     help="axis cuts per dimension for strat (default 2)")
    run.add_argument("--max-basis", type=int, default=None,
                     help="cost guard: cap on the mclsa basis size")
    run.add_argument("--out", required=True, help="CSV output path")
    run.add_argument("--gnuplot", default=None, help="also write a gnuplot script here")
    run.add_argument("--plot", default=None, help="also render a matplotlib figure here")
    return p


def _run(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    registry = register_standard_problems()
    if args.problem not in registry:
        parser.error(f"unknown problem {args.problem!r}; known: {', '.join(sorted(registry))}")
    try:
        grid = parse_n_grid(args.N)
        split = _parse_split(args.split) if args.split else None
        problem = registry[args.problem](args.dim)
        spec = MethodSpec(
            name=args.method,
            degree=args.degree,
            kind=args.degree_kind,
            level=args.level,
            ratio=args.ratio,
            split=split,
            cuts=args.cuts,
            max_basis=args.max_basis,
        )
    except ValueError as exc:
        parser.error(str(exc))

    result = convergence_sweep(problem, [spec], grid, n_seeds=args.seeds, seed0=args.seed0)
    write_csv(result, args.out)
    if args.gnuplot:
        write_gnuplot(result, args.gnuplot)
    if args.plot:
        true = problem.reference_value() if (problem.true_value is not None or problem.oracle) else None
        render_plot(result, args.plot, true_value=true)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    for fail in result.failures:
        sys.stderr.write(
            f"FAIL method={fail.method} N={fail.n} seed={fail.seed}: {fail.message}\n"
        )
    return 2 if result.failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command != "run":
            parser.error("a subcommand is required (try: mclsquad run --help)")
        return _run(args, parser)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0


if __name__ == "__main__":
    sys.exit(main())
