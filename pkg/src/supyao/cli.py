"""Command-line entry point: ``supyao run|sweep|exact|dump-garble|verify``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from . import acceptance, attacks, garbling, harness
from .cipher import CipherSpec
from .garbling import FunctionSpec

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nx", type=int, default=1, help="garbler input width")
    p.add_argument("--ny", type=int, default=1, help="evaluator input width")
    p.add_argument("--fn", default="and", help="builtin function: and, or, xor, ot")
    p.add_argument("--truth-table", help="file with lines 'x y f' of binary strings")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--p", type=int, help="padding bits checked on decryption")
    p.add_argument("--eta", type=int, help="security parameter; sets p = eta + 2(nx + ny)")
    p.add_argument("--n", type=int, default=4, help="message width for otp")
    p.add_argument("--tolerance", type=float, help="absolute tolerance (default: 3-sigma Wilson)")
    p.add_argument("--x0", type=int)
    p.add_argument("--x1", type=int)
    p.add_argument("--y", type=int, help="fix the evaluator input instead of sampling it")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="supyao", description="Superposition-attack experiments on Yao garbling.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one experiment and emit a report")
    run.add_argument("experiment", choices=harness.EXPERIMENTS)
    _common(run)

    sweep = sub.add_parser("sweep", help="honest failure rate against padding length")
    _common(sweep)
    sweep.add_argument("--p-values", type=int, nargs="+", default=[2, 4, 8, 20])

    exact = sub.add_parser("exact", help="closed-form generation probability")
    exact.add_argument("--n", type=int, required=True, help="total input width")
    exact.add_argument("--simulate", action="store_true",
                       help="also compute it with the dual-branch simulator (n <= 3)")

    dump = sub.add_parser("dump-garble", help="garble a function and print the instance")
    _common(dump)
    dump.add_argument("--kz", type=int, choices=(0, 1), default=0)

    verify = sub.add_parser("verify", help="run the full acceptance suite")
    verify.add_argument("--seed", type=int, default=acceptance.SEED)
    verify.add_argument("--only", type=int, nargs="+", choices=sorted(acceptance.CRITERIA))
    return parser


def _config(args, experiment: str) -> harness.ExperimentConfig:
    kw = dict(
        experiment=experiment, n_x=args.nx, n_y=args.ny, fn=args.fn, truth_table=args.truth_table,
        trials=args.trials, seed=args.seed, p=args.p, eta=args.eta, n=args.n,
        tolerance=args.tolerance, x0=args.x0, x1=args.x1, y=args.y,
    )
    if getattr(args, "p_values", None):
        kw["p_values"] = tuple(args.p_values)
    cfg = harness.ExperimentConfig(**kw)
    f = cfg.function()
    if experiment != "ot-freexor" and (f.n_x, f.n_y) != (args.nx, args.ny) and not args.truth_table:
        raise ValueError("widths do not match the function")
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _report(args, experiment: str) -> int:
    report = harness.run_experiment(_config(args, experiment))
    _emit(report.to_json() if args.format == "json" else report.to_csv(), args.out)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _exact(args) -> int:
    n = args.n
    if n < 1:
        raise ValueError("n must be at least 1")
    value = harness.exact_generation_probability(n)
    frac = 1 - (1 - Fraction(1, 2 ** n)) ** (2 ** n) if n <= 10 else None
    line = f"n={n} p_gen=1-(1-2^-{n})^{2 ** n}={value:.10f}"
    if frac is not None:
        line += f" ({frac})"
    print(line)
    print(f"advantage={harness.attack_advantage(n):.10f}")
    if args.simulate:
        configs = acceptance.generation_configs()
        if n not in configs:
            raise ValueError("--simulate supports n <= 3")
        run = attacks.exact_generation(configs[n], np.random.default_rng(0))
        print(f"dual-branch={run.p_success:.10f}")
        return EXIT_PASS if abs(run.p_success - value) <= 1e-6 else EXIT_FAIL
    return EXIT_PASS


def _dump(args) -> int:
    cfg = _config(args, "yao-honest")
    f = cfg.function()
    spec = cfg.classical_cipher(f)
    inst = garbling.garble(f, spec, args.kz, np.random.default_rng(args.seed), p=cfg.padding(f))
    _emit(inst.to_json(), args.out)
    return EXIT_PASS


def _verify(args) -> int:
    results = acceptance.run_all(args.seed, args.only)
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _report(args, args.experiment)
        if args.command == "sweep":
            return _report(args, "correctness-sweep")
        if args.command == "exact":
            return _exact(args)
        if args.command == "dump-garble":
            return _dump(args)
        return _verify(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"supyao: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
