"""Command-line entry point: ``solve``, ``reproduce``, ``verify`` and ``audit``.

Exit codes: 0 success, 1 configuration error, 2 divergence, 3 failed check.
"""

from __future__ import annotations

import argparse
import os
import sys

from .algorithms import AlgorithmConfig
from .analysis import AUDITS_FOR, verify_identity, verify_sequence_bound
from .core import certify_regime
from .harness import (
    ConfigError,
    config_from_mapping,
    execute,
    load_config_file,
    make_problem,
    run_experiment,
    write_plot,
    write_summary_json,
    write_trajectory_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_FAILED = 0, 1, 2, 3

# flag dest -> flat config key
_FLAG_KEYS = {
    "problem": "problem",
    "algo": "algo",
    "eta": "eta",
    "max_iters": "max_iters",
    "eps": "eps",
    "out": "out",
    "seed": "seed",
    "record_every": "record_every",
    "audits": "audits",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file; flags override its values")
    p.add_argument("--problem", help="problem spec, e.g. antidiagonal:n=100 or rotation:L=1,costheta=-0.5")
    p.add_argument("--algo", help="eg, peg, og, rg or arg (comma-separated for several)")
    p.add_argument("--eta", help="step size, or 'auto' for og/arg")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--eps", type=float, help="stop once the residual is at most eps (0 disables)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--audits", help="comma-separated audit names")


def _collect(args) -> dict:
    raw = load_config_file(args.config) if args.config else {}
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            raw[key] = value
            if key == "algo":
                raw.pop("algorithms", None)
    return raw


def _print_summaries(summaries, out=None) -> None:
    out = out or sys.stdout
    for s in summaries:
        print(f"{s.label}: terminated_by={s.terminated_by} iterations={s.iterations_used} "
              f"grad_calls={s.gradient_calls} resolvent_calls={s.resolvent_calls} "
              f"final_residual={s.final_residual:.6g} wall_time={s.wall_time_seconds:.3f}s", file=out)
        for w in s.warnings:
            print(f"  warning: {w}", file=out)
        for a in s.audits:
            print("  " + a.row(), file=out)


def cmd_solve(args) -> int:
    cfg = config_from_mapping(_collect(args))
    _, _, summaries = run_experiment(cfg)
    _print_summaries(summaries)
    print(f"artifacts written to {cfg.output_dir}")
    if any(s.terminated_by == "divergence" for s in summaries):
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_audit(args) -> int:
    raw = _collect(args)
    cfg = config_from_mapping(raw)
    if not cfg.audits:
        names = []
        for a in cfg.algorithms:
            names.extend(n for n in AUDITS_FOR[a.algorithm] if n not in names)
        if not names:
            raise ConfigError("algo", "no audits apply to the chosen algorithms")
        cfg.audits = names
    _, _, summaries = run_experiment(cfg, write="out" in raw)
    _print_summaries(summaries)
    reports = [a for s in summaries for a in s.audits]
    if any(s.terminated_by == "divergence" for s in summaries):
        return EXIT_DIVERGED
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def cmd_reproduce(args) -> int:
    if args.n < 2 or args.n % 2:
        raise ConfigError("n", f"must be an even integer >= 2, got {args.n}")
    spec = f"antidiagonal:n={args.n}"
    problem = make_problem(spec)
    max_iters = args.max_iters
    results = {}
    for algo, eta in [("eg", 0.4), ("rg", 0.4), ("eg", 0.7), ("rg", 0.7)]:
        cfg = AlgorithmConfig(algo, eta, max_iters, 1e-3)
        results[(algo, eta)] = execute(problem, cfg)
    arg_traj, arg_summary = execute(problem, AlgorithmConfig("arg", 0.5, max_iters, 1e-2))

    header = f"{'run':<12}{'eps':>8}{'iterations':>12}{'grad_calls':>12}{'wall_time_s':>13}  terminated_by"
    print(header)
    rows = [(f"{a.upper()} eta={e}", 1e-3, s) for (a, e), (_, s) in results.items()]
    rows.append(("ARG eta=0.5", 1e-2, arg_summary))
    for name, eps, s in rows:
        print(f"{name:<12}{eps:>8g}{s.iterations_used:>12}{s.gradient_calls:>12}"
              f"{s.wall_time_seconds:>13.4f}  {s.terminated_by}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        trajs = {s.label: t for (t, s) in results.values()}
        for label, traj in trajs.items():
            write_trajectory_csv(traj, os.path.join(args.out, f"{label}.csv"), args.record_every)
        write_trajectory_csv(arg_traj, os.path.join(args.out, f"{arg_summary.label}.csv"), args.record_every)
        first = {k: v for k, v in trajs.items() if not k.startswith("rg_eta0.7")}
        write_plot(os.path.join(args.out, "eg_rg.svg"), first, title=f"EG vs RG, n={args.n}, eps=1e-3")
        write_plot(os.path.join(args.out, "arg.svg"), {arg_summary.label: arg_traj},
                   title=f"ARG eta=0.5, n={args.n}, eps=1e-2")
        write_summary_json(os.path.join(args.out, "summary.json"), problem,
                           [s for _, s in results.values()] + [arg_summary])
        print(f"artifacts written to {args.out}")

    eg, rg = results[("eg", 0.4)][1], results[("rg", 0.4)][1]
    ok = True
    if not (eg.terminated_by == rg.terminated_by == "epsilon" and rg.gradient_calls < eg.gradient_calls):
        print(f"FAIL: expected RG(0.4) to reach eps with fewer gradient calls than EG(0.4); "
              f"measured RG={rg.gradient_calls} ({rg.terminated_by}), "
              f"EG={eg.gradient_calls} ({eg.terminated_by})")
        ok = False
    else:
        print(f"PASS: RG(0.4) used {rg.gradient_calls} gradient calls, EG(0.4) used {eg.gradient_calls}")
    rg7 = results[("rg", 0.7)][1]
    print(f"note: RG(0.7) terminated_by={rg7.terminated_by}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_verify(args) -> int:
    if not (args.identities or args.sequence_bound or args.regime):
        raise ConfigError("verify", "choose at least one of --identities, --sequence-bound, --regime")
    if args.trials < 1:
        raise ConfigError("trials", f"must be >= 1, got {args.trials}")
    rows = []
    if args.identities:
        for which in ("first", "second"):
            rows.append(verify_identity(which, trials=args.trials, seed=args.seed, dims=(1, 2, 8, 64)))
    if args.sequence_bound:
        if not 0 < args.p < 1.0 / 3.0:
            raise ConfigError("p", f"must lie in (0, 1/3), got {args.p}")
        if args.c1 < 0:
            raise ConfigError("c1", f"must be nonnegative, got {args.c1}")
        if args.horizon < 2:
            raise ConfigError("horizon", f"must be >= 2, got {args.horizon}")
        rows.append(verify_sequence_bound(args.c1, args.p, args.horizon, seed=args.seed))
    ok = all(r.passed for r in rows)
    for r in rows:
        print(r.row())
    if args.regime:
        problem = make_problem(args.regime)
        props = ["lipschitz", "monotone" if problem.regime.kind == "monotone" else problem.regime.kind]
        for prop in props:
            rep = certify_regime(problem, prop, samples=args.trials, seed=args.seed)
            print(rep.row())
            ok = ok and rep.passed
    return EXIT_OK if ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="singlecall", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run solvers and write CSV, JSON and SVG artifacts")
    _add_run_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("audit", help="run solvers and check the potential and rate inequalities")
    _add_run_flags(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("reproduce", help="EG/RG/ARG comparison on the antidiagonal problem")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=100_000)
    p.add_argument("--out", help="output directory for CSV, JSON and SVG files")
    p.add_argument("--record-every", dest="record_every", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("verify", help="numerical identity, sequence and regime checks")
    p.add_argument("--identities", action="store_true")
    p.add_argument("--sequence-bound", dest="sequence_bound", action="store_true")
    p.add_argument("--regime", metavar="PROBLEM", help="certify the declared regime of a problem")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--horizon", type=int, default=10_000)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
