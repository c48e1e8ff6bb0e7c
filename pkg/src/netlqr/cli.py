"""Command line entry point: ``netlqr <command> --config PATH ...``.

Exit codes: 0 success, 2 config error, 3 budget or enumeration cap
exceeded, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import BUNDLED, ConfigError, load_config
from .dynamic_solver import (BudgetExceeded, PartitionPolicy, evaluate_policy,
                             optimal_initial_set, solve_dynamic)
from .model import mode_distribution
from .simulator import (DEFAULT_ENUMERATION_CAP, EnumerationCapExceeded, SimConfig,
                        exhaustive_expected_cost, simulate_dynamic, simulate_static)
from .static_solver import GainSchedule, NumericalError, expected_cost, solve_static

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("netlqr")


def _bits(label) -> str:
    return "(" + ",".join(str(b) for b in label) + ")" if isinstance(label, tuple) else str(label)


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else cfg.output


def cmd_build(args, cfg, out=sys.stdout):
    net = cfg.network
    sys_, _, _ = cfg.dynamic_system()
    print(f"plant: l={net.plant.n_states} m={net.plant.n_inputs}", file=out)
    print(f"paths: {net.n_paths}", file=out)
    for i, p in enumerate(net.paths):
        lay = sys_.layout
        print(f"  {i}: {p.name} delay={p.delay} loss={p.loss_prob:g} "
              f"register=[{lay.offsets[i]}, {lay.offsets[i] + p.delay * lay.input_dim})", file=out)
    print(f"n={sys_.n} u_dim={sys_.u_dim}", file=out)
    full = mode_distribution(net)
    print(f"modes: {sys_.n_modes} of {len(full)} with nonzero probability", file=out)
    for label, prob in full:
        mark = "" if prob > 0 else "  (pruned)"
        print(f"  sigma={_bits(label)} prob={prob:.12g}{mark}", file=out)
    print(f"actions: {sys_.n_actions}", file=out)
    for i, a in enumerate(sys_.action_labels):
        used = ",".join(p.name for p, b in zip(net.paths, a) if b) or "idle"
        print(f"  {i}: a={_bits(a)} [{used}]", file=out)
    for name in cfg.schedules:
        s, _, _, _ = cfg.schedule_system(name)
        print(f"schedule {name}: n={s.n} u_dim={s.u_dim} modes={s.n_modes}", file=out)
    return EXIT_OK


def cmd_solve_static(args, cfg, out=sys.stdout):
    names = [args.schedule] if args.schedule else list(cfg.schedules)
    out_dir = _out_dir(args, cfg)
    for name in names:
        sys_, w, sched, x0 = cfg.schedule_system(name)
        g = solve_static(sys_, w, sched)
        cost = expected_cost(g, x0)
        path = io.write_json(out_dir / f"gains_{name}.json",
                             io.gain_schedule_to_dict(g, {"schedule": name, "expected_cost": cost}))
        print(f"expected_cost {name} {cost:.17g} -> {path}", file=out)
    return EXIT_OK


def cmd_solve_dynamic(args, cfg, out=sys.stdout):
    sys_, w, x0 = cfg.dynamic_system()
    budget = args.budget or cfg.budget
    samples = args.samples or cfg.samples
    seed = cfg.dynamic_seed if args.seed is None else args.seed
    pol = solve_dynamic(sys_, w, n_samples=samples, seed=seed, budget=budget)
    path = io.write_json(_out_dir(args, cfg) / "policy.json",
                         io.policy_to_dict(pol, {"samples": samples, "seed": seed, "budget": budget}))
    # runs of identical steps are printed once
    runs = []
    for c in pol.census:
        key = (c["candidates"], c["regions"], c["optimal"])
        if runs and runs[-1][2] == key:
            runs[-1][1] = c["step"]
        else:
            runs.append([c["step"], c["step"], key])
    for first, last, (cands, regions, optimal) in runs:
        steps = f"step {first}" if first == last else f"steps {first}-{last}"
        print(f"{steps}: candidates={cands} regions={regions} optimal={optimal}", file=out)
    opt = optimal_initial_set(pol)
    print(f"optimal initial regions: {len(opt)} of {len(pol.steps[0])}", file=out)
    print(f"policy -> {path}", file=out)
    return EXIT_OK


def _solution_system(cfg, sol):
    if isinstance(sol, PartitionPolicy):
        return cfg.dynamic_system()
    name = sol.name
    sys_, w, _, x0 = cfg.schedule_system(name)
    return sys_, w, x0


def _check_solution(sys_, w, sol):
    n = sol.P[0].shape[0] if isinstance(sol, GainSchedule) else sol.terminal.shape[0]
    if n != sys_.n or sol.N != w.N:
        raise ConfigError(f"solution file (n={n}, N={sol.N}) does not match the config "
                          f"(n={sys_.n}, N={w.N})", "policy")


def _load_target(args, cfg):
    if args.policy:
        try:
            sol = io.load_solution(args.policy)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load policy file: {exc}", "--policy") from exc
        sys_, w, x0 = _solution_system(cfg, sol)
        _check_solution(sys_, w, sol)
        label = Path(args.policy).stem
    else:
        if not args.schedule:
            raise ConfigError("give --schedule NAME or --policy PATH", "simulate")
        sys_, w, sched, x0 = cfg.schedule_system(args.schedule)
        sol = solve_static(sys_, w, sched)
        label = args.schedule
    return label, sys_, w, x0, sol


def cmd_simulate(args, cfg, out=sys.stdout):
    label, sys_, w, x0, sol = _load_target(args, cfg)
    sim = SimConfig(args.replicates or cfg.replicates,
                    cfg.seed if args.seed is None else args.seed, x0,
                    cfg.record_trajectories, cfg.record_inputs)
    if isinstance(sol, PartitionPolicy):
        rep = simulate_dynamic(sys_, w, sol, sim)
    else:
        rep = simulate_static(sys_, w, sol, sim)
    paths = io.write_csv_bundle(_out_dir(args, cfg), rep)
    line = (f"{label}: replicates={rep.replicates} seed={sim.seed} mean_cost={rep.mean:.17g} "
            f"std_error={rep.std_error:.17g}")
    if isinstance(sol, GainSchedule):
        line += f" expected_cost={expected_cost(sol, x0):.17g}"
    if args.enumerate:
        line += f" exact_cost={exhaustive_expected_cost(sys_, w, sol, x0, args.cap):.17g}"
    if rep.fallbacks:
        line += f" fallbacks={rep.fallbacks}"
    print(line, file=out)
    print("wrote " + " ".join(str(p) for p in paths), file=out)
    return EXIT_OK


def cmd_compare(args, cfg, out=sys.stdout):
    rows = []
    names = args.schedule or list(cfg.schedules)
    for name in names:
        sys_, w, sched, x0 = cfg.schedule_system(name)
        g = solve_static(sys_, w, sched)
        rows.append((expected_cost(g, x0), name, "static", "x0'P(0)x0"))
    for p in args.policy or []:
        try:
            sol = io.load_solution(p)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load policy file: {exc}", "--policy") from exc
        sys_, w, x0 = _solution_system(cfg, sol)
        _check_solution(sys_, w, sol)
        label = Path(p).stem
        if isinstance(sol, GainSchedule) and not args.enumerate:
            rows.append((expected_cost(sol, x0), label, "static", "x0'P(0)x0"))
            continue
        kind = "static" if isinstance(sol, GainSchedule) else "dynamic"
        try:
            rows.append((exhaustive_expected_cost(sys_, w, sol, x0, args.cap), label, kind,
                         "enumeration"))
        except EnumerationCapExceeded:
            if args.enumerate:
                raise
            d = evaluate_policy(sol, 0, x0)
            if d.optimal and not d.fallback:
                # exact: every loss pattern stays on the optimal successor chain
                rows.append((float(x0 @ d.value @ x0), label, kind, "x0'P(0)x0 (optimal region)"))
                continue
            rep = simulate_dynamic(sys_, w, sol, SimConfig(args.replicates or cfg.replicates,
                                                           cfg.seed if args.seed is None
                                                           else args.seed, x0, False, False))
            rows.append((rep.mean, label, kind, f"monte-carlo (se {rep.std_error:.3g})"))
    if not rows:
        raise ConfigError("nothing to compare", "compare")
    rows.sort(key=lambda r: r[0])
    print(f"{'rank':>4}  {'name':<20} {'kind':<8} {'cost':>24}  method", file=out)
    for i, (cost, name, kind, how) in enumerate(rows, 1):
        print(f"{i:>4}  {name:<20} {kind:<8} {cost:>24.17g}  {how}", file=out)
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "solve-static": cmd_solve_static,
    "solve-dynamic": cmd_solve_dynamic,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="netlqr",
        description="Co-design LQR gains and routing redundancy over lossy delayed paths.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help=f"YAML config file, or a bundled name ({', '.join(BUNDLED)})")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        return p

    common(sub.add_parser("build", help="print the augmented model summary"))
    p = common(sub.add_parser("solve-static", help="solve fixed-schedule LQR"))
    p.add_argument("--schedule", help="schedule name (default: all)")
    p = common(sub.add_parser("solve-dynamic", help="build the routing partition policy"))
    p.add_argument("--budget", type=int, help="max candidates/regions per step")
    p.add_argument("--samples", type=int, help="sample budget for emptiness pruning")
    p = common(sub.add_parser("simulate", help="Monte-Carlo simulation to CSV"))
    p.add_argument("--schedule")
    p.add_argument("--policy", help="gain schedule or partition policy file")
    p.add_argument("--replicates", type=int)
    p.add_argument("--enumerate", action="store_true",
                   help="also report the exact expectation by mode enumeration")
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
    p = common(sub.add_parser("compare", help="rank schedules and policies by expected cost"))
    p.add_argument("--schedule", action="append")
    p.add_argument("--policy", action="append")
    p.add_argument("--replicates", type=int)
    p.add_argument("--enumerate", action="store_true",
                   help="use exact enumeration for policy files (fail if over the cap)")
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg, out=out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceeded, EnumerationCapExceeded) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
