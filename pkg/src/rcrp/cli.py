"""Command-line interface: ``rcrp gen | solve | sweep | verify``."""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import exact, lagrangian, model
from .apcore import InfeasibleError, check_certificate, hungarian
from .coverage import build_visibility, circulant_expand
from .transfer import TransferPolicy

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_GUARD = 2
EXIT_IO = 3
EXIT_VERIFY = 4


def _config(args) -> lagrangian.SubgradientConfig:
    return lagrangian.SubgradientConfig(
        max_iters=args.max_iters,
        gap_tol=args.gap_tol,
        alpha_window=args.alpha_window,
        nbhd_cap_factor=args.nbhd_cap,
        seed=args.seed,
    )


def _add_solver_flags(p):
    d = lagrangian.SubgradientConfig()
    p.add_argument("--gap-tol", type=float, default=d.gap_tol, help="relative duality-gap tolerance")
    p.add_argument("--max-iters", type=int, default=d.max_iters)
    p.add_argument("--alpha-window", type=int, default=d.alpha_window,
                   help="iterations without lower-bound progress before the step scale halves")
    p.add_argument("--nbhd-cap", type=int, default=d.nbhd_cap_factor,
                   help="local-search sample size per round, as a multiple of |I|")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="seed for neighbourhood sampling")
    p.add_argument("--log", choices=("csv", "quiet"), default="quiet",
                   help="csv writes the per-iteration trace to stderr")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcrp", description="Constellation reconfiguration planning.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("--I", dest="n_sats", type=int, default=10)
    g.add_argument("--J", dest="n_slots", type=int, default=500)
    g.add_argument("--P", dest="n_targets", type=int, default=10)
    g.add_argument("--T", dest="n_steps", type=int, default=None, help="time steps (defaults to --J)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scenario", choices=("rgt", "tonga"), default="rgt")
    g.add_argument("--beta-mode", choices=("worst-case", "computed"), default=None,
                   help="phasing-angle costing (default: computed for rgt, worst-case for tonga)")
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve one budget point")
    s.add_argument("instance")
    s.add_argument("--epsilon", type=float, default=None,
                   help="aggregated delta-v budget in km/s (default: the instance budget)")
    s.add_argument("--exact", action="store_true", help="also run the brute-force oracle")
    s.add_argument("--out", required=True)
    _add_solver_flags(s)

    w = sub.add_parser("sweep", help="epsilon-constraint sweep")
    w.add_argument("instance")
    w.add_argument("--steps", type=int, default=10)
    w.add_argument("--out", required=True)
    _add_solver_flags(w)

    v = sub.add_parser("verify", help="check instance invariants")
    v.add_argument("instance")
    v.add_argument("--probes", type=int, default=20, help="random weak-duality and certificate probes")
    v.add_argument("--seed", type=int, default=0)
    return ap


def cmd_gen(args) -> int:
    if args.scenario == "tonga":
        policy = TransferPolicy(phasing_angle_mode=args.beta_mode or "worst-case")
        inst = model.tonga_instance(seed=args.seed, policy=policy)
    else:
        T = args.n_slots if args.n_steps is None else args.n_steps
        policy = TransferPolicy(phasing_angle_mode=args.beta_mode or "computed")
        inst = model.generate_instance((args.n_sats, args.n_slots, args.n_targets, T), args.seed, policy)
    model.save_instance(inst, args.out)
    size = model.problem_size(inst)
    print(f"wrote {args.out}: |I|={inst.n_sats} |J|={inst.n_slots} |P|={inst.n_targets} |T|={inst.m} "
          f"variables={size['variables']} constraints={size['constraints']}")
    return EXIT_OK


def _result_dict(inst, res: lagrangian.SolveResult, eps) -> dict:
    cov = res.coverage.mean(axis=0)
    return {
        "sign_convention": "min",
        "epsilon": eps,
        "budget_type": inst.budget.kind,
        "assignment": [int(j) for j in res.slot_of],
        "coverage_fraction": [float(c) for c in cov],
        "reward": float(res.reward),
        "objective": float(res.upper_bound),
        "lower_bound": float(res.lower_bound),
        "gap": float(res.gap),
        "realized_cost": float(res.realized_cost),
        "iterations": int(res.iterations),
        "stop_reason": res.stop_reason,
        "wall_time_s": float(res.wall_time),
    }


def cmd_solve(args) -> int:
    inst = model.load_instance(args.instance)
    if args.epsilon is not None:
        inst = inst.with_budget(model.Budget.arc(args.epsilon))
    eps = inst.budget.epsilon if inst.budget.kind == "ARC" else list(inst.budget.per_satellite)
    if isinstance(eps, list):
        eps = [None if math.isinf(e) else e for e in eps]
    # run the oracle first so an oversized instance fails before the solve
    report = exact.brute_force_rcrp(inst) if args.exact else None
    stream = sys.stderr if args.log == "csv" else None
    res = lagrangian.solve(inst, _config(args), trace_stream=stream)
    out = _result_dict(inst, res, eps)
    if report is not None:
        out["oracle"] = {
            "objective": report.value,
            "reward": report.reward,
            "assignments": [list(map(int, a)) for a in report.assignments],
            "enumerated": report.enumerated,
            "contained": bool(res.lower_bound <= report.value + 1e-9 <= res.upper_bound + 2e-9),
        }
    model.save_result(out, args.out)
    print(f"reward {res.reward:.6g}  lower bound {-res.lower_bound:.6g} (max sign)  gap {100 * res.gap:.2f}%  "
          f"delta-v {res.realized_cost:.4g} km/s  iterations {res.iterations} ({res.stop_reason})")
    if args.exact:
        flag = "contained" if out["oracle"]["contained"] else "NOT contained"
        print(f"oracle reward {report.reward:.6g} ({flag} in the bounds)")
    return EXIT_OK


def cmd_sweep(args) -> int:
    inst = model.load_instance(args.instance)
    if inst.budget.kind != "ARC":
        inst = inst.with_budget(model.Budget.arc(float(inst.cost.max())))
    schedule = model.epsilon_schedule(inst, args.steps)
    points = lagrangian.sweep(inst, schedule, _config(args), threads=args.threads)
    model.write_pareto_csv(points, args.out)
    if args.log == "csv":
        print("epsilon,reward,gap,status")
        for p in points:
            print(f"{p.epsilon:.6g},{p.reward:.6g},{p.gap:.4g},{p.status}")
    else:
        print(f"wrote {len(points)} points to {args.out}")
    return EXIT_OK


def _check_circulant(inst, rng) -> tuple[bool, str]:
    V = inst.visibility
    if V.is_circulant:
        for s in range(V.profiles.shape[0]):
            members = np.flatnonzero(V.slot_sub == s)
            for p in range(V.n_targets):
                circ = circulant_expand(V.profiles[s, p])
                cols = V.columns(members)[:, :, p]
                if not np.array_equal(cols, circ[:, V.offsets[members]]):
                    return False, f"stored columns differ from the circulant of profile (sub {s}, target {p})"
    sample = np.sort(rng.choice(V.n_slots, size=min(V.n_slots, 64), replace=False))
    fresh = build_visibility([inst.slots[j] for j in sample], inst.targets, inst.grid)
    bad = np.flatnonzero(np.any(fresh.to_dense() != V.columns(sample), axis=(0, 2)))
    if bad.size:
        return False, f"{bad.size} of {sample.size} sampled slots disagree with propagated visibility"
    return True, f"{sample.size} propagated slots match"


def _check_weak_duality(inst, rng, probes) -> tuple[bool, str]:
    scorer = lagrangian.Scorer(inst.visibility, inst.rewards, inst.thresholds)
    try:
        feasible = lagrangian.feasible_start(inst)
    except InfeasibleError as exc:
        return False, str(exc)
    worst = -math.inf
    for _ in range(probes):
        lam = rng.exponential(rng.uniform(0.01, 2.0), size=(inst.m, inst.n_targets))
        w = lagrangian.kernels.slot_weights(inst.visibility.bits, np.ascontiguousarray(lam.T))
        redundant = inst.budget.kind == "ARC" and inst.budget.epsilon >= float(inst.cost.max(axis=1).sum())
        lr1 = lagrangian.solve_lr1(inst, w, lagrangian.SubgradientConfig(), redundant)
        _, zd2 = lagrangian.solve_lr2(lam, inst.rewards, inst.thresholds)
        _, obj = lagrangian.primal_repair(scorer, feasible)
        worst = max(worst, lr1.bound + zd2 - obj)
    ok = worst <= 1e-7 * max(1.0, scorer.total)
    return ok, f"max(LB - objective) = {worst:.3g}"


def _check_certificates(inst, rng, probes) -> tuple[bool, str]:
    I, J = inst.cost.shape
    for _ in range(probes):
        cols = np.sort(rng.choice(J, size=min(J, max(I, 2 * I)), replace=False))
        mat = inst.cost[:, cols] - rng.uniform(0, 1, size=cols.size)[None, :]
        res = hungarian(mat)
        if not check_certificate(mat, res):
            return False, "dual certificate violated"
    return True, f"{probes} assignment problems certified"


def cmd_verify(args) -> int:
    rows = []
    try:
        inst = model.load_instance(args.instance)
        rows.append(("schema", True, "instance validates"))
    except model.InstanceFormatError as exc:
        rows.append(("schema", False, str(exc)))
        inst = None
    if inst is not None:
        rng = np.random.default_rng(args.seed)
        rows.append(("circulant identity", *_check_circulant(inst, rng)))
        rows.append(("weak duality", *_check_weak_duality(inst, rng, args.probes)))
        rows.append(("hungarian certificate", *_check_certificates(inst, rng, args.probes)))
    width = max(len(r[0]) for r in rows)
    for name, ok, msg in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {msg}")
    return EXIT_OK if all(r[1] for r in rows) else EXIT_VERIFY


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except exact.SizeGuardError as exc:
        print(f"size guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (OSError, model.InstanceFormatError, json.JSONDecodeError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
