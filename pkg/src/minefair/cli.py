"""``minefair`` command line.

Exit status is 0 on success, 1 for invalid input and 2 for runtime failures
(for example a fixed point that does not converge).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .engine import fairness_report, fixed_delay_report
from .ensemble import EnsembleConfig, mean_gap_fraction, run_ensemble, std_vs_hashrate_trend
from .errors import ConvergenceError, FitError, ScenarioError
from .game import solve_game
from .reporting import emit_plot_data, new_manifest, now, theory_row, write_table
from .scenario import FixedUniform, LogisticRandom, Scenario, TieBreak, load_scenario, realize_delays
from .simulate import SimConfig, max_se_deviation, simulate
from .theory import fit_mpr_line, predict_mpr, zero_point_identity_check

log = logging.getLogger("minefair")

DEFAULT_DT = "0.01,0.02,0.03,0.04,0.05,0.06,0.07"


def _effective_delay(sc: Scenario, seed=None) -> float:
    if isinstance(sc.delays, FixedUniform):
        return float(sc.delays.d)
    d = realize_delays(sc.delays, sc.n_miners, seed)
    return float(d[~np.eye(sc.n_miners, dtype=bool)].mean())


def _fit_rows(report, sc: Scenario) -> list[dict]:
    try:
        fit = fit_mpr_line(report)
    except FitError:
        return [{"slope": float("nan"), "intercept": float("nan"), "zero_point": float("nan"),
                 "correlation": float("nan"), "sum_alpha_sq": float(sc.alpha @ sc.alpha),
                 "zero_point_residual": 0.0}]
    return [{
        "slope": fit.slope,
        "intercept": fit.intercept,
        "zero_point": fit.zero_point if fit.slope else float("nan"),
        "correlation": fit.correlation,
        "sum_alpha_sq": float(sc.alpha @ sc.alpha),
        "zero_point_residual": zero_point_identity_check(report) if fit.slope else float("nan"),
    }]


def cmd_analyze(args, sc: Scenario, out: Path, manifest) -> None:
    manifest.seeds["delays"] = args.seed
    rep = fairness_report(sc, args.seed)
    rows = [dict(zip(("miner_id", "alpha", "pi", "reward_share", "mp", "mpr"), r)) for r in rep.rows()]
    manifest.outputs.append(write_table(rows, out / "fairness", args.format).name)
    fit = _fit_rows(rep, sc)
    manifest.outputs.append(write_table(fit, out / "fit", args.format).name)
    d = _effective_delay(sc, args.seed)
    row = theory_row(sc.alpha, rep.mpr, d, sc.block_interval)
    manifest.outputs.append(write_table([row], out / "theory_compare", args.format).name)
    pred = predict_mpr(sc.alpha, d, sc.block_interval)
    manifest.outputs += [p.name for p in emit_plot_data(
        {"mpr_vs_alpha": (sc.alpha, rep.mpr), "mpr_theory_vs_alpha": (sc.alpha, pred.mpr)}, out)]
    print(f"miners={sc.n_miners} slope={fit[0]['slope']:.6g} theory={pred.slope_2f:.6g} "
          f"zero_point={fit[0]['zero_point']:.6g} sum_alpha_sq={fit[0]['sum_alpha_sq']:.6g} "
          f"correlation={fit[0]['correlation']:.7f}")


def cmd_simulate(args, sc: Scenario, out: Path, manifest) -> None:
    seed = 0 if args.seed is None else args.seed
    manifest.seeds["simulation"] = seed
    res = simulate(SimConfig(sc, args.rounds, seed, race=args.race))
    rep = fairness_report(sc)
    rows = []
    for i in range(sc.n_miners):
        rows.append({"miner_id": i, "main_chain_blocks": int(res.main_chain_blocks[i]),
                     "round_initiations": int(res.round_initiations[i]), "r": res.r[i], "r_se": res.r_se[i],
                     "pi": res.pi[i], "pi_se": res.pi_se[i], "r_engine": rep.r[i]})
    manifest.outputs.append(write_table(rows, out / "simulation", args.format).name)
    worst = max_se_deviation(res, rep)
    summary = {"rounds": res.rounds, "forks": res.fork_events, "fork_rate": res.fork_rate, "max_abs_dev_se": worst}
    manifest.outputs.append(write_table([summary], out / "summary", args.format).name)
    print(f"rounds={res.rounds} forks={res.fork_events} fork_rate={res.fork_rate:.6g} max_dev_se={worst:.3f}")


def cmd_ensemble(args, sc: Scenario, out: Path, manifest) -> None:
    if isinstance(sc.delays, FixedUniform):
        sc = sc.replace(delays=LogisticRandom(sc.delays.d))
    elif not isinstance(sc.delays, LogisticRandom):
        raise ScenarioError("ensemble needs logistic (or fixed, used as the mean) delays", "delays")
    seed = 0 if args.seed is None else args.seed
    manifest.seeds["master"] = seed
    stats = run_ensemble(EnsembleConfig(sc, args.draws, seed))
    rows = [{"miner_id": i, "alpha": sc.alpha[i], "mpr_mean": stats.mpr_mean[i], "mpr_std": stats.mpr_std[i],
             "mpr_fixed_reference": stats.mpr_fixed[i]} for i in range(sc.n_miners)]
    manifest.outputs.append(write_table(rows, out / "ensemble", args.format).name)
    manifest.outputs += [p.name for p in emit_plot_data({
        "mpr_mean_vs_alpha": (sc.alpha, stats.mpr_mean),
        "mpr_fixed_vs_alpha": (sc.alpha, stats.mpr_fixed),
        "mpr_std_vs_alpha": (sc.alpha, stats.mpr_std),
    }, out)]
    gap = mean_gap_fraction(stats)
    trend = std_vs_hashrate_trend(stats)
    summary = {"draws": args.draws, "max_mean_gap_over_range": gap, "spearman_alpha_std": trend}
    manifest.outputs.append(write_table([summary], out / "summary", args.format).name)
    print(f"draws={args.draws} max|mean-fixed|/range={gap:.4f} spearman(alpha,std)={trend:.4f}")


def cmd_game(args, sc: Scenario, out: Path, manifest) -> None:
    res = solve_game(sc, fast_d=args.fast_d, slow_d=args.slow_d, utility=args.utility)
    rows = [{"intra_large": a, "intra_small": b, "utility_large": ul, "utility_small": us, "eq": "EQ" if eq else ""}
            for a, b, ul, us, eq in res.table_rows()]
    manifest.outputs.append(write_table(rows, out / "game", args.format).name)
    lines = [f"{'large':<6} {'small':<6} {'utility_large':>15} {'utility_small':>15}  eq"]
    for r in rows:
        lines.append(f"{r['intra_large']:<6} {r['intra_small']:<6} {r['utility_large']:>15.8f} "
                     f"{r['utility_small']:>15.8f}  {r['eq']}")
    text = "\n".join(lines) + "\n"
    (out / "game.txt").write_text(text)
    manifest.outputs.append("game.txt")
    print(text, end="")


def cmd_theory_compare(args, sc: Scenario, out: Path, manifest) -> None:
    manifest.seeds["delays"] = args.seed
    rep = fairness_report(sc, args.seed)
    row = theory_row(sc.alpha, rep.mpr, _effective_delay(sc, args.seed), sc.block_interval)
    manifest.outputs.append(write_table([row], out / "theory_compare", args.format).name)
    print(", ".join(f"{k}={v}" for k, v in row.items()))


def cmd_sweep(args, sc: Scenario, out: Path, manifest) -> None:
    try:
        dts = [float(x) for x in args.dt_list.split(",") if x.strip()]
    except ValueError as exc:
        raise ScenarioError(f"bad --dt-list: {exc}") from exc
    if not dts or any(x < 0 for x in dts):
        raise ScenarioError("--dt-list needs non-negative values")
    rows = []
    for x in dts:
        rep = fixed_delay_report(sc, x * sc.block_interval)
        rows.append(theory_row(sc.alpha, rep.mpr, x * sc.block_interval, sc.block_interval))
        log.info("d/T=%g done", x)
    manifest.outputs.append(write_table(rows, out / "sweep", args.format).name)
    for r in rows:
        print(f"d/T={r['d_over_T']:.4g} theory={r['slope_theory']:.7g} numeric={r['slope_numeric']:.7g} "
              f"corr={r['correlation']:.7f} {r['flag']}")


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "game": cmd_game,
    "theory-compare": cmd_theory_compare,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario file (YAML)")
    common.add_argument("--out", default="out", help="output directory (created if absent)")
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed override")
    common.add_argument("--tie-break", choices=[t.value for t in TieBreak], default=None)
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="minefair", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"minefair {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="exact fairness report, line fit and theory row")
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo of the round model")
    s.add_argument("--rounds", type=int, default=10**6)
    s.add_argument("--race", action="store_true", help="re-enact fork resolution instead of using W")
    e = sub.add_parser("ensemble", parents=[common], help="statistics over random logistic delays")
    e.add_argument("--draws", type=int, default=100)
    g = sub.add_parser("game", parents=[common], help="two-group propagation game")
    g.add_argument("--fast-d", type=float, default=3.0)
    g.add_argument("--slow-d", type=float, default=6.0)
    g.add_argument("--utility", choices=["group_mpr", "sum_mp", "sum_mpr"], default="group_mpr")
    sub.add_parser("theory-compare", parents=[common], help="fitted slope and zero point against 2f and sum a^2")
    w = sub.add_parser("sweep", parents=[common], help="theory comparison over a list of d/T values")
    w.add_argument("--dt-list", default=DEFAULT_DT)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ScenarioError("--seed must be an unsigned 64-bit integer")
        sc = load_scenario(args.scenario)
        if args.tie_break:
            sc = sc.replace(tie_break=args.tie_break)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = new_manifest(__version__, args.command, sc.fingerprint(), {})
        COMMANDS[args.command](args, sc, out, manifest)
        manifest.finished = now()
        manifest.write(out)
    except (ScenarioError, FitError, ValueError) as exc:
        print(f"minefair: error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, RuntimeError, OSError) as exc:
        print(f"minefair: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
