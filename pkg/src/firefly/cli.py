"""Command-line front end: firefly gen | run | exp1 | exp2 | compare.

Exit codes: 0 on completion (failed missions are data, not errors), 2 on
invalid flags or scenario documents, 3 when reading or writing files fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import mission
from .experiments import (MODES, NOTIONS, experiment1_trials, experiment2_trials,
                          experiment_report, run_trials, team_runtime_rows, write_summary_csv)
from .fair_planner import PlannerConfig, solo_baseline
from .fairness import InvalidBaselineError, notion_for
from .firefly_loop import RunConfig, run, run_baseline, write_summary
from .metrics import compare, format_runtime_table, write_runtime_csv
from .mission import ExperimentKind, ScenarioError, ScenarioGenerationError, ScenarioSeed
from .safe_control import SafetyConfig

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3

log = logging.getLogger("firefly")


class UsageError(Exception):
    """Flags are individually valid but make no sense together."""


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def int_list(text: str) -> list[int]:
    """Parse ``"7,10,12"`` or a range ``"1..5"`` into a list of positive integers."""
    out = []
    for token in text.split(","):
        token = token.strip()
        if ".." in token:
            lo, _, hi = token.partition("..")
            a, b = _positive_int(lo), _positive_int(hi)
            if b < a:
                raise argparse.ArgumentTypeError(f"empty range {token!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(_positive_int(token))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def obstacle_list(text: str) -> list[int]:
    """Like :func:`int_list` but zero obstacles is allowed."""
    if text.strip() == "0":
        return [0]
    return int_list(text)


def mode_list(text: str) -> list[str]:
    modes = [m.strip() for m in text.split(",")]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown safe mode(s): {', '.join(bad)}")
    return modes


def notion_list(text: str) -> list[str]:
    names = [n.strip() for n in text.split(",")]
    bad = [n for n in names if n not in NOTIONS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown fairness notion(s): {', '.join(bad)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="firefly", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fairness=True):
        sp.add_argument("--out-dir", type=Path, default=Path("firefly-out"))
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--replan-every", type=_positive_int, default=1)
        sp.add_argument("--eta", type=_positive_float, default=None,
                        help="planner convergence threshold (default per notion)")
        if fairness:
            sp.add_argument("--fairness", choices=[*NOTIONS, "none"], default="f1")
            sp.add_argument("--safe-mode", choices=MODES, default="distributed")

    g = sub.add_parser("gen", help="generate a scenario file")
    g.add_argument("--experiment", type=int, choices=(1, 2), default=1)
    g.add_argument("--robots", type=_positive_int, default=None,
                   help="team size (default 5 for experiment 1, 7 for experiment 2)")
    g.add_argument("--obstacles", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", type=Path, default=Path("firefly-out"))
    g.add_argument("-o", "--output", type=Path, default=None, help="scenario file path")

    r = sub.add_parser("run", help="fly one scenario with one configuration")
    r.add_argument("scenario", type=Path)
    common(r)

    c = sub.add_parser("compare", help="FiReFly vs the no-fairness baseline on one scenario")
    c.add_argument("scenario", type=Path)
    common(c)

    e1 = sub.add_parser("exp1", help="obstacle sweep with five robots")
    common(e1, fairness=False)
    e1.add_argument("--trials", type=_positive_int, default=20)
    e1.add_argument("--obstacles", type=obstacle_list, default=list(range(1, 6)))
    e1.add_argument("--safe-mode", type=mode_list, default=list(MODES))
    e1.add_argument("--fairness", type=notion_list, default=list(NOTIONS))

    e2 = sub.add_parser("exp2", help="team-size sweep around one obstacle")
    common(e2, fairness=False)
    e2.add_argument("--trials", type=_positive_int, default=20)
    e2.add_argument("--sizes", type=int_list, default=[7, 10, 12, 15])
    e2.add_argument("--safe-mode", type=mode_list, default=["distributed"])
    e2.add_argument("--fairness", type=notion_list, default=list(NOTIONS))
    return p


def _run_config(args) -> RunConfig:
    notion = notion_for(None if args.fairness == "none" else args.fairness)
    pcfg = PlannerConfig.for_notion(notion, **({} if args.eta is None else {"eta": args.eta}))
    return RunConfig(notion, pcfg, SafetyConfig.for_mode(args.safe_mode), args.replan_every,
                     seed=args.seed)


def _dirs(out: Path) -> tuple[Path, Path]:
    scen, runs = out / "scenarios", out / "runs"
    scen.mkdir(parents=True, exist_ok=True)
    runs.mkdir(parents=True, exist_ok=True)
    return scen, runs


def cmd_gen(args) -> int:
    if args.obstacles < 0:
        raise UsageError("--obstacles must be >= 0")
    kind = ExperimentKind.OBSTACLE_SWEEP if args.experiment == 1 else ExperimentKind.TEAM_SWEEP
    n = args.robots or (5 if args.experiment == 1 else 7)
    try:
        spec = mission.generate(ScenarioSeed(args.seed, n, args.obstacles, kind))
    except ValueError as exc:   # counts outside what the generator supports
        raise UsageError(str(exc)) from exc
    path = args.output
    if path is None:
        scen, _ = _dirs(args.out_dir)
        path = scen / f"exp{args.experiment}_n{n}_o{args.obstacles}_s{args.seed}.json"
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    mission.save(spec, path)
    print(path)
    return EXIT_OK


def cmd_run(args) -> int:
    spec = mission.load(args.scenario)
    cfg = _run_config(args)
    _, runs = _dirs(args.out_dir)
    try:
        solo = solo_baseline(spec)
    except InvalidBaselineError:
        solo = None
    rec = run(spec, cfg, solo)
    stem = runs / f"{args.scenario.stem}__{rec.label}"
    rec.write_csv(stem.with_suffix(".csv"))
    write_summary(rec, stem.with_suffix(".json"), cfg.notion, solo)
    print(f"{rec.label}: " + " ".join(str(s) for s in rec.statuses))
    print(f"min h: {rec.min_h():.6g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.fairness == "none":
        raise UsageError("compare needs a fairness notion (f1..f4)")
    spec = mission.load(args.scenario)
    if spec.n_robots < 2:
        raise UsageError("compare needs a team of at least two robots")
    cfg = _run_config(args)
    solo = solo_baseline(spec)
    _, runs = _dirs(args.out_dir)
    base = run_baseline(spec, RunConfig(replan_every=args.replan_every))
    rec = run(spec, cfg, solo)
    for r in (base, rec):
        stem = runs / f"{args.scenario.stem}__{r.label}"
        r.write_csv(stem.with_suffix(".csv"))
        write_summary(r, stem.with_suffix(".json"), cfg.notion, solo)
    c = compare(rec, base, cfg.notion, solo)
    print(f"{cfg.notion.name} firefly: {c.f_firefly:.6g}  baseline: {c.f_baseline:.6g}")
    print(f"reached firefly: {rec.reached_count()}/{rec.n_robots}  "
          f"baseline: {base.reached_count()}/{base.n_robots}")
    print(f"improved: {str(c.improved).lower()}")
    return EXIT_OK


def _sweep(args, trials) -> list:
    scen, runs = _dirs(args.out_dir)

    def save(result):
        mission.save(result.spec, scen / f"{result.trial.name}.json")
        for rec in result.records():
            rec.write_csv(runs / f"{result.trial.name}__{rec.label}.csv")
        log.info("done %s", result.trial.name)

    results = run_trials(trials, on_done=save)
    write_summary_csv(results, args.out_dir / "summary.csv")
    report = experiment_report(results)
    (args.out_dir / "report.txt").write_text(report + "\n")
    print(report)
    return results


def cmd_exp1(args) -> int:
    trials = experiment1_trials(args.trials, args.obstacles, args.seed, args.safe_mode,
                                args.fairness, args.replan_every, args.eta)
    _sweep(args, trials)
    return EXIT_OK


def cmd_exp2(args) -> int:
    bad = [n for n in args.sizes if n < 2]
    if bad:
        raise UsageError(f"team sizes must be >= 2, got {bad}")
    trials = experiment2_trials(args.trials, args.sizes, args.seed, args.safe_mode,
                                args.fairness, args.replan_every, args.eta)
    results = _sweep(args, trials)
    rows = team_runtime_rows(results)
    write_runtime_csv(rows, args.out_dir / "runtime.csv")
    print(format_runtime_table(rows))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "compare": cmd_compare,
            "exp1": cmd_exp1, "exp2": cmd_exp2}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # argparse exits 2 on bad flags, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ScenarioError, ScenarioGenerationError, json.JSONDecodeError) as exc:
        print(f"firefly: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"firefly: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
