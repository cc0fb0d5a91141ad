"""Command-line entry point: ``malmetrics {vote,estimate,simulate,sweep,evaluate}``.

Settings come from an optional ``--config`` file of ``key = value`` lines;
flags given on the command line override it. Failures print a JSON error
object on stderr, remove any files the command had already written, and
exit with status 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from dataclasses import replace

from . import __version__, io
from .adjusted import AdjustedCounts
from .asymptotics import all_detector_moments, portion_moments
from .errors import EstimationError, MalmetricsError, ParseError, PreconditionError
from .evaluation import SubsetPlan, estimate_matrix, run_replicated, subset_sweep, sweep_rows
from .model import ProfileSet, majority_vote
from .naive import truth_estimates
from .probability import McConfig, vote_correct_probs
from .synthetic import SimConfig, UniformRange, draw_profiles, generate, truly_heterogeneous_fixture

log = logging.getLogger("malmetrics")


def _mc(run: io.RunConfig) -> McConfig | None:
    return McConfig(run.mc_samples, run.master_seed) if run.mode == "mc" else None


def _embed(run: io.RunConfig, command: str) -> dict:
    return {"artifact_version": __version__, "command": command, "run_config": run.echo()}


def build_grid(run: io.RunConfig) -> list[tuple[str, SimConfig]]:
    """Expand the run config into labelled simulation configurations."""
    grid = []
    if run.fixture:
        base = truly_heterogeneous_fixture(run.replicates, m=run.m[0], master_seed=run.master_seed)
        for kappa, delta in itertools.product(run.kappa or (47,), run.delta):
            cfg = base.with_kappa(kappa)
            grid.append((f"fixture_k{kappa}_d{delta:g}", _with_delta(cfg, delta)))
        return grid
    if run.profiles:
        profiles = io.read_profiles(run.profiles)
        for m, pi1, delta in itertools.product(run.m, run.pi1, run.delta):
            cfg = SimConfig(m, pi1, len(profiles), profiles, run.replicates, run.master_seed, delta)
            grid.append((f"profiles_m{m}_pi{pi1:g}_d{delta:g}", cfg))
        return grid
    for m, pi1, n, eps, delta in itertools.product(run.m, run.pi1, run.n, run.epsilon, run.delta):
        cfg = SimConfig(m, pi1, n, UniformRange(eps, run.width), run.replicates, run.master_seed, delta)
        grid.append((f"m{m}_pi{pi1:g}_n{n}_e{eps:g}_d{delta:g}", cfg))
    return grid


def _with_delta(cfg: SimConfig, delta: float) -> SimConfig:
    return replace(cfg, perturbation_delta=delta)


# ---------------------------------------------------------------- commands


def cmd_vote(args, run, out):
    data = io.ingest(args.input, lenient=args.lenient)
    votes = majority_vote(data.matrix)
    io.write_votes(data.matrix.file_ids, votes, out.path("votes.csv"))
    return {"rows": data.matrix.m, **data.summary()}


def _asymptotics(adjusted, m: int, mc) -> dict:
    """Asymptotic moments of the naive estimators, evaluated at adjusted values."""
    vp = vote_correct_probs(adjusted.fp, adjusted.fn, mc, key=(2,))
    mu1, var1 = portion_moments(adjusted.pi1, m, vp.p11, vp.p01)
    out = {"pi1_naive": {"mean": mu1, "var": var1}, "detectors": None, "detectors_error": None}
    counts = AdjustedCounts.from_pi1(m, adjusted.pi1)
    try:
        moments = all_detector_moments(ProfileSet(adjusted.fp, adjusted.fn), counts.m0_hat, counts.m1_hat, mc)
    except PreconditionError as exc:
        out["detectors_error"] = str(exc)
        return out
    out["detectors"] = [
        {name: (None if mom.estimators[name] is None else {"mean": mom.estimators[name][0], "var": mom.estimators[name][1]})
         for name in ("fp", "fn", "ppv", "npv")}
        for mom in moments
    ]
    return out


def cmd_estimate(args, run, out):
    data = io.ingest(args.input, args.truth, lenient=args.lenient)
    mc = _mc(run)
    point = estimate_matrix(data.matrix, mc)
    report = {
        **_embed(run, "estimate"),
        "input": {"m": data.matrix.m, "n": data.matrix.n, "detectors": list(data.matrix.detector_names), **data.summary()},
        "mode": run.mode,
        **point.as_dict(),
        "asymptotics": None if point.adjusted is None else _asymptotics(point.adjusted, data.matrix.m, mc),
        "truth": None if data.truth is None else truth_estimates(data.matrix, data.truth).as_dict(),
    }
    io.write_json(report, out.path("estimates.json"))
    io.write_rows(sweep_rows([point]), out.path("estimates.csv"), ["n", "kind", "metric", "detector", "value"])
    return {"adjusted_error": point.error}


def cmd_simulate(args, run, out):
    written = 0
    for label, cfg in build_grid(run):
        profiles = draw_profiles(cfg)
        io.write_profiles(profiles, out.path(f"{label}_profiles.csv"))
        for r in range(cfg.n_replicates):
            ds = generate(cfg, profiles, r)
            io.write_matrix(ds.matrix, out.path(f"{label}_r{r}_matrix.csv"))
            io.write_truth(ds.matrix.file_ids, ds.truth, out.path(f"{label}_r{r}_truth.csv"))
            written += 1
    io.write_json({**_embed(run, "simulate"), "datasets": written}, out.path("simulate.json"))
    return {"datasets": written}


def _plan(args, run, n: int) -> SubsetPlan:
    path = args.subset_plan or run.subset_plan
    if not path:
        return SubsetPlan.single(n)
    spec = io.load_subset_plan(path)
    if spec.sets:
        return SubsetPlan(spec.sets, spec.seed)
    return SubsetPlan.build(n, spec.initial, spec.sizes, spec.seed)


def cmd_sweep(args, run, out):
    data = io.ingest(args.input, lenient=args.lenient)
    plan = _plan(args, run, data.matrix.n)
    points = subset_sweep(data.matrix, plan, _mc(run))
    report = {
        **_embed(run, "sweep"),
        "mode": run.mode,
        "plan": {"seed": plan.seed, "sets": [list(s) for s in plan.sets]},
        "subsets": [p.as_dict() for p in points],
    }
    io.write_json(report, out.path("sweep.json"))
    io.write_rows(sweep_rows(points), out.path("sweep_series.csv"), ["n", "kind", "metric", "detector", "value"])
    return {"subsets": len(points)}


def cmd_evaluate(args, run, out):
    runs = []
    rows = []
    mc = _mc(run)
    for label, cfg in build_grid(run):
        log.info("evaluating %s", label)
        rep = run_replicated(cfg, mc=mc, workers=run.workers)
        runs.append({"label": label, **rep.as_dict()})
        rows.extend(rep.series_rows(label))
    io.write_json({**_embed(run, "evaluate"), "runs": runs}, out.path("report.json"))
    io.write_rows(rows, out.path("series.csv"), ["config", "kind", "metric", "detector", "statistic", "value"])
    return {"configurations": len(runs)}


COMMANDS = {
    "vote": cmd_vote,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="malmetrics", description="Ground-truth-free detector metric estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value run configuration file")
    common.add_argument("--mode", choices=("exact", "mc"), help="tail probabilities: exact DP or Monte Carlo")
    common.add_argument("--seed", type=int, help="master seed (overrides master_seed)")
    common.add_argument("--mc-samples", type=int, help="Monte Carlo sample count")
    common.add_argument("--out-dir", help="output directory (default: out)")
    common.add_argument("--workers", type=int, help="parallel replicate workers")
    common.add_argument("-v", "--verbose", action="store_true")

    matrix_in = argparse.ArgumentParser(add_help=False)
    matrix_in.add_argument("--input", required=True, help="label matrix CSV")
    matrix_in.add_argument("--lenient", action="store_true", help="drop malformed rows instead of failing")

    sub.add_parser("vote", parents=[common, matrix_in], help="majority-vote labels")
    p = sub.add_parser("estimate", parents=[common, matrix_in], help="naive and adjusted metric estimates")
    p.add_argument("--truth", help="optional truth CSV (file_id,truth)")
    p = sub.add_parser("simulate", parents=[common], help="write synthetic datasets")
    p.add_argument("--replicates", type=int, help="datasets per configuration (overrides replicates)")
    p = sub.add_parser("sweep", parents=[common, matrix_in], help="estimates over nested detector subsets")
    p.add_argument("--subset-plan", help="subset plan JSON")
    p = sub.add_parser("evaluate", parents=[common], help="replicated bias study on synthetic data")
    p.add_argument("--replicates", type=int, help="replicates per configuration (overrides replicates)")
    return parser


def resolve_config(args) -> io.RunConfig:
    run = io.load_run_config(args.config) if args.config else io.RunConfig()
    return run.replace(
        mode=args.mode,
        master_seed=args.seed,
        mc_samples=args.mc_samples,
        out_dir=args.out_dir,
        workers=args.workers,
        replicates=getattr(args, "replicates", None),
        subset_plan=getattr(args, "subset_plan", None),
    )


def _error_payload(exc: BaseException) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ParseError):
        payload["line"] = exc.line
    return payload


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run = resolve_config(args)
        with io.OutputSet(run.out_dir) as out:
            summary = COMMANDS[args.command](args, run, out)
            files = [str(p) for p in out.written]
    except (MalmetricsError, EstimationError, OSError, ValueError) as exc:
        print(json.dumps(_error_payload(exc), sort_keys=True), file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, "outputs": files, **io.to_jsonable(summary)}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
