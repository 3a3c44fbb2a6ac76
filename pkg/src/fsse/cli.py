"""Command-line front end.

Exit codes: 0 success, 2 unreadable or invalid input, 3 a sparse
observability requirement fails, 4 a search found no consistent candidate.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from .attack_sim import (
    BOTH,
    EXHAUSTIVE,
    FSSE,
    Pipeline,
    run_scenario,
    summarize,
    write_agreement_csv,
    write_estimates_csv,
    write_trace_csv,
)
from .agreement import MEAN, MEDIAN
from .estimator import ExhaustionError, ObservabilityError
from .scenario import ScenarioDocument, ScenarioError
from .tables import method_table, table1, table_average

EXIT_OK, EXIT_PARSE, EXIT_OBSERVABILITY, EXIT_EXHAUSTED = 0, 2, 3, 4

log = logging.getLogger("fsse")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2)
        fh.write("\n")


def _prepare(doc: ScenarioDocument, strict: bool) -> Pipeline:
    disturbance = None if doc.disturbance is None else np.array(doc.disturbance)
    kw = {} if doc.equiv_tol is None else {"equiv_tol": doc.equiv_tol}
    return Pipeline.prepare(
        doc.to_model(), doc.w_bound, doc.v_bounds, disturbance, require_observable=strict, **kw
    )


def _constants_doc(pipeline: Pipeline) -> dict:
    c = pipeline.constants
    return {
        "psi_bar": pipeline.bounds.psi_bar,
        "Delta_s": c.Delta_s,
        "delta_2s": c.delta_2s,
        "M_T": c.M_T,
        "m_T": c.m_T,
        "eta": c.eta,
        "epsilon": c.epsilon,
        "radius_fsse": c.radius(c.kappa_fsse, pipeline.bounds.psi_bar),
        "radius_exhaustive": c.radius(c.kappa_full, pipeline.bounds.psi_bar),
    }


def cmd_partition(args) -> int:
    from .categorization import de_partition
    from .system_model import build_observation_stack

    doc = ScenarioDocument.load(args.scenario)
    model = doc.to_model()
    start = time.perf_counter()
    stack = build_observation_stack(model)
    partition = de_partition(stack) if doc.equiv_tol is None else de_partition(stack, doc.equiv_tol)
    elapsed = time.perf_counter() - start

    print(f"scenario: {doc.name}  (p={model.p}, n={model.n}, tau={model.tau})")
    print("sensor ranks: " + " ".join(f"S{i + 1}:{r}" for i, r in enumerate(stack.ranks)))
    print(f"{'type':<6}{'members':<24}{'rank':>5}{'max ||T||':>14}")
    for k, t in enumerate(partition.types, start=1):
        members = "{" + ",".join(f"S{j + 1}" for j in t.members) + "}"
        tmax = max(np.linalg.norm(T, 2) for T in t.transforms.values())
        print(f"{k:<6}{members:<24}{t.rank:>5}{tmax:>14.6g}")
    print(f"M_T = {partition.M_T}  m_T = {partition.m_T}  ({elapsed * 1e3:.1f} ms)")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        body = partition.to_dict()
        body["ranks"] = list(stack.ranks)
        _write_json(out / "partition.json", body)
    return EXIT_OK


def _run_one(doc: ScenarioDocument, seed: int, mode: str, agreement: str, strict: bool,
             pipeline: Optional[Pipeline] = None):
    pipeline = pipeline or _prepare(doc, strict)
    trace = run_scenario(
        pipeline, doc.to_attack(seed), doc.to_controller(), doc.horizon,
        np.zeros(pipeline.model.n) if doc.x0 is None else np.array(doc.x0),
        mode, agreement,
    )
    return pipeline, trace


def _check_horizon(doc: ScenarioDocument) -> None:
    tau = doc.to_model().tau
    if doc.horizon < tau:
        raise ScenarioError("horizon", f"must be at least the window length {tau}, got {doc.horizon}")


def cmd_run(args) -> int:
    doc = ScenarioDocument.load(args.scenario)
    _check_horizon(doc)
    mode = args.mode or doc.estimator
    agreement = args.agreement or doc.agreement
    seed = doc.seed if args.seed is None else args.seed
    pipeline, trace = _run_one(doc, seed, mode, agreement, args.strict)

    summary = {
        "scenario": doc.name,
        "seed": seed,
        "mode": mode,
        "agreement": agreement,
        "full_search_size": len(pipeline.full),
        "constants": _constants_doc(pipeline),
        "estimators": summarize(trace, pipeline),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    write_estimates_csv(trace, out / "estimates.csv")
    if mode in (FSSE, BOTH):
        write_agreement_csv(trace, out / "agreement.csv")
    _write_json(out / "summary.json", summary)

    for name, s in summary["estimators"].items():
        print(
            f"{name:<11} windows={s['windows']} exhausted={s['exhausted']} "
            f"mean|Sigma|={s['mean_search_size']} mean_evaluated={s['mean_candidates_evaluated']} "
            f"mean_err={s['mean_error_norm']} violations={s['bound_violations']}"
        )
    if any(s["exhausted"] for s in summary["estimators"].values()):
        return EXIT_EXHAUSTED
    return EXIT_OK


def _bench_task(task):
    doc_dict, seed, agreement, strict = task
    doc = ScenarioDocument.from_dict(doc_dict)
    pipeline, trace = _run_one(doc, seed, BOTH, agreement, strict)
    return seed, summarize(trace, pipeline)


def cmd_bench(args) -> int:
    doc = ScenarioDocument.load(args.scenario)
    _check_horizon(doc)
    agreement = args.agreement or doc.agreement
    base = doc.seed if args.seed is None else args.seed
    seeds = list(range(base, base + args.runs))
    tasks = [(doc.to_dict(), s, agreement, args.strict) for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_task, tasks))
    else:
        results = [_bench_task(t) for t in tasks]

    rows = []
    totals = {FSSE: 0.0, EXHAUSTIVE: 0.0}
    for seed, s in results:
        f, e = s[FSSE], s[EXHAUSTIVE]
        totals[FSSE] += f["wall_seconds"]
        totals[EXHAUSTIVE] += e["wall_seconds"]
        rows.append({
            "seed": seed,
            "fsse_mean_evaluated": f["mean_candidates_evaluated"],
            "fsse_mean_search_size": f["mean_search_size"],
            "exhaustive_mean_evaluated": e["mean_candidates_evaluated"],
            "fsse_seconds": f["wall_seconds"],
            "exhaustive_seconds": e["wall_seconds"],
            "fsse_exhausted": f["exhausted"],
            "exhaustive_exhausted": e["exhausted"],
            "fsse_violations": f["bound_violations"],
            "exhaustive_violations": e["bound_violations"],
        })
    mean = lambda key: float(np.mean([r[key] for r in rows if r[key] is not None]))  # noqa: E731
    report = {
        "scenario": doc.name,
        "runs": len(rows),
        "note": "wall times are machine dependent; compare the ratio and the candidate counts",
        "fsse_mean_evaluated": mean("fsse_mean_evaluated"),
        "fsse_mean_search_size": mean("fsse_mean_search_size"),
        "exhaustive_mean_evaluated": mean("exhaustive_mean_evaluated"),
        "fsse_seconds": totals[FSSE],
        "exhaustive_seconds": totals[EXHAUSTIVE],
        "speedup": totals[EXHAUSTIVE] / totals[FSSE] if totals[FSSE] > 0 else math.inf,
        "bound_violations": sum(r["fsse_violations"] + r["exhaustive_violations"] for r in rows),
        "exhausted_windows": sum(r["fsse_exhausted"] + r["exhaustive_exhausted"] for r in rows),
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench.csv", "w", encoding="utf-8") as fh:
            fh.write(",".join(rows[0]) + "\n")
            for r in rows:
                fh.write(",".join("" if v is None else format(v, ".17g") if isinstance(v, float) else str(v)
                                  for v in r.values()) + "\n")
        _write_json(out / "bench.json", report)
    print(f"{doc.name}: {report['runs']} runs")
    print(f"  candidates evaluated per window: fsse {report['fsse_mean_evaluated']:.3f}, "
          f"exhaustive {report['exhaustive_mean_evaluated']:.3f}")
    print(f"  mean pruned search size: {report['fsse_mean_search_size']:.3f}")
    print(f"  wall time: fsse {report['fsse_seconds']:.4f} s, exhaustive {report['exhaustive_seconds']:.4f} s, "
          f"ratio {report['speedup']:.2f} (machine dependent)")
    print(f"  bound violations {report['bound_violations']}, exhausted windows {report['exhausted_windows']}")
    return EXIT_EXHAUSTED if report["exhausted_windows"] else EXIT_OK


def cmd_table1(args) -> int:
    rows = table1(args.p, args.s)
    total = math.comb(args.p, args.s)
    print(f"{'grouping':<36}{'agreeable':<28}{'|Sigma_T|':>10}  candidates")
    for r in rows:
        groups, agree = r.config.label()
        cands = " ".join("G" + "".join(str(i + 1) for i in c) for c in r.candidates)
        print(f"{groups:<36}{agree:<28}{r.size:>10}  {cands}")
    avg = table_average(rows)
    print(f"average {avg:.4g} of {total} ({100 * (1 - avg / total):.1f}% reduction)")
    return EXIT_OK


def cmd_method_table(args) -> int:
    rows = method_table(args.p_list, args.s)
    print(f"{'p':>4}{'exhaustive':>12}{'two bad':>9}{'one bad':>9}{'all bad':>9}{'(pruned)':>10}{'average':>9}")
    for r in rows:
        print(f"{r.p:>4}{r.exhaustive:>12}{r.two_disagree:>9}{r.one_disagree:>9}"
              f"{r.all_disagree:>9}{r.all_disagree_pruned:>10}{r.average:>9}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p, out_required=False):
        p.add_argument("--scenario", required=True, help="scenario JSON document")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--strict", action="store_true",
                       help="fail (exit 3) when the error-bound constants are undefined")

    p = sub.add_parser("partition", help="offline sensor-type partition")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("run", help="closed-loop simulation with attack and estimators")
    scenario_args(p, out_required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=[FSSE, EXHAUSTIVE, BOTH])
    p.add_argument("--agreement", choices=[MEAN, MEDIAN])
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="paired FSSE vs exhaustive runs over many seeds")
    scenario_args(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--agreement", choices=[MEAN, MEDIAN])
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("table1", help="search-space sizes for grouping/agreement configurations")
    p.add_argument("--p", type=int, default=6)
    p.add_argument("--s", type=int, default=2)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("method-table", help="pairwise-type search-space sizes")
    p.add_argument("--p-list", type=int, nargs="+", default=[10, 12, 14, 16, 18, 20])
    p.add_argument("--s", type=int, default=2)
    p.set_defaults(func=cmd_method_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ObservabilityError as exc:
        print(f"observability: {exc}", file=sys.stderr)
        return EXIT_OBSERVABILITY
    except ExhaustionError as exc:
        print(f"exhausted: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED


if __name__ == "__main__":
    sys.exit(main())
