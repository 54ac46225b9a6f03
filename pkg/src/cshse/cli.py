"""Command-line front end.

Subcommands: validate, design, simulate, recover, run, report.  Exit codes:
0 success, 2 validation/argument problem, 3 I/O problem, 4 pipeline stage
failure.  All randomness flows from --seed (stage sub-seeds are derived by
SeedSequence spawning, see pipeline.derive_stage_seeds), so every subcommand
is byte-reproducible.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import jsonutil, pipeline
from .design import DesignInfeasibleError, GaParams, design_from_rows, ga_select_rows
from .measurement import (
    CorruptionSpec,
    build_candidate_matrix,
    make_injection_scenario,
    simulate_measurements,
)
from .network import (
    CaseFormatError,
    CaseValidationError,
    SingularModelError,
    build_harmonic_model,
    load_case,
)
from .recovery import SolverConfig
from .pipeline import ExperimentSpec, PipelineStageError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_STAGE = 4


def _default_outdir() -> str:
    return os.environ.get("CSHSE_OUTDIR", "cshse_out")


def _parse_orders(text: str) -> tuple[int, ...]:
    try:
        orders = tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad order list {text!r}")
    if not orders:
        raise argparse.ArgumentTypeError("order list is empty")
    return orders


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="cshse",
        description="Harmonic state estimation by compressive sensing.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a case file and print a summary")
    p.add_argument("case")

    p = sub.add_parser("design", help="select monitor rows by GA coherence minimization")
    _add_design_args(p)
    p.add_argument("--out", default=None, help="output directory (default $CSHSE_OUTDIR)")

    p = sub.add_parser("simulate", help="draw a scenario and simulate measurements")
    p.add_argument("case")
    p.add_argument("--design", required=True, help="design.json from 'design'")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--magnitude-mean", type=float, default=0.2)
    p.add_argument("--magnitude-std", type=float, default=0.05)
    p.add_argument("--corrupt", type=float, default=None, metavar="FRAC")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("recover", help="estimate injections from measurements")
    p.add_argument("case")
    p.add_argument("--design", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--solver", default="bp")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--sparsity-k", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("run", help="full experiment: design, simulate, recover, report")
    _add_design_args(p)
    p.add_argument("--design-file", default=None, help="reuse a cached design.json")
    p.add_argument("--magnitude-mean", type=float, default=0.2)
    p.add_argument("--magnitude-std", type=float, default=0.05)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--noise-free", action="store_true", default=False)
    group.add_argument("--corrupt", type=float, default=None, metavar="FRAC",
                       help="apply all three corruptions at this fraction")
    p.add_argument("--solver", default=None,
                   help="default: bp when noise-free, bpdn when corrupted")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--support-threshold", type=float, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("report", help="print the summary table of a finished run")
    p.add_argument("out_dir")
    return top


def _add_design_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("case")
    p.add_argument("--k", type=int, default=30, help="assumed injection sparsity")
    p.add_argument("--m", type=int, default=60, help="number of monitor rows")
    p.add_argument("--orders", type=_parse_orders, default=pipeline.DEFAULT_ORDERS,
                   help="comma-separated harmonic orders (default odd 3..23)")
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--generations", type=int, default=300)
    p.add_argument("--crossover", type=float, default=0.9)
    p.add_argument("--mutation", type=float, default=0.05)
    p.add_argument("--elitism", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)


def _ga_params(args) -> GaParams:
    return GaParams(
        population_size=args.population,
        generations=args.generations,
        crossover_rate=args.crossover,
        mutation_rate=args.mutation,
        elitism_count=args.elitism,
        rng_seed=args.seed,
    )


def cmd_validate(args) -> int:
    case = load_case(args.case)
    print(case.summary())
    return EXIT_OK


def cmd_design(args) -> int:
    out_dir = args.out or _default_outdir()
    case = load_case(args.case)
    if args.m < 2 * args.k:
        print(f"error: m must exceed 2k (m={args.m}, k={args.k})", file=sys.stderr)
        return EXIT_INVALID
    candidates = {
        h: build_candidate_matrix(build_harmonic_model(case, h))
        for h in args.orders
    }
    seeds = pipeline.derive_stage_seeds(args.seed, len(args.orders))
    params = replace(_ga_params(args), rng_seed=seeds["design"])
    design = ga_select_rows(candidates, args.m, args.k, args.orders, params)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "design.json")
    jsonutil.dump_json(path, pipeline.design_to_dict(design))
    counts = design.monitor_counts()
    print(f"objective: {design.objective:.6f}")
    print(f"placements: {design.m} ({counts['voltage']} voltage, "
          f"{counts['current']} current)")
    print(f"spark certified: {design.certified}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out_dir = args.out or _default_outdir()
    case = load_case(args.case)
    raw = jsonutil.load_json(args.design)
    orders = tuple(int(h) for h in raw["orders"])
    candidates = {
        h: build_candidate_matrix(build_harmonic_model(case, h)) for h in orders
    }
    design = design_from_rows(raw["selected_rows"], candidates, raw.get("k", args.k), orders)
    seeds = pipeline.derive_stage_seeds(args.seed, len(orders))
    corruption = None
    if args.corrupt is not None:
        corruption = CorruptionSpec(args.corrupt, args.corrupt, args.corrupt, 0)
    scenario = make_injection_scenario(
        case.n_bus, args.k, orders,
        magnitude_mean=args.magnitude_mean, magnitude_std=args.magnitude_std,
        corruption=corruption, seed=seeds["scenario"],
    )
    bus_ids = [b.id for b in case.buses]
    os.makedirs(out_dir, exist_ok=True)
    jsonutil.dump_json(
        os.path.join(out_dir, "scenario.json"),
        {
            "orders": list(orders),
            "k": args.k,
            "support_positions": list(scenario.support),
            "support_bus_ids": [bus_ids[i] for i in scenario.support],
            "injections": {
                str(h): jsonutil.complex_to_pairs(scenario.injections[h])
                for h in orders
            },
            "background_std": {str(h): scenario.background_std[h] for h in orders},
            "seed": args.seed,
        },
    )
    values = {}
    for i, h in enumerate(orders):
        corr = None
        if corruption is not None:
            corr = replace(corruption, rng_seed=seeds["noise"][i])
        ms = simulate_measurements(
            candidates[h], design.selected_rows, scenario.injections[h], corr
        )
        values[str(h)] = jsonutil.complex_to_pairs(ms.values)
    jsonutil.dump_json(
        os.path.join(out_dir, "measurements.json"),
        {
            "orders": list(orders),
            "selected_rows": list(design.selected_rows),
            "corrupted": corruption is not None,
            "values": values,
        },
    )
    print(f"wrote scenario.json and measurements.json to {out_dir}")
    return EXIT_OK


def cmd_recover(args) -> int:
    out_dir = args.out or _default_outdir()
    case = load_case(args.case)
    braw = jsonutil.load_json(args.design)
    mraw = jsonutil.load_json(args.measurements)
    orders = tuple(int(h) for h in mraw["orders"])
    models = {h: build_harmonic_model(case, h) for h in orders}
    candidates = {h: build_candidate_matrix(models[h]) for h in orders}
    design = design_from_rows(braw["selected_rows"], candidates, braw.get("k", 0), orders)
    from .measurement import MeasurementSet
    measurements = {
        h: MeasurementSet(
            h,
            jsonutil.pairs_to_complex(mraw["values"][str(h)]),
            tuple(design.monitors),
        )
        for h in orders
    }
    config = SolverConfig(epsilon=args.epsilon, lam=args.lam,
                          sparsity_k=args.sparsity_k)
    est = pipeline.estimate(design, measurements, models, args.solver, config)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "estimate.json")
    jsonutil.dump_json(
        path,
        {
            "orders": list(orders),
            "solver": args.solver,
            "failed_orders": list(est.failed_orders),
            "injections": {
                str(h): jsonutil.complex_to_pairs(est.injections[h]) for h in orders
            },
            "voltages": {
                str(h): jsonutil.complex_to_pairs(est.voltages[h]) for h in orders
            },
            "diagnostics": {
                str(h): {
                    "residual_l2": d.residual_l2,
                    "iterations": d.iterations,
                    "converged": d.converged,
                    "objective_value": d.objective_value,
                    "notes": list(d.notes),
                }
                for h, d in est.diagnostics.items()
            },
        },
    )
    print(f"wrote {path}")
    return EXIT_OK


def _print_report_table(rep: dict) -> None:
    print(f"{'order':>5} {'precision':>9} {'recall':>7} "
          f"{'max |dI|':>12} {'max |dV|':>12}")
    for h in sorted(rep["per_order"], key=int):
        row = rep["per_order"][h]
        print(f"{h:>5} {row['precision']:>9.3f} {row['recall']:>7.3f} "
              f"{row['max_current_error']:>12.4e} {row['max_voltage_error']:>12.4e}")
    ov = rep["overall"]
    print(f"overall: max current error {ov['max_current_error']:.4e} p.u., "
          f"max voltage error {ov['max_voltage_error']:.4e} p.u., "
          f"min recall {ov['min_recall']:.3f}")


def cmd_run(args) -> int:
    out_dir = args.out or _default_outdir()
    if args.m < 2 * args.k:
        print(f"error: m must exceed 2k (m={args.m}, k={args.k})", file=sys.stderr)
        return EXIT_INVALID
    corruption = None
    if args.corrupt is not None:
        corruption = CorruptionSpec(args.corrupt, args.corrupt, args.corrupt, 0)
    solver = args.solver or ("bpdn" if corruption is not None else "bp")
    spec = ExperimentSpec(
        case_path=args.case,
        orders=args.orders,
        k=args.k,
        m=args.m,
        magnitude_mean=args.magnitude_mean,
        magnitude_std=args.magnitude_std,
        corruption=corruption,
        solver=solver,
        solver_config=SolverConfig(epsilon=args.epsilon, sparsity_k=2 * args.k),
        ga=_ga_params(args),
        seed=args.seed,
        design_path=args.design_file,
        support_threshold=args.support_threshold,
    )
    result = pipeline.run_experiment(spec, out_dir)
    rep = pipeline.report_to_dict(result, {})
    _print_report_table(rep)
    print(f"artifacts in {out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    rep = jsonutil.load_json(os.path.join(args.out_dir, "report.json"))
    _print_report_table(rep)
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "design": cmd_design,
    "simulate": cmd_simulate,
    "recover": cmd_recover,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (CaseFormatError, CaseValidationError, SingularModelError,
            DesignInfeasibleError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
