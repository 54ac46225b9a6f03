"""End-to-end harmonic state estimation and the reproduction harness.

The pipeline is: load case -> per-order models -> candidate matrices ->
row-selection design -> injection scenario -> simulated measurements ->
per-order sparse recovery -> voltage reconstruction -> evaluation against
the ground truth.  A single experiment seed drives every random stage
through numpy SeedSequence spawning (children in fixed positions: 0 design,
1 scenario, 2 measurement noise, 3 matrix corruption; per-order streams are
spawned off children 2 and 3 in order position).
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import jsonutil
from .design import (
    GaParams,
    SensingDesign,
    design_from_rows,
    extract_monitors,
    ga_select_rows,
)
from .measurement import (
    CandidateMatrix,
    CorruptionSpec,
    MeasurementSet,
    build_candidate_matrix,
    corrupt_matrix,
    make_injection_scenario,
    simulate_measurements,
    stack_real,
    unstack,
)
from .network import HarmonicOrderModel, NetworkCase, build_harmonic_model, load_case
from .recovery import DEFAULT_CONFIG, RecoveryResult, SolverConfig, solve

DEFAULT_ORDERS = tuple(range(3, 24, 2))


class PipelineStageError(Exception):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def reconstruct_voltages(model: HarmonicOrderModel, x: np.ndarray) -> np.ndarray:
    """Bus voltages from an injection vector: V^h = Z^h X^h."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (model.n_bus,):
        raise ValueError(f"injection vector must have length {model.n_bus}")
    return model.zbus @ x


@dataclass(frozen=True)
class HseEstimate:
    orders: tuple[int, ...]
    injections: dict[int, np.ndarray] = field(compare=False)
    voltages: dict[int, np.ndarray] = field(compare=False)
    diagnostics: dict[int, RecoveryResult] = field(compare=False)
    failed_orders: tuple[int, ...] = ()


def estimate(
    design: SensingDesign,
    measurements: dict[int, MeasurementSet],
    models: dict[int, HarmonicOrderModel],
    solver: str = "bp",
    config: SolverConfig = DEFAULT_CONFIG,
    sensing_matrices: dict[int, np.ndarray] | None = None,
) -> HseEstimate:
    """Per-order sparse recovery and voltage reconstruction.

    ``sensing_matrices`` overrides the design's per-order stacked matrices
    (the degraded-model study recovers with a corrupted matrix while the
    measurements come from the true one).  Solver failures flag the order
    instead of aborting the remaining orders.
    """
    injections: dict[int, np.ndarray] = {}
    voltages: dict[int, np.ndarray] = {}
    diags: dict[int, RecoveryResult] = {}
    failed = []
    for h in design.orders:
        meas = measurements[h]
        model = models[h]
        hmat = (sensing_matrices or design.per_order_H)[h]
        y = stack_real(meas.values)
        if y.size != hmat.shape[0]:
            raise ValueError(
                f"order {h}: measurement length {meas.values.size} does not "
                f"match design rows {hmat.shape[0] // 2}"
            )
        try:
            res = solve(solver, hmat, y, config)
            x = unstack(res.x_hat)
        except Exception as exc:                      # noqa: BLE001
            failed.append(h)
            res = RecoveryResult(
                np.zeros(hmat.shape[1]), float(np.linalg.norm(y)), solver, 0,
                False, 0.0, (f"solver failed: {exc}",),
            )
            x = np.zeros(model.n_bus, dtype=complex)
        injections[h] = x
        voltages[h] = model.zbus @ x
        diags[h] = res
    return HseEstimate(design.orders, injections, voltages, diags, tuple(failed))


@dataclass(frozen=True)
class Truth:
    """Ground truth to evaluate against; ``support`` is the designated
    source set (bus positions) when the scenario provides one."""

    injections: dict[int, np.ndarray] = field(compare=False)
    voltages: dict[int, np.ndarray] = field(compare=False)
    support: tuple[int, ...] | None = None


@dataclass(frozen=True)
class OrderEvaluation:
    order: int
    precision: float
    recall: float
    max_current_error: float
    mean_current_error: float
    max_voltage_error: float
    mean_voltage_error: float
    false_sources: tuple[int, ...]
    missed_sources: tuple[int, ...]
    support_threshold: float


@dataclass(frozen=True)
class EvaluationReport:
    per_order: tuple[OrderEvaluation, ...]
    max_current_error: float
    mean_current_error: float
    max_voltage_error: float
    mean_voltage_error: float
    min_precision: float
    min_recall: float


def evaluate(truth: Truth, est: HseEstimate, support_threshold=1e-6) -> EvaluationReport:
    """Support detection and per-unit error metrics per order.

    ``support_threshold`` is a magnitude cutoff (scalar or per-order map).
    Current errors are |X_hat - X| moduli; voltage errors are magnitudes
    ||V_hat| - |V||.  Empty detected/true sets give precision/recall 1.
    """
    rows = []
    for h in est.orders:
        thr = support_threshold[h] if isinstance(support_threshold, dict) else support_threshold
        x_true = truth.injections[h]
        x_hat = est.injections[h]
        if x_true.shape != x_hat.shape:
            raise ValueError(f"order {h}: truth/estimate dimensions differ")
        if truth.support is not None:
            true_set = set(truth.support)
        else:
            true_set = set(np.nonzero(np.abs(x_true) > thr)[0].tolist())
        est_set = set(np.nonzero(np.abs(x_hat) > thr)[0].tolist())
        tp = len(true_set & est_set)
        precision = tp / len(est_set) if est_set else 1.0
        recall = tp / len(true_set) if true_set else 1.0
        cur_err = np.abs(x_hat - x_true)
        vol_err = np.abs(np.abs(est.voltages[h]) - np.abs(truth.voltages[h]))
        rows.append(
            OrderEvaluation(
                order=h,
                precision=precision,
                recall=recall,
                max_current_error=float(cur_err.max()),
                mean_current_error=float(cur_err.mean()),
                max_voltage_error=float(vol_err.max()),
                mean_voltage_error=float(vol_err.mean()),
                false_sources=tuple(sorted(est_set - true_set)),
                missed_sources=tuple(sorted(true_set - est_set)),
                support_threshold=float(thr),
            )
        )
    return EvaluationReport(
        per_order=tuple(rows),
        max_current_error=max(r.max_current_error for r in rows),
        mean_current_error=float(np.mean([r.mean_current_error for r in rows])),
        max_voltage_error=max(r.max_voltage_error for r in rows),
        mean_voltage_error=float(np.mean([r.mean_voltage_error for r in rows])),
        min_precision=min(r.precision for r in rows),
        min_recall=min(r.recall for r in rows),
    )


@dataclass(frozen=True)
class ExperimentSpec:
    case_path: str
    orders: tuple[int, ...] = DEFAULT_ORDERS
    k: int = 30
    m: int = 60
    magnitude_mean: float = 0.2
    magnitude_std: float = 0.05
    reference_order: int = 3
    corruption: CorruptionSpec | None = None
    solver: str = "bp"
    solver_config: SolverConfig = DEFAULT_CONFIG
    ga: GaParams = GaParams()
    seed: int = 0
    design_path: str | None = None
    support_threshold: float | None = None
    fundamental_voltage: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    case: NetworkCase
    design: SensingDesign
    scenario: object
    measurements: dict[int, MeasurementSet] = field(compare=False)
    estimate: HseEstimate = None
    truth: Truth = None
    report: EvaluationReport = None


def _seed_int(seed_seq) -> int:
    return int(seed_seq.generate_state(1)[0])


def derive_stage_seeds(seed: int, n_orders: int) -> dict:
    """The documented seed-splitting scheme for one experiment."""
    root = np.random.SeedSequence(seed)
    design_ss, scenario_ss, noise_ss, matrix_ss = root.spawn(4)
    return {
        "design": _seed_int(design_ss),
        "scenario": _seed_int(scenario_ss),
        "noise": [_seed_int(s) for s in noise_ss.spawn(n_orders)],
        "matrix": [_seed_int(s) for s in matrix_ss.spawn(n_orders)],
    }


def run_experiment(spec: ExperimentSpec, out_dir: str | None = None) -> ExperimentResult:
    """Execute the full study described by ``spec``; optionally write artifacts.

    Stages raise ``PipelineStageError`` with the stage name.  The same spec
    (same seed) always produces identical results and artifact bytes.
    """
    seeds = derive_stage_seeds(spec.seed, len(spec.orders))

    def stage(name, fn):
        try:
            return fn()
        except PipelineStageError:
            raise
        except Exception as exc:                      # noqa: BLE001
            raise PipelineStageError(name, exc) from exc

    case = stage("load_case", lambda: load_case(spec.case_path))
    models = stage(
        "harmonic_models",
        lambda: {h: build_harmonic_model(case, h) for h in spec.orders},
    )
    candidates = stage(
        "candidate_matrices",
        lambda: {h: build_candidate_matrix(models[h]) for h in spec.orders},
    )

    def make_design():
        if spec.design_path:
            raw = jsonutil.load_json(spec.design_path)
            return design_from_rows(
                raw["selected_rows"], candidates, raw.get("k", spec.k), spec.orders
            )
        params = replace(spec.ga, rng_seed=seeds["design"])
        return ga_select_rows(candidates, spec.m, spec.k, spec.orders, params)

    design = stage("sensing_design", make_design)

    scenario = stage(
        "scenario",
        lambda: make_injection_scenario(
            case.n_bus,
            spec.k,
            spec.orders,
            magnitude_mean=spec.magnitude_mean,
            magnitude_std=spec.magnitude_std,
            reference_order=spec.reference_order,
            corruption=spec.corruption,
            seed=seeds["scenario"],
        ),
    )

    def make_measurements():
        out = {}
        for i, h in enumerate(spec.orders):
            corr = None
            if spec.corruption is not None:
                corr = replace(spec.corruption, rng_seed=seeds["noise"][i])
            out[h] = simulate_measurements(
                candidates[h], design.selected_rows, scenario.injections[h], corr
            )
        return out

    measurements = stage("measurements", make_measurements)

    def make_sensing():
        if spec.corruption is None or spec.corruption.matrix_error_std == 0:
            return None
        return {
            h: corrupt_matrix(
                design.per_order_H[h],
                replace(spec.corruption, rng_seed=seeds["matrix"][i]),
            )
            for i, h in enumerate(spec.orders)
        }

    sensing = stage("matrix_corruption", make_sensing)

    est = stage(
        "recovery",
        lambda: estimate(
            design, measurements, models, spec.solver, spec.solver_config, sensing
        ),
    )

    truth = Truth(
        injections=scenario.injections,
        voltages={
            h: models[h].zbus @ scenario.injections[h] for h in spec.orders
        },
        support=scenario.support,
    )
    if spec.support_threshold is not None:
        thresholds = spec.support_threshold
    elif spec.corruption is not None:
        thresholds = {
            h: 3.0 * scenario.background_std[h] for h in spec.orders
        }
    else:
        thresholds = 1e-6
    report = stage("evaluate", lambda: evaluate(truth, est, thresholds))

    result = ExperimentResult(
        spec, case, design, scenario, measurements, est, truth, report
    )
    if out_dir is not None:
        stage("artifacts", lambda: write_artifacts(result, out_dir, thresholds))
    return result


# ------------------------------------------------------------- artifacts

def design_to_dict(design: SensingDesign) -> dict:
    return {
        "type": "sensing_design",
        "orders": list(design.orders),
        "m": design.m,
        "k": design.k,
        "selected_rows": list(design.selected_rows),
        "objective": design.objective,
        "certified": design.certified,
        "per_order": {
            str(s.order): {
                "gram_deviation": s.gram_deviation,
                "coherence": s.coherence,
                "spark_lower_bound": s.spark_lower_bound,
                "certified": s.certified,
                "full_row_rank": s.full_row_rank,
            }
            for s in design.stats
        },
        "monitors": extract_monitors(design),
        "monitor_counts": design.monitor_counts(),
    }


def write_artifacts(result: ExperimentResult, out_dir: str, thresholds) -> None:
    os.makedirs(out_dir, exist_ok=True)
    spec = result.spec
    scen = result.scenario
    case = result.case
    bus_ids = [b.id for b in case.buses]

    jsonutil.dump_json(os.path.join(out_dir, "design.json"), design_to_dict(result.design))
    jsonutil.dump_json(
        os.path.join(out_dir, "scenario.json"),
        {
            "orders": list(scen.orders),
            "k": spec.k,
            "support_positions": list(scen.support),
            "support_bus_ids": [bus_ids[i] for i in scen.support],
            "injections": {
                str(h): jsonutil.complex_to_pairs(scen.injections[h])
                for h in scen.orders
            },
            "background_std": {str(h): scen.background_std[h] for h in scen.orders},
            "seed": spec.seed,
        },
    )
    jsonutil.dump_json(
        os.path.join(out_dir, "measurements.json"),
        {
            "orders": list(spec.orders),
            "selected_rows": list(result.design.selected_rows),
            "corrupted": spec.corruption is not None,
            "values": {
                str(h): jsonutil.complex_to_pairs(result.measurements[h].values)
                for h in spec.orders
            },
        },
    )
    jsonutil.dump_json(
        os.path.join(out_dir, "estimate.json"),
        {
            "orders": list(spec.orders),
            "solver": spec.solver,
            "failed_orders": list(result.estimate.failed_orders),
            "injections": {
                str(h): jsonutil.complex_to_pairs(result.estimate.injections[h])
                for h in spec.orders
            },
            "voltages": {
                str(h): jsonutil.complex_to_pairs(result.estimate.voltages[h])
                for h in spec.orders
            },
            "diagnostics": {
                str(h): {
                    "residual_l2": d.residual_l2,
                    "iterations": d.iterations,
                    "converged": d.converged,
                    "objective_value": d.objective_value,
                    "notes": list(d.notes),
                }
                for h, d in result.estimate.diagnostics.items()
            },
        },
    )
    jsonutil.dump_json(
        os.path.join(out_dir, "report.json"), report_to_dict(result, thresholds)
    )
    write_report_csv(os.path.join(out_dir, "report.csv"), result)


def report_to_dict(result: ExperimentResult, thresholds) -> dict:
    rep = result.report
    spec = result.spec
    bus_ids = [b.id for b in result.case.buses]
    return {
        "case": os.path.basename(spec.case_path),
        "solver": spec.solver,
        "seed": spec.seed,
        "k": spec.k,
        "m": spec.m,
        "orders": list(spec.orders),
        "corrupted": spec.corruption is not None,
        "support_threshold": (
            {str(h): v for h, v in thresholds.items()}
            if isinstance(thresholds, dict)
            else thresholds
        ),
        "overall": {
            "max_current_error": rep.max_current_error,
            "mean_current_error": rep.mean_current_error,
            "max_voltage_error": rep.max_voltage_error,
            "mean_voltage_error": rep.mean_voltage_error,
            "min_precision": rep.min_precision,
            "min_recall": rep.min_recall,
        },
        "per_order": {
            str(r.order): {
                "precision": r.precision,
                "recall": r.recall,
                "max_current_error": r.max_current_error,
                "mean_current_error": r.mean_current_error,
                "max_voltage_error": r.max_voltage_error,
                "mean_voltage_error": r.mean_voltage_error,
                "false_sources": [bus_ids[i] for i in r.false_sources],
                "missed_sources": [bus_ids[i] for i in r.missed_sources],
                "support_threshold": r.support_threshold,
            }
            for r in rep.per_order
        },
    }


def write_report_csv(path: str, result: ExperimentResult) -> None:
    case = result.case
    spec = result.spec
    thd = None
    if spec.fundamental_voltage is not None:
        v1 = np.asarray(spec.fundamental_voltage, dtype=float)
        if v1.shape != (case.n_bus,):
            raise ValueError("fundamental_voltage length must match bus count")
        harm = np.zeros(case.n_bus)
        for h in spec.orders:
            harm += np.abs(result.estimate.voltages[h]) ** 2
        thd = np.sqrt(harm) / v1
    header = [
        "order", "bus",
        "current_true", "current_est", "current_abs_err",
        "voltage_true", "voltage_est", "voltage_abs_err",
    ]
    if thd is not None:
        header.append("thd")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for h in spec.orders:
            xt = result.truth.injections[h]
            xe = result.estimate.injections[h]
            vt = result.truth.voltages[h]
            ve = result.estimate.voltages[h]
            for i, bus in enumerate(case.buses):
                row = [
                    h, bus.id,
                    f"{abs(xt[i]):.10g}", f"{abs(xe[i]):.10g}",
                    f"{abs(xe[i] - xt[i]):.10g}",
                    f"{abs(vt[i]):.10g}", f"{abs(ve[i]):.10g}",
                    f"{abs(abs(ve[i]) - abs(vt[i])):.10g}",
                ]
                if thd is not None:
                    row.append(f"{thd[i]:.10g}")
                writer.writerow(row)
