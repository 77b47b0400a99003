"""Experiment execution: single runs, eta sweeps, and artifact emission.

Every run re-checks the deterministic queue bound at emission time, and
all artifacts are byte-reproducible for a fixed config and seed (wall
times live only in summary.json, never in the CSVs).  Numeric CSV/JSON
output carries 12 significant digits.
"""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import BuiltExperiment, ExperimentConfigModel, build_experiment
from .controller import SimulationResult, queue_bound_value, simulate
from .errors import InvariantViolationError
from .ingest import dump_distributions
from .oracle import OracleInstance, oracle_report

__all__ = ["RunSummary", "ExperimentResult", "run_experiment", "write_artifacts", "format_number"]

_TOL = 1e-9


def format_number(x) -> str:
    """12-significant-digit rendering used by every CSV/JSON artifact."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return repr(x)
    return f"{float(x):.12g}"


def _round_floats(obj):
    if isinstance(obj, float):
        return float(format_number(obj)) if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return _round_floats(obj.item())
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    return obj


@dataclass
class RunSummary:
    eta: float
    days: int
    average_welfare: float
    welfare_sem: float
    avg_total_queue: float
    max_total_queue: float
    queue_bound: float
    min_drift_slack: float
    min_target_slack: float
    violations: int
    oracle_value: float | None
    wall_time_s: float


@dataclass
class ExperimentResult:
    summaries: list[RunSummary]
    artifacts: dict[str, str]
    oracle: dict | None


def _run_csv(result: SimulationResult, n_users: int) -> str:
    out = io.StringIO()
    cols = ["day", "slot", "market_index", "beta", "alpha_bar", "alpha"]
    for i in range(n_users):
        cols += [f"price_{i + 1}", f"plan_{i + 1}", f"load_{i + 1}", f"utility_{i + 1}", f"queue_{i + 1}"]
    cols += ["base_power", "renewable", "deficit", "cost"]
    out.write(",".join(cols) + "\n")
    f = format_number
    for rec in result.records:
        for t in range(rec.base_power.size):
            row = [str(rec.day), str(t), str(rec.market_index), f(rec.beta[t]), f(rec.alpha_bar[t]), f(rec.alpha[t])]
            for i in range(n_users):
                row += [
                    f(rec.prices[i, t]),
                    f(rec.planned[i, t]),
                    f(rec.realized[i, t]),
                    f(rec.utilities[i, t]),
                    f(rec.queue_after[t, i]),
                ]
            row += [f(rec.base_power[t]), f(rec.renewable[t]), f(rec.deficit[t]), f(rec.cost[t])]
            out.write(",".join(row) + "\n")
    return out.getvalue()


def _eta_tag(eta: float) -> str:
    return format_number(eta).replace(".", "p").replace("-", "m")


def run_experiment(config: ExperimentConfigModel, out_dir: str | Path | None = None) -> ExperimentResult:
    """Simulate every eta in the config and assemble the artifact set.

    Artifacts: one ``run_<eta>.csv`` per eta (slot rows), ``sweep.csv``
    (tidy per-eta results), ``summary.json``, and ``distributions.csv``
    (the per-slot effective-renewable atoms, for round-trip ingestion).
    """
    built = build_experiment(config)
    oracle = None
    oracle_value = None
    if config.compute_oracle:
        report = oracle_report(OracleInstance(built.model, built.process))
        oracle_value = report["single_price_value"]
        oracle = {
            "single_price_value": report["single_price_value"],
            "relaxed_value": report["relaxed_value"],
            "price_of_single_price": report["price_of_single_price"],
            "certificate": report["single_price"].certificate,
            "target_duals": None
            if report["single_price"].target_duals is None
            else report["single_price"].target_duals.tolist(),
            "target_slacks": None
            if report["single_price"].target_slacks is None
            else report["single_price"].target_slacks.tolist(),
        }

    summaries: list[RunSummary] = []
    artifacts: dict[str, str] = {}
    for i, eta in enumerate(config.etas):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(i,)))
        started = time.perf_counter()
        result = simulate(built.model, built.process, built.controller_config(eta), config.days, rng)
        wall = time.perf_counter() - started
        _recheck_bound(built, eta, result)
        artifacts[f"run_{_eta_tag(eta)}.csv"] = _run_csv(result, built.model.n_users)
        summaries.append(
            RunSummary(
                eta=eta,
                days=config.days,
                average_welfare=result.average_welfare,
                welfare_sem=result.welfare_std / math.sqrt(len(result.records)),
                avg_total_queue=result.avg_total_queue,
                max_total_queue=result.max_total_queue,
                queue_bound=result.queue_bound,
                min_drift_slack=result.min_drift_slack,
                min_target_slack=result.min_target_slack,
                violations=0,
                oracle_value=oracle_value,
                wall_time_s=wall,
            )
        )

    artifacts["sweep.csv"] = _sweep_csv(summaries)
    artifacts["distributions.csv"] = dump_distributions(built.model.effective)
    artifacts["summary.json"] = _summary_json(config, built, summaries, oracle)
    result = ExperimentResult(summaries=summaries, artifacts=artifacts, oracle=oracle)
    if out_dir is not None:
        write_artifacts(result, out_dir)
    return result


def _recheck_bound(built: BuiltExperiment, eta: float, result: SimulationResult):
    bound = queue_bound_value(
        built.model.profiles, built.gamma_used, eta, built.process.delta_max, built.model.t_slots
    )
    if result.max_total_queue > bound + _TOL:
        raise InvariantViolationError(
            "emitted run violates the deterministic queue bound",
            details={"eta": eta, "max_total_queue": result.max_total_queue, "bound": bound},
        )


def _sweep_csv(summaries: list[RunSummary]) -> str:
    out = io.StringIO()
    out.write("eta,average_welfare,avg_total_queue,max_total_queue,queue_bound,oracle_value\n")
    f = format_number
    for s in summaries:
        out.write(
            ",".join(
                [
                    f(s.eta),
                    f(s.average_welfare),
                    f(s.avg_total_queue),
                    f(s.max_total_queue),
                    f(s.queue_bound),
                    "" if s.oracle_value is None else f(s.oracle_value),
                ]
            )
            + "\n"
        )
    return out.getvalue()


def _summary_json(config, built: BuiltExperiment, summaries: list[RunSummary], oracle) -> str:
    doc = {
        "schema_version": config.schema_version,
        "seed": config.seed,
        "days": config.days,
        "pricing": config.pricing,
        "t_slots": config.t_slots,
        "n_users": built.model.n_users,
        "gamma_computed": built.gamma_computed,
        "gamma_used": built.gamma_used,
        "delta_max": built.process.delta_max,
        "runs": [vars(s).copy() for s in summaries],
        "oracle": oracle,
    }
    return json.dumps(_round_floats(doc), indent=2, sort_keys=True) + "\n"


def write_artifacts(result: ExperimentResult, out_dir: str | Path):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, content in result.artifacts.items():
        (out / name).write_text(content, encoding="utf-8")
