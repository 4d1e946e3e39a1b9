"""Monte Carlo experiment engine and the nested-simulation risk demo.

Reproducibility contract: every run owns an independent generator derived
from (master seed, delta index, replication index) through SeedSequence, so
results are identical bytes whether replications execute inline or across a
process pool, and identical again on a rerun with the same config. Nothing
time- or host-dependent enters the outputs.

CSV rows follow the fixed column order
delta, replication, seed, stop_time, declared, correct, glr_at_stop, n1..nK
with one row per (delta, replication), truncated runs included. Aggregates
live in a JSON summary next to the CSV: per-delta error rate over completed
runs, stopping-time moments, the mean stopping time divided by log(1/delta)
against a freshly solved characteristic time, realized sampling fractions,
and provenance (seed, config digest, package version).
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._version import __version__
from .config import ExperimentConfig, RiskDemoConfig
from .lb_solvers import solve
from .partitions import Side, Threshold
from .spef import gaussian
from .track_stop import StoppingConfig, run


@dataclass(frozen=True)
class RunRow:
    """One CSV row of a Monte Carlo campaign.

    violations is carried for the summary and invariant checks; the CSV
    schema stays the fixed column set.
    """
    delta: float
    replication: int
    seed: int
    stop_time: int
    declared: str
    correct: bool
    glr_at_stop: float
    counts: tuple[int, ...]
    truncated: bool
    violations: int = 0


@dataclass(frozen=True)
class ExperimentReport:
    rows: list[RunRow]
    summaries: list[dict]
    provenance: dict


@dataclass(frozen=True)
class RiskPathRow:
    path: int
    seed: int
    w_exact: int
    w_declared: int
    stop_time: int
    truncated: bool
    violations: int = 0


@dataclass(frozen=True)
class RiskReport:
    rows: list[RiskPathRow]
    summary: dict
    provenance: dict


def derive_seed_sequence(master: int, delta_idx: int,
                         rep_idx: int) -> np.random.SeedSequence:
    """Per-run entropy; the triple keys the stream, so any execution order
    reproduces the same draws."""
    return np.random.SeedSequence((master, delta_idx, rep_idx))


def _fingerprint(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def _mc_task(args) -> RunRow:
    (models, true_means, spec, delta, c_const, max_steps,
     master, delta_idx, rep_idx) = args
    ss = derive_seed_sequence(master, delta_idx, rep_idx)
    rng = np.random.default_rng(ss)
    cfg = StoppingConfig(delta=delta, c_const=c_const, max_steps=max_steps)
    res = run(list(models), np.array(true_means), spec, cfg, rng)
    return RunRow(
        delta=delta,
        replication=rep_idx,
        seed=_fingerprint(ss),
        stop_time=res.stop_time,
        declared=res.declared.value,
        correct=bool(res.correct),
        glr_at_stop=res.glr_at_stop,
        counts=tuple(int(c) for c in res.final_counts),
        truncated=res.truncated,
        violations=res.forced_exploration_violations,
    )


def _map_tasks(task, args, parallelism: int):
    if parallelism <= 1 or len(args) <= 1:
        return [task(a) for a in args]
    chunk = max(1, len(args) // (parallelism * 4))
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(task, args, chunksize=chunk))


def run_single(cfg: ExperimentConfig, delta: float,
               replication: int = 0) -> RunRow:
    """One run, seeded exactly like replication `replication` of an mc
    campaign at delta index 0."""
    return _mc_task((tuple(cfg.arms), cfg.true_means, cfg.partition, delta,
                     cfg.c_const, cfg.max_steps, cfg.seed, 0, replication))


def run_experiment(cfg: ExperimentConfig,
                   parallelism: Optional[int] = None) -> ExperimentReport:
    """Full campaign: replications x deltas runs, ordered aggregation."""
    par = cfg.parallelism if parallelism is None else parallelism
    args = [
        (tuple(cfg.arms), cfg.true_means, cfg.partition, delta,
         cfg.c_const, cfg.max_steps, cfg.seed, di, ri)
        for di, delta in enumerate(cfg.deltas)
        for ri in range(cfg.replications)
    ]
    rows = _map_tasks(_mc_task, args, par)

    summaries = []
    for di, delta in enumerate(cfg.deltas):
        block = rows[di * cfg.replications:(di + 1) * cfg.replications]
        done = [r for r in block if not r.truncated]
        sol = solve(list(cfg.arms), np.array(cfg.true_means), cfg.partition)
        if done:
            times = np.array([r.stop_time for r in done], dtype=float)
            fractions = np.array([np.array(r.counts) / r.stop_time
                                  for r in done])
            error_rate = float(np.mean([not r.correct for r in done]))
            mean_t = float(times.mean())
            std_t = float(times.std(ddof=1)) if times.size > 1 else 0.0
            ratio = mean_t / math.log(1.0 / delta)
            mean_w = [float(x) for x in fractions.mean(axis=0)]
        else:
            error_rate = mean_t = std_t = ratio = math.nan
            mean_w = [math.nan] * len(cfg.arms)
        summaries.append({
            "delta": delta,
            "error_rate": error_rate,
            "mean_T": mean_t,
            "std_T": std_t,
            "mean_T_over_log_inv_delta": ratio,
            "t_star": sol.t_star,
            "mean_weight_vector": mean_w,
            "completed": len(done),
            "truncated": len(block) - len(done),
            "forced_exploration_violations": int(sum(r.violations
                                                     for r in block)),
        })

    provenance = {"seed": cfg.seed, "config_digest": cfg.digest,
                  "version": __version__}
    return ExperimentReport(rows=rows, summaries=summaries,
                            provenance=provenance)


def write_rows_csv(rows: Sequence[RunRow], path: str):
    """The fixed-schema results table; float cells use repr so equal results
    are equal bytes."""
    if not rows:
        raise ValueError("no rows to write")
    k = len(rows[0].counts)
    header = ["delta", "replication", "seed", "stop_time", "declared",
              "correct", "glr_at_stop"] + [f"n{i + 1}" for i in range(k)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            if len(r.counts) != k:
                raise ValueError("inconsistent arm counts across rows")
            writer.writerow(
                [repr(r.delta), r.replication, r.seed, r.stop_time,
                 r.declared, "true" if r.correct else "false",
                 repr(r.glr_at_stop)] + list(r.counts))


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_summary_json(report: ExperimentReport, path: str):
    payload = _json_safe({"summaries": report.summaries,
                          "provenance": report.provenance})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# nested-simulation risk demo


def _risk_task(args) -> RiskPathRow:
    (horizon, vol, u, inner_delta, c_const, max_steps, master, j) = args
    ss = np.random.SeedSequence((master, j))
    path_ss, inner_ss = ss.spawn(2)
    path_rng = np.random.default_rng(path_ss)
    steps = path_rng.normal(0.0, 1.0, horizon) * vol
    levels = np.cumsum(steps)  # identity payoff: arm means are the path

    w_exact = int(np.max(levels) > u)
    models = [gaussian(1.0)] * horizon
    cfg = StoppingConfig(delta=inner_delta, c_const=c_const,
                         max_steps=max_steps)
    res = run(models, levels, Threshold(u), cfg,
              np.random.default_rng(inner_ss))
    return RiskPathRow(
        path=j,
        seed=_fingerprint(ss),
        w_exact=w_exact,
        w_declared=int(res.declared is Side.A1),
        stop_time=res.stop_time,
        truncated=res.truncated,
        violations=res.forced_exploration_violations,
    )


def risk_demo(cfg: RiskDemoConfig,
              parallelism: Optional[int] = None) -> RiskReport:
    """Estimate the probability that a random-walk factor path crosses u.

    Outer stage simulates n_outer paths; for each, the inner stage treats
    the path values as unknown arm means observable through unit-variance
    Gaussian samples and runs the threshold tracker at inner_delta. The
    identity payoff keeps the exact per-path indicator available, so the
    estimate is validated against the truth over the same paths: the gap is
    at most inner_delta per path plus binomial noise.
    """
    par = cfg.parallelism if parallelism is None else parallelism
    args = [(cfg.horizon, cfg.volatility, cfg.u, cfg.inner_delta,
             cfg.c_const, cfg.max_steps, cfg.seed, j)
            for j in range(cfg.n_outer)]
    rows = _map_tasks(_risk_task, args, par)

    n = len(rows)
    gamma_hat = float(np.mean([r.w_declared for r in rows]))
    gamma_exact = float(np.mean([r.w_exact for r in rows]))
    se = math.sqrt(max(gamma_exact * (1.0 - gamma_exact), 0.0) / n)
    times = np.array([r.stop_time for r in rows], dtype=float)
    summary = {
        "n_outer": n,
        "gamma_hat": gamma_hat,
        "gamma_exact": gamma_exact,
        "abs_gap": abs(gamma_hat - gamma_exact),
        "gap_bound": cfg.inner_delta + 3.0 * se,
        "disagreements": int(sum(r.w_declared != r.w_exact for r in rows)),
        "truncated": int(sum(r.truncated for r in rows)),
        "forced_exploration_violations": int(sum(r.violations
                                                 for r in rows)),
        "mean_stop_time": float(times.mean()),
        "max_stop_time": int(times.max()),
    }
    provenance = {"seed": cfg.seed, "config_digest": cfg.digest,
                  "version": __version__}
    return RiskReport(rows=rows, summary=summary, provenance=provenance)


def write_risk_csv(rows: Sequence[RiskPathRow], path: str):
    header = ["path", "seed", "w_exact", "w_declared", "stop_time",
              "truncated"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([r.path, r.seed, r.w_exact, r.w_declared,
                             r.stop_time, "true" if r.truncated else "false"])


def write_risk_json(report: RiskReport, path: str):
    payload = _json_safe({"summary": report.summary,
                          "provenance": report.provenance})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
