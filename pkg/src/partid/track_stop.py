"""Sequential track-and-stop runner for partition identification.

One run alternates three ingredients until a generalized likelihood ratio
clears a time-dependent threshold: solve the allocation problem at the
empirical means, track those weights with forced exploration, and test
whether the empirical means are far enough (in weighted divergence) from
the opposite component to commit to a side.

The tracking rule pulls any arm whose count has fallen below
sqrt(t) - K/2 (lowest index first), else the arm maximizing w_hat_i - N_i/t.
This keeps min_i N_i(t) >= (sqrt(t) - K/2)^+ - 1 at all times; the runner
asserts that inequality after every pull and reports violations instead of
hiding them.

Stopping compares the statistic

    Z(t) = inf over the opposite component's closure of
           sum_i N_i(t) * kl_i(mean_hat_i, nu_i)

against beta(t, delta) = log(c_const * t / delta). Z is exactly the count-
weighted inner infimum from lb_solvers, so its value is t times the unit
allocation cost at N/t. When the empirical means sit on the partition
boundary, or on a component the inner solvers do not cover, Z is taken as
zero: the run keeps sampling rather than stopping on an undefined test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateInstance, DomainError, PartidError, UnsupportedCase
from .lb_solvers import DEFAULT_SETTINGS, SolverSettings, inner_inf, solve
from .partitions import TOL_CLASS, PartitionSpec, Side, Threshold, classify
from .spef import (DEFAULT_CLAMP, ClampPolicy, Family, SpefModel,
                   _check_mean, clamp_to_interior, mean_domain, sample)


@dataclass(frozen=True)
class StoppingConfig:
    """Confidence level and loop bounds for one run."""
    delta: float
    c_const: float = math.e
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not (self.c_const > 0 and math.isfinite(self.c_const)):
            raise ValueError(f"c_const must be positive, got {self.c_const}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass
class RunState:
    """Mutable per-run statistics: total pulls, per-arm counts, reward sums."""
    t: int
    counts: np.ndarray
    sums: np.ndarray

    def means(self, models: Sequence[SpefModel],
              clamp: ClampPolicy = DEFAULT_CLAMP) -> np.ndarray:
        raw = self.sums / np.maximum(self.counts, 1)
        return np.array([clamp_to_interior(m, x, clamp)
                         for m, x in zip(models, raw)])


@dataclass(frozen=True)
class RunResult:
    stop_time: int
    declared: Side
    correct: bool
    glr_at_stop: float
    forced_exploration_violations: int
    truncated: bool
    final_counts: np.ndarray
    final_means: np.ndarray


def beta_threshold(t: int, cfg: StoppingConfig) -> float:
    """Stopping level log(c_const * t / delta)."""
    return math.log(cfg.c_const * t / cfg.delta)


def d_tracking_next(state: RunState, w_hat) -> int:
    """Arm to pull: a starved arm (count below sqrt(t) - K/2, lowest index
    first) if any, else the arm whose realized fraction lags w_hat most."""
    k = state.counts.size
    need = math.sqrt(state.t) - k / 2.0
    starved = np.nonzero(state.counts < need)[0]
    if starved.size:
        return int(starved[0])
    return int(np.argmax(np.asarray(w_hat) - state.counts / state.t))


def glr_statistic(models: Sequence[SpefModel], state: RunState,
                  spec: PartitionSpec,
                  clamp: ClampPolicy = DEFAULT_CLAMP) -> float:
    """Count-weighted divergence from the empirical means to the closure of
    the opposite component; zero whenever that test is undefined."""
    means = state.means(models, clamp)
    try:
        return inner_inf(models, means, state.counts.astype(float), spec).value
    except (DegenerateInstance, UnsupportedCase):
        return 0.0


def _declare(spec: PartitionSpec, means) -> Side:
    side = classify(spec, means)
    if side is not Side.BOUNDARY:
        return side
    return Side.A1  # exact-boundary truncation tie; measure-zero and flagged


def run(models: Sequence[SpefModel], true_means, spec: PartitionSpec,
        cfg: StoppingConfig, rng: np.random.Generator,
        settings: SolverSettings = DEFAULT_SETTINGS,
        clamp: ClampPolicy = DEFAULT_CLAMP) -> RunResult:
    """Execute one run against the given ground truth.

    Draws from true_means (never shown to the decision logic), stops when
    the statistic clears beta_threshold or max_steps is hit; the latter is
    reported as truncated, never silently dropped. Weights come from a
    fresh allocation solve at the clamped empirical means each step; if
    that solve fails or yields undefined weights, the step falls back to
    uniform weights, which under the tracking rule pulls the least-sampled
    arm.

    Threshold partitions take a specialized loop: both the statistic and
    the allocation have closed forms there, so the step avoids the generic
    solver plumbing. The arithmetic is the same expressions evaluated in
    the same order; only the overhead differs.
    """
    true_means = np.atleast_1d(np.asarray(true_means, dtype=float))
    k = len(models)
    if true_means.size != k:
        raise ValueError(
            f"{k} models for {true_means.size} true means")
    true_side = classify(spec, true_means)
    if true_side is Side.BOUNDARY:
        raise DegenerateInstance("true means lie on the partition boundary")
    if isinstance(spec, Threshold):
        return _run_threshold(models, true_means, spec, cfg, rng, clamp,
                              true_side)
    return _run_generic(models, true_means, spec, cfg, rng, settings, clamp,
                        true_side)


def _run_generic(models: Sequence[SpefModel], true_means: np.ndarray,
                 spec: PartitionSpec, cfg: StoppingConfig,
                 rng: np.random.Generator, settings: SolverSettings,
                 clamp: ClampPolicy, true_side: Side) -> RunResult:
    k = len(models)
    counts = np.zeros(k, dtype=np.int64)
    sums = np.zeros(k)
    for i in range(k):
        sums[i] += sample(models[i], float(true_means[i]), rng, arm=i)
        counts[i] += 1
    t = k
    violations = 0
    uniform = np.full(k, 1.0 / k)
    z = 0.0
    truncated = False

    while True:
        state = RunState(t=t, counts=counts, sums=sums)
        means = state.means(models, clamp)
        side = classify(spec, means)
        z = 0.0
        if side is not Side.BOUNDARY:
            try:
                z = inner_inf(models, means, counts.astype(float), spec).value
            except (DegenerateInstance, UnsupportedCase):
                z = 0.0
        if side is not Side.BOUNDARY and z >= beta_threshold(t, cfg):
            declared = side
            break
        if t >= cfg.max_steps:
            truncated = True
            declared = _declare(spec, means)
            break

        try:
            w_hat = solve(models, means, spec, settings).w_star
            if not np.all(np.isfinite(w_hat)):
                w_hat = uniform
        except PartidError:
            w_hat = uniform
        arm = d_tracking_next(state, w_hat)
        sums[arm] += sample(models[arm], float(true_means[arm]), rng, arm=arm)
        counts[arm] += 1
        t += 1
        floor = max(0.0, math.sqrt(t) - k / 2.0) - 1.0
        if counts.min() < floor - 1e-9:
            violations += 1

    final_state = RunState(t=t, counts=counts, sums=sums)
    return RunResult(
        stop_time=t,
        declared=declared,
        correct=declared is true_side,
        glr_at_stop=float(z),
        forced_exploration_violations=violations,
        truncated=truncated,
        final_counts=counts.copy(),
        final_means=final_state.means(models, clamp),
    )


def _run_threshold(models: Sequence[SpefModel], true_means: np.ndarray,
                   spec: Threshold, cfg: StoppingConfig,
                   rng: np.random.Generator, clamp: ClampPolicy,
                   true_side: Side) -> RunResult:
    """Threshold specialization of the run loop.

    The per-step statistic and allocation are the closed-form threshold
    branches of inner_inf and solve_threshold inlined as per-arm closures,
    together with the matching clamp and sampling expressions. A run here
    consumes the generator identically and takes identical branches to
    _run_generic on the same seed; it just skips the solver plumbing, which
    is what makes nested-simulation sweeps with millions of pulls viable.
    """
    u = spec.u
    k = len(models)
    eps = clamp.epsilon
    div_to_level = []   # spef.kl with nu pinned at u
    draw = []           # spef.sample with the mean pinned at the truth
    snap = []           # (arm, lo, hi) clamp bounds; finite sides only
    for i, m in enumerate(models):
        lo, hi = mean_domain(m)
        if not lo < u < hi:
            raise DomainError(
                f"threshold level {u} outside arm {i} domain ({lo}, {hi})")
        if math.isfinite(lo) and math.isfinite(hi) and hi - lo <= 2 * eps:
            raise ValueError(
                f"epsilon {eps} too large for domain ({lo}, {hi})")
        if math.isfinite(lo) or math.isfinite(hi):
            snap.append((i,
                         lo + eps if math.isfinite(lo) else -math.inf,
                         hi - eps if math.isfinite(hi) else math.inf))
        tm = _check_mean(m, float(true_means[i]), "mean", i)
        if m.family is Family.GAUSSIAN:
            two_var = 2.0 * m.variance
            sd = math.sqrt(m.variance)
            div_to_level.append(
                lambda x, _v=two_var: (x - u) * (x - u) / _v)
            draw.append(lambda _m=tm, _s=sd: float(rng.normal(_m, _s)))
        elif m.family is Family.BERNOULLI:
            div_to_level.append(
                lambda x: max(0.0, x * math.log(x / u)
                              + (1.0 - x) * math.log((1.0 - x) / (1.0 - u))))
            draw.append(lambda _m=tm: 1.0 if rng.random() < _m else 0.0)
        else:
            div_to_level.append(
                lambda x: max(0.0, u - x + x * math.log(x / u)))
            draw.append(lambda _m=tm: float(rng.poisson(_m)))

    counts = np.zeros(k, dtype=np.int64)
    sums = np.zeros(k)
    for i in range(k):
        sums[i] += draw[i]()
        counts[i] += 1
    t = k
    violations = 0
    uniform = np.full(k, 1.0 / k)
    z = 0.0
    truncated = False

    while True:
        means = sums / counts
        for i, lo_s, hi_s in snap:
            v = means[i]
            if v < lo_s:
                means[i] = lo_s
            elif v > hi_s:
                means[i] = hi_s
        margin = float(np.max(means)) - u
        boundary = abs(margin) <= TOL_CLASS
        z = 0.0
        if not boundary:
            if margin > 0:
                for i in range(k):
                    v = means[i]
                    if v > u:
                        z += float(counts[i]) * div_to_level[i](v)
            else:
                z = math.inf
                for i in range(k):
                    c = float(counts[i]) * div_to_level[i](means[i])
                    if c < z:
                        z = c
        if not boundary and z >= beta_threshold(t, cfg):
            declared = Side.A1 if margin > 0 else Side.A2
            break
        if t >= cfg.max_steps:
            truncated = True
            declared = _declare(spec, means)
            break

        if boundary:
            w_hat = uniform
        elif margin > 0:
            jstar = -1
            best = 0.0
            for i in range(k):
                v = means[i]
                if v > u:
                    g = div_to_level[i](v)
                    if g > best:
                        best = g
                        jstar = i
            if jstar < 0:       # every above-level divergence underflowed
                w_hat = uniform
            else:
                w_hat = np.zeros(k)
                w_hat[jstar] = 1.0
        else:
            gaps = np.array([div_to_level[i](means[i]) for i in range(k)])
            if np.any(gaps <= 0.0):     # a mean pinned at the level
                w_hat = uniform
            else:
                inv = 1.0 / gaps
                w_hat = inv / float(inv.sum())
                if not np.all(np.isfinite(w_hat)):
                    w_hat = uniform

        need = math.sqrt(t) - k / 2.0
        starved = np.nonzero(counts < need)[0]
        if starved.size:
            arm = int(starved[0])
        else:
            arm = int(np.argmax(w_hat - counts / t))
        sums[arm] += draw[arm]()
        counts[arm] += 1
        t += 1
        floor = max(0.0, math.sqrt(t) - k / 2.0) - 1.0
        if counts.min() < floor - 1e-9:
            violations += 1

    return RunResult(
        stop_time=t,
        declared=declared,
        correct=declared is true_side,
        glr_at_stop=float(z),
        forced_exploration_violations=violations,
        truncated=truncated,
        final_counts=counts.copy(),
        final_means=means,
    )
