"""Solvers for the optimal-allocation lower bound over two-component partitions.

The object computed everywhere is the saddle point of

    max_{w in simplex}  inf_{nu in closure(other component)}  sum_i w_i kl_i(mu_i, nu_i)

whose value c* bounds the rate at which any sound procedure can separate the
two components, with characteristic time t* = 1/c*. Each partition family
gets the sharpest solver its structure allows:

  * Threshold: fully closed form on both sides.
  * HalfSpace: the minimizer equalizes divergences across arms and sits on
    the hyperplane, reducing to one monotone scalar root.
  * ConvexSublevel: the value is the smallest level t at which the
    coordinate box {max_i kl_i <= t} touches {f <= c}; bisection on t with a
    projected-gradient box minimization inside.
  * UnionHalfSpaces: concave max-min over the simplex; supergradient ascent
    localizes, then a certified refinement (exact single-constraint
    delegation, kink bisection for two arms, cutting planes with an LP upper
    bound otherwise) pins the optimum.
  * Two-arm Gaussian with two constraints: closed-form casework on whether
    one constraint can be ignored or the optimal level set is tangent to
    both lines.

Hyperplane rows are normalized internally to unit Euclidean norm, which
changes nothing about the sets or the saddle point but keeps every reported
residual on a common scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (DegenerateInstance, DomainError, InfeasibleAlternative,
                     NumericalError, UnsupportedCase)
from .partitions import (ConvexSublevel, HalfSpace, PartitionSpec, Side,
                         Threshold, UnionHalfSpaces, classify)
from .rootfind import bisect_monotone, walk_to_root
from .spef import (Direction, SpefModel, kl, kl_dnu, kl_dnu_range,
                   kl_inverse, kl_inverse_capped, mean_domain)


@dataclass(frozen=True)
class SolverSettings:
    """Shared numerical knobs.

    tol_kkt bounds reported optimality residuals, tol_bisect is the value
    tolerance of every scalar root, max_outer_iters caps iterative outer
    loops, simplex_floor keeps ascent iterates strictly inside the simplex,
    active_set_tol is relative to c* when detecting binding arms, and
    step_schedule picks the ascent step rule ("diminishing" for 1/sqrt(k),
    "fixed" for a constant).
    """
    tol_kkt: float = 1e-8
    tol_bisect: float = 1e-10
    max_outer_iters: int = 5000
    simplex_floor: float = 1e-9
    active_set_tol: float = 1e-6
    step_schedule: str = "diminishing"

    def __post_init__(self):
        for name in ("tol_kkt", "tol_bisect", "simplex_floor", "active_set_tol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.step_schedule not in ("diminishing", "fixed"):
            raise ValueError(f"unknown step_schedule {self.step_schedule!r}")


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class LowerBoundSolution:
    """Saddle point of the allocation game.

    w_star sums to one; nu_star is the critical alternative achieving the
    inner infimum at w_star; c_star is the saddle value and t_star = 1/c_star
    the characteristic time. active_set lists the arms essential to the
    optimum. kkt_residuals carries solver-specific diagnostics; flags marks
    qualitative events ("case1", "case_boundary", "NonUniqueHyperplane",
    "MaxIters"). When NonUniqueHyperplane is flagged w_star is NaN:
    nu_star and c_star remain valid but no supporting hyperplane determines
    the weights.
    """
    w_star: np.ndarray
    nu_star: np.ndarray
    c_star: float
    t_star: float
    active_set: tuple[int, ...]
    kkt_residuals: dict[str, float]
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class InnerSolution:
    """Value of a weighted inner infimum and its minimizer when attained."""
    value: float
    minimizer: Optional[np.ndarray]


def _validate_instance(models: Sequence[SpefModel], mu) -> np.ndarray:
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.ndim != 1 or len(models) != mu.size:
        raise ValueError(
            f"got {len(models)} models for mean vector of shape {mu.shape}")
    for i, (m, x) in enumerate(zip(models, mu)):
        lo, hi = mean_domain(m)
        if not (math.isfinite(x) and lo < x < hi):
            raise DomainError(
                f"mu[{i}]={x} outside open {m.family.value} domain ({lo}, {hi})")
    return mu


def _solution(w, nu, cstar, active, residuals, flags=()):
    cstar = float(cstar)
    if not (cstar > 0 and math.isfinite(cstar)):
        raise DegenerateInstance(
            f"saddle value {cstar} is not positive; the instance is on or "
            f"across the partition boundary")
    return LowerBoundSolution(
        w_star=np.asarray(w, dtype=float), nu_star=np.asarray(nu, dtype=float),
        c_star=cstar, t_star=1.0 / cstar, active_set=tuple(int(i) for i in active),
        kkt_residuals={k: float(v) for k, v in residuals.items()},
        flags=tuple(flags))


# ---------------------------------------------------------------------------
# weighted inner problems


def _edge_toward(model: SpefModel, sign: float) -> float:
    lo, hi = mean_domain(model)
    return hi if sign > 0 else lo


def _linear_sup(models, a) -> float:
    """sup of <a, nu> over the open product domain (+inf allowed)."""
    s = 0.0
    for m, ai in zip(models, a):
        if ai == 0.0:
            continue
        edge = _edge_toward(m, ai)
        term = ai * edge
        if math.isinf(term):
            return math.inf
        s += term
    return s


def _slope_inverse_capped(model: SpefModel, mu_i: float, slope: float) -> float:
    """kl_dnu inverse extended by its boundary limits past saturation."""
    if slope == 0.0:
        return mu_i
    lo_s, hi_s = kl_dnu_range(model, mu_i)
    if slope >= hi_s:
        return math.inf
    if slope <= lo_s:
        return -math.inf
    from .spef import kl_dnu_inverse
    return kl_dnu_inverse(model, mu_i, slope)


def _halfspace_inner(models, mu, w, a, b, *, tol=1e-12, max_iter=300):
    """inf of sum_i w_i kl_i(mu_i, nu_i) over {<a, nu> >= b}.

    Stationarity makes every coordinate nu_i the slope inverse of
    lam * a_i / w_i for a common multiplier lam >= 0, and <a, nu(lam)>
    increases in lam, so the constraint level is one monotone scalar root.
    Arms with zero weight are free: they absorb as much of the constraint as
    their domain edge allows at no cost, shrinking the effective level for
    the rest; the infimum is then not attained and the minimizer is None.
    """
    K = len(models)
    a = np.asarray(a, dtype=float)
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        raise ValueError("half-space normal is the zero vector")
    a = a / norm
    b = float(b) / norm

    lin = float(np.dot(a, mu))
    if lin >= b:
        return 0.0, np.array(mu, dtype=float)
    if not _linear_sup(models, a) > b:
        raise InfeasibleAlternative(
            "half-space does not intersect the mean domain")

    free = [i for i in range(K) if w[i] == 0.0 and a[i] != 0.0]
    if free:
        cap = 0.0
        for i in free:
            term = a[i] * _edge_toward(models[i], a[i])
            if math.isinf(term):
                return 0.0, None
            cap += term
        keep = [i for i in range(K) if i not in free]
        sub_models = [models[i] for i in keep]
        val, _ = _halfspace_inner(sub_models, mu[keep], w[keep], a[keep],
                                  b - cap, tol=tol, max_iter=max_iter)
        return val, None

    busy = [i for i in range(K) if a[i] != 0.0]

    def constraint_at(lam):
        s = 0.0
        for i in busy:
            nu_i = _slope_inverse_capped(models[i], mu[i], lam * a[i] / w[i])
            term = a[i] * nu_i
            if math.isinf(term):
                return math.inf
            s += term
        return s

    hi = 1.0
    for _ in range(max_iter):
        if constraint_at(hi) >= b:
            break
        hi *= 2.0
    else:
        raise NumericalError("multiplier bracket expansion failed")
    lam = bisect_monotone(constraint_at, 0.0, hi, b, increasing=True,
                          value_tol=tol * max(1.0, abs(b)), max_iter=max_iter)

    nu = np.array(mu, dtype=float)
    for i in busy:
        nu[i] = _slope_inverse_capped(models[i], mu[i], lam * a[i] / w[i])
    if not np.all(np.isfinite(nu)):
        raise NumericalError("inner minimizer escaped to the domain boundary")
    value = sum(w[i] * kl(models[i], mu[i], nu[i]) for i in busy)
    return float(value), nu


def _min_f_over_box(f, grad, lo, hi, x0, *, gtol=1e-12, max_iter=20000):
    """Minimize smooth convex f over a coordinate box by projected gradient
    with backtracking. Returns (x, projected-gradient residual)."""
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fx = float(f(x))
    eta = 1.0
    resid = math.inf
    best = math.inf
    stall = 0
    for _ in range(max_iter):
        g = np.asarray(grad(x), dtype=float)
        resid = float(np.max(np.abs(x - np.clip(x - g, lo, hi))))
        if resid <= gtol * max(1.0, float(np.max(np.abs(x)))):
            break
        # the acceptance slack below floors what f-comparisons can resolve
        # at about sqrt(eps); past that the iterate orbits without progress
        if resid < 0.9 * best:
            best, stall = resid, 0
        else:
            stall += 1
            if stall >= 100:
                break
        moved = False
        for _bt in range(60):
            xn = np.clip(x - eta * g, lo, hi)
            dx = xn - x
            if not np.any(dx):
                break
            fn = float(f(xn))
            if fn <= fx + float(np.dot(g, dx)) + float(np.dot(dx, dx)) / (2 * eta) \
                    + 1e-15 * (1.0 + abs(fx)):
                x, fx = xn, fn
                eta = min(eta * 1.5, 1e8)
                moved = True
                break
            eta *= 0.5
        if not moved:
            break
    return x, resid


def _convex_inner(models, mu, w, sub: ConvexSublevel, *, tol=1e-12,
                  max_iter=300):
    """inf of sum_i w_i kl_i(mu_i, nu_i) over {f <= level}, all w_i > 0.

    Lagrangian dual in the single multiplier lam: the unconstrained minimum
    nu(lam) of sum w_i kl_i + lam f moves continuously with f(nu(lam))
    decreasing, so the binding level is again a monotone scalar root. The
    inner minimization runs projected gradient on an adaptively grown
    coordinate box, regrowing whenever the optimum presses an edge, which
    also keeps iterates inside bounded mean domains.
    """
    f, gradf, c = sub.value, sub.grad, sub.level
    mu = np.asarray(mu, dtype=float)
    if float(f(mu)) <= c:
        return 0.0, np.array(mu)
    if np.any(w <= 0):
        raise UnsupportedCase(
            "convex-set inner problem requires strictly positive weights")
    K = len(models)

    state = {"x": np.array(mu), "level": 8.0}

    def nu_of(lam):
        while True:
            lv = state["level"]
            lo = np.array([kl_inverse_capped(models[i], mu[i], lv / w[i],
                                             Direction.BELOW)
                           for i in range(K)])
            hi = np.array([kl_inverse_capped(models[i], mu[i], lv / w[i],
                                             Direction.ABOVE)
                           for i in range(K)])

            def psi(x):
                return sum(w[i] * kl(models[i], mu[i], x[i]) for i in range(K)) \
                    + lam * float(f(x))

            def psi_grad(x):
                g = np.array([w[i] * kl_dnu(models[i], mu[i], x[i])
                              for i in range(K)])
                return g + lam * np.asarray(gradf(x), dtype=float)

            x, _ = _min_f_over_box(psi, psi_grad, lo, hi,
                                   np.clip(state["x"], lo, hi), gtol=1e-12)
            margin = np.minimum(x - lo, hi - x)
            span = np.maximum(hi - lo, 1e-12)
            if np.all(margin > 1e-9 * span):
                state["x"] = x
                return x
            state["level"] = lv * 2.0
            if state["level"] > 2.0 ** 60:
                raise NumericalError("convex inner box grew without bound")

    def level_at(lam):
        return float(f(nu_of(lam)))

    hi_lam = 1.0
    for _ in range(max_iter):
        if level_at(hi_lam) <= c:
            break
        hi_lam *= 2.0
    else:
        raise InfeasibleAlternative(
            "sublevel set unreachable: f never drops to the requested level")
    lam = bisect_monotone(level_at, 0.0, hi_lam, c, increasing=False,
                          value_tol=tol * max(1.0, abs(c)), max_iter=max_iter)
    nu = nu_of(lam)
    value = sum(w[i] * kl(models[i], mu[i], nu[i]) for i in range(K))
    return float(value), nu


def inner_inf(models: Sequence[SpefModel], mu, weights,
              spec: PartitionSpec) -> InnerSolution:
    """Weighted transportation cost from mu to the closure of the opposite
    component.

    Weights are any nonnegative vector (counts work as-is: the value is
    positively homogeneous in them). The minimizer is returned when the
    infimum is attained; free arms pushing toward an open domain edge leave
    it None. mu on the partition boundary is rejected, and component/side
    combinations outside the solvers' coverage (mu inside a convex-sublevel
    or union alternative) raise UnsupportedCase.
    """
    mu = _validate_instance(models, mu)
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.shape != mu.shape:
        raise ValueError(f"weights shape {w.shape} != mean shape {mu.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    side = classify(spec, mu)
    if side is Side.BOUNDARY:
        raise DegenerateInstance("mu lies on the partition boundary")
    if not np.any(w > 0):
        return InnerSolution(0.0, None)

    if isinstance(spec, Threshold):
        u = spec.u
        for i, m in enumerate(models):
            lo, hi = mean_domain(m)
            if not lo < u < hi:
                raise DomainError(
                    f"threshold level {u} outside arm {i} domain ({lo}, {hi})")
        if side is Side.A1:
            value = 0.0
            nu = np.array(mu)
            for i in range(mu.size):
                if mu[i] > u:
                    value += w[i] * kl(models[i], mu[i], u)
                    nu[i] = u
            return InnerSolution(float(value), nu)
        costs = np.array([w[i] * kl(models[i], mu[i], u)
                          for i in range(mu.size)])
        s = int(np.argmin(costs))
        nu = np.array(mu)
        nu[s] = u
        return InnerSolution(float(costs[s]), nu)

    if isinstance(spec, HalfSpace):
        a = np.asarray(spec.a, dtype=float)
        b = spec.b
        if side is Side.A2:
            a, b = -a, -b
        value, nu = _halfspace_inner(models, mu, w, a, b)
        return InnerSolution(value, nu)

    if isinstance(spec, UnionHalfSpaces):
        if side is Side.A2:
            raise UnsupportedCase(
                "inner problem over the complement of a union of half-spaces "
                "is not covered; only means inside the polytope are")
        best = None
        for a, b in spec.halfspaces:
            value, nu = _halfspace_inner(models, mu, w, np.asarray(a), b)
            if best is None or value < best[0]:
                best = (value, nu)
        return InnerSolution(best[0], best[1])

    if isinstance(spec, ConvexSublevel):
        if side is Side.A2:
            raise UnsupportedCase(
                "inner problem over the complement of a convex set is not "
                "covered; encode that geometry as a union of half-spaces")
        value, nu = _convex_inner(models, mu, w, spec)
        return InnerSolution(value, nu)

    raise TypeError(f"not a partition spec: {spec!r}")


# ---------------------------------------------------------------------------
# full solvers


def solve_threshold(models: Sequence[SpefModel], mu, u: float) -> LowerBoundSolution:
    """Closed-form saddle point for the threshold partition.

    Above side: the entire budget goes to the arm whose divergence down to
    the level is largest (lowest index on ties); the critical alternative
    drags every above-level arm to the level. Below side: weights are
    inversely proportional to each arm's divergence up to the level,
    t* = sum_i 1/kl_i(mu_i, u), and every arm's product w_i kl_i ties at the
    optimum; the reported minimizer raises the lowest-indexed arm.
    """
    mu = _validate_instance(models, mu)
    for i, m in enumerate(models):
        lo, hi = mean_domain(m)
        if not lo < u < hi:
            raise DomainError(
                f"threshold level {u} outside arm {i} domain ({lo}, {hi})")
    side = classify(Threshold(u), mu)
    if side is Side.BOUNDARY:
        raise DegenerateInstance(f"max(mu) sits on the threshold level {u}")

    K = mu.size
    if side is Side.A1:
        above = [i for i in range(K) if mu[i] > u]
        gaps = np.array([kl(models[i], mu[i], u) for i in above])
        jstar = above[int(np.argmax(gaps))]
        cstar = float(np.max(gaps))
        w = np.zeros(K)
        w[jstar] = 1.0
        nu = np.where(mu > u, u, mu)
        active = [i for i, g in zip(above, gaps) if g >= cstar * (1 - 1e-12)]
        residuals = {
            "saddle_gap": abs(sum(w[i] * kl(models[i], mu[i], nu[i])
                                  for i in range(K)) - cstar),
            "weight_sum": abs(w.sum() - 1.0),
        }
        return _solution(w, nu, cstar, active, residuals)

    gaps = np.array([kl(models[i], mu[i], u) for i in range(K)])
    if np.any(gaps <= 0):
        raise DegenerateInstance(
            "an arm mean coincides with the threshold level; the "
            "characteristic time is unbounded")
    inv = 1.0 / gaps
    tstar = float(inv.sum())
    w = inv / tstar
    cstar = 1.0 / tstar
    nu = np.array(mu)
    nu[0] = u
    residuals = {
        "product_spread": float(np.max(np.abs(w * gaps - cstar))),
        "weight_sum": abs(w.sum() - 1.0),
    }
    return _solution(w, nu, cstar, range(K), residuals)


def solve_halfspace(models: Sequence[SpefModel], mu, a, b,
                    settings: SolverSettings = DEFAULT_SETTINGS) -> LowerBoundSolution:
    """Saddle point when the opposite component is an open half-space.

    At the optimum all arms share one divergence level, the minimizer sits
    on the hyperplane with each coordinate displaced toward its side of the
    constraint, and the weights are proportional to a_i over the divergence
    slope at the minimizer. The construction parametrizes everything by the
    first arm's alternative coordinate, along which the constraint value is
    strictly monotone, leaving one scalar root.
    """
    mu = _validate_instance(models, mu)
    hs = HalfSpace(tuple(np.asarray(a, dtype=float)), float(b))
    if len(hs.a) != mu.size:
        raise ValueError(f"normal has {len(hs.a)} entries for {mu.size} arms")
    a = np.asarray(hs.a) / np.linalg.norm(hs.a)
    b = hs.b / float(np.linalg.norm(hs.a))

    flags = []
    margin = float(np.dot(a, mu)) - b
    if abs(margin) <= 1e-12:
        raise DegenerateInstance("mu lies on the separating hyperplane")
    if margin > 0:
        a, b = -a, -b
        flags.append("mu_in_a2")
    if not _linear_sup(models, a) > b:
        raise InfeasibleAlternative(
            "the open half-space does not intersect the mean domain")

    m0, mu0, a0 = models[0], float(mu[0]), float(a[0])
    rest = range(1, mu.size)

    def constraint_of(nu1):
        # bracket expansion can overshoot to levels no bounded arm can
        # express in floats; the capped inverse is off by under one ulp there
        level = kl(m0, mu0, nu1)
        s = a0 * nu1
        for i in rest:
            side = Direction.ABOVE if a[i] > 0 else Direction.BELOW
            s += a[i] * kl_inverse_capped(models[i], mu[i], level, side)
        return s

    boundary = _edge_toward(m0, a0)
    nu1 = walk_to_root(constraint_of, mu0, boundary, b, rising=True,
                       value_tol=settings.tol_bisect * max(1.0, abs(b)),
                       max_iter=300)

    cstar = kl(m0, mu0, nu1)
    nu = np.empty(mu.size)
    nu[0] = nu1
    for i in rest:
        side = Direction.ABOVE if a[i] > 0 else Direction.BELOW
        nu[i] = kl_inverse(models[i], mu[i], cstar, side)

    slopes = np.array([kl_dnu(models[i], mu[i], nu[i]) for i in range(mu.size)])
    raw = a / slopes
    if np.any(raw <= 0):
        raise NumericalError("weight signs violate the displacement pattern")
    w = raw / raw.sum()

    levels = np.array([kl(models[i], mu[i], nu[i]) for i in range(mu.size)])
    ratios = w * slopes / a
    residuals = {
        "equal_divergence": float(np.max(np.abs(levels - cstar))),
        "hyperplane": abs(float(np.dot(a, nu)) - b),
        "sign_violations": float(np.sum(np.sign(nu - mu) != np.sign(a))),
        "tangency_spread": float(np.max(ratios) - np.min(ratios)),
        "saddle_gap": abs(float(np.dot(w, levels)) - cstar),
    }
    return _solution(w, nu, cstar, range(mu.size), residuals, flags)


def solve_convex(models: Sequence[SpefModel], mu, sublevel: ConvexSublevel,
                 settings: SolverSettings = DEFAULT_SETTINGS) -> LowerBoundSolution:
    """Saddle point when the opposite component is a smooth convex sublevel
    set {f <= level} and mu lies outside it.

    c* is the smallest t for which the coordinate box
    {nu : max_i kl_i(mu_i, nu_i) <= t} meets the set; the touching point is
    the critical alternative. Arms whose divergence at the touching point
    ties the maximum form the active set; weights on it follow the smooth
    supporting-hyperplane rule w_i proportional to (df/dnu_i) over the
    divergence slope, and are zero elsewhere. A sign-inconsistent hyperplane
    (non-smooth contact) is flagged NonUniqueHyperplane with w_star NaN.
    """
    mu = _validate_instance(models, mu)
    f, gradf, c = sublevel.value, sublevel.grad, sublevel.level
    side = classify(sublevel, mu)
    if side is Side.BOUNDARY:
        raise DegenerateInstance("mu lies on the sublevel boundary")
    if side is Side.A2:
        raise UnsupportedCase(
            "mu is inside the convex set; only the outside case is covered "
            "(encode the complement as a union of half-spaces instead)")

    K = mu.size
    state = {"x": np.array(mu)}

    def box_min(t):
        lo = np.array([kl_inverse_capped(models[i], mu[i], t, Direction.BELOW)
                       for i in range(K)])
        hi = np.array([kl_inverse_capped(models[i], mu[i], t, Direction.ABOVE)
                       for i in range(K)])
        x, resid = _min_f_over_box(f, gradf, lo, hi,
                                   np.clip(state["x"], lo, hi))
        state["x"] = x
        return float(f(x)), x, resid

    t_hi = 1.0
    t_lo = 0.0
    for _ in range(300):
        val, x, _ = box_min(t_hi)
        if val <= c:
            break
        t_lo = t_hi
        t_hi *= 2.0
    else:
        raise InfeasibleAlternative(
            "sublevel set unreachable from mu inside the mean domain")

    x_feas, resid = x, math.inf
    for _ in range(300):
        if t_hi - t_lo <= settings.tol_bisect * max(1.0, t_hi):
            break
        mid = 0.5 * (t_lo + t_hi)
        val, x, resid = box_min(mid)
        if val <= c:
            t_hi, x_feas = mid, x
        else:
            t_lo = mid

    nu = x_feas
    levels = np.array([kl(models[i], mu[i], nu[i]) for i in range(K)])
    cstar = float(np.max(levels))
    active = [i for i in range(K)
              if levels[i] >= cstar * (1.0 - settings.active_set_tol)]

    grads = np.asarray(gradf(nu), dtype=float)
    raw = np.zeros(K)
    for i in active:
        raw[i] = grads[i] / kl_dnu(models[i], mu[i], nu[i])
    total = raw.sum()
    flags = []
    if total == 0.0 or np.any(raw[active] * np.sign(total) < 0):
        flags.append("NonUniqueHyperplane")
        w = np.full(K, math.nan)
    else:
        w = np.maximum(raw / total, 0.0)
        w = w / w.sum()

    residuals = {
        "boundary_gap": abs(float(f(nu)) - c),
        "active_spread": float(cstar - np.min(levels[active])),
        "box_stationarity": float(resid if math.isfinite(resid) else 0.0),
        "level_bracket": float(t_hi - t_lo),
    }
    return _solution(w, nu, cstar, active, residuals, flags)


# ---------------------------------------------------------------------------
# union of half-spaces


def _project_simplex(v, total=1.0):
    """Euclidean projection onto {x >= 0, sum x = total} (sort based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u * idx > (css - total))[0][-1]
    theta = (css[rho] - total) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _project_simplex_floor(v, floor):
    k = len(v)
    total = 1.0 - k * floor
    if total <= 0:
        raise ValueError("simplex floor too large for the arm count")
    return _project_simplex(np.asarray(v, dtype=float) - floor, total) + floor


def solve_union_halfspaces(models: Sequence[SpefModel], mu, halfspaces,
                           settings: SolverSettings = DEFAULT_SETTINGS) -> LowerBoundSolution:
    """Saddle point when the opposite component is a union of half-spaces
    and mu lies strictly inside the complementary polytope.

    The outer objective g(w) = min_j g_j(w) is concave (each g_j is an inner
    infimum, hence concave in w), so projected supergradient ascent with the
    per-constraint transport costs as the Danskin supergradient localizes
    the optimum; ties among active constraints average their supergradients.
    The iterate is then refined until certified: if a single constraint is
    active, the exact half-space solution is adopted once no other
    constraint undercuts it (each half-space relaxes the union, so that
    check is a true optimality certificate); with two arms a remaining
    two-constraint kink is pinned by bisection on g_1 - g_2; otherwise
    cutting planes with an LP upper bound shrink the duality gap below
    tol_kkt. MaxIters is flagged when the budget ends first.
    """
    mu = _validate_instance(models, mu)
    spec = UnionHalfSpaces(tuple((tuple(np.asarray(a, dtype=float)), float(b))
                                 for a, b in halfspaces))
    K = mu.size
    if len(spec.halfspaces[0][0]) != K:
        raise ValueError("constraint dimension does not match the arm count")
    side = classify(spec, mu)
    if side is Side.BOUNDARY:
        raise DegenerateInstance("mu lies on the polytope boundary")
    if side is Side.A2:
        raise UnsupportedCase(
            "mu must lie in the polytope component; means inside the union "
            "are not covered")

    rows = []
    for a, b in spec.halfspaces:
        a = np.asarray(a, dtype=float)
        n = float(np.linalg.norm(a))
        rows.append((a / n, b / n))
    for j, (a, b) in enumerate(rows):
        if not _linear_sup(models, a) > b:
            raise InfeasibleAlternative(
                f"half-space {j} does not intersect the mean domain")
    m = len(rows)
    floor = settings.simplex_floor
    tol_in = settings.tol_bisect

    def g_and_nu(w):
        vals = np.empty(m)
        nus = []
        for j, (a, b) in enumerate(rows):
            v, nu = _halfspace_inner(models, mu, w, a, b, tol=tol_in)
            vals[j] = v
            nus.append(nu)
        return vals, nus

    def g_of(w):
        return float(np.min(g_and_nu(w)[0]))

    flags = []

    # phase 1: projected supergradient ascent
    w = np.full(K, 1.0 / K)
    best_w, best_g = w.copy(), g_of(w)
    n_ascent = min(settings.max_outer_iters, 250)
    for k in range(1, n_ascent + 1):
        vals, nus = g_and_nu(w)
        gmin = float(np.min(vals))
        if gmin > best_g:
            best_g, best_w = gmin, w.copy()
        ties = [j for j in range(m) if vals[j] <= gmin + 1e-12 * max(1.0, gmin)]
        grad = np.zeros(K)
        for j in ties:
            grad += np.array([kl(models[i], mu[i], nus[j][i]) for i in range(K)])
        grad /= len(ties)
        alpha = 1.0 / math.sqrt(k) if settings.step_schedule == "diminishing" else 1e-2
        w = _project_simplex_floor(w + alpha * grad, floor)

    # phase 2: certified refinement
    gap = math.inf
    if K == 2:
        best_w, best_g = _refine_two_arm(models, mu, rows, best_w, best_g,
                                         settings, g_of)
    certified = _try_single_active(models, mu, rows, best_w, settings)
    if certified is not None:
        return certified
    if K > 2:
        best_w, best_g, gap, exhausted = _kelley_refine(
            models, mu, rows, best_w, best_g, settings, g_and_nu)
        if exhausted:
            flags.append("MaxIters")

    w = np.maximum(best_w, floor)
    w = w / w.sum()
    vals, nus = g_and_nu(w)
    cstar = float(np.min(vals))
    active_rows = [j for j in range(m)
                   if vals[j] <= cstar + 1e-9 * max(1.0, cstar)]
    nu = nus[min(active_rows)]
    active = [i for i in range(K) if w[i] > floor * 10]
    residuals = {
        "duality_gap": gap if math.isfinite(gap) else -1.0,
        "weight_sum": abs(float(w.sum()) - 1.0),
        "active_rows": float(len(active_rows)),
    }
    return _solution(w, nu, cstar, active, residuals, flags)


def _refine_two_arm(models, mu, rows, w0, g0, settings, g_of):
    """Golden-section maximization of the concave one-dimensional
    restriction, then kink bisection between the two lowest constraints."""
    floor = settings.simplex_floor
    lo, hi = floor, 1.0 - floor

    def phi(w1):
        return g_of(np.array([w1, 1.0 - w1]))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - invphi * (b - a)
    c2 = a + invphi * (b - a)
    f1, f2 = phi(c1), phi(c2)
    for _ in range(200):
        if b - a <= 1e-12:
            break
        if f1 >= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - invphi * (b - a)
            f1 = phi(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + invphi * (b - a)
            f2 = phi(c2)
    w1 = 0.5 * (a + b)
    cand_w = np.array([w1, 1.0 - w1])
    cand_g = phi(w1)
    if cand_g < g0:
        cand_w, cand_g = w0, g0

    if len(rows) >= 2:
        at_cand = [
            _halfspace_inner(models, mu, cand_w, a_j, b_j,
                             tol=settings.tol_bisect)[0] for a_j, b_j in rows]
        j1, j2 = (int(j) for j in np.argsort(at_cand)[:2])

        def diff(w1):
            w = np.array([w1, 1.0 - w1])
            v1 = _halfspace_inner(models, mu, w, *rows[j1],
                                  tol=settings.tol_bisect)[0]
            v2 = _halfspace_inner(models, mu, w, *rows[j2],
                                  tol=settings.tol_bisect)[0]
            return v1 - v2

        # bracket a sign change of g_j1 - g_j2 around the iterate
        w1c = float(cand_w[0])
        eps = 1e-9
        bracket = None
        for _ in range(40):
            lo_p, hi_p = max(lo, w1c - eps), min(hi, w1c + eps)
            dlo, dhi = diff(lo_p), diff(hi_p)
            if dlo == 0.0 or dhi == 0.0 or (dlo < 0) != (dhi < 0):
                bracket = (lo_p, hi_p, dlo)
                break
            if eps > 0.5:
                break
            eps *= 4.0
        if bracket is not None:
            blo, bhi, dlo = bracket
            for _ in range(200):
                if bhi - blo <= 1e-14:
                    break
                mid = 0.5 * (blo + bhi)
                dm = diff(mid)
                if dm == 0.0:
                    blo = bhi = mid
                    break
                if (dm < 0) == (dlo < 0):
                    blo, dlo = mid, dm
                else:
                    bhi = mid
            w1k = 0.5 * (blo + bhi)
            gk = phi(w1k)
            if gk >= cand_g - 1e-12 * max(1.0, abs(cand_g)):
                cand_w = np.array([w1k, 1.0 - w1k])
                cand_g = gk
    return cand_w, cand_g


def _try_single_active(models, mu, rows, w, settings):
    """If one constraint alone is active at w, delegate to the exact
    half-space solver and certify it against every other constraint."""
    vals = []
    for a, b in rows:
        v, _ = _halfspace_inner(models, mu, w, a, b, tol=settings.tol_bisect)
        vals.append(v)
    vals = np.asarray(vals)
    gmin = float(np.min(vals))
    order = np.argsort(vals)
    jstar = int(order[0])
    if len(rows) > 1 and vals[int(order[1])] <= gmin + 1e-7 * max(1.0, gmin):
        return None  # two constraints matter; not a single-active optimum
    a, b = rows[jstar]
    if np.any(a == 0.0):
        return None  # exact delegation needs every coefficient nonzero
    sol = solve_halfspace(models, mu, a, b, settings)
    for j, (aj, bj) in enumerate(rows):
        if j == jstar:
            continue
        vj, _ = _halfspace_inner(models, mu, sol.w_star, aj, bj,
                                 tol=settings.tol_bisect)
        if vj < sol.c_star * (1.0 - 1e-9) - 1e-12:
            return None  # another constraint undercuts: not optimal
    residuals = dict(sol.kkt_residuals)
    residuals["duality_gap"] = 0.0
    residuals["active_rows"] = 1.0
    return LowerBoundSolution(
        w_star=sol.w_star, nu_star=sol.nu_star, c_star=sol.c_star,
        t_star=sol.t_star, active_set=sol.active_set,
        kkt_residuals=residuals, flags=sol.flags + ("single_constraint",))


def _kelley_refine(models, mu, rows, w0, g0, settings, g_and_nu):
    """Cutting-plane refinement: concavity makes every linearization an
    overestimate, so the LP value is a true upper bound and the best
    evaluated point a lower bound; stop when the gap closes."""
    from scipy.optimize import linprog

    K = len(mu)
    m = len(rows)
    floor = settings.simplex_floor
    cuts = []  # rows of the LP: -grad . w + t <= g - grad . w_pt, per (j, point)

    def add_cuts(w_pt):
        vals, nus = g_and_nu(w_pt)
        for j in range(m):
            grad = np.array([kl(models[i], mu[i], nus[j][i]) for i in range(K)])
            cuts.append((np.concatenate([-grad, [1.0]]),
                         vals[j] - float(np.dot(grad, w_pt))))
        return float(np.min(vals))

    best_w, best_g = np.asarray(w0, dtype=float), g0
    seeds = [best_w, np.full(K, 1.0 / K)]
    for i in range(K):
        v = np.full(K, floor)
        v[i] = 1.0 - (K - 1) * floor
        seeds.append(v)
    for s in seeds:
        g = add_cuts(s)
        if g > best_g:
            best_g, best_w = g, s.copy()

    gap = math.inf
    budget = max(50, min(500, settings.max_outer_iters))
    exhausted = True
    cost = np.concatenate([np.zeros(K), [-1.0]])
    a_eq = np.concatenate([np.ones(K), [0.0]]).reshape(1, -1)
    bounds = [(0.0, 1.0)] * K + [(None, None)]
    for _ in range(budget):
        a_ub = np.array([c[0] for c in cuts])
        b_ub = np.array([c[1] for c in cuts])
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                      bounds=bounds, method="highs")
        if not res.success:
            raise NumericalError(f"cutting-plane LP failed: {res.message}")
        t_ub = float(res.x[-1])
        w_new = np.maximum(res.x[:K], floor)
        w_new = w_new / w_new.sum()
        g = add_cuts(w_new)
        if g > best_g:
            best_g, best_w = g, w_new
        gap = t_ub - best_g
        if gap <= settings.tol_kkt:
            exhausted = False
            break
    return best_w, best_g, gap, exhausted


def solve_two_arm_gaussian(mu, hs1, hs2, variance: float,
                           settings: SolverSettings = DEFAULT_SETTINGS) -> LowerBoundSolution:
    """Closed-form saddle point for two Gaussian arms of common variance and
    an alternative that is the union of two half-spaces with all-nonzero
    normals.

    In the canonical frame (means shifted to zero, coordinates scaled so the
    divergence is nu^2) the weighted level set is an ellipse. If one
    constraint is far enough that the level ellipse meets only the other,
    the problem collapses to that single half-space; in between, the optimal
    ellipse is tangent to both lines and the tangency ratios give the
    weights directly. A ratio exactly at a regime border is flagged
    "case_boundary" and resolved with the tangency formulas, which agree
    with the one-constraint ones there.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (2,):
        raise ValueError(f"two arms required, got mean shape {mu.shape}")
    if not (variance > 0 and math.isfinite(variance)):
        raise ValueError(f"variance must be positive, got {variance}")
    (a1, b1), (a2, b2) = (np.asarray(hs1[0], dtype=float), float(hs1[1])), \
                         (np.asarray(hs2[0], dtype=float), float(hs2[1]))
    for a in (a1, a2):
        if a.shape != (2,) or np.any(a == 0.0) or not np.all(np.isfinite(a)):
            raise DegenerateInstance(
                "both constraint normals need two finite nonzero entries")
    if a1[0] * a2[1] - a1[1] * a2[0] == 0.0:
        raise DegenerateInstance("parallel constraint normals")

    scale = math.sqrt(2.0 * variance)  # nu = mu + scale * x makes kl = x^2
    ac1, ac2 = a1 * scale, a2 * scale
    bc1 = b1 - float(np.dot(a1, mu))
    bc2 = b2 - float(np.dot(a2, mu))
    if bc1 <= 0 or bc2 <= 0:
        raise DegenerateInstance(
            "mu must lie strictly inside the polytope component")

    from .spef import gaussian as _gaussian
    models = [_gaussian(variance), _gaussian(variance)]

    r = (bc2 / bc1) ** 2
    rhs1 = (ac2[0] ** 2 / abs(ac1[0]) + ac2[1] ** 2 / abs(ac1[1])) \
        / (abs(ac1[0]) + abs(ac1[1]))
    lhs2 = (abs(ac2[0]) + abs(ac2[1])) \
        / (ac1[0] ** 2 / abs(ac2[0]) + ac1[1] ** 2 / abs(ac2[1]))
    near1 = abs(r - rhs1) <= 1e-12 * max(1.0, r, rhs1)
    near2 = abs(r - lhs2) <= 1e-12 * max(1.0, r, lhs2)
    flags = []
    if near1 or near2:
        flags.append("case_boundary")

    def one_constraint(ac, bc, label):
        denom = abs(ac[0]) + abs(ac[1])
        cstar = (bc / denom) ** 2
        w = np.array([abs(ac[0]), abs(ac[1])]) / denom
        x = np.array([math.copysign(bc / denom, ac[0]),
                      math.copysign(bc / denom, ac[1])])
        return w, x, cstar, label

    if r >= rhs1 and not (near1 or near2):
        w, x, cstar, label = one_constraint(ac1, bc1, "case1")
    elif r <= lhs2 and not (near1 or near2):
        w, x, cstar, label = one_constraint(ac2, bc2, "case2")
    else:
        d_num = (ac1[1] * ac2[0]) ** 2 - (ac1[0] * ac2[1]) ** 2
        d1 = (bc2 * ac1[1]) ** 2 - (bc1 * ac2[1]) ** 2
        d2 = (bc1 * ac2[0]) ** 2 - (bc2 * ac1[0]) ** 2
        if d1 == 0.0 or d2 == 0.0:
            raise NumericalError("tangency ratios degenerate at this geometry")
        w1_over_c = d_num / d1
        w2_over_c = d_num / d2
        total = w1_over_c + w2_over_c
        if w1_over_c <= 0 or w2_over_c <= 0 or total <= 0:
            raise NumericalError("tangency weights left the simplex")
        cstar = 1.0 / total
        w = np.array([w1_over_c, w2_over_c]) * cstar
        x = np.array([cstar * ac1[0] / (w[0] * bc1),
                      cstar * ac1[1] / (w[1] * bc1)])
        label = "case3"
    flags.append(label)

    nu = mu + scale * x
    levels = np.array([kl(models[i], mu[i], nu[i]) for i in range(2)])
    line1 = abs(float(np.dot(ac1, x)) - bc1)
    residuals = {
        "ellipse_gap": abs(float(np.dot(w, x * x)) - cstar),
        "active_line": line1 if label != "case2"
        else abs(float(np.dot(ac2, x)) - bc2),
        "weight_sum": abs(float(w.sum()) - 1.0),
        "level_consistency": abs(float(np.dot(w, levels)) - cstar),
    }
    active = [0, 1]
    return _solution(w, nu, cstar, active, residuals, flags)


def solve(models: Sequence[SpefModel], mu, spec: PartitionSpec,
          settings: SolverSettings = DEFAULT_SETTINGS) -> LowerBoundSolution:
    """Route an instance to the matching solver."""
    if isinstance(spec, Threshold):
        return solve_threshold(models, mu, spec.u)
    if isinstance(spec, HalfSpace):
        return solve_halfspace(models, mu, spec.a, spec.b, settings)
    if isinstance(spec, ConvexSublevel):
        return solve_convex(models, mu, spec, settings)
    if isinstance(spec, UnionHalfSpaces):
        return solve_union_halfspaces(models, mu, spec.halfspaces, settings)
    raise TypeError(f"not a partition spec: {spec!r}")
