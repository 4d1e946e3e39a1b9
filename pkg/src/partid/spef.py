"""Mean-parametrized divergence calculus for one-parameter exponential families.

Everything is expressed directly through the two means, so no natural
parameter appears anywhere. The supported families share the properties the
solvers rely on: kl(mu, .) is strictly convex with minimum 0 at mu and
diverges at every boundary of the open mean domain.

Closed forms, with v the Gaussian variance:

    Gaussian   kl = (mu - nu)^2 / (2 v)         domain (-inf, inf)
    Bernoulli  kl = mu log(mu/nu)
                    + (1-mu) log((1-mu)/(1-nu))  domain (0, 1)
    Poisson    kl = nu - mu + mu log(mu/nu)      domain (0, inf)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .rootfind import bisect_monotone, walk_to_root

#: Absolute tolerance on the achieved divergence (or slope) in inverse maps.
TOL_INV = 1e-10
MAX_ITER = 200


class Family(enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"
    POISSON = "poisson"


class Direction(enum.Enum):
    """Side of the reference mean on which an inverse is taken."""
    ABOVE = "above"
    BELOW = "below"


@dataclass(frozen=True)
class SpefModel:
    """One arm's distribution family. ``variance`` is meaningful only for
    the Gaussian family and ignored elsewhere."""
    family: Family
    variance: float = 1.0

    def __post_init__(self):
        if self.family is Family.GAUSSIAN:
            if not (math.isfinite(self.variance) and self.variance > 0):
                raise ValueError(
                    f"Gaussian variance must be positive and finite, got "
                    f"{self.variance}")


def gaussian(variance: float = 1.0) -> SpefModel:
    return SpefModel(Family.GAUSSIAN, float(variance))


def bernoulli() -> SpefModel:
    return SpefModel(Family.BERNOULLI)


def poisson() -> SpefModel:
    return SpefModel(Family.POISSON)


def mean_domain(model: SpefModel) -> tuple[float, float]:
    """Open interval of valid means."""
    if model.family is Family.GAUSSIAN:
        return (-math.inf, math.inf)
    if model.family is Family.BERNOULLI:
        return (0.0, 1.0)
    return (0.0, math.inf)


def _check_mean(model, x, name, arm=None):
    lo, hi = mean_domain(model)
    ok = isinstance(x, (int, float, np.floating)) and math.isfinite(x) \
        and lo < x < hi
    if not ok:
        where = f" (arm {arm})" if arm is not None else ""
        raise DomainError(
            f"{name}={x!r} outside open {model.family.value} mean domain "
            f"({lo}, {hi}){where}")
    return float(x)


def kl(model: SpefModel, mu: float, nu: float, *, arm=None) -> float:
    """Divergence from the arm's distribution at mean mu to the one at nu."""
    mu = _check_mean(model, mu, "mu", arm)
    nu = _check_mean(model, nu, "nu", arm)
    if model.family is Family.GAUSSIAN:
        d = mu - nu
        return d * d / (2.0 * model.variance)
    if model.family is Family.BERNOULLI:
        v = mu * math.log(mu / nu) + (1.0 - mu) * math.log((1.0 - mu) / (1.0 - nu))
        return max(0.0, v)  # cancellation at nu within a few ulps of mu
    return max(0.0, nu - mu + mu * math.log(mu / nu))


def kl_array(model: SpefModel, mu: float, nu: np.ndarray) -> np.ndarray:
    """Vectorized kl over an array of alternative means.

    Entries must already lie in the open mean domain; this is the grid
    oracle's bulk path and skips per-element checking.
    """
    mu = float(mu)
    nu = np.asarray(nu, dtype=float)
    if model.family is Family.GAUSSIAN:
        return (mu - nu) ** 2 / (2.0 * model.variance)
    if model.family is Family.BERNOULLI:
        v = mu * np.log(mu / nu) + (1.0 - mu) * np.log((1.0 - mu) / (1.0 - nu))
        return np.maximum(0.0, v)
    return np.maximum(0.0, nu - mu + mu * np.log(mu / nu))


def kl_dnu(model: SpefModel, mu: float, nu: float, *, arm=None) -> float:
    """Partial derivative of kl(mu, nu) in its second argument.

    Strictly increasing in nu with a zero at mu, by convexity.
    """
    mu = _check_mean(model, mu, "mu", arm)
    nu = _check_mean(model, nu, "nu", arm)
    if model.family is Family.GAUSSIAN:
        return (nu - mu) / model.variance
    if model.family is Family.BERNOULLI:
        return (nu - mu) / (nu * (1.0 - nu))
    return (nu - mu) / nu


def kl_dnu_range(model: SpefModel, mu: float) -> tuple[float, float]:
    """Open range swept by kl_dnu(mu, .) as nu crosses the mean domain.

    Poisson is the one family whose slope saturates: (nu - mu)/nu < 1 for
    every nu, even though the domain is unbounded above.
    """
    if model.family is Family.POISSON:
        return (-math.inf, 1.0)
    return (-math.inf, math.inf)


def kl_inverse(model: SpefModel, mu: float, target: float,
               direction: Direction, *, arm=None) -> float:
    """The unique nu on the requested side of mu with kl(mu, nu) = target.

    Achieved divergence is within TOL_INV of the target, except where float
    spacing forbids it: approaching a finite domain edge the slope grows
    without bound, and once slope * ulp(nu) exceeds TOL_INV the bracket
    collapses to adjacent floats and the closest representable point is
    returned. Every target is attainable over the reals (boundary
    divergence); in float64 the extreme tail near finite edges saturates.
    """
    mu = _check_mean(model, mu, "mu", arm)
    if not (math.isfinite(target) and target >= 0.0):
        raise ValueError(f"divergence target must be finite and >= 0, got {target}")
    if target == 0.0:
        return mu
    if model.family is Family.GAUSSIAN:
        step = math.sqrt(2.0 * model.variance * target)
        return mu + step if direction is Direction.ABOVE else mu - step
    lo, hi = mean_domain(model)
    boundary = hi if direction is Direction.ABOVE else lo
    return walk_to_root(lambda x: kl(model, mu, x), mu, boundary, target,
                        rising=True, value_tol=TOL_INV, max_iter=MAX_ITER)


def kl_inverse_capped(model: SpefModel, mu: float, target: float,
                      direction: Direction, *, arm=None) -> float:
    """kl_inverse, saturating at the last interior float of a finite edge.

    For divergence-box constructions the box is the sublevel set intersected
    with the mean domain: a target beyond what float64 can express toward a
    finite edge means the box side is the edge itself. An infinite edge has
    no such cap, so there the error propagates.
    """
    try:
        return kl_inverse(model, mu, target, direction, arm=arm)
    except NumericalError:
        lo, hi = mean_domain(model)
        edge = hi if direction is Direction.ABOVE else lo
        if math.isinf(edge):
            raise
        return math.nextafter(edge, mu)


def kl_dnu_inverse(model: SpefModel, mu: float, slope: float, *, arm=None) -> float:
    """The unique nu with kl_dnu(mu, nu) = slope.

    Closed form for the Gaussian family, bisection otherwise. Slopes outside
    kl_dnu_range raise DomainError; that can only happen for families whose
    slope saturates (Poisson above).
    """
    mu = _check_mean(model, mu, "mu", arm)
    if not math.isfinite(slope):
        raise ValueError(f"slope must be finite, got {slope}")
    ran = kl_dnu_range(model, mu)
    if not ran[0] < slope < ran[1]:
        where = f" (arm {arm})" if arm is not None else ""
        raise DomainError(
            f"slope {slope} outside attainable range {ran} for "
            f"{model.family.value} at mu={mu}{where}")
    if slope == 0.0:
        return mu
    if model.family is Family.GAUSSIAN:
        return mu + model.variance * slope
    lo, hi = mean_domain(model)
    boundary = hi if slope > 0 else lo
    return walk_to_root(lambda x: kl_dnu(model, mu, x), mu, boundary, slope,
                        rising=(slope > 0), value_tol=TOL_INV,
                        max_iter=MAX_ITER)


@dataclass(frozen=True)
class ClampPolicy:
    """How far inside a finite domain edge empirical means are pushed."""
    epsilon: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.epsilon and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


DEFAULT_CLAMP = ClampPolicy()


def clamp_to_interior(model: SpefModel, x: float,
                      policy: ClampPolicy = DEFAULT_CLAMP) -> float:
    """Snap x to at least epsilon inside every finite boundary of the mean
    domain. Infinite sides are left untouched."""
    lo, hi = mean_domain(model)
    eps = policy.epsilon
    if math.isfinite(lo) and math.isfinite(hi) and hi - lo <= 2 * eps:
        raise ValueError(
            f"epsilon {eps} too large for domain ({lo}, {hi})")
    x = float(x)
    if math.isfinite(lo):
        x = max(x, lo + eps)
    if math.isfinite(hi):
        x = min(x, hi - eps)
    return x


def sample(model: SpefModel, mean: float, rng: np.random.Generator, *,
           arm=None) -> float:
    """One observation from the arm at the given mean. Deterministic given
    the generator state."""
    mean = _check_mean(model, mean, "mean", arm)
    if model.family is Family.GAUSSIAN:
        return float(rng.normal(mean, math.sqrt(model.variance)))
    if model.family is Family.BERNOULLI:
        return 1.0 if rng.random() < mean else 0.0
    return float(rng.poisson(mean))
