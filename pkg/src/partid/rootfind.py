"""Scalar root bracketing and bisection used throughout the solvers.

All solvers in this package reduce to one-dimensional monotone root finding,
so one careful implementation lives here. Functions may return +-inf; an
infinite value is treated purely through its sign.
"""

from __future__ import annotations

import math

from .errors import NumericalError

MAX_ITER = 200


def bisect_monotone(f, lo, hi, target, *, increasing=True, value_tol=1e-12,
                    max_iter=MAX_ITER):
    """Root of the monotone function f on [lo, hi] with f(root) = target.

    The caller guarantees the target is bracketed: f(lo) <= target <= f(hi)
    when increasing, the reverse otherwise. Stops when the achieved value is
    within value_tol of the target, when the bracket collapses to float
    resolution, or after max_iter halvings, whichever comes first. Returns
    the abscissa with the best achieved value seen.
    """
    if not lo < hi:
        raise ValueError(f"empty bracket [{lo}, {hi}]")
    best_x = 0.5 * (lo + hi)
    best_gap = math.inf
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # float resolution exhausted
        val = f(mid)
        if math.isfinite(val):
            gap = abs(val - target)
            if gap < best_gap:
                best_x, best_gap = mid, gap
            if gap <= value_tol:
                return mid
        below = (val < target) if increasing else (val > target)
        if below:
            lo = mid
        else:
            hi = mid
    return best_x


def walk_to_root(f, start, boundary, target, *, rising=True, value_tol=1e-12,
                 max_iter=MAX_ITER):
    """Root of f between start and an open boundary which f never attains.

    The walk moves from start toward boundary (either side, finite or
    infinite); ``rising`` states whether f increases along that walk. The
    bracket expansion halves the remaining gap for a finite boundary and
    doubles a unit step for an infinite one, then bisection finishes the job.
    Raises NumericalError when no crossing appears within max_iter
    expansions, which under the boundary-divergence assumptions means the
    target is not representable in double precision.
    """
    def reached(v):
        return (v >= target) if rising else (v <= target)

    prev = start
    for k in range(1, max_iter + 1):
        if math.isinf(boundary):
            cand = start + math.copysign(2.0 ** (k - 1), boundary)
        else:
            cand = boundary - (boundary - start) * 0.5 ** k
            if cand == boundary:  # rounding may land on the open endpoint
                cand = math.nextafter(boundary, start)
        if cand == prev:
            break
        if reached(f(cand)):
            lo, hi = (prev, cand) if cand > prev else (cand, prev)
            walking_up = boundary > start
            return bisect_monotone(f, lo, hi, target,
                                   increasing=(rising == walking_up),
                                   value_tol=value_tol, max_iter=max_iter)
        prev = cand
    raise NumericalError(
        f"no bracket for target {target} between {start} and {boundary} "
        f"after {max_iter} expansions")
