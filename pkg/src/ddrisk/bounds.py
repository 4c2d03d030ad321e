"""Closed-form machinery for entropy-constrained worst-case (DD) risk.

For a classifier whose error set has volume fraction r inside the unit
square, the worst-case test distribution at a given error mass eps is
piecewise uniform (mass eps spread over the error set, 1-eps over the
rest), and its entropy deficit below uniform equals the Bernoulli KL
divergence KL(Bern(eps) || Bern(r)). The DD risk at entropy budget gamma
is therefore the largest eps with KL(Bern(eps) || Bern(r)) <= gamma,
which this module solves exactly by bisection and upper-bounds in closed
form two ways:

- additive branch:        r + sqrt(gamma / 2)
- tangent (alpha) branch: (gamma - log((1-a)/(1-r)))
                          / (log(a/(1-a)) + log(1/r - 1)),  a in (r, 1)

The DD risk saturates at 1 exactly when r >= exp(-gamma). A simplified
fixed-a form, (gamma + log 2) / (-log r), is kept as a readable
reference; the production bound optimizes a numerically.
"""

from __future__ import annotations

import math

import numpy as np

from .core import BinGrid, bin_indices

__all__ = [
    "bernoulli_kl",
    "dd_alpha_branch",
    "dd_risk_bound",
    "dd_risk_bound_simplified",
    "dd_risk_exact",
    "l1_to_uniform",
    "q_star_entropy_gap",
]

#: absolute bisection tolerance on the returned risk
BISECTION_TOL = 1e-10

_ALPHA_GRID_SIZE = 1024
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def bernoulli_kl(eps: float, r: float) -> float:
    """KL(Bernoulli(eps) || Bernoulli(r)) in nats.

    Defined for eps in [0, 1] (the endpoints take their limit values
    -log(1-r) and -log(r)) and r strictly inside (0, 1).
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must be in (0, 1), got {r}")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must be in [0, 1], got {eps}")
    if eps == 0.0:
        return -math.log1p(-r)
    if eps == 1.0:
        return -math.log(r)
    return eps * math.log(eps / r) + (1.0 - eps) * math.log((1.0 - eps) / (1.0 - r))


def q_star_entropy_gap(epsilon: float, error_fraction: float) -> float:
    """Entropy deficit below uniform of the worst-case distribution.

    The maximum-entropy distribution placing mass ``epsilon`` on an error
    region of volume fraction ``error_fraction`` sits exactly
    KL(Bern(epsilon) || Bern(error_fraction)) nats below the uniform
    entropy (on a unit-volume domain). Both arguments must lie strictly
    inside (0, 1); callers handle the log-singular endpoints via limits.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if not 0.0 < error_fraction < 1.0:
        raise ValueError(f"error_fraction must be in (0, 1), got {error_fraction}")
    return bernoulli_kl(epsilon, error_fraction)


def dd_risk_exact(r: float, gamma: float) -> float:
    """Exact DD risk of a classifier with uniform expected risk ``r``.

    Returns 1.0 when r >= exp(-gamma) (every error mass satisfies the
    entropy budget); otherwise the unique eps in [r, 1) solving
    KL(Bern(eps) || Bern(r)) = gamma, found by bisection to
    :data:`BISECTION_TOL`. The KL is strictly increasing in eps on
    [r, 1], so the root is well defined.
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must be in (0, 1), got {r}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if r >= math.exp(-gamma):
        return 1.0
    if gamma == 0.0:
        return r
    lo, hi = r, 1.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if bernoulli_kl(mid, r) > gamma:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def dd_alpha_branch(r: float, gamma: float, alpha: float) -> float:
    """Tangent-line upper bound on the DD risk at expansion point ``alpha``.

    Valid for any alpha in (r, 1); the tangent slope
    log(a/(1-a)) + log(1/r - 1) is positive there, so the bound is finite
    and positive. Numerator and denominator are evaluated in log1p form
    of the gap d = alpha - r, which keeps the branch sound (>= r) for
    alpha arbitrarily close to r where the naive logs cancel.
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must be in (0, 1), got {r}")
    if not r < alpha < 1.0:
        raise ValueError(f"alpha must be in (r, 1), got {alpha}")
    d = alpha - r
    num = gamma + math.log1p(d / (1.0 - alpha))
    den = math.log1p(d / (r * (1.0 - alpha)))
    return num / den


def dd_risk_bound_simplified(r: float, gamma: float) -> float:
    """Loose closed-form bound, fixing the expansion point at one half.

    min{ (gamma + log 2) / (-log r),  r + sqrt(gamma / 2) }. Kept for
    reference and as a sanity ceiling for the optimized bound.
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must be in (0, 1), got {r}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    inv_log = (gamma + math.log(2.0)) / (-math.log(r))
    additive = r + math.sqrt(gamma / 2.0)
    return min(inv_log, additive)


def _golden_section(f, lo: float, hi: float, iters: int = 80) -> float:
    """Minimum value of a unimodal f on [lo, hi] by golden-section search."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        if b - a < 1e-14:
            break
    return min(fc, fd)


def dd_risk_bound(r: float, gamma: float) -> float:
    """Best closed-form upper bound on the DD risk.

    Takes the minimum of the additive branch and the tangent branch
    optimized over its free expansion point: a 1024-point log-spaced
    grid on (r, 1) followed by golden-section refinement around the grid
    optimum. Values above 1 are reported as-is (vacuous but sound);
    non-finite or non-positive grid evaluations are discarded.
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must be in (0, 1), got {r}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")

    additive = r + math.sqrt(gamma / 2.0)

    alpha_lo = np.nextafter(r, 1.0)
    alpha_hi = 1.0 - 1e-12
    alphas = np.geomspace(max(alpha_lo, r * (1.0 + 1e-9)), alpha_hi, _ALPHA_GRID_SIZE)
    alphas = np.clip(alphas, alpha_lo, alpha_hi)

    d = alphas - r
    num = gamma + np.log1p(d / (1.0 - alphas))
    den = np.log1p(d / (r * (1.0 - alphas)))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = num / den
    ok = np.isfinite(vals) & (vals > 0.0)
    if not np.any(ok):
        return additive

    vals = np.where(ok, vals, np.inf)
    i = int(np.argmin(vals))
    best = float(vals[i])
    lo = float(alphas[max(i - 1, 0)])
    hi = float(alphas[min(i + 1, len(alphas) - 1)])
    if hi > lo:
        refined = _golden_section(lambda a: dd_alpha_branch(r, gamma, a), lo, hi)
        if math.isfinite(refined) and 0.0 < refined < best:
            best = refined
    return min(best, additive)


def l1_to_uniform(points: np.ndarray, weights: np.ndarray, grid: BinGrid) -> float:
    """l1 distance between a weighted sample and the uniform distribution.

    The weight mass is histogrammed on the grid and normalized to sum 1;
    the result sum_b |1/k^2 - w_b| lies in [0, 2], with 0 for a sample
    whose weight mass is spread evenly over all bins and approaching 2
    for disjoint support.
    """
    pts = np.asarray(points, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, 2) array")
    if w.shape != (pts.shape[0],):
        raise ValueError("weights must align with points")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("weights must not all be zero")
    idx = bin_indices(pts, grid)
    mass = np.bincount(idx, weights=w, minlength=grid.total_bins) / total
    return float(np.abs(1.0 / grid.total_bins - mass).sum())
