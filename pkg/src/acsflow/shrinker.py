"""Self-similar contracting profiles built by shooting on the profile ODE.

One monotone arc of U'' + U = U^(-1/alpha) runs from a maximum U(0) = u_max
(U'(0) = 0) down to the adjacent minimum; its normal-angle span Theta and the
max/min ratio r are both strictly increasing in u_max, so arcs are addressed
either by r or by the k-fold closure condition Theta = pi/k. Reflecting and
repeating the arc 2k times yields the support function h of the closed k-fold
symmetric profile, which satisfies h_thth + h = h^(-1/alpha).

The arc ODE has the first integral
    U'^2 + U^2 + (2 alpha / (1 - alpha)) U^(1 - 1/alpha) = C,
which every returned segment is checked against.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .errors import (AcsflowError, EventNotFound, NoBracket, OrderingViolated,
                     OutOfRange, StepUnderflow)
from .geometry import AngularGrid, SupportFunction, deriv2

SEGMENT_RTOL = 1e-12
SEGMENT_ATOL = 1e-15
THETA_SEARCH_MAX = 10.0 * math.pi
# strict admissibility k < sqrt(1 + 1/alpha) with a guard for float noise
ADMISSIBILITY_GUARD = 1e-9
PROFILE_RESIDUAL_TOL = 1e-7


@dataclass(frozen=True)
class ArcSamples:
    theta: np.ndarray
    u: np.ndarray
    u_theta: np.ndarray


@dataclass(frozen=True)
class ShrinkerSegment:
    alpha: float
    r: float
    theta_span: float
    u_max: float
    u_min: float
    samples: ArcSamples = field(repr=False)
    first_integral: float
    fint_drift: float
    power_mean: float  # mean of U^(1 - 1/alpha) over the arc


@dataclass(frozen=True)
class VariationArc:
    """d/dr of the arc at fixed alpha, sampled on the parent segment's nodes."""

    theta: np.ndarray
    eta: np.ndarray
    eta_theta: np.ndarray
    eta0: float


@dataclass(frozen=True)
class ShrinkerProfile:
    alpha: float
    k: object  # integer >= 3 or the tag "circle"
    r_k: float
    h: SupportFunction = field(repr=False)
    entropy: float
    residual: float


def check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise OutOfRange(f"alpha must lie in (0, 1), got {alpha}")
    if abs(alpha - 1.0 / 3.0) < 1e-12:
        raise OutOfRange("alpha = 1/3 is excluded (continuum of elliptical profiles)")


def first_integral_value(alpha, u, u_theta):
    return u_theta**2 + u**2 + (2.0 * alpha / (1.0 - alpha)) * u ** (1.0 - 1.0 / alpha)


def _raise_for_status(status):
    if status == K.EVENT_NOT_FOUND:
        raise EventNotFound("no interior minimum of U before theta = 10*pi")
    if status == K.STEP_UNDERFLOW:
        raise StepUnderflow("profile ODE step size underflow")
    if status == K.NODE_OVERFLOW:
        raise StepUnderflow("profile ODE produced too many nodes")


def solve_segment(alpha, u_max, rtol=SEGMENT_RTOL, atol=SEGMENT_ATOL) -> ShrinkerSegment:
    """Integrate one monotone arc from (u_max, 0) to its first minimum."""
    check_alpha(alpha)
    if not u_max > 1.0:
        raise OutOfRange(f"u_max must exceed 1 (got {u_max}); U = 1 is the equilibrium")
    status, nodes = K.march_event(alpha, u_max, rtol=rtol, atol=atol,
                                  theta_max=THETA_SEARCH_MAX)
    _raise_for_status(status)
    theta = nodes[:, 0]
    u = nodes[:, 1]
    ut = nodes[:, 2]
    quad = nodes[:, 5]
    span = float(theta[-1])
    u_min = float(u[-1])
    fint = first_integral_value(alpha, u, ut)
    c0 = float(first_integral_value(alpha, u_max, 0.0))
    drift = float(np.max(np.abs(fint - c0)) / abs(c0))
    return ShrinkerSegment(
        alpha=float(alpha),
        r=u_max / u_min,
        theta_span=span,
        u_max=float(u_max),
        u_min=u_min,
        samples=ArcSamples(theta, u, ut),
        first_integral=c0,
        fint_drift=drift,
        power_mean=float(quad[-1] / span),
    )


def _bracket_increasing(fn, target, x_lo, grow, x_cap, what):
    """Bracket fn(x) = target for increasing fn, expanding from x_lo."""
    f_lo = fn(x_lo)
    if f_lo >= target:
        return None, (f_lo, f_lo)  # degenerate: already past target at the floor
    x_hi = grow(x_lo)
    f_hi = fn(x_hi)
    while f_hi < target:
        x_lo, f_lo = x_hi, f_hi
        x_hi = grow(x_hi)
        if x_hi > x_cap:
            raise NoBracket(
                f"{what}: target {target} not attained below u_max = {x_cap} "
                f"(reached {f_hi})",
                attained=(f_lo, f_hi),
            )
        f_hi = fn(x_hi)
    return (x_lo, x_hi), (f_lo, f_hi)


def segment_for_ratio(alpha, r, rtol=SEGMENT_RTOL, atol=SEGMENT_ATOL) -> ShrinkerSegment:
    """Arc whose max/min support ratio equals r (root-find over u_max)."""
    check_alpha(alpha)
    if not r > 1.0:
        raise OutOfRange(f"ratio must exceed 1, got {r}")

    def ratio_of(u_max):
        return solve_segment(alpha, u_max, rtol=rtol, atol=atol).r

    # linearization about U = 1 gives ratio ~ 1 + 2*(u_max - 1)
    guess = 1.0 + 0.5 * (r - 1.0)
    lo = 1.0 + 0.25 * (r - 1.0)
    bracket, _ = _bracket_increasing(ratio_of, r, lo, lambda x: 1.0 + 2.0 * (x - 1.0),
                                     1e8, "segment_for_ratio")
    if bracket is None:
        # ratio at the floor already exceeds r; shrink the floor
        hi = lo
        lo = 1.0 + (lo - 1.0) / 16.0
        while ratio_of(lo) > r:
            hi = lo
            lo = 1.0 + (lo - 1.0) / 16.0
            if lo - 1.0 < 1e-15:
                raise NoBracket(f"segment_for_ratio: ratio {r} below attainable range")
        bracket = (lo, hi)
    u_root = brentq(lambda x: ratio_of(x) - r, bracket[0], bracket[1],
                    xtol=1e-15, rtol=8.9e-16, maxiter=200)
    seg = solve_segment(alpha, u_root, rtol=rtol, atol=atol)
    if abs(seg.r - r) > 1e-10 * r:
        raise StepUnderflow(f"ratio root-find stalled: wanted {r}, got {seg.r}")
    return seg


def period_limit(alpha):
    """Normal-angle span of the arc in the small-amplitude limit r -> 1+."""
    return math.pi * math.sqrt(alpha / (1.0 + alpha))


def period(alpha, r) -> float:
    """Theta(alpha, r); the degenerate r = 1 case uses the analytic limit."""
    check_alpha(alpha)
    if r == 1.0:
        return period_limit(alpha)
    return segment_for_ratio(alpha, r).theta_span


def f_of_r(alpha, r) -> float:
    """Arc mean of U^(1 - 1/alpha); increasing in r with f(1) = 1."""
    check_alpha(alpha)
    if r == 1.0:
        return 1.0
    return segment_for_ratio(alpha, r).power_mean


def max_fold_symmetry(alpha) -> int:
    """Largest admissible k (k >= 3, k < sqrt(1 + 1/alpha)), or 2 if none."""
    return max(2, math.ceil(math.sqrt(1.0 + 1.0 / alpha) - ADMISSIBILITY_GUARD) - 1)


def _check_fold(alpha, k):
    check_alpha(alpha)
    if not alpha < 1.0 / 3.0:
        raise OutOfRange(f"k-fold profiles require alpha < 1/3, got {alpha}")
    if not (isinstance(k, (int, np.integer)) and k >= 3):
        raise OutOfRange(f"fold count must be an integer >= 3, got {k!r}")
    if not k < math.sqrt(1.0 + 1.0 / alpha) - ADMISSIBILITY_GUARD:
        raise OutOfRange(
            f"k = {k} is not admissible at alpha = {alpha}: "
            f"requires k < sqrt(1 + 1/alpha) = {math.sqrt(1.0 + 1.0 / alpha):.6f}")


def _segment_for_k(alpha, k, rtol=SEGMENT_RTOL, atol=SEGMENT_ATOL) -> ShrinkerSegment:
    """Arc with Theta = pi/k, root-found over the shooting parameter u_max."""
    _check_fold(alpha, k)
    target = math.pi / k

    def span_of(u_max):
        return solve_segment(alpha, u_max, rtol=rtol, atol=atol).theta_span

    bracket, _ = _bracket_increasing(span_of, target, 1.0 + 1e-9,
                                     lambda x: 1.0 + 2.0 * (x - 1.0),
                                     1e8, f"theta = pi/{k}")
    if bracket is None:
        raise NoBracket(f"theta = pi/{k} unattainable: span exceeds target at r -> 1")
    u_root = brentq(lambda x: span_of(x) - target, bracket[0], bracket[1],
                    xtol=1e-15, rtol=8.9e-16, maxiter=200)
    seg = solve_segment(alpha, u_root, rtol=rtol, atol=atol)
    if abs(seg.theta_span - target) > 1e-10:
        raise StepUnderflow(
            f"period root-find stalled: |theta - pi/{k}| = {abs(seg.theta_span - target):.2e}")
    return seg


def find_r_for_k(alpha, k) -> float:
    """The unique ratio r with Theta(alpha, r) = pi/k."""
    return _segment_for_k(alpha, k).r


def variation_eta(segment: ShrinkerSegment, delta_scale=1e-4) -> VariationArc:
    """Arc of eta = d/dr U(r, .), normalized so eta(0) = d u_max / d r.

    eta(0) comes from central finite differencing of segment_for_ratio in r
    with step delta_scale * (r - 1); the arc itself solves the variational ODE
    along the parent segment, sampled on the same nodes.
    """
    alpha, r = segment.alpha, segment.r
    delta = delta_scale * (r - 1.0)
    up = segment_for_ratio(alpha, r + delta).u_max
    um = segment_for_ratio(alpha, r - delta).u_max
    eta0 = (up - um) / (2.0 * delta)
    status, nodes = K.march_resample(alpha, segment.u_max, segment.samples.theta,
                                     eta0=eta0, rtol=SEGMENT_RTOL, atol=SEGMENT_ATOL)
    _raise_for_status(status)
    return VariationArc(theta=segment.samples.theta.copy(),
                        eta=nodes[:, 3], eta_theta=nodes[:, 4], eta0=eta0)


def shrinker_entropy(alpha, k) -> float:
    """Entropy of the k-fold profile, (alpha+1)/(2(alpha-1)) * log f(r_k)."""
    if k == "circle":
        check_alpha(alpha)
        return 0.0
    seg = _segment_for_k(alpha, k)
    return (alpha + 1.0) / (2.0 * (alpha - 1.0)) * math.log(seg.power_mean)


def entropy_ordering(alpha):
    """Entropies of all profiles at alpha in (0, 1/8), most entropic first.

    Returns [("circle", 0.0), (k0, E_k0), ..., (3, E_3)] and checks the
    strict ordering 0 > E_k0 > ... > E_3.
    """
    check_alpha(alpha)
    if not alpha < 0.125:
        raise OutOfRange(f"entropy ordering is asserted only for alpha < 1/8, got {alpha}")
    k0 = max_fold_symmetry(alpha)
    rows = [("circle", 0.0)]
    for k in range(k0, 2, -1):
        rows.append((k, shrinker_entropy(alpha, k)))
    values = [e for _, e in rows]
    for a, b in zip(values, values[1:]):
        if not a > b:
            raise OrderingViolated(f"entropy ordering violated: {rows}")
    return rows


def assemble_profile(alpha, k, grid_n=None) -> ShrinkerProfile:
    """Closed profile support function on a uniform grid.

    For integer k the grid size must be a multiple of 2k so the reflection
    seams fall on grid nodes; the arc is re-integrated landing exactly on the
    folded node angles (no interpolation).
    """
    if k == "circle":
        check_alpha(alpha)
        n = grid_n or 256
        h = SupportFunction(AngularGrid(n), np.ones(n))
        return ShrinkerProfile(alpha=float(alpha), k="circle", r_k=1.0, h=h,
                               entropy=0.0, residual=0.0)

    _check_fold(alpha, k)
    n = grid_n or 512
    if n % (2 * k) != 0:
        raise ValueError(f"grid_n must be a multiple of 2k = {2 * k}, got {n}")
    seg = _segment_for_k(alpha, k)
    m = n // (2 * k)
    theta_out = np.arange(m + 1) * (2.0 * np.pi / n)
    status, nodes = K.march_resample(alpha, seg.u_max, theta_out,
                                     rtol=SEGMENT_RTOL, atol=SEGMENT_ATOL)
    _raise_for_status(status)
    arc = nodes[:, 1]

    vals = np.empty(n)
    per = n // k
    for i in range(n):
        j = i % per
        if j > per - j:
            j = per - j
        vals[i] = arc[j]
    h = SupportFunction(AngularGrid(n), vals)

    w = deriv2(vals) + vals
    target = vals ** (-1.0 / alpha)
    residual = float(np.max(np.abs(w - target)) / np.max(target))
    if residual > PROFILE_RESIDUAL_TOL:
        raise AcsflowError(
            f"assembled profile residual {residual:.2e} exceeds {PROFILE_RESIDUAL_TOL}")

    entropy = (alpha + 1.0) / (2.0 * (alpha - 1.0)) * math.log(seg.power_mean)
    return ShrinkerProfile(alpha=float(alpha), k=int(k), r_k=seg.r, h=h,
                           entropy=entropy, residual=residual)


# -- export helpers -----------------------------------------------------------

def segment_to_csv(segment: ShrinkerSegment) -> str:
    from ._fmt import fmt_csv_float as f

    lines = ["theta,U,U_theta"]
    s = segment.samples
    for th, u, ut in zip(s.theta, s.u, s.u_theta):
        lines.append(f"{f(th)},{f(u)},{f(ut)}")
    return "\n".join(lines) + "\n"


def profile_to_json_dict(profile: ShrinkerProfile, theta=None) -> dict:
    if theta is None:
        theta = period_limit(profile.alpha) if profile.k == "circle" else math.pi / profile.k
    return {
        "alpha": profile.alpha,
        "k": profile.k if profile.k == "circle" else int(profile.k),
        "r": profile.r_k,
        "theta": float(theta),
        "entropy": profile.entropy,
        "h": [float(v) for v in profile.h.values],
    }
