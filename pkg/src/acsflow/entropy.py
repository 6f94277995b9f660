"""Scale-invariant entropy of a convex body and its interior maximization.

For alpha in (0, 1) the entropy with base point z is
    alpha/(alpha-1) * log( mean_theta u_z^(1-1/alpha) ) - (1/2) log(area/pi),
with the log-mean form at alpha = 1; u_z is the support function with respect
to z. The entropy of the body is the supremum over interior base points,
attained at a unique entropy point.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import OptimFailed, OutOfRange, PointOutside
from .geometry import SupportFunction, area, steiner_point

# probes whose translated support dips below this are rejected, the integrand
# u^(1-1/alpha) blows up at the boundary
BOUNDARY_GUARD = 1e-10

GRAD_TOL = 1e-9
EVAL_BUDGET = 10000


@dataclass(frozen=True)
class EntropyResult:
    value: float
    point: tuple
    evaluations: int


def _check_alpha(alpha):
    if not 0.0 < alpha <= 1.0:
        raise OutOfRange(f"entropy requires alpha in (0, 1], got {alpha}")


def entropy_at(u: SupportFunction, z0, alpha) -> float:
    """Entropy of the body with the base point fixed at z0."""
    _check_alpha(alpha)
    area_term = 0.5 * math.log(area(u) / math.pi)
    th = u.grid.nodes
    uz = u.values - (z0[0] * np.cos(th) + z0[1] * np.sin(th))
    if np.min(uz) < BOUNDARY_GUARD:
        raise PointOutside(f"base point {tuple(z0)} is not strictly interior")
    if alpha == 1.0:
        return float(np.mean(np.log(uz))) - area_term
    return alpha / (alpha - 1.0) * float(np.log(np.mean(uz ** (1.0 - 1.0 / alpha)))) - area_term


def entropy(u: SupportFunction, alpha) -> EntropyResult:
    """Maximize the entropy over interior base points.

    Nelder-Mead from the curvature-weighted boundary centroid, then Newton
    polish on central-difference derivatives until the gradient norm falls
    below 1e-9.
    """
    _check_alpha(alpha)
    area_term = 0.5 * math.log(area(u) / math.pi)
    th = u.grid.nodes
    cos_th, sin_th = np.cos(th), np.sin(th)
    vals = u.values
    power = 1.0 - 1.0 / alpha
    count = [0]

    def value_at(z):
        count[0] += 1
        uz = vals - (z[0] * cos_th + z[1] * sin_th)
        if np.min(uz) < BOUNDARY_GUARD:
            return -np.inf
        if alpha == 1.0:
            return float(np.mean(np.log(uz))) - area_term
        return alpha / (alpha - 1.0) * float(np.log(np.mean(uz**power))) - area_term

    z0 = steiner_point(u)
    best = [np.array(z0, dtype=float), value_at(z0)]

    def neg(z):
        v = value_at(z)
        if v > best[1]:
            best[0], best[1] = np.array(z), v
        return -v

    res = minimize(neg, z0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14,
                            "maxfev": EVAL_BUDGET - 1000, "maxiter": EVAL_BUDGET})
    z = np.array(res.x, dtype=float)
    if not np.isfinite(value_at(z)):
        z = best[0].copy()

    # Newton polish; the entropy is smooth and concave near its maximizer
    for _ in range(12):
        uz = vals - (z[0] * cos_th + z[1] * sin_th)
        hs = 1e-6 * max(float(np.min(uz)), BOUNDARY_GUARD)
        f0 = value_at(z)
        fpx = value_at(z + [hs, 0.0])
        fmx = value_at(z - [hs, 0.0])
        fpy = value_at(z + [0.0, hs])
        fmy = value_at(z - [0.0, hs])
        grad = np.array([(fpx - fmx), (fpy - fmy)]) / (2.0 * hs)
        if np.linalg.norm(grad) < GRAD_TOL:
            break
        fxy_pp = value_at(z + [hs, hs])
        fxy_pm = value_at(z + [hs, -hs])
        fxy_mp = value_at(z + [-hs, hs])
        fxy_mm = value_at(z - [hs, hs])
        hxx = (fpx - 2.0 * f0 + fmx) / hs**2
        hyy = (fpy - 2.0 * f0 + fmy) / hs**2
        hxy = (fxy_pp - fxy_pm - fxy_mp + fxy_mm) / (4.0 * hs**2)
        hess = np.array([[hxx, hxy], [hxy, hyy]])
        det = hxx * hyy - hxy * hxy
        if not (np.isfinite(det) and det > 0.0 and hxx < 0.0):
            break  # outside the concave basin; keep the best probe
        step = np.linalg.solve(hess, grad)
        znew = z - step
        if not np.isfinite(value_at(znew)):
            znew = 0.5 * (z + best[0])
        z = znew
        if count[0] > EVAL_BUDGET:
            break

    fz = value_at(z)
    if fz > best[1]:
        best[0], best[1] = z, fz
    z = best[0]

    uz = vals - (z[0] * cos_th + z[1] * sin_th)
    hs = 1e-6 * max(float(np.min(uz)), BOUNDARY_GUARD)
    grad = np.array([
        value_at(z + [hs, 0.0]) - value_at(z - [hs, 0.0]),
        value_at(z + [0.0, hs]) - value_at(z - [0.0, hs]),
    ]) / (2.0 * hs)
    if np.linalg.norm(grad) >= GRAD_TOL and count[0] >= EVAL_BUDGET:
        raise OptimFailed(
            f"entropy point not located within {EVAL_BUDGET} evaluations "
            f"(|grad| = {np.linalg.norm(grad):.2e})")
    return EntropyResult(value=float(best[1]), point=(float(z[0]), float(z[1])),
                         evaluations=count[0])


def check_subcritical_bound(u: SupportFunction, alpha) -> bool:
    """Whether the entropy respects the universal log(2) bound (alpha <= 1/3)."""
    if not 0.0 < alpha <= 1.0 / 3.0 + 1e-15:
        raise OutOfRange(f"the log(2) bound applies for alpha in (0, 1/3], got {alpha}")
    return entropy(u, alpha).value <= math.log(2.0) + 1e-8
