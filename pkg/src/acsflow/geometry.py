"""Support-function representation of closed convex plane curves.

A convex body is stored as samples of its support function u(theta) on a
uniform periodic grid. Differentiation is spectral (FFT), quadrature is the
uniform trapezoid rule; both are exact for band-limited data up to rounding.
The radius of curvature is u_thth + u, so strict convexity of the sampled
body means min(u_thth + u) > 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, NonConvex

# min(u_thth + u) > CONVEXITY_RTOL * mean(u) declares strict convexity; the
# guard protects the negative curvature powers used by the flow.
CONVEXITY_RTOL = 1e-8

DEFAULT_N = 256


@dataclass(frozen=True)
class AngularGrid:
    """Uniform grid theta_i = 2*pi*i/n on [0, 2*pi), n even and >= 16."""

    n: int

    def __post_init__(self):
        if self.n < 16 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 16, got {self.n}")

    @property
    def nodes(self):
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @property
    def dtheta(self):
        return 2.0 * np.pi / self.n


@dataclass(frozen=True)
class SupportFunction:
    """Nodal values u(theta_i) of a support function on an AngularGrid."""

    grid: AngularGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("support values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self):
        return self.grid.n


@dataclass(frozen=True)
class ConvexityReport:
    min_radius_of_curvature: float
    max_radius_of_curvature: float
    is_strictly_convex: bool


@dataclass(frozen=True)
class FourierModes:
    """Real coefficients of u = a0 + sum_m a[m-1] cos(m th) + b[m-1] sin(m th)."""

    a0: float
    a: np.ndarray
    b: np.ndarray

    @property
    def m_max(self):
        return len(self.a)


def _wavenumbers(n):
    return np.arange(n // 2 + 1, dtype=float)


def deriv1(values):
    """Spectral first derivative of periodic nodal data."""
    n = len(values)
    spec = np.fft.rfft(values)
    m = _wavenumbers(n)
    spec = spec * (1j * m)
    # The Nyquist cosine has no representable sine derivative on this grid.
    spec[-1] = 0.0
    return np.fft.irfft(spec, n)


def deriv2(values):
    """Spectral second derivative of periodic nodal data."""
    n = len(values)
    spec = np.fft.rfft(values)
    m = _wavenumbers(n)
    return np.fft.irfft(spec * (-(m * m)), n)


def radius_of_curvature(u: SupportFunction) -> np.ndarray:
    """Per-node u_thth + u, the radius of curvature in the normal-angle gauge."""
    return deriv2(u.values) + u.values


def convexity_report(u: SupportFunction) -> ConvexityReport:
    w = radius_of_curvature(u)
    tol = CONVEXITY_RTOL * float(np.mean(u.values))
    wmin = float(np.min(w))
    return ConvexityReport(wmin, float(np.max(w)), bool(wmin > tol))


def require_convex(u: SupportFunction) -> np.ndarray:
    """Radius-of-curvature array of a strictly convex body, else NonConvex."""
    w = radius_of_curvature(u)
    tol = CONVEXITY_RTOL * float(np.mean(u.values))
    wmin = float(np.min(w))
    if not wmin > tol:
        raise NonConvex(f"min radius of curvature {wmin:.3e} <= tolerance {tol:.3e}")
    return w


def curvature(u: SupportFunction) -> np.ndarray:
    return 1.0 / require_convex(u)


def area(u: SupportFunction) -> float:
    """Enclosed area (1/2) integral of u * (u_thth + u)."""
    w = require_convex(u)
    return 0.5 * u.grid.dtheta * float(np.sum(u.values * w))


def length(u: SupportFunction) -> float:
    """Boundary length, the integral of the radius of curvature."""
    w = require_convex(u)
    return u.grid.dtheta * float(np.sum(w))


def isoperimetric_ratio(u: SupportFunction) -> float:
    return area(u) / length(u) ** 2


def translate(u: SupportFunction, z) -> SupportFunction:
    """Support function of the same body with the origin moved to z."""
    zx, zy = float(z[0]), float(z[1])
    th = u.grid.nodes
    return SupportFunction(u.grid, u.values - (zx * np.cos(th) + zy * np.sin(th)))


def rotate_nodes(u: SupportFunction, shift: int) -> SupportFunction:
    """Rotate the body by shift grid spacings (u'(th) = u(th + shift*dth))."""
    return SupportFunction(u.grid, np.roll(u.values, -shift))


def embed(u: SupportFunction) -> np.ndarray:
    """Boundary points X(theta_i), shape (n, 2)."""
    require_convex(u)
    th = u.grid.nodes
    ut = deriv1(u.values)
    c, s = np.cos(th), np.sin(th)
    return np.stack([u.values * c - ut * s, u.values * s + ut * c], axis=1)


def steiner_point(u: SupportFunction) -> np.ndarray:
    """Curvature-weighted boundary centroid; strictly interior for convex bodies."""
    w = require_convex(u)
    pts = embed(u)
    return (pts * w[:, None]).mean(axis=0)


def fourier_modes(u: SupportFunction, m_max: int) -> FourierModes:
    """Leading real Fourier coefficients, a_m = (1/pi) integral u cos(m th)."""
    n = u.grid.n
    if not 0 < m_max < n // 2:
        raise ValueError(f"m_max must be in [1, {n // 2 - 1}], got {m_max}")
    spec = np.fft.rfft(u.values)
    a0 = float(spec[0].real) / n
    a = 2.0 * spec[1 : m_max + 1].real / n
    b = -2.0 * spec[1 : m_max + 1].imag / n
    return FourierModes(a0, a, b)


def synthesize(grid: AngularGrid, modes: FourierModes) -> SupportFunction:
    """Evaluate a truncated Fourier series on the grid (inverse of fourier_modes)."""
    th = grid.nodes
    vals = np.full(grid.n, modes.a0)
    for m in range(1, modes.m_max + 1):
        vals = vals + modes.a[m - 1] * np.cos(m * th) + modes.b[m - 1] * np.sin(m * th)
    return SupportFunction(grid, vals)


def circle_support(grid: AngularGrid, radius: float = 1.0, center=(0.0, 0.0)) -> SupportFunction:
    th = grid.nodes
    vals = radius + center[0] * np.cos(th) + center[1] * np.sin(th)
    return SupportFunction(grid, vals)


def ellipse_support(grid: AngularGrid, a: float, b: float) -> SupportFunction:
    """Origin-centered axis-aligned ellipse with semi-axes (a, b)."""
    th = grid.nodes
    return SupportFunction(grid, np.sqrt((a * np.cos(th)) ** 2 + (b * np.sin(th)) ** 2))


def random_convex_support(grid: AngularGrid, rng: np.random.Generator,
                          max_mode: int = 8, amplitude: float = 0.3,
                          min_radius: float = 0.05) -> SupportFunction:
    """Random smooth strictly convex body: damped random Fourier modes on a circle.

    The perturbation is halved until min(u_thth + u) >= min_radius, so every
    returned body passes the convexity check with margin.
    """
    th = grid.nodes
    pert = np.zeros(grid.n)
    for m in range(1, max_mode + 1):
        am, bm = rng.normal(size=2) * amplitude / (1.0 + m * m)
        pert += am * np.cos(m * th) + bm * np.sin(m * th)
    for _ in range(60):
        u = SupportFunction(grid, 1.0 + pert)
        if np.min(radius_of_curvature(u)) >= min_radius:
            return u
        pert *= 0.5
    return SupportFunction(grid, np.ones(grid.n))


def check_same_grid(u: SupportFunction, v: SupportFunction) -> None:
    if u.grid.n != v.grid.n:
        raise GridMismatch(f"grid sizes differ: {u.grid.n} vs {v.grid.n}")


# -- serialization ------------------------------------------------------------

def support_to_json(u: SupportFunction) -> dict:
    return {"n": u.grid.n, "values": [float(v) for v in u.values]}


def support_from_json(obj: dict) -> SupportFunction:
    return SupportFunction(AngularGrid(int(obj["n"])), np.asarray(obj["values"], dtype=float))


def support_to_csv(u: SupportFunction) -> str:
    lines = ["theta,u"]
    for th, val in zip(u.grid.nodes, u.values):
        lines.append(f"{float(th)!r},{float(val)!r}")
    return "\n".join(lines) + "\n"


def support_from_csv(text: str) -> SupportFunction:
    rows = [line for line in text.strip().splitlines()[1:] if line]
    vals = np.array([float(line.split(",")[1]) for line in rows])
    return SupportFunction(AngularGrid(len(vals)), vals)
