"""Physical constants, taper profiles and the reduced conductance weight rho(y).

A taper is a piecewise-linear radius a(x) on [0, ell].  Because a' is constant
on every segment, the lateral integral of a*sqrt(1 + a'^2) and the reduced
coordinate y = int_0^x dt / a(t)^2 both have closed forms per segment, and all
quantities here are computed from those closed forms rather than by quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError

__all__ = [
    "PhysicalParams",
    "TaperProfile",
    "RhoProfile",
    "Admissibility",
    "Reduction",
    "surface_area",
    "lateral_integral",
    "is_admissible",
    "inner_product_a",
    "change_of_variable",
    "project_profile",
    "random_admissible_profile",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Electrical constants of the fiber and soma.

    Units: R_a in kOhm*cm, C_m in uF/cm^2, G_m and G_s in mS/cm^2, A_s in cm^2.
    """

    R_a: float
    C_m: float
    G_m: float
    G_s: float
    A_s: float

    def __post_init__(self):
        for name in ("R_a", "C_m", "G_m", "G_s", "A_s"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if self.G_m < self.G_s:
            raise ConfigError(
                f"gamma = 2 R_a (G_m - G_s) must be non-negative (G_m={self.G_m}, G_s={self.G_s})"
            )

    @property
    def gamma(self) -> float:
        return 2.0 * self.R_a * (self.G_m - self.G_s)

    @property
    def A(self) -> float:
        return self.A_s / (2.0 * np.pi)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalParams":
        try:
            return cls(**{k: float(data[k]) for k in ("R_a", "C_m", "G_m", "G_s", "A_s")})
        except KeyError as exc:
            raise ConfigError(f"missing physical parameter {exc.args[0]!r}") from None


@dataclass(frozen=True, eq=False)
class TaperProfile:
    """Piecewise-linear radius profile given by its nodal values."""

    x: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if x.ndim != 1 or x.shape != a.shape or x.size < 2:
            raise ValueError("x and a must be 1-D arrays of equal length >= 2")
        if x[0] != 0.0:
            raise ValueError("profile grid must start at x = 0")
        if np.any(np.diff(x) <= 0):
            raise ValueError("profile grid must be strictly increasing")
        if np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise ValueError("radius must be positive everywhere")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", a)

    @property
    def ell(self) -> float:
        return float(self.x[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.a) / np.diff(self.x)

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.a)

    def segment_index(self, x) -> np.ndarray:
        """Index of the segment containing each point (right end belongs to the last)."""
        idx = np.searchsorted(self.x, x, side="right") - 1
        return np.clip(idx, 0, self.x.size - 2)

    def derivative(self, x) -> np.ndarray:
        return self.slopes[self.segment_index(x)]

    def is_constant(self, atol: float = 0.0) -> bool:
        return bool(np.ptp(self.a) <= atol)

    @classmethod
    def constant(cls, radius: float, ell: float, n_nodes: int = 2) -> "TaperProfile":
        x = np.linspace(0.0, ell, n_nodes)
        return cls(x, np.full(n_nodes, float(radius)))

    @classmethod
    def from_function(cls, fn: Callable, ell: float, n_nodes: int) -> "TaperProfile":
        x = np.linspace(0.0, ell, n_nodes)
        return cls(x, np.asarray(fn(x), dtype=float))

    @classmethod
    def bump(cls, a0: float, ell: float, height: float = 0.5, n_nodes: int = 65) -> "TaperProfile":
        """a0 * (1 + height * sin^2(pi x / ell)), sampled at uniform nodes."""
        return cls.from_function(lambda x: a0 * (1.0 + height * np.sin(np.pi * x / ell) ** 2), ell, n_nodes)

    def with_radii(self, a) -> "TaperProfile":
        return TaperProfile(self.x, a)


@dataclass(frozen=True, eq=False)
class RhoProfile:
    """Piecewise-constant rho(y) on the cells of ``edges`` (values are cell averages)."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or values.shape != (edges.size - 1,):
            raise ValueError("need len(values) == len(edges) - 1 >= 1")
        if edges[0] != 0.0 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must start at 0 and be strictly increasing")
        if np.any(~np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("rho must be positive")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    @property
    def ell1(self) -> float:
        return float(self.edges[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def n_cells(self) -> int:
        return self.values.size

    def integral(self) -> float:
        return float(np.dot(self.values, self.widths))

    def is_admissible(self, a0: float, S: float, M: float | None = None, rtol: float = 1e-12) -> bool:
        """Membership in R_{a0,S}, or in the bounded class when ``M`` is given."""
        floor = a0**3
        ok = bool(np.all(self.values >= floor * (1.0 - rtol)))
        ok &= self.integral() <= S * (1.0 + rtol)
        if M is not None:
            ok &= bool(np.all(self.values <= M * (1.0 + rtol)))
        return ok

    def with_values(self, values) -> "RhoProfile":
        return RhoProfile(self.edges, values)

    @classmethod
    def constant(cls, level: float, ell1: float, n_cells: int = 2048) -> "RhoProfile":
        return cls(np.linspace(0.0, ell1, n_cells + 1), np.full(n_cells, float(level)))

    @classmethod
    def from_function(cls, fn: Callable, ell1: float, n_cells: int = 2048, order: int = 8) -> "RhoProfile":
        """Cell averages of a smooth ``fn`` by Gauss-Legendre quadrature per cell."""
        edges = np.linspace(0.0, ell1, n_cells + 1)
        nodes, weights = np.polynomial.legendre.leggauss(order)
        h = np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        pts = mid[:, None] + 0.5 * h[:, None] * nodes[None, :]
        values = 0.5 * (fn(pts) @ weights)
        return cls(edges, values)


class Admissibility(NamedTuple):
    ok: bool
    min_radius: float
    lateral: float
    reasons: tuple


class Reduction(NamedTuple):
    """Result of the change of variables y = int_0^x dt / a^2."""

    ell1: float
    y_of_x: Callable
    x_of_y: Callable
    rho: RhoProfile


def _lateral_cumulative(a: TaperProfile) -> np.ndarray:
    """int_0^{x_i} a sqrt(1+a'^2) dx at every node (exact: a is linear per segment)."""
    dx = np.diff(a.x)
    cell = np.sqrt(1.0 + a.slopes**2) * 0.5 * (a.a[1:] + a.a[:-1]) * dx
    return np.concatenate(([0.0], np.cumsum(cell)))


def lateral_integral(a: TaperProfile) -> float:
    """int_0^ell a sqrt(1 + a'^2) dx, i.e. surface area without the 2 pi."""
    return float(_lateral_cumulative(a)[-1])


def surface_area(a: TaperProfile) -> float:
    return 2.0 * np.pi * lateral_integral(a)


def is_admissible(a: TaperProfile, a0: float, S: float, rtol: float = 1e-12) -> Admissibility:
    if S <= a0 * a.ell:
        raise ConfigError(f"empty admissible class: S={S} <= a0*ell={a0 * a.ell}")
    lateral = lateral_integral(a)
    reasons = []
    if np.min(a.a) < a0 * (1.0 - rtol):
        reasons.append(f"radius floor violated: min a = {np.min(a.a):.6g} < a0 = {a0:.6g}")
    if lateral > S * (1.0 + rtol):
        reasons.append(f"surface bound violated: lateral integral {lateral:.6g} > S = {S:.6g}")
    return Admissibility(not reasons, float(np.min(a.a)), lateral, tuple(reasons))


def inner_product_a(f, g, a: TaperProfile, A: float, x=None, refine: int = 4) -> float:
    """<f, g>_a = A f(0) g(0) + int a sqrt(1+a'^2) f g dx.

    ``f`` and ``g`` are nodal values on ``x`` (default: the taper grid), read as
    piecewise-linear functions.  The integral is a composite trapezoid rule on a
    ``refine``-fold subdivision of the union of ``x`` and the taper nodes.
    """
    x = a.x if x is None else np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != x.shape or g.shape != x.shape:
        raise ValueError("f and g must be sampled on the same grid as x")
    if not np.isclose(x[0], 0.0) or not np.isclose(x[-1], a.ell, rtol=1e-12, atol=1e-14):
        raise ValueError("grid must span the taper domain [0, ell]")
    base = np.union1d(x, a.x)
    t = np.linspace(0.0, 1.0, refine + 1)[:-1]
    fine = np.concatenate(((base[:-1, None] + np.diff(base)[:, None] * t).ravel(), base[-1:]))
    # weight is linear on each sub-interval; evaluate it from the left/right segment
    left_seg = a.segment_index(fine[:-1])
    right_seg = np.clip(np.searchsorted(a.x, fine[1:], side="left") - 1, 0, a.x.size - 2)
    stretch = np.sqrt(1.0 + a.slopes**2)
    fg = np.interp(fine, x, f) * np.interp(fine, x, g)
    wl = a(fine[:-1]) * stretch[left_seg]
    wr = a(fine[1:]) * stretch[right_seg]
    integral = 0.5 * np.sum(np.diff(fine) * (wl * fg[:-1] + wr * fg[1:]))
    return float(A * f[0] * g[0] + integral)


def change_of_variable(a: TaperProfile, n_cells: int = 2048) -> Reduction:
    """Map the taper to reduced coordinates.

    On a segment starting at x_i, y - y_i = (x - x_i) / (a_i a(x)), so both y(x)
    and its inverse are closed form.
    rho is returned as exact cell averages on a uniform y-grid with ``n_cells``
    cells: the cell integral of rho dy equals the lateral integral of the matching
    x-interval.
    """
    xs, ai, s = a.x, a.a, a.slopes
    # 1/a_i - 1/a(x) = s t / (a_i a(x)), which stays well conditioned as s -> 0
    y_nodes = np.concatenate(([0.0], np.cumsum(np.diff(xs) / (ai[:-1] * ai[1:]))))
    ell1 = float(y_nodes[-1])
    cum_lat = _lateral_cumulative(a)
    stretch = np.sqrt(1.0 + s**2)

    def y_of_x(x):
        x = np.asarray(x, dtype=float)
        k = a.segment_index(x)
        t = x - xs[k]
        return y_nodes[k] + t / (ai[k] * (ai[k] + s[k] * t))

    def x_of_y(y):
        y = np.asarray(y, dtype=float)
        k = np.clip(np.searchsorted(y_nodes, y, side="right") - 1, 0, y_nodes.size - 2)
        u = y - y_nodes[k]
        return xs[k] + u * ai[k] ** 2 / (1.0 - s[k] * u * ai[k])

    def lateral_at(x):
        k = a.segment_index(x)
        t = x - xs[k]
        return cum_lat[k] + stretch[k] * (ai[k] * t + 0.5 * s[k] * t**2)

    y_edges = np.linspace(0.0, ell1, n_cells + 1)
    x_edges = x_of_y(y_edges)
    x_edges[0], x_edges[-1] = 0.0, a.ell
    lat = lateral_at(x_edges)
    lat[-1] = cum_lat[-1]
    rho = RhoProfile(y_edges, np.diff(lat) / np.diff(y_edges))
    return Reduction(ell1, y_of_x, x_of_y, rho)


def _retract_surface(a0: float, a: np.ndarray, x: np.ndarray, S: float, tol: float = 1e-15) -> np.ndarray:
    """Scale the excess a - a0 by the largest t in [0, 1] keeping the lateral integral <= S."""
    excess = a - a0

    def lateral(t):
        return lateral_integral(TaperProfile(x, a0 + t * excess))

    if lateral(1.0) <= S:
        return a
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if lateral(mid) <= S:
            lo = mid
        else:
            hi = mid
    return a0 + lo * excess


def project_profile(a: TaperProfile, a0: float, S: float) -> TaperProfile:
    """Clip to the radius floor, then retract onto the surface bound."""
    if S <= a0 * a.ell:
        raise ConfigError(f"empty admissible class: S={S} <= a0*ell={a0 * a.ell}")
    clipped = np.maximum(a.a, a0)
    return TaperProfile(a.x, _retract_surface(a0, clipped, a.x, S))


def random_admissible_profile(
    rng: np.random.Generator, a0: float, ell: float, S: float, n_nodes: int = 9, amplitude: float = 0.5
) -> TaperProfile:
    """Random non-constant member of the admissible class (floor + surface bound)."""
    x = np.linspace(0.0, ell, n_nodes)
    radii = a0 * (1.0 + amplitude * rng.uniform(0.0, 1.0, n_nodes))
    radii[rng.integers(n_nodes)] = a0 * (1.0 + amplitude)  # guarantees a non-constant draw
    return project_profile(TaperProfile(x, radii), a0, S)
