"""Steady (Laplace p -> 0) problem in reduced coordinates, the criterion T1 and its adjoints.

Every boundary value problem handled here has the form

    (1/2R_a) u'' = sigma rho u              on (0, ell1)
    (pi/R_a) u'(0) = A_s beta u(0) - c0
    u'(ell1) = c_end

whose weak form is

    (1/2R_a) int u'z' + sigma int rho u z + A beta u(0) z(0) = c0 z(0)/(2 pi) + c_end z(ell1)/(2 R_a).

w0 is (sigma, beta, c0, c_end) = (G_m, G_s, 1, 0).  The adjoints are solved through
q2 - 1 (c0 = -A_s G_s) and q1 - y (c0 = pi/R_a, c_end = -1), which satisfy the same
homogeneous equation.  The Laplace solution w_p uses sigma = G_m + C_m p and
beta = G_s + C_m p.

rho is piecewise constant on its cells, and each cell contributes the exact
Dirichlet-to-Neumann map of u'' = omega^2 u (omega^2 = 2 R_a sigma rho), i.e. a
Galerkin method on exponential splines.  Nodal values are therefore exact for
piecewise-constant rho, and smooth rho enters only through its cell averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError
from .model import PhysicalParams, RhoProfile

__all__ = [
    "SteadyState",
    "BangBangProfile",
    "solve_w0",
    "transfer_T1",
    "solve_adjoints",
    "steady_state",
    "gradient_T1",
    "cell_gradient",
    "directional_derivative",
    "bang_bang_T1",
    "bang_bang_dT1",
    "constant_rho_T1",
    "solve_wp",
    "energy_p",
    "h1_norm",
]


def _cell_omega_h(rho: RhoProfile, params: PhysicalParams, sigma: float) -> np.ndarray:
    return np.sqrt(2.0 * params.R_a * sigma * rho.values) * rho.widths


def _system(rho: RhoProfile, params: PhysicalParams, sigma: float, beta: float) -> np.ndarray:
    """Banded (1, 1) form of the symmetric tridiagonal system."""
    h = rho.widths
    z = _cell_omega_h(rho, params, sigma)
    scale = 1.0 / (2.0 * params.R_a * h)
    diag_part = scale * z / np.tanh(z)
    off = -scale * z / np.sinh(z)
    n = rho.n_cells + 1
    ab = np.zeros((3, n))
    ab[1, :-1] += diag_part
    ab[1, 1:] += diag_part
    ab[1, 0] += params.A * beta
    ab[0, 1:] = off
    ab[2, :-1] = off
    return ab


def _solve(rho, params, sigma, beta, loads):
    """Solve for one or more (c0, c_end) load pairs sharing the same operator."""
    ab = _system(rho, params, sigma, beta)
    rhs = np.zeros((rho.n_cells + 1, len(loads)))
    for j, (c0, c_end) in enumerate(loads):
        rhs[0, j] += c0 / (2.0 * np.pi)
        rhs[-1, j] += c_end / (2.0 * params.R_a)
    return solve_banded((1, 1), ab, rhs)


def _midpoints(u: np.ndarray, omega_h: np.ndarray) -> np.ndarray:
    # exact cell-centre value of the local exponential solution
    return (u[:-1] + u[1:]) / (2.0 * np.cosh(0.5 * omega_h))


def solve_w0(rho: RhoProfile, params: PhysicalParams) -> np.ndarray:
    """Nodal values of w0 on ``rho.edges``."""
    return _solve(rho, params, params.G_m, params.G_s, [(1.0, 0.0)])[:, 0]


def transfer_T1(rho: RhoProfile, params: PhysicalParams) -> float:
    w0 = solve_w0(rho, params)
    return float(w0[0] / w0[-1])


def solve_adjoints(rho: RhoProfile, params: PhysicalParams) -> tuple[np.ndarray, np.ndarray]:
    """Nodal values of (q1, q2)."""
    r, s = _adjoint_shifted(rho, params)
    return s + rho.edges, r + 1.0


def _adjoint_shifted(rho, params):
    loads = [(-params.A_s * params.G_s, 0.0), (np.pi / params.R_a, -1.0)]
    sol = _solve(rho, params, params.G_m, params.G_s, loads)
    return sol[:, 0], sol[:, 1]


@dataclass(frozen=True, eq=False)
class SteadyState:
    """w0, q1, q2 on the nodes of ``y`` plus exact cell-centre values for quadrature."""

    y: np.ndarray
    w0: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    w0_mid: np.ndarray
    q1_mid: np.ndarray
    q2_mid: np.ndarray
    Atilde: float
    R_a: float
    G_m: float

    def _f(self, q1, q2, y):
        return self._prefactor * (self._ratio * (q2 - 1.0) - self.w0[0] * (q1 - y))

    @property
    def _prefactor(self) -> float:
        return 2.0 * self.R_a * self.G_m / self.w0[-1] ** 2

    @property
    def _ratio(self) -> float:
        return (self.w0[-1] - self.w0[0]) / self.Atilde

    @property
    def T1(self) -> float:
        return float(self.w0[0] / self.w0[-1])

    @property
    def f(self) -> np.ndarray:
        return self._f(self.q1, self.q2, self.y)

    @property
    def g(self) -> np.ndarray:
        return (self.q1 - self.y) / (self.q2 - 1.0)

    @property
    def density(self) -> np.ndarray:
        """Gradient density w0 * f at the nodes."""
        return self.w0 * self.f

    def cell_integrals(self) -> np.ndarray:
        """int over each cell of w0 f, by Simpson's rule on the exact local solutions."""
        mid = 0.5 * (self.y[1:] + self.y[:-1])
        centre = self.w0_mid * self._f(self.q1_mid, self.q2_mid, mid)
        dens = self.density
        return np.diff(self.y) / 6.0 * (dens[:-1] + 4.0 * centre + dens[1:])


def steady_state(rho: RhoProfile, params: PhysicalParams) -> SteadyState:
    omega_h = _cell_omega_h(rho, params, params.G_m)
    loads = [(1.0, 0.0), (-params.A_s * params.G_s, 0.0), (np.pi / params.R_a, -1.0)]
    sol = _solve(rho, params, params.G_m, params.G_s, loads)
    w0, r, s = sol.T
    mid_y = rho.midpoints
    return SteadyState(
        y=rho.edges,
        w0=w0,
        q1=s + rho.edges,
        q2=r + 1.0,
        w0_mid=_midpoints(w0, omega_h),
        q1_mid=_midpoints(s, omega_h) + mid_y,
        q2_mid=_midpoints(r, omega_h) + 1.0,
        Atilde=2.0 * params.A * params.G_s * params.R_a,
        R_a=params.R_a,
        G_m=params.G_m,
    )


def gradient_T1(rho: RhoProfile, params: PhysicalParams) -> np.ndarray:
    """Nodal values of the density y -> w0(y) f(y) of the derivative of T1."""
    return steady_state(rho, params).density


def cell_gradient(rho: RhoProfile, params: PhysicalParams) -> np.ndarray:
    """Partial derivatives of T1 with respect to the cell values of rho."""
    return steady_state(rho, params).cell_integrals()


def directional_derivative(rho: RhoProfile, params: PhysicalParams, h) -> float:
    """<dT1/drho, h> for a perturbation ``h`` that is constant on each cell of ``rho``."""
    h = np.asarray(h, dtype=float)
    if h.shape != rho.values.shape:
        raise ValueError("perturbation must have one value per cell")
    return float(np.dot(h, cell_gradient(rho, params)))


@dataclass(frozen=True)
class BangBangProfile:
    """rho = M on [0, xi1), a0^3 on (xi1, ell1]."""

    xi1: float
    M: float
    a0: float
    ell1: float

    def __post_init__(self):
        if not 0.0 <= self.xi1 <= self.ell1:
            raise ConfigError(f"xi1 must lie in [0, ell1={self.ell1}], got {self.xi1}")
        if self.M <= self.a0**3:
            raise ConfigError(f"M must exceed a0^3 = {self.a0 ** 3}, got {self.M}")

    def omegas(self, params: PhysicalParams) -> tuple[float, float]:
        k = 2.0 * params.R_a * params.G_m
        return float(np.sqrt(k * self.a0**3)), float(np.sqrt(k * self.M))

    def integral(self) -> float:
        return self.M * self.xi1 + self.a0**3 * (self.ell1 - self.xi1)

    def to_rho(self, n_cells: int = 2048) -> RhoProfile:
        """Uniform grid with xi1 inserted as a node, so the jump is represented exactly."""
        edges = np.linspace(0.0, self.ell1, n_cells + 1)
        if 0.0 < self.xi1 < self.ell1:
            edges = np.union1d(edges, [self.xi1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        return RhoProfile(edges, np.where(mid < self.xi1, self.M, self.a0**3))


def bang_bang_T1(bb: BangBangProfile, params: PhysicalParams) -> float:
    w0, wm = bb.omegas(params)
    xi, ell1 = bb.xi1, bb.ell1
    r = w0 / wm
    first = np.cosh(w0 * xi) * np.cosh(wm * xi) - r * np.sinh(wm * xi) * np.sinh(w0 * xi)
    second = np.sinh(w0 * xi) * np.cosh(wm * xi) - r * np.sinh(wm * xi) * np.cosh(w0 * xi)
    return float(np.cosh(w0 * ell1) * first - np.sinh(w0 * ell1) * second)


def bang_bang_dT1(bb: BangBangProfile, params: PhysicalParams) -> float:
    """d T1 / d xi1 of the two-level profile; non-negative, zero only at xi1 = 0."""
    w0, wm = bb.omegas(params)
    return float((wm**2 - w0**2) / wm * np.sinh(wm * bb.xi1) * np.cosh(w0 * (bb.ell1 - bb.xi1)))


def constant_rho_T1(level: float, ell1: float, params: PhysicalParams) -> float:
    """T1 for rho constant, cosh(sqrt(2 R_a G_m level) ell1)."""
    return float(np.cosh(np.sqrt(2.0 * params.R_a * params.G_m * level) * ell1))


def solve_wp(rho: RhoProfile, params: PhysicalParams, p: float) -> np.ndarray:
    """Nodal values of the Laplace-transformed steady profile at frequency p >= 0."""
    if p < 0:
        raise ValueError(f"p must be non-negative, got {p}")
    shift = params.C_m * p
    return _solve(rho, params, params.G_m + shift, params.G_s + shift, [(1.0, 0.0)])[:, 0]


def energy_p(rho: RhoProfile, params: PhysicalParams, p: float, u) -> float:
    """a_p(u, u) for the exponential-spline function with nodal values ``u``."""
    u = np.asarray(u, dtype=float)
    shift = params.C_m * p
    ab = _system(rho, params, params.G_m + shift, params.G_s + shift)
    Ku = ab[1] * u
    Ku[:-1] += ab[0, 1:] * u[1:]
    Ku[1:] += ab[2, :-1] * u[:-1]
    return float(u @ Ku)


def h1_norm(rho: RhoProfile, u) -> float:
    """H1 norm of the piecewise-linear interpolant of nodal values ``u``."""
    u = np.asarray(u, dtype=float)
    h = rho.widths
    du = np.diff(u)
    l2 = np.sum(h * (u[:-1] ** 2 + u[:-1] * u[1:] + u[1:] ** 2) / 3.0)
    return float(np.sqrt(np.sum(du**2 / h) + l2))
