"""Finite-element solution of the cable eigenproblem with a dynamic soma condition.

The eigenvalue also appears in the x = 0 boundary condition.  In weak form that
condition becomes a point mass A at x = 0 in the mass matrix and a point term
-A*gamma in the stiffness matrix, so the problem is the symmetric-definite pencil

    K u = mu M u,
    K = int a^2 u' v' - A gamma u(0) v(0),
    M = int a sqrt(1+a'^2) u v + A u(0) v(0).

Piecewise-linear (hat) elements on a uniform x-grid.  The taper nodes need not
coincide with the element nodes: integrals are split at every taper node and
evaluated with 2-point Gauss rules, which are exact for these polynomial
integrands.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.linalg import solve_banded
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import ConfigError, EigenSolverError
from .model import PhysicalParams, TaperProfile

__all__ = [
    "AssembledSystem",
    "EigenPair",
    "Mu1Comparison",
    "assemble",
    "solve_spectrum",
    "rayleigh",
    "rayleigh_quotient",
    "rayleigh_parts",
    "compare_mu1",
    "first_eigenvalue",
    "mu1_gradient",
    "relative_residuals",
    "backward_errors",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(2)
BACKWARD_TOL = 1e-10  # normwise backward error beyond which the solve is reported as failed


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    K: sp.csr_matrix
    M: sp.csr_matrix
    x: np.ndarray
    A: float
    gamma: float
    profile: TaperProfile

    @property
    def size(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class EigenPair:
    n: int
    mu: float
    phi: np.ndarray
    x: np.ndarray

    @property
    def phi_at_0(self) -> float:
        return float(self.phi[0])

    @property
    def phi_at_ell(self) -> float:
        return float(self.phi[-1])

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.phi)


class Mu1Comparison(NamedTuple):
    mu1_a: float
    mu1_cyl: float
    margin: float


def _quadrature(a: TaperProfile, grid: np.ndarray):
    """Gauss points on the common refinement of the element grid and the taper nodes.

    Returns the element index, taper segment, point and weight of each quadrature point.
    """
    pts = np.union1d(grid, a.x)
    lo, hi = pts[:-1], pts[1:]
    mid = 0.5 * (lo + hi)
    elem = np.clip(np.searchsorted(grid, mid) - 1, 0, grid.size - 2)
    seg = a.segment_index(mid)
    half = 0.5 * (hi - lo)
    xq = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
    wq = (half[:, None] * _GAUSS_W[None, :]).ravel()
    return np.repeat(elem, 2), np.repeat(seg, 2), xq, wq


def assemble(a: TaperProfile, params: PhysicalParams, n_cells: int = 2048) -> AssembledSystem:
    if n_cells < 8:
        raise ConfigError(f"n_cells must be >= 8, got {n_cells}")
    grid = np.linspace(0.0, a.ell, n_cells + 1)
    h = np.diff(grid)
    elem, seg, xq, wq = _quadrature(a, grid)
    radius = a(xq)
    if np.any(radius <= 0):
        raise ConfigError("degenerate profile: non-positive radius")
    weight = radius * np.sqrt(1.0 + a.slopes[seg] ** 2)
    he = h[elem]
    n1 = (xq - grid[elem]) / he
    n0 = 1.0 - n1

    stiff = np.bincount(elem, wq * radius**2, minlength=n_cells) / h**2
    m00 = np.bincount(elem, wq * weight * n0 * n0, minlength=n_cells)
    m01 = np.bincount(elem, wq * weight * n0 * n1, minlength=n_cells)
    m11 = np.bincount(elem, wq * weight * n1 * n1, minlength=n_cells)

    n = n_cells + 1
    k_diag = np.zeros(n)
    k_diag[:-1] += stiff
    k_diag[1:] += stiff
    m_diag = np.zeros(n)
    m_diag[:-1] += m00
    m_diag[1:] += m11
    k_diag[0] -= params.A * params.gamma
    m_diag[0] += params.A
    K = sp.diags([-stiff, k_diag, -stiff], [-1, 0, 1], format="csr")
    M = sp.diags([m01, m_diag, m01], [-1, 0, 1], format="csr")
    return AssembledSystem(K, M, grid, params.A, params.gamma, a)


def relative_residuals(sys: AssembledSystem, mu, vecs) -> np.ndarray:
    """||K phi - mu M phi|| / ||M phi|| per column."""
    vecs = np.atleast_2d(np.asarray(vecs, dtype=float).T).T
    Mv = sys.M @ vecs
    return np.linalg.norm(sys.K @ vecs - Mv * np.atleast_1d(mu)[None, :], axis=0) / np.linalg.norm(Mv, axis=0)


def backward_errors(sys: AssembledSystem, mu, vecs) -> np.ndarray:
    """||K phi - mu M phi|| / ((||K|| + |mu| ||M||) ||phi||), 1-norms of the matrices."""
    vecs = np.atleast_2d(np.asarray(vecs, dtype=float).T).T
    mu = np.atleast_1d(mu)
    r = np.linalg.norm(sys.K @ vecs - (sys.M @ vecs) * mu[None, :], axis=0)
    nk, nm = spla.norm(sys.K, 1), spla.norm(sys.M, 1)
    return r / ((nk + np.abs(mu) * nm) * np.linalg.norm(vecs, axis=0))


def _check_residuals(sys: AssembledSystem, mu: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    err = backward_errors(sys, mu, vecs)
    if np.any(err > BACKWARD_TOL) or not np.all(np.isfinite(err)):
        res = relative_residuals(sys, mu, vecs)
        raise EigenSolverError(f"eigenpair residuals too large: max relative {res.max():.3e}", residuals=res)
    return err


def _banded(mat: sp.spmatrix) -> np.ndarray:
    dia = mat.todia()
    ab = np.zeros((3, mat.shape[0]))
    for offset, row in zip(dia.offsets, dia.data):
        # dia stores entry (i, i+offset) at row[i+offset]; banded storage matches that column index
        ab[1 - offset] += row
    return ab


def _matvec_ext(ab: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Tridiagonal product in extended precision (np.longdouble)."""
    ab = ab.astype(np.longdouble)
    out = ab[1] * v
    out[:-1] += ab[0, 1:] * v[1:]
    out[1:] += ab[2, :-1] * v[:-1]
    return out


def _refine(sys: AssembledSystem, mu: np.ndarray, vecs: np.ndarray):
    """Per mode, one Rayleigh-quotient inverse iteration, then one correction with the residual in extended precision.

    In float64 the residual K v - mu M v loses about log10(||K||/||M||) digits to
    cancellation, which caps the attainable accuracy on fine grids; forming it in
    long double and solving for the correction in float64 removes that cap.
    """
    Kb, Mb = _banded(sys.K), _banded(sys.M)
    mu = mu.copy()
    vecs = vecs.copy()
    for i in range(mu.size):
        # plain Rayleigh-quotient inverse iteration first
        try:
            y = solve_banded((1, 1), Kb - mu[i] * Mb, sys.M @ vecs[:, i])
        except np.linalg.LinAlgError:
            y = None
        if y is not None and np.all(np.isfinite(y)):
            vecs[:, i] = y / np.sqrt(y @ (sys.M @ y))
            mu[i] = vecs[:, i] @ (sys.K @ vecs[:, i])
        v = vecs[:, i].astype(np.longdouble)
        Kv, Mv = _matvec_ext(Kb, v), _matvec_ext(Mb, v)
        shift = (v @ Kv) / (v @ Mv)
        try:
            d = solve_banded((1, 1), Kb - float(shift) * Mb, (Kv - shift * Mv).astype(float))
        except np.linalg.LinAlgError:
            continue  # exactly singular shift: already an eigenpair to working precision
        if not np.all(np.isfinite(d)):
            continue
        w = v - d.astype(np.longdouble)
        Kw, Mw = _matvec_ext(Kb, w), _matvec_ext(Mb, w)
        mu_w = (w @ Kw) / (w @ Mw)
        old = np.linalg.norm((Kv - shift * Mv).astype(float)) / np.linalg.norm(Mv.astype(float))
        new = np.linalg.norm((Kw - mu_w * Mw).astype(float)) / np.linalg.norm(Mw.astype(float))
        if new < old:  # near-singular shifts can make the correction useless
            mu[i] = float(mu_w)
            vecs[:, i] = (w / np.sqrt(w @ Mw)).astype(float)
    return mu, vecs


def solve_spectrum(sys: AssembledSystem, k: int = 1, method: str = "sparse") -> list[EigenPair]:
    """The ``k`` smallest eigenpairs, numbered from 1, with phi^T M phi = 1 and phi(0) >= 0.

    ``method="sparse"`` uses shift-invert Lanczos with the shift placed below -gamma,
    which is a strict lower bound for the spectrum, so the k eigenvalues nearest
    the shift are the k smallest.  ``method="dense"`` solves the full pencil.
    """
    n = sys.size
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    if method == "sparse" and k < n - 1 and n > 32:
        shift = -sys.gamma - max(1.0, sys.gamma)
        try:
            # fixed start vector: ARPACK otherwise draws a random one and runs are not reproducible
            v0 = np.random.default_rng(0).standard_normal(n)
            mu, vecs = eigsh(sys.K.tocsc(), k=k, M=sys.M.tocsc(), sigma=shift, which="LM", v0=v0)
        except ArpackNoConvergence as exc:
            raise EigenSolverError(f"shift-invert Lanczos did not converge: {exc}") from exc
    elif method in ("sparse", "dense"):
        mu, vecs = scipy.linalg.eigh(sys.K.toarray(), sys.M.toarray(), subset_by_index=[0, k - 1])
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(mu)
    mu, vecs = mu[order], vecs[:, order]
    if method == "sparse":
        mu, vecs = _refine(sys, mu, vecs)
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, sys.M @ vecs))
    vecs = vecs / norms
    vecs = vecs * np.where(vecs[0] < 0, -1.0, 1.0)
    _check_residuals(sys, mu, vecs)
    return [EigenPair(i + 1, float(mu[i]), vecs[:, i].copy(), sys.x) for i in range(k)]


def rayleigh_parts(sys: AssembledSystem, v) -> tuple[float, float]:
    """Numerator and denominator of the discrete Rayleigh quotient."""
    v = np.asarray(v, dtype=float)
    if v.shape != (sys.size,):
        raise ValueError(f"v must have {sys.size} nodal values")
    return float(v @ (sys.K @ v)), float(v @ (sys.M @ v))


def rayleigh_quotient(sys: AssembledSystem, v) -> float:
    num, den = rayleigh_parts(sys, v)
    if den <= 0:
        raise ValueError("v must not vanish identically")
    return num / den


def rayleigh(a: TaperProfile, params: PhysicalParams, v) -> float:
    """R[a; v] for nodal values ``v`` on the uniform grid with len(v) - 1 cells."""
    v = np.asarray(v, dtype=float)
    return rayleigh_quotient(assemble(a, params, v.size - 1), v)


def first_eigenvalue(a: TaperProfile, params: PhysicalParams, n_cells: int = 2048, method: str = "sparse") -> float:
    return solve_spectrum(assemble(a, params, n_cells), 1, method)[0].mu


def compare_mu1(a: TaperProfile, a0: float, params: PhysicalParams, n_cells: int = 2048) -> Mu1Comparison:
    """mu1 of ``a`` against the cylinder a = a0 of the same length, on the same grid."""
    if np.min(a.a) < a0 * (1.0 - 1e-12):
        raise ConfigError("profile violates the radius floor a >= a0")
    mu_a = first_eigenvalue(a, params, n_cells)
    mu_cyl = first_eigenvalue(TaperProfile.constant(a0, a.ell), params, n_cells)
    return Mu1Comparison(mu_a, mu_cyl, mu_a - mu_cyl)


def mu1_gradient(a: TaperProfile, params: PhysicalParams, n_cells: int = 2048) -> tuple[float, np.ndarray]:
    """mu1 and its derivative with respect to the nodal radii of ``a``.

    For a simple eigenvalue with phi^T M phi = 1, d mu = phi^T (dK - mu dM) phi;
    the soma terms do not depend on the taper and drop out.
    """
    sys = assemble(a, params, n_cells)
    pair = solve_spectrum(sys, 1)[0]
    mu, phi = pair.mu, pair.phi
    grid = sys.x
    elem, seg, xq, wq = _quadrature(a, grid)
    h = grid[1] - grid[0]
    t = (xq - grid[elem]) / h
    u = phi[elem] * (1.0 - t) + phi[elem + 1] * t
    du = (phi[elem + 1] - phi[elem]) / h

    dx = np.diff(a.x)[seg]
    s = a.slopes[seg]
    stretch = np.sqrt(1.0 + s**2)
    radius = a(xq)
    right = (xq - a.x[seg]) / dx  # hat of node seg+1 on this segment
    grad = np.zeros(a.x.size)
    for hat, dhat, node in ((1.0 - right, -1.0 / dx, seg), (right, 1.0 / dx, seg + 1)):
        dk = 2.0 * radius * hat * du**2
        dm = (hat * stretch + radius * s * dhat / stretch) * u**2
        grad += np.bincount(node, wq * (dk - mu * dm), minlength=a.x.size)
    return mu, grad
