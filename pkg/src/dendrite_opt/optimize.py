"""Constrained searches confirming that the cylinder minimises both attenuation criteria."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import eigen, transfer, transient
from .errors import ConfigError
from .model import (
    PhysicalParams,
    RhoProfile,
    TaperProfile,
    change_of_variable,
    lateral_integral,
    project_profile,
    random_admissible_profile,
)

__all__ = [
    "SearchConfig",
    "OptimizationReport",
    "PullbackCheck",
    "project_rho",
    "random_feasible_rho",
    "minimize_mu1",
    "minimize_T1_bounded",
    "minimize_xi1",
    "verify_pullback",
    "multi_start",
]

ARMIJO_C = 1e-4


@dataclass
class SearchConfig:
    n_nodes: int = 9  # taper nodes for the mu1 search
    n_cells: int = 2048
    max_iter: int = 500
    rtol: float = 1e-10
    seed: int | None = 0
    ell: float = 1.0
    method: str = "gradient"  # or "nelder-mead" for the mu1 search


@dataclass
class OptimizationReport:
    criterion: str
    best_profile: TaperProfile | RhoProfile
    best_value: float
    cylinder_value: float
    history: list = field(default_factory=list)
    active: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    bang_bang_history: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.best_value - self.cylinder_value

    def passes_gap_check(self, tol: float = 1e-8) -> bool:
        return self.gap >= -tol

    def to_dict(self) -> dict:
        out = {
            "criterion": self.criterion,
            "best_value": self.best_value,
            "cylinder_value": self.cylinder_value,
            "gap": self.gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "active": self.active,
            "history": list(self.history),
        }
        if self.bang_bang_history:
            out["bang_bang_fraction"] = list(self.bang_bang_history)
        return out


class PullbackCheck(NamedTuple):
    T_time: float
    T1: float
    closed_form: float
    rel_gap: float
    in_image: bool
    ok: bool


def _check_class(a0: float, S: float, ell: float):
    if a0 <= 0 or ell <= 0:
        raise ConfigError("a0 and ell must be positive")
    if S <= a0 * ell:
        raise ConfigError(f"empty admissible class: S={S} <= a0*ell={a0 * ell}")


def minimize_mu1(
    a0: float,
    S: float,
    params: PhysicalParams,
    config: SearchConfig | None = None,
    start: TaperProfile | None = None,
) -> OptimizationReport:
    """Projected gradient descent on the nodal radii with Armijo backtracking."""
    config = config or SearchConfig()
    ell = start.ell if start is not None else config.ell
    _check_class(a0, S, ell)
    if start is None:
        rng = np.random.default_rng(config.seed)
        start = random_admissible_profile(rng, a0, ell, S, config.n_nodes)
    a = project_profile(start, a0, S)
    cells = config.n_cells
    cylinder = eigen.first_eigenvalue(TaperProfile.constant(a0, ell), params, cells)

    if config.method == "nelder-mead":
        return _mu1_nelder_mead(a, a0, S, params, config, cylinder)
    if config.method != "gradient":
        raise ConfigError(f"unknown method {config.method!r}")

    value, grad = eigen.mu1_gradient(a, params, cells)
    history = [value]
    step = max(np.max(a.a) - a0, 0.1 * a0) / max(np.max(np.abs(grad)), 1e-300)
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        s = step
        accepted = False
        while s > 1e-16 * step:
            cand = project_profile(a.with_radii(np.maximum(a.a - s * grad, a0)), a0, S)
            d = cand.a - a.a
            if np.max(np.abs(d)) <= 1e-15 * a0:
                break
            cand_value, cand_grad = eigen.mu1_gradient(cand, params, cells)
            if cand_value <= value + ARMIJO_C * np.dot(grad, d):
                accepted = True
                break
            s *= 0.5
        if not accepted:
            converged = True  # projected gradient step vanished: stationary point
            break
        change = abs(value - cand_value)
        a, value, grad = cand, cand_value, cand_grad
        history.append(value)
        step = 2.0 * s
        if change <= config.rtol * max(abs(value), 1e-300):
            converged = True
            break

    return OptimizationReport("mu1", a, value, cylinder, history, _taper_active(a, a0, S), it, converged)


def _taper_active(a: TaperProfile, a0: float, S: float) -> dict:
    return {
        "floor_fraction": float(np.mean(a.a <= a0 * (1 + 1e-12))),
        "surface_active": bool(lateral_integral(a) >= S * (1 - 1e-9)),
    }


def _mu1_nelder_mead(a, a0, S, params, config, cylinder) -> OptimizationReport:
    """Derivative-free search; every trial point is projected onto the class first."""
    history = []

    def feasible(z):
        return project_profile(a.with_radii(np.maximum(z, a0)), a0, S)

    def objective(z):
        val = eigen.first_eigenvalue(feasible(z), params, config.n_cells)
        if not history or val < history[-1]:
            history.append(val)
        return val

    res = minimize(
        objective,
        a.a,
        method="Nelder-Mead",
        options={"maxiter": config.max_iter * a.x.size, "xatol": 1e-10 * a0, "fatol": config.rtol, "adaptive": True},
    )
    best = feasible(res.x)
    value = eigen.first_eigenvalue(best, params, config.n_cells)
    return OptimizationReport(
        "mu1", best, value, cylinder, history, _taper_active(best, a0, S), int(res.nit), bool(res.success)
    )


def random_feasible_rho(
    rng: np.random.Generator, a0: float, S: float, M: float, ell1: float, n_cells: int = 2048, n_blocks: int = 16
) -> RhoProfile:
    """Random piecewise-constant rho in [a0^3, M] with int rho <= S, constant on ``n_blocks`` blocks."""
    if n_cells % n_blocks:
        raise ConfigError("n_cells must be a multiple of n_blocks")
    levels = rng.uniform(a0**3, M, n_blocks)
    rho = RhoProfile.constant(a0**3, ell1, n_cells)
    values = np.repeat(levels, n_cells // n_blocks)
    return rho.with_values(project_rho(values, rho.widths, a0, S, M))


def project_rho(values: np.ndarray, widths: np.ndarray, a0: float, S: float, M: float) -> np.ndarray:
    """Box clip to [a0^3, M], then rescale the excess above a0^3 to meet int rho <= S."""
    floor = a0**3
    clipped = np.clip(values, floor, M)
    excess = float(np.dot(clipped - floor, widths))
    budget = S - floor * float(np.sum(widths))
    if excess > budget:
        clipped = floor + (clipped - floor) * (budget / excess)
    return clipped


def _bang_fraction(values, a0, M, tol=1e-9) -> float:
    floor = a0**3
    at_bound = (np.abs(values - floor) <= tol * floor) | (np.abs(values - M) <= tol * M)
    return float(np.mean(at_bound))


def minimize_T1_bounded(
    a0: float,
    S: float,
    M: float,
    params: PhysicalParams,
    config: SearchConfig | None = None,
    start: RhoProfile | None = None,
) -> OptimizationReport:
    """Projected gradient descent for T1 over the bounded class on [0, ell/a0^2]."""
    config = config or SearchConfig()
    if M <= a0**3:
        raise ConfigError(f"M must exceed a0^3 = {a0 ** 3}, got {M}")
    ell1 = start.ell1 if start is not None else config.ell / a0**2
    if S <= a0**3 * ell1:
        raise ConfigError(f"empty class: S={S} <= a0^3*ell1={a0 ** 3 * ell1}")
    if start is None:
        start = random_feasible_rho(np.random.default_rng(config.seed), a0, S, M, ell1, config.n_cells)
    widths = start.widths
    rho = start.with_values(project_rho(start.values, widths, a0, S, M))
    cylinder = transfer.constant_rho_T1(a0**3, ell1, params)

    state = transfer.steady_state(rho, params)
    value, grad = state.T1, state.cell_integrals() / widths
    history, bang = [value], [_bang_fraction(rho.values, a0, M)]
    step = (M - a0**3) / max(np.max(np.abs(grad)), 1e-300)
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        s = step
        accepted = False
        while s > 1e-16 * step:
            cand_values = project_rho(rho.values - s * grad, widths, a0, S, M)
            d = cand_values - rho.values
            if np.max(np.abs(d)) <= 1e-15 * a0**3:
                break
            cand = rho.with_values(cand_values)
            cand_state = transfer.steady_state(cand, params)
            if cand_state.T1 <= value + ARMIJO_C * np.dot(grad * widths, d):
                accepted = True
                break
            s *= 0.5
        if not accepted:
            converged = True
            break
        change = abs(value - cand_state.T1)
        rho, value = cand, cand_state.T1
        grad = cand_state.cell_integrals() / widths
        history.append(value)
        bang.append(_bang_fraction(rho.values, a0, M))
        step = 2.0 * s
        if change <= config.rtol * abs(value):
            converged = True
            break

    active = {
        "floor_fraction": float(np.mean(rho.values <= a0**3 * (1 + 1e-12))),
        "upper_fraction": float(np.mean(rho.values >= M * (1 - 1e-12))),
        "integral_active": bool(rho.integral() >= S * (1 - 1e-9)),
    }
    return OptimizationReport("T", rho, value, cylinder, history, active, it, converged, bang)


def minimize_xi1(a0: float, S: float, M: float, params: PhysicalParams, ell1: float, n_grid: int = 201):
    """Best transition point of the two-level family under the integral budget.

    Returns (xi1, T1, xi_max).
    """
    floor = a0**3
    if M <= floor:
        raise ConfigError(f"M must exceed a0^3 = {floor}, got {M}")
    xi_max = min(ell1, (S - floor * ell1) / (M - floor))
    if xi_max < 0:
        raise ConfigError("empty class: the constant a0^3 exceeds the budget S")

    def profile(xi):
        return transfer.BangBangProfile(float(xi), M, a0, ell1)

    def T(xi):
        return transfer.bang_bang_T1(profile(xi), params)

    grid = np.linspace(0.0, xi_max, n_grid)
    values = np.array([T(x) for x in grid])
    k = int(np.argmin(values))
    # an endpoint is optimal when the derivative does not point into the interval
    if k == 0 and transfer.bang_bang_dT1(profile(grid[0]), params) >= 0:
        return float(grid[0]), float(values[0]), float(xi_max)
    if k == n_grid - 1 and transfer.bang_bang_dT1(profile(grid[-1]), params) <= 0:
        return float(grid[-1]), float(values[-1]), float(xi_max)
    best_xi, best_T = float(grid[k]), float(values[k])
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    res = minimize_scalar(T, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if res.fun < best_T:
        best_xi, best_T = float(res.x), float(res.fun)
    return best_xi, best_T, float(xi_max)


def verify_pullback(
    a0: float, params: PhysicalParams, ell: float = 1.0, n_modes: int = 64, n_cells: int = 2048, rtol: float = 1e-4
) -> PullbackCheck:
    """T of the cylinder by the modal route against T1 of rho = a0^3 by the reduced route."""
    cylinder = TaperProfile.constant(a0, ell)
    T_time = transient.transfer_time_domain(cylinder, params, n_modes, n_cells)
    red = change_of_variable(cylinder, n_cells)
    T1 = transfer.transfer_T1(red.rho, params)
    closed = transfer.constant_rho_T1(a0**3, ell / a0**2, params)
    in_image = bool(np.allclose(red.rho.values, a0**3, rtol=1e-12, atol=0.0))
    gap = abs(T_time - T1) / abs(T1)
    return PullbackCheck(T_time, T1, closed, gap, in_image, bool(gap <= rtol and in_image))


def multi_start(
    criterion: str,
    a0: float,
    S: float,
    params: PhysicalParams,
    config: SearchConfig | None = None,
    n_starts: int = 20,
    M: float | None = None,
    workers: int | None = None,
) -> list[OptimizationReport]:
    """Independent searches seeded config.seed, config.seed + 1, ...; results in seed order."""
    config = config or SearchConfig()
    base = config.seed or 0
    configs = [replace(config, seed=base + i) for i in range(n_starts)]
    if criterion == "mu1":
        def run(c):
            return minimize_mu1(a0, S, params, c)
    elif criterion == "T":
        if M is None:
            raise ConfigError("the T criterion needs the upper bound M")

        def run(c):
            return minimize_T1_bounded(a0, S, M, params, c)
    else:
        raise ConfigError(f"unknown criterion {criterion!r}")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))
