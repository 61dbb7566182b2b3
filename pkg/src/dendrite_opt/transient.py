"""Time-domain potential from the eigenfunction expansion, and the time-integral criterion T.

With the eigenpairs normalised in <.,.>_a, the potential for a soma current i0 is

    v(x, t) = 1/(2 pi C_m) sum_n phi_n(0) phi_n(x) (i0 * exp(-lambda_n .))(t),
    lambda_n = (mu_n + 2 R_a G_m) / (2 R_a C_m).

For a Dirac stimulus the time integrals are closed form per mode, which gives T
without any time stepping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .eigen import EigenPair, assemble, solve_spectrum
from .errors import TruncationError
from .model import PhysicalParams, TaperProfile

__all__ = [
    "ModalSolution",
    "lambda_of",
    "modal_solution",
    "evaluate_v",
    "time_series",
    "transfer_time_domain",
    "time_integrals",
    "tail_estimate",
]


def lambda_of(mu, params: PhysicalParams):
    return (mu + 2.0 * params.R_a * params.G_m) / (2.0 * params.R_a * params.C_m)


@dataclass(frozen=True, eq=False)
class ModalSolution:
    """Truncated modal expansion.

    ``stimulus`` is None for a unit Dirac current at t = 0, otherwise a pair of
    arrays (t, i0) sampling the current on its support.
    """

    pairs: list
    params: PhysicalParams
    stimulus: tuple | None = None
    lambdas: np.ndarray = field(init=False)

    def __post_init__(self):
        lam = np.array([lambda_of(p.mu, self.params) for p in self.pairs])
        if np.any(lam <= 0):
            raise TruncationError("non-positive decay rate in the modal expansion")
        object.__setattr__(self, "lambdas", lam)
        if self.stimulus is not None:
            ts, cur = (np.asarray(v, dtype=float) for v in self.stimulus)
            if ts.ndim != 1 or ts.shape != cur.shape or np.any(np.diff(ts) <= 0) or ts[0] < 0:
                raise ValueError("stimulus must be increasing non-negative times with matching currents")
            object.__setattr__(self, "stimulus", (ts, cur))

    @property
    def n_modes(self) -> int:
        return len(self.pairs)

    @property
    def x(self) -> np.ndarray:
        return self.pairs[0].x

    def phi_at(self, x) -> np.ndarray:
        """Matrix of phi_n(x) with one row per mode."""
        return np.array([p(x) for p in self.pairs])

    @property
    def phi0(self) -> np.ndarray:
        return np.array([p.phi_at_0 for p in self.pairs])


def modal_solution(
    a: TaperProfile,
    params: PhysicalParams,
    n_modes: int = 64,
    n_cells: int = 2048,
    stimulus=None,
    method: str = "sparse",
) -> ModalSolution:
    pairs: list[EigenPair] = solve_spectrum(assemble(a, params, n_cells), n_modes, method)
    return ModalSolution(pairs, params, stimulus)


def _convolved(sol: ModalSolution, t: float) -> np.ndarray:
    """(i0 * exp(-lambda_n .))(t) for every mode."""
    lam = sol.lambdas
    if sol.stimulus is None:
        return np.exp(-lam * t)
    ts, cur = sol.stimulus
    inside = ts < t
    s = ts[inside]
    c = cur[inside]
    if t <= ts[-1]:
        s = np.append(s, t)
        c = np.append(c, np.interp(t, ts, cur))
    if s.size < 2:
        return np.zeros_like(lam)
    kernel = np.exp(-lam[:, None] * (t - s[None, :]))
    return trapezoid(kernel * c[None, :], s, axis=1)


def evaluate_v(sol: ModalSolution, x, t: float) -> np.ndarray | float:
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    coeff = sol.phi0 * _convolved(sol, t) / (2.0 * np.pi * sol.params.C_m)
    out = coeff @ sol.phi_at(np.atleast_1d(np.asarray(x, dtype=float)))
    return float(out[0]) if np.ndim(x) == 0 else out


def time_series(sol: ModalSolution, times) -> np.ndarray:
    """Rows (t, v(0, t), v(ell, t))."""
    ell = sol.x[-1]
    rows = [(t, *evaluate_v(sol, [0.0, ell], t)) for t in np.asarray(times, dtype=float)]
    return np.array(rows)


def time_integrals(sol: ModalSolution, x) -> np.ndarray:
    """int_0^inf v(x, t) dt for a Dirac stimulus, using int exp(-lambda t) dt = 1/lambda."""
    coeff = sol.phi0 / sol.lambdas / (2.0 * np.pi * sol.params.C_m)
    return coeff @ sol.phi_at(np.atleast_1d(np.asarray(x, dtype=float)))


def tail_estimate(sol: ModalSolution, x) -> float:
    """Size of the last retained term, |phi_N(0) phi_N(x)| / lambda_N."""
    last = sol.pairs[-1]
    return float(abs(last.phi_at_0 * last(x)) / sol.lambdas[-1])


def transfer_time_domain(
    a: TaperProfile, params: PhysicalParams, n_modes: int = 64, n_cells: int = 2048, sol: ModalSolution | None = None
) -> float:
    """T(a) = int v(0,t) dt / int v(ell,t) dt for a Dirac stimulus, summed in ascending n."""
    if sol is None:
        sol = modal_solution(a, params, n_modes, n_cells)
    lam = sol.lambdas
    phi0 = sol.phi0
    phi_ell = np.array([p.phi_at_ell for p in sol.pairs])
    num = float(np.sum(phi0**2 / lam))
    den = float(np.sum(phi0 * phi_ell / lam))
    if den <= 0:
        raise TruncationError(f"far-end time integral is {den:.3e} <= 0; increase the number of modes")
    return num / den
