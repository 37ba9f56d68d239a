"""Brute-force reference: full N-dimensional evolution and trajectory sampling.

The monitored walk is never integrated as an ``N``-level density matrix.
Until the first click the state evolves under the effective Hamiltonian
alone, and the clicked population is the time integral of the detection
flux ``2 kappa |<w|psi>|^2``.  Integrating that flux alongside the state
with the same step controller gives a trace-conservation check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import ResetSchedule, click_times_from_uniforms, fidelity_arrays
from .model import ModelParams, NumericalError, ParameterError, matrix_elements
from .spectral import no_click_probability, propagator_amplitudes

DENSE_CAP = 4096
MATRIX_FREE_ABOVE = 64
ATOL = 1e-12
RTOL = 1e-12
RK4_STEP = 0.01

TARGET = 0  # index of the marked vertex


@dataclass(frozen=True)
class DenseState:
    psi: np.ndarray
    t: float


@dataclass(frozen=True)
class FullEvolution:
    """Full-dimension trajectory sampled on ``t``."""

    t: np.ndarray
    P: np.ndarray
    F0: np.ndarray
    flux: np.ndarray
    states: tuple = ()

    def rows(self):
        return list(zip(self.t.tolist(), self.P.tolist(), self.F0.tolist(), self.flux.tolist()))


@dataclass(frozen=True)
class ReductionReport:
    max_P_deviation: float
    max_F0_deviation: float
    max_conservation_residual: float

    @property
    def max_deviation(self) -> float:
        return max(self.max_P_deviation, self.max_F0_deviation)


def _check_size(p: ModelParams, cap: int):
    if p.N > cap:
        raise ParameterError(f"N={p.N} exceeds the dense cap {cap}; use the two-level path")


def dense_hamiltonian(p: ModelParams, cap: int = DENSE_CAP) -> np.ndarray:
    """``-gamma N |s><s| - (epsilon_w + i kappa)|w><w|`` on the vertex basis."""
    _check_size(p, cap)
    h = np.full((p.N, p.N), -p.gamma, dtype=complex)
    h[TARGET, TARGET] -= complex(p.epsilon_w, p.kappa)
    return h


def uniform_state(N: int) -> np.ndarray:
    return np.full(N, 1.0 / math.sqrt(N), dtype=complex)


def _hamiltonian_action(p: ModelParams):
    target_energy = complex(p.epsilon_w, p.kappa)
    if p.N <= MATRIX_FREE_ABOVE:
        h = dense_hamiltonian(p)
        return lambda psi: h @ psi

    def apply(psi):
        out = np.full_like(psi, -p.gamma * psi.sum())
        out[TARGET] -= target_energy * psi[TARGET]
        return out

    return apply


def _rhs(p: ModelParams):
    apply_h = _hamiltonian_action(p)
    two_kappa = 2.0 * p.kappa

    def rhs(_t, y):
        psi = y[:-1]
        dy = np.empty_like(y)
        dy[:-1] = -1j * apply_h(psi)
        dy[-1] = two_kappa * abs(psi[TARGET]) ** 2
        return dy

    return rhs


def _rk4(rhs, y, t_grid):
    out = []
    t = 0.0
    for target in t_grid:
        while t < target:
            h = min(RK4_STEP, target - t)
            # Land exactly on grid points without a sliver step from rounding.
            if target - (t + h) < 1e-12 * max(1.0, target):
                h = target - t
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = target if h == target - t else t + h
        out.append(y.copy())
    return np.array(out).T


def evolve_full(p: ModelParams, t_grid, method: str = "adaptive", cap: int = DENSE_CAP,
                keep_states: bool = False) -> FullEvolution:
    """Integrate ``d psi/dt = -i H psi`` from the uniform state on the full vertex space.

    ``method="adaptive"`` uses an embedded 8(5,3) Runge-Kutta pair with
    tolerances ``ATOL``/``RTOL``; ``method="rk4"`` uses classical RK4 with step
    ``RK4_STEP`` for bit-reproducible output.
    """
    _check_size(p, cap)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ParameterError("t_grid must be a nonempty 1-d sequence")
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) < 0):
        raise ParameterError("t_grid must be nonnegative and ascending")
    y0 = np.concatenate([uniform_state(p.N), [0.0]]).astype(complex)
    rhs = _rhs(p)
    if method == "adaptive":
        if t_grid[-1] == 0:
            ys = np.repeat(y0[:, None], t_grid.size, axis=1)
        else:
            sol = solve_ivp(rhs, (0.0, float(t_grid[-1])), y0, method="DOP853", t_eval=t_grid,
                            rtol=RTOL, atol=ATOL)
            if sol.status != 0:
                raise NumericalError(f"integration failed at N={p.N}, gamma={p.gamma}, "
                                     f"kappa={p.kappa}: {sol.message}")
            ys = sol.y
    elif method == "rk4":
        ys = _rk4(rhs, y0, t_grid)
    else:
        raise ValueError(f"unknown method {method!r}")
    psi = ys[:-1]
    P = np.sum(np.abs(psi) ** 2, axis=0)
    F0 = np.abs(psi[TARGET]) ** 2
    flux = ys[-1].real
    states = tuple(DenseState(psi[:, k].copy(), float(t)) for k, t in enumerate(t_grid)) if keep_states else ()
    return FullEvolution(t_grid, P, F0, flux, states)


def reduction_report(p: ModelParams, t_grid, method: str = "adaptive",
                     cap: int = DENSE_CAP) -> ReductionReport:
    """Compare the full evolution with the two-level closed form on ``t_grid``."""
    full = evolve_full(p, t_grid, method=method, cap=cap)
    m = matrix_elements(p)
    P2 = no_click_probability(m, p.N, full.t)
    F2 = np.abs(propagator_amplitudes(m, p.N, full.t)[0]) ** 2
    return ReductionReport(float(np.max(np.abs(full.P - P2))),
                           float(np.max(np.abs(full.F0 - F2))),
                           float(np.max(np.abs(full.P + full.flux - 1.0))))


def reduction_check(p: ModelParams, t_grid, method: str = "adaptive", cap: int = DENSE_CAP) -> float:
    """Largest deviation of ``P`` or ``F0`` between the full and two-level descriptions."""
    return reduction_report(p, t_grid, method, cap).max_deviation


@dataclass(frozen=True)
class MonteCarloResult:
    click_times: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    probe_times: np.ndarray
    empirical_F1: np.ndarray
    analytic_F1: np.ndarray
    standard_error: np.ndarray


def trajectory_uniforms(n_traj: int, base_seed: int) -> np.ndarray:
    """One uniform variate per trajectory from the stream seeded ``base_seed + index``."""
    return np.array([np.random.default_rng(base_seed + i).random() for i in range(n_traj)])


def trajectory_monte_carlo(p: ModelParams, schedule: ResetSchedule | None, n_traj: int,
                           base_seed: int, bins=50, probe_times=None) -> MonteCarloResult:
    """Sample click times of independent monitored trajectories.

    ``bins`` is a count or an array of edges; ``probe_times`` default to the
    interior histogram edges.
    """
    if n_traj < 1:
        raise ParameterError("n_traj must be at least 1")
    u = trajectory_uniforms(n_traj, base_seed)
    times = click_times_from_uniforms(p, schedule, u)
    finite = times[np.isfinite(times)]
    if np.ndim(bins) == 0:
        hi = float(np.max(finite)) if finite.size else 1.0
        edges = np.linspace(0.0, hi if hi > 0 else 1.0, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    counts, edges = np.histogram(finite, bins=edges)
    probes = edges[1:-1] if probe_times is None else np.asarray(probe_times, dtype=float)
    empirical = np.searchsorted(np.sort(times), probes, side="right") / n_traj
    analytic = fidelity_arrays(p, probes, schedule)[1]
    stderr = np.sqrt(np.clip(analytic * (1 - analytic), 0, None) / n_traj)
    return MonteCarloResult(times, edges, counts, probes, empirical, analytic, stderr)
