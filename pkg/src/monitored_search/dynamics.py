"""Fidelities, the resetting renewal protocol, search times and click sampling.

The no-click probability ``P(t)`` is nonincreasing (its derivative is
``-2 kappa |<w|psi>|^2``), and so is the renewal survival
``P(T)^m P(t - mT)``.  Every threshold search below therefore brackets the
crossing by doubling and then bisects; no fixed-step scan is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, NumericalError, ParameterError, matrix_elements
from .spectral import (click_probability, decay_rates, eigenvalues,
                       no_click_probability, propagator_amplitudes)

DEFAULT_EPSILON = 1e-3

_REL_TOL = 1e-12
_MAX_DOUBLINGS = 2000
_BISECTIONS = 64


@dataclass(frozen=True)
class FidelityPoint:
    t: float
    F0: float
    F1: float
    P: float


@dataclass(frozen=True)
class ResetSchedule:
    """Reset every ``T``; ``epochs`` and ``epsilon`` record the intended budget."""

    T: float
    epochs: int = 0
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ParameterError(f"reset period must be positive and finite, got {self.T}")
        if self.epochs < 0:
            raise ParameterError("epochs must be nonnegative")
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")

    def is_sufficient(self, P_T: float) -> bool:
        """Whether ``epochs`` reaches the threshold ``epsilon`` given ``P(T)``."""
        return self.epochs >= epochs_needed(P_T, self.epsilon)


def _check_epsilon(epsilon):
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")


def renewal_fidelities(P_m, P_delta, F0_delta):
    """Fidelities after surviving whole epochs with probability ``P_m``.

    ``P_delta`` and ``F0_delta`` are the no-click probability and target
    occupation accumulated since the last reset.  Returns ``(F0, F1)``.
    """
    return P_m * F0_delta, 1.0 - P_m * P_delta


def fidelity_arrays(p: ModelParams, t, schedule: ResetSchedule | None = None):
    """Vectorized ``(F0, F1, P)`` at times ``t``; ``P`` is the survival including resets."""
    t = np.asarray(t, dtype=float)
    m = matrix_elements(p)
    if schedule is None:
        epochs = np.zeros_like(t)
        delta = t
        p_epochs = np.ones_like(t)
    else:
        epochs = np.floor(t / schedule.T)
        delta = np.clip(t - epochs * schedule.T, 0.0, schedule.T)
        p_T = float(no_click_probability(m, p.N, schedule.T))
        with np.errstate(divide="ignore"):
            p_epochs = np.where(epochs == 0, 1.0, p_T ** epochs)
    amp_w, _ = propagator_amplitudes(m, p.N, delta)
    p_delta = np.clip(no_click_probability(m, p.N, delta), 0.0, 1.0)
    # S(0) is the identity; keep P exact there rather than a rounded mode sum.
    p_delta = np.where(delta == 0, 1.0, p_delta)
    f0, f1 = renewal_fidelities(p_epochs, p_delta, np.abs(amp_w) ** 2)
    return f0, f1, p_epochs * p_delta


def fidelity(p: ModelParams, t: float, schedule: ResetSchedule | None = None) -> FidelityPoint:
    """Target fidelity split into the no-click part ``F0`` and the clicked part ``F1``."""
    if t < 0:
        raise ParameterError("t must be nonnegative")
    f0, f1, surv = fidelity_arrays(p, t, schedule)
    return FidelityPoint(float(t), float(f0), float(f1), float(surv))


def _epochs_from_logs(log_pt: float, log_eps: float) -> int:
    m = max(1, math.ceil(log_eps / log_pt))
    while m > 1 and (m - 1) * log_pt <= log_eps:
        m -= 1
    while m * log_pt > log_eps:
        m += 1
    return m


def epochs_needed(P_T: float, epsilon: float) -> int:
    """Smallest ``m`` with ``P_T**m <= epsilon``."""
    _check_epsilon(epsilon)
    if P_T >= 1:
        raise ParameterError("resetting cannot converge: P(T) >= 1")
    if P_T <= 0:
        raise ParameterError("P(T) must be positive")
    return _epochs_from_logs(math.log(P_T), math.log(epsilon))


def initial_step(p: ModelParams) -> float:
    """Coarse time step resolving both the oscillation and the fast decay."""
    sd = eigenvalues(matrix_elements(p))
    omega = abs((sd.mu_plus - sd.mu_minus).real)
    slow, fast = decay_rates(sd)
    candidates = []
    if omega > 0:
        candidates.append(math.pi / (8 * omega))
        if fast > 0:
            candidates.append(1 / (8 * fast))
    elif slow > 0:
        candidates.append(1 / (8 * slow))
    return min(candidates) if candidates else 1.0


def _first_crossing(below, step: float, t0: float = 0.0) -> float:
    """First ``t > t0`` where the monotone predicate ``below(t)`` turns true."""
    lo, hi = t0, t0 + step
    for _ in range(_MAX_DOUBLINGS):
        if below(hi):
            break
        lo, hi = hi, t0 + 2 * (hi - t0)
        if not math.isfinite(hi):
            break
    else:
        hi = math.inf
    if not math.isfinite(hi):
        raise NumericalError(f"threshold not reached before t = {lo:.3e}")
    while hi - lo > _REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if below(mid):
            hi = mid
        else:
            lo = mid
    return hi


def search_time(p: ModelParams, epsilon: float = DEFAULT_EPSILON, mode: str = "click") -> float:
    """First time the search succeeds with probability ``1 - epsilon``.

    ``mode="click"`` uses ``P(t) <= epsilon`` (requires ``kappa > 0``);
    ``mode="f0"`` uses ``|<w|S(t)|s>|^2 >= 1 - epsilon`` for the unmonitored walk.
    """
    _check_epsilon(epsilon)
    m = matrix_elements(p)
    if mode == "click":
        if p.kappa == 0:
            raise ParameterError("no-click probability does not decay when kappa = 0")
        log_eps = math.log(epsilon)
        return _first_crossing(lambda t: _log_no_click(m, p.N, t) <= log_eps, initial_step(p))
    if mode == "f0":
        return _f0_search_time(p, m, epsilon)
    raise ValueError(f"unknown mode {mode!r}")


def _f0_search_time(p, m, epsilon, max_steps: int = 10**9, chunk: int = 4096) -> float:
    sd = eigenvalues(m)
    omega = abs((sd.mu_plus - sd.mu_minus).real)
    if omega == 0:
        raise ParameterError("no oscillation between target and uniform state")
    # The window around a peak where F0 >= 1 - eps has width ~ 4 sqrt(eps) / omega.
    step = min(initial_step(p), math.sqrt(epsilon) / omega)
    target = 1.0 - epsilon
    done = 0
    while done < max_steps:
        ts = step * np.arange(done + 1, done + chunk + 1, dtype=float)
        f0 = np.abs(propagator_amplitudes(m, p.N, ts)[0]) ** 2
        hits = np.nonzero(f0 >= target)[0]
        if hits.size:
            k = done + hits[0]
            lo, hi = k * step, (k + 1) * step
            while hi - lo > _REL_TOL * hi:
                mid = 0.5 * (lo + hi)
                if abs(propagator_amplitudes(m, p.N, mid)[0]) ** 2 >= target:
                    hi = mid
                else:
                    lo = mid
            return hi
        done += chunk
    raise NumericalError(f"fidelity never reached {target} within {max_steps} steps of {step:.3e}")


def _log_no_click(m, N, t):
    q = float(click_probability(m, N, t))
    if q >= 1:
        return -math.inf
    return math.log1p(-q) if q < 0.5 else math.log(float(no_click_probability(m, N, t)))


def reset_search_time(p: ModelParams, T: float, epsilon: float = DEFAULT_EPSILON,
                      refine: bool = False) -> float:
    """Search time when the walker is re-prepared every ``T`` without a click.

    Reported as ``m * T`` (whole epochs).  ``refine=True`` locates the exact
    threshold crossing inside the final epoch instead.
    """
    _check_epsilon(epsilon)
    if not (T > 0 and math.isfinite(T)):
        raise ParameterError("T must be positive and finite")
    m = matrix_elements(p)
    log_pt = _log_no_click(m, p.N, T)
    if log_pt >= 0:
        raise ParameterError("resetting cannot converge: P(T) >= 1")
    log_eps = math.log(epsilon)
    if log_pt == -math.inf:
        epochs = 1
    else:
        epochs = _epochs_from_logs(log_pt, log_eps)
    if not refine:
        return epochs * T
    base = (epochs - 1) * log_pt if epochs > 1 else 0.0
    delta = _first_crossing(lambda s: base + _log_no_click(m, p.N, min(s, T)) <= log_eps,
                            min(initial_step(p), T))
    return (epochs - 1) * T + min(delta, T)


@dataclass(frozen=True)
class ResetScan:
    T_star: float
    tau_R_star: float
    tau: float
    curve: list  # (T, tau_R, tau_R / tau); failed grid points are omitted


def optimal_reset_scan(p: ModelParams, epsilon: float, T_grid) -> ResetScan:
    """Reset period on ``T_grid`` minimizing the search time."""
    T_grid = [float(T) for T in T_grid]
    if not T_grid or any(not (T > 0) for T in T_grid):
        raise ParameterError("T grid must be nonempty and positive")
    points = []
    for T in T_grid:
        try:
            points.append((T, reset_search_time(p, T, epsilon)))
        except ParameterError:
            continue
    if not points:
        raise ParameterError("resetting cannot converge at any grid point")
    tau = search_time(p, epsilon)
    T_star, tau_star = min(points, key=lambda x: x[1])
    return ResetScan(T_star, tau_star, tau, [(T, tr, tr / tau) for T, tr in points])


def reset_exponent_changes(r_bar: float, s: float, gamma_bar: float, kappa_bar: float,
                           beta: float, epsilon: float, N_list) -> list[float]:
    """``log(tau_R / tau) / log N`` for ``T = N**beta`` at each ``N``."""
    from .model import build_params

    if not math.isfinite(beta):
        raise ParameterError("beta must be finite")
    out = []
    for N in N_list:
        p = build_params(N, gamma_bar, kappa_bar, r_bar, s)
        tau_r = reset_search_time(p, float(N) ** beta, epsilon)
        out.append(math.log(tau_r / search_time(p, epsilon)) / math.log(N))
    return out


def reset_exponent_change(r_bar: float, s: float, gamma_bar: float, kappa_bar: float,
                          beta: float, epsilon: float, N_list) -> float:
    """Estimate of the exponent change from resetting, taken at the largest ``N``."""
    N_list = sorted(N_list)
    if not N_list:
        raise ParameterError("N_list must be nonempty")
    return reset_exponent_changes(r_bar, s, gamma_bar, kappa_bar, beta, epsilon, N_list[-1:])[0]


def click_times_from_uniforms(p: ModelParams, schedule: ResetSchedule | None, u) -> np.ndarray:
    """Invert the survival function: the time at which survival drops to ``u``.

    ``inf`` marks draws whose survival target is never reached (for example the
    decoupled ``gamma = 0`` walk keeps ``P >= 1 - 1/N`` forever).
    """
    if p.kappa == 0:
        raise ParameterError("no clicks occur when kappa = 0")
    u = np.asarray(u, dtype=float)
    m = matrix_elements(p)
    out = np.full(u.shape, np.inf)
    if schedule is None:
        targets = u
        offsets = np.zeros_like(u)
        horizon = np.inf
    else:
        T = schedule.T
        log_pt = _log_no_click(m, p.N, T)
        if log_pt >= 0:
            raise ParameterError("resetting cannot converge: P(T) >= 1")
        with np.errstate(divide="ignore"):
            log_u = np.log(u)
        if log_pt == -math.inf:
            epochs = np.zeros_like(u)
        else:
            epochs = np.floor(log_u / log_pt)
            # Guard the floor against rounding: require P_T^m >= u > P_T^(m+1).
            epochs = np.where(epochs * log_pt < log_u, epochs - 1, epochs)
            epochs = np.where((epochs + 1) * log_pt >= log_u, epochs + 1, epochs)
            epochs = np.maximum(epochs, 0.0)
        targets = np.exp(log_u - epochs * (0.0 if log_pt == -math.inf else log_pt))
        offsets = epochs * T
        horizon = T
    active = (u > 0) & np.isfinite(offsets)
    if not np.any(active):
        return out
    tgt = targets[active]
    lo = np.zeros_like(tgt)
    hi = np.full_like(tgt, min(initial_step(p), horizon))
    for _ in range(_MAX_DOUBLINGS):
        open_ = no_click_probability(m, p.N, hi) > tgt
        if math.isfinite(horizon):
            open_ &= hi < horizon
        if not np.any(open_):
            break
        lo = np.where(open_, hi, lo)
        hi = np.where(open_, np.minimum(2 * hi, horizon), hi)
        if np.all(~np.isfinite(hi[open_]) | (hi[open_] > 1e300)):
            break
    reachable = no_click_probability(m, p.N, np.minimum(hi, 1e300)) <= tgt
    for _ in range(_BISECTIONS):
        mid = 0.5 * (lo + hi)
        below = no_click_probability(m, p.N, mid) <= tgt
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    times = np.where(reachable, offsets[active] + hi, np.inf)
    out[active] = times
    return out


def sample_click_time(p: ModelParams, schedule: ResetSchedule | None, rng_seed: int) -> float:
    """One click time drawn by inverse-CDF sampling with a seeded generator."""
    u = np.random.default_rng(rng_seed).random()
    return float(click_times_from_uniforms(p, schedule, np.array([u]))[0])
