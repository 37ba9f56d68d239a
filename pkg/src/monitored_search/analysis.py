"""Asymptotic predictions, exponent regression and exponent bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (ParameterError, RegimeTag, build_params, classify_regime,
                    matrix_elements)
from .spectral import decay_rates, eigenvalues, overlaps, slow_fast

MODES = ("no_reset", "reset_fast")


@dataclass(frozen=True)
class ScalingSample:
    N: int
    tau: float


@dataclass(frozen=True)
class FitResult:
    alpha_hat: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class QueryComplexityRow:
    dt_exponent: float
    tau_exponent: float
    nsteps_exponent: float
    tau_physical_exponent: float


@dataclass(frozen=True)
class PhaseDiagram:
    """Exponent grid with rows indexed by ``s_grid`` and columns by ``r_grid``."""

    r_grid: tuple
    s_grid: tuple
    mode: str
    alpha: np.ndarray
    tags: tuple
    worse_than_classical: np.ndarray
    grover_or_better: np.ndarray


def predicted_alpha(r_bar: float, s: float, gamma_bar: float = 1.0,
                    mode: str = "no_reset", tol: float = 0.0) -> float:
    """Time-complexity exponent without resetting, or with resets at ``T = 1/|Im lambda_f|``.

    Resetting at the fast-mode time costs ``N**(s+1)`` whenever the slow mode
    is weakly mixed, so the reset exponent is ``min(alpha, s + 1)``: it drops
    to ``s + 1`` in regimes B and C (and on the ``s < 0`` part of the critical
    line) and is unchanged in regime D and where the modes mix strongly.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    label = classify_regime(r_bar, s, gamma_bar, tol)
    if label.tag is RegimeTag.OUT_OF_SCOPE:
        raise ParameterError(f"(r_bar={r_bar}, s={s}) is outside every scaling regime")
    alpha = label.alpha_predicted
    if mode == "reset_fast":
        alpha = min(alpha, s + 1.0)
    return alpha


def fit_exponent(samples) -> FitResult:
    """Least-squares slope of ``log tau`` against ``log N``."""
    samples = list(samples)
    if len(samples) < 3:
        raise ParameterError("at least three samples are needed")
    n = np.array([smp.N for smp in samples], dtype=float)
    tau = np.array([smp.tau for smp in samples], dtype=float)
    if len(np.unique(n)) < len(n) or np.any(n <= 0):
        raise ParameterError("sample sizes N must be distinct and positive")
    if np.any(~np.isfinite(tau)) or np.any(tau <= 0):
        raise ParameterError("sample times must be positive and finite")
    x, y = np.log(n), np.log(tau)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid ** 2)) / ss_tot)
    return FitResult(float(slope), float(intercept), min(r2, 1.0))


def geometric_sizes(lo: float, hi: float, count: int = 8) -> list[int]:
    """Distinct integer sizes spaced geometrically from ``lo`` to ``hi``."""
    return sorted({int(round(n)) for n in np.geomspace(lo, hi, count)})


def phase_diagram(r_grid, s_grid, mode: str = "no_reset", gamma_bar: float = 1.0,
                  tol: float = 0.0) -> PhaseDiagram:
    r_grid = tuple(float(r) for r in r_grid)
    s_grid = tuple(float(s) for s in s_grid)
    alpha = np.empty((len(s_grid), len(r_grid)))
    tags = []
    for i, s in enumerate(s_grid):
        row = []
        for j, r in enumerate(r_grid):
            row.append(classify_regime(r, s, gamma_bar, tol).tag.value)
            alpha[i, j] = predicted_alpha(r, s, gamma_bar, mode, tol)
        tags.append(tuple(row))
    return PhaseDiagram(r_grid, s_grid, mode, alpha, tuple(tags), alpha > 1.0, alpha <= 0.5)


def eigenvalue_scaling_prediction(r_bar: float, s: float,
                                  gamma_bar: float = 1.0) -> tuple[float, float]:
    """Exponents of ``1/|Im lambda_s|`` and ``1/|Im lambda_f|`` in ``N``."""
    return predicted_alpha(r_bar, s, gamma_bar), s


@dataclass(frozen=True)
class MeasuredExponents:
    slow_time: FitResult
    fast_time: FitResult
    slow_overlap: FitResult
    fast_overlap: FitResult
    slow_overlap_values: tuple


def measured_exponents(r_bar: float, s: float, gamma_bar: float, kappa_bar: float,
                       N_list) -> MeasuredExponents:
    """Fitted N-exponents of inverse decay rates and overlaps from the exact spectrum."""
    slow_t, fast_t, slow_o, fast_o = [], [], [], []
    for N in N_list:
        m = matrix_elements(build_params(N, gamma_bar, kappa_bar, r_bar, s))
        sd = eigenvalues(m)
        rate_s, rate_f = decay_rates(sd)
        ov = overlaps(m, N, sd)
        lam_s, _ = slow_fast(sd)
        o_s, o_f = (ov.O_plus, ov.O_minus) if lam_s == sd.lambda_plus else (ov.O_minus, ov.O_plus)
        slow_t.append(ScalingSample(N, 1 / rate_s))
        fast_t.append(ScalingSample(N, 1 / rate_f))
        slow_o.append(ScalingSample(N, o_s))
        fast_o.append(ScalingSample(N, o_f))
    return MeasuredExponents(fit_exponent(slow_t), fit_exponent(fast_t), fit_exponent(slow_o),
                             fit_exponent(fast_o), tuple(x.tau for x in slow_o))


def _check_kappa_bar(kappa_bar):
    if not 0 < kappa_bar < 2:
        raise ParameterError("kappa_bar must lie in (0, 2) on the critical line")


def ep_coefficients(kappa_bar: float) -> dict:
    """Coefficients of ``P ~ e^{-a t}(A + B cos wt + C sin wt)`` at ``gamma = 1/N``.

    ``a`` and ``w`` are returned per unit ``1/sqrt(N)``.  ``D = sqrt(B^2 + C^2)``.
    """
    _check_kappa_bar(kappa_bar)
    k2 = kappa_bar ** 2
    root = math.sqrt(4.0 - k2)
    return {
        "a": kappa_bar,
        "omega": root,
        "A": 4.0 / (4.0 - k2),
        "B": k2 / (k2 - 4.0),
        "C": kappa_bar / root,
        "D": 2.0 * kappa_bar / (4.0 - k2),
    }


def ep_asymptotic_pt(N: int, kappa_bar: float, t):
    """Leading large-N no-click probability at ``gamma = 1/N``, ``kappa = kappa_bar/sqrt(N)``."""
    c = ep_coefficients(kappa_bar)
    x = np.asarray(t, dtype=float) / math.sqrt(N)
    out = np.exp(-c["a"] * x) * (c["A"] + c["B"] * np.cos(c["omega"] * x) + c["C"] * np.sin(c["omega"] * x))
    return out.item() if out.ndim == 0 else out


def ep_envelope_bounds(N: int, kappa_bar: float, t):
    """Envelope ``e^{-a t}(A - D) <= P <= e^{-a t}(A + D)``."""
    c = ep_coefficients(kappa_bar)
    env = np.exp(-c["a"] * np.asarray(t, dtype=float) / math.sqrt(N))
    lower, upper = env * (c["A"] - c["D"]), env * (c["A"] + c["D"])
    if lower.ndim == 0:
        return lower.item(), upper.item()
    return lower, upper


def ep_time_bounds(N: int, kappa_bar: float, c: float) -> tuple[float, float]:
    """Window of times in which the envelope allows ``P(t) = c``."""
    coef = ep_coefficients(kappa_bar)
    if not 0 < c < coef["A"] - coef["D"]:
        raise ParameterError(f"threshold {c} is not inside (0, A - D)")
    scale = math.sqrt(N) / kappa_bar
    return (scale * math.log(2.0 / ((2.0 + kappa_bar) * c)),
            scale * math.log(2.0 / ((2.0 - kappa_bar) * c)))


def query_complexity(r_bar: float, s: float, with_reset: bool = False) -> QueryComplexityRow:
    """Exponents of the simulation step, step count and physical runtime for ``s <= 0``."""
    if s > 0:
        raise ParameterError("outside table domain: requires s <= 0")
    mode = "reset_fast" if with_reset else "no_reset"
    tau = predicted_alpha(r_bar, s, 1.0, mode)
    if s >= r_bar:
        dt = r_bar
        nsteps = 1.0 + s - r_bar
        physical = 1.0 + s - r_bar / 2.0
    elif with_reset:
        dt = s
        nsteps = 1.0
        physical = 1.0 + s / 2.0
    else:
        dt = s
        nsteps = 2.0 * (r_bar - s) + 1.0
        physical = 2.0 * (r_bar - s) + 1.0 + s / 2.0
    return QueryComplexityRow(dt, tau, nsteps, physical)


def lindblad_norm(N: int, gamma: float, kappa: float, epsilon_w: float = 1.0) -> float:
    """``1 + ||H|| + kappa`` with ``H`` the Hermitian search Hamiltonian."""
    n1 = N - 1
    block = np.array([[-(gamma + epsilon_w), -gamma * math.sqrt(n1)],
                      [-gamma * math.sqrt(n1), -gamma * n1]])
    return 1.0 + float(np.linalg.norm(block, 2)) + kappa


def validity_bound_nstar(r_bar: float, s: float, gamma_bar: float = 1.0,
                         kappa_bar: float = 1.0, dt0: float = 0.01) -> float:
    """Largest ``N`` for which ``kappa / (gamma N)^2`` stays above ``dt0``; ``inf`` if none."""
    if not dt0 > 0:
        raise ParameterError("dt0 must be positive")
    power = 2.0 * r_bar - s
    if power >= 0:
        return math.inf
    return (gamma_bar ** 2 * dt0 / kappa_bar) ** (1.0 / power)
