"""Closed-form spectral machinery for the 2x2 non-Hermitian Hamiltonian.

Numerics notes
--------------
The eigenvalues are handled through the shifted roots ``mu = lambda - d``,
which solve ``mu**2 - (a - d) mu - b**2 = 0``.  The larger root is taken
from the branch formula and the smaller from ``-b**2 / mu_big``, so neither
root suffers cancellation, and ``Im lambda = Im mu + Im d`` stays accurate
even when one decay rate is many orders of magnitude below ``|d|``.

Eigenvectors are scaled by their dominant component: with
``rho = b / mu_big`` (always ``|rho| <= 1``) the right eigenvectors are
``(1, rho)`` for the large root and ``(-rho, 1)`` for the small one.  Both
share the bilinear norm ``1 + rho**2 = (mu_big - mu_small) / mu_big``, which
is evaluated in the second form to avoid cancellation near coalescence.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .model import NumericalError, TwoLevelMatrix, initial_state

EP_TOL = 1e-9
"""Relative gap below which the eigenpair is flagged as coalescing."""

ROUTE_TOL = 1e-2
"""Relative gap below which P(t) and amplitudes use the divided-difference form.

The biorthogonal sum loses roughly ``eps / gap**2`` in absolute accuracy, while
the divided-difference form loses ``eps / gap``; switching at 1e-2 keeps both
well under 1e-12.
"""

EXP_FLOOR = -745.0

@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues (``+``/``-`` follow the square-root branch) and related data.

    ``mu_plus``/``mu_minus`` are the eigenvalues shifted by ``-d``.
    ``relative_gap`` is ``|discriminant| / max(|a - d|, |b|)`` and ``shift`` is ``d``.
    """

    lambda_plus: complex
    lambda_minus: complex
    discriminant: complex
    near_ep: bool
    mu_plus: complex
    mu_minus: complex
    relative_gap: float
    shift: complex = 0j
    v_plus: complex | None = None
    v_minus: complex | None = None

    @property
    def plus_is_big(self) -> bool:
        return abs(self.mu_plus) >= abs(self.mu_minus)


@dataclass(frozen=True)
class OverlapSet:
    O_plus: float
    O_minus: float
    O_cross: complex


def _discriminant_sq(m: TwoLevelMatrix) -> complex:
    z = complex(m.a - m.d)
    b = complex(m.b)
    if b.imag == 0.0:
        # (x + iy)^2 + 4 b^2 with the real part factored to keep 4b^2 - y^2 exact-ish.
        x, y, br = z.real, z.imag, b.real
        return complex(x * x + (2.0 * br - y) * (2.0 * br + y), 2.0 * x * y)
    return z * z + 4.0 * b * b


def eigenvalues(m: TwoLevelMatrix) -> SpectralData:
    """Eigenvalues ``(a + d +/- sqrt((a-d)^2 + 4 b^2)) / 2`` with the principal root."""
    a, b, d = complex(m.a), complex(m.b), complex(m.d)
    z = a - d
    root = cmath.sqrt(_discriminant_sq(m))
    p1 = 0.5 * (z + root)
    p2 = 0.5 * (z - root)
    b2 = b * b
    if abs(p1) >= abs(p2):
        mu_plus = p1
        mu_minus = -b2 / p1 if p1 != 0 else p2
    else:
        mu_minus = p2
        mu_plus = -b2 / p2
    lam_plus, lam_minus = d + mu_plus, d + mu_minus
    det = m.determinant()
    # The eigenvalue of smaller modulus takes its real part from the determinant;
    # imaginary parts always come from the shifted roots, where d adds no error.
    if abs(lam_plus) >= abs(lam_minus):
        if lam_plus != 0:
            lam_minus = complex((det / lam_plus).real, d.imag + mu_minus.imag)
    elif lam_minus != 0:
        lam_plus = complex((det / lam_minus).real, d.imag + mu_plus.imag)
    scale = max(abs(z), abs(b))
    disc = 0.5 * root
    rel = abs(disc) / scale if scale > 0 else 0.0
    return SpectralData(lambda_plus=lam_plus, lambda_minus=lam_minus, discriminant=disc,
                        near_ep=bool(rel < EP_TOL), mu_plus=mu_plus, mu_minus=mu_minus,
                        relative_gap=rel, shift=d)


def slow_fast(sd: SpectralData) -> tuple[complex, complex]:
    """``(lambda_s, lambda_f)``: smaller and larger decay rate.

    Ties go to ``lambda_s = lambda_plus``.  At a coalescence (``sd.near_ep``)
    both entries are the common eigenvalue.
    """
    if sd.near_ep:
        mid = 0.5 * (sd.lambda_plus + sd.lambda_minus)
        return mid, mid
    im_d = sd.shift.imag
    if abs(sd.mu_plus.imag + im_d) <= abs(sd.mu_minus.imag + im_d):
        return sd.lambda_plus, sd.lambda_minus
    return sd.lambda_minus, sd.lambda_plus


def decay_rates(sd: SpectralData) -> tuple[float, float]:
    """``(|Im lambda_s|, |Im lambda_f|)`` from the shifted roots (accurate in every regime)."""
    im_d = sd.shift.imag
    rates = sorted((abs(sd.mu_plus.imag + im_d), abs(sd.mu_minus.imag + im_d)))
    return rates[0], rates[1]


def eigenvector_components(m: TwoLevelMatrix, sd: SpectralData) -> tuple[complex, complex]:
    """Components ``v = (lambda - d) / b`` of the right eigenvectors ``(v, 1)``.

    For ``b = 0`` the decoupled limit is reported as ``inf`` for the mode living
    on ``|w>`` and ``0`` for the mode living on ``|r_perp>``.
    """
    if sd.near_ep:
        raise NumericalError("eigenvectors coalesce at the exceptional point; "
                             "use the divided-difference propagator")
    b = complex(m.b)
    if sd.plus_is_big:
        big, small = sd.mu_plus, sd.mu_minus
    else:
        big, small = sd.mu_minus, sd.mu_plus
    v_small = -b / big if big != 0 else 0j
    v_big = big / b if b != 0 else complex(math.inf, 0.0)
    return (v_big, v_small) if sd.plus_is_big else (v_small, v_big)


@dataclass(frozen=True)
class _Modes:
    """Per-mode data in the dominant-component scaling (internal)."""

    mu: tuple[complex, complex]          # (plus, minus)
    coef: tuple[complex, complex]        # expansion coefficients of |s>
    vec: tuple[tuple[complex, complex], tuple[complex, complex]]
    d: complex
    rho: complex
    plus_is_big: bool


def _modes(m: TwoLevelMatrix, N: int, sd: SpectralData) -> _Modes:
    b, d = complex(m.b), complex(m.d)
    plus_big = sd.plus_is_big
    if plus_big:
        mu_big, mu_small, lam_big, lam_small = sd.mu_plus, sd.mu_minus, sd.lambda_plus, sd.lambda_minus
        gap = 2.0 * sd.discriminant
    else:
        mu_big, mu_small, lam_big, lam_small = sd.mu_minus, sd.mu_plus, sd.lambda_minus, sd.lambda_plus
        gap = -2.0 * sd.discriminant
    if mu_big == 0:
        raise NumericalError("degenerate matrix: both shifted roots vanish")
    rho = b / mu_big
    norm = gap / mu_big
    if abs(norm) < 1e-13:
        raise NumericalError(f"biorthogonal normalization collapsed (|1+v^2| ~ {abs(norm):.2e}); "
                             "parameters are at an exceptional point")
    sqrt_n = math.sqrt(N)
    sqrt_n1 = math.sqrt(N - 1)
    corr = b * sqrt_n1 - d
    if abs(corr) <= 8 * np.finfo(float).eps * (abs(d) + abs(b) * sqrt_n1):
        corr = 0j
    num_big = (lam_big + corr) / (sqrt_n * mu_big)
    if b != 0:
        num_small = (lam_small + corr) / (sqrt_n * b)
    else:
        sw, sp = initial_state(N)
        num_small = -rho * sw + sp
    c_big, c_small = num_big / norm, num_small / norm
    vec_big, vec_small = (1.0 + 0j, rho), (-rho, 1.0 + 0j)
    if plus_big:
        return _Modes((mu_big, mu_small), (c_big, c_small), (vec_big, vec_small), d, rho, True)
    return _Modes((mu_small, mu_big), (c_small, c_big), (vec_small, vec_big), d, rho, False)


def overlaps(m: TwoLevelMatrix, N: int, sd: SpectralData | None = None) -> OverlapSet:
    """Spectral weights of the two decaying modes and their interference term."""
    sd = eigenvalues(m) if sd is None else sd
    if sd.near_ep:
        raise NumericalError("overlaps are singular at the exceptional point")
    md = _modes(m, N, sd)
    rho = md.rho
    length2 = 1.0 + abs(rho) ** 2
    c_plus, c_minus = md.coef
    O_plus = abs(c_plus) ** 2 * length2
    O_minus = abs(c_minus) ** 2 * length2
    # <R_minus|R_plus> for the (1, rho) / (-rho, 1) pair.
    inner = 2j * rho.imag if md.plus_is_big else -2j * rho.imag
    O_cross = c_minus.conjugate() * inner * c_plus
    return OverlapSet(float(O_plus), float(O_minus), complex(O_cross))


def _exp_clamped(z):
    z = np.asarray(z, dtype=complex)
    re = np.maximum(z.real, EXP_FLOOR)
    out = np.exp(re + 1j * z.imag)
    return np.where(z.real < EXP_FLOOR, 0.0, out)


def _exp_real_clamped(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < EXP_FLOOR, 0.0, np.exp(np.maximum(x, EXP_FLOOR)))


def _use_spectral(sd: SpectralData, method: str) -> bool:
    if method == "spectral":
        if sd.near_ep:
            raise NumericalError("spectral form refused at the exceptional point")
        return True
    if method == "norm":
        return False
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    return sd.relative_gap >= ROUTE_TOL


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("times must be finite and nonnegative")
    return t


def _scalar_or_array(x, t):
    return x.item() if np.ndim(t) == 0 else x


def _divided_difference_state(m: TwoLevelMatrix, N: int, sd: SpectralData, t):
    """``exp(-iHt)|s>`` as ``e^{-idt}[ (e+ + e-)/2 s + g M s ]`` with ``M = H - mean(a,d)``."""
    b, d = complex(m.b), complex(m.d)
    delta = 0.5 * complex(m.a - m.d)
    gap = 2.0 * sd.discriminant  # mu_plus - mu_minus
    sw, sp = initial_state(N)
    e_plus = _exp_clamped(-1j * sd.mu_plus * t)
    e_minus = _exp_clamped(-1j * sd.mu_minus * t)
    x = 0.5 * gap * t
    small = np.abs(x) < 0.5
    xs = np.where(small, x, 0.0)
    sinc = np.where(xs == 0, 1.0, np.sin(xs) / np.where(xs == 0, 1.0, xs))
    g_small = _exp_clamped(-1j * delta * t) * (-1j * t) * sinc
    safe_gap = gap if gap != 0 else 1.0
    g_large = (e_plus - e_minus) / safe_gap
    g = np.where(small, g_small, g_large)
    half = 0.5 * (e_plus + e_minus)
    ms_w = delta * sw + b * sp
    ms_p = b * sw - delta * sp
    phase = _exp_clamped(-1j * d * t)
    return phase * (half * sw + g * ms_w), phase * (half * sp + g * ms_p)


def _spectral_state(m: TwoLevelMatrix, N: int, sd: SpectralData, t):
    md = _modes(m, N, sd)
    phase = _exp_clamped(-1j * md.d * t)
    amp_w = 0j
    amp_p = 0j
    for mu, c, (rw, rp) in zip(md.mu, md.coef, md.vec):
        e = _exp_clamped(-1j * mu * t) * c
        amp_w = amp_w + e * rw
        amp_p = amp_p + e * rp
    return phase * amp_w, phase * amp_p


def propagator_amplitudes(m: TwoLevelMatrix, N: int, t, method: str = "auto"):
    """``(<w|S(t)|s>, <r_perp|S(t)|s>)`` for ``S(t) = exp(-i H t)``; ``t`` may be an array."""
    t = _check_times(t)
    sd = eigenvalues(m)
    if _use_spectral(sd, method):
        w, p = _spectral_state(m, N, sd, t)
    else:
        w, p = _divided_difference_state(m, N, sd, t)
    w = np.asarray(w, dtype=complex) * np.ones_like(t)
    p = np.asarray(p, dtype=complex) * np.ones_like(t)
    return _scalar_or_array(w, t), _scalar_or_array(p, t)


def _spectral_terms(m: TwoLevelMatrix, N: int, sd: SpectralData):
    ov = overlaps(m, N, sd)
    im_d = sd.shift.imag
    rate_plus = 2.0 * (sd.mu_plus.imag + im_d)
    rate_minus = 2.0 * (sd.mu_minus.imag + im_d)
    freq = sd.mu_plus - sd.mu_minus.conjugate() + 2j * im_d
    return ov, rate_plus, rate_minus, freq


def no_click_probability(m: TwoLevelMatrix, N: int, t, method: str = "auto"):
    """Probability that the detector has not fired by time ``t``.

    ``method="spectral"`` evaluates the biorthogonal mode sum,
    ``method="norm"`` the squared norm of the propagated state, and ``"auto"``
    picks the sum unless the eigenpair is close to coalescing.
    """
    t = _check_times(t)
    sd = eigenvalues(m)
    if _use_spectral(sd, method):
        ov, rp, rm, freq = _spectral_terms(m, N, sd)
        p = (ov.O_plus * _exp_real_clamped(rp * t) + ov.O_minus * _exp_real_clamped(rm * t)
             + 2.0 * np.real(_exp_clamped(-1j * freq * t) * ov.O_cross))
    else:
        w, q = _divided_difference_state(m, N, sd, t)
        p = np.abs(w) ** 2 + np.abs(q) ** 2
    p = np.asarray(p, dtype=float) * np.ones_like(t)
    return _scalar_or_array(p, t)


def click_probability(m: TwoLevelMatrix, N: int, t, method: str = "auto"):
    """``1 - P(t)``, computed without cancellation while it is small."""
    t = _check_times(t)
    sd = eigenvalues(m)
    if _use_spectral(sd, method):
        ov, rp, rm, freq = _spectral_terms(m, N, sd)
        arg = -1j * freq * t
        q = -(ov.O_plus * np.expm1(np.maximum(rp * t, EXP_FLOOR))
              + ov.O_minus * np.expm1(np.maximum(rm * t, EXP_FLOOR))
              + 2.0 * np.real(ov.O_cross * np.expm1(np.maximum(arg.real, EXP_FLOOR) + 1j * arg.imag)))
    else:
        w, p = _divided_difference_state(m, N, sd, t)
        q = 1.0 - (np.abs(w) ** 2 + np.abs(p) ** 2)
    q = np.asarray(q, dtype=float) * np.ones_like(t)
    return _scalar_or_array(q, t)
