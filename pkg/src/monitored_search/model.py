"""Parameters, scaling parametrization and the reduced two-level Hamiltonian.

The search graph is the complete graph on ``N`` vertices with one marked
vertex ``w``.  Only the two-dimensional span of ``|w>`` and the uniform
superposition over the unmarked vertices ``|r_perp>`` is ever dynamically
relevant, so every physical quantity in this package is built from the
2x2 matrix returned by :func:`matrix_elements`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class ParameterError(ValueError):
    """Raised for parameters outside an operation's domain."""


class NumericalError(RuntimeError):
    """Raised when a numerical procedure cannot deliver a trustworthy result."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters plus (optionally) the scaling prefactors and exponents.

    ``gamma = gamma_bar * N**(-r_bar - 1)`` and ``kappa = kappa_bar * N**(-s)``
    when the instance comes from :func:`build_params`.  Directly constructed
    instances leave the scaling fields as ``None``.
    """

    N: int
    gamma: float
    kappa: float
    epsilon_w: float = 1.0
    gamma_bar: float | None = None
    kappa_bar: float | None = None
    r_bar: float | None = None
    s: float | None = None

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ParameterError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N < 3:
            raise ParameterError(f"N must be at least 3, got {self.N}")
        for name in ("gamma", "kappa", "epsilon_w"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        # gamma = 0 is admitted as the decoupled (zero-hopping) limit.
        if self.gamma < 0:
            raise ParameterError(f"gamma must be nonnegative, got {self.gamma}")
        if self.kappa < 0:
            raise ParameterError(f"kappa must be nonnegative, got {self.kappa}")
        if self.epsilon_w <= 0:
            raise ParameterError(f"epsilon_w must be positive, got {self.epsilon_w}")

    @property
    def r(self) -> float | None:
        """Modified hopping exponent ``r = r_bar + 1``."""
        return None if self.r_bar is None else self.r_bar + 1.0

    def with_values(self, **changes) -> "ModelParams":
        """Copy with physical fields replaced; scaling metadata is dropped."""
        fields = dict(N=self.N, gamma=self.gamma, kappa=self.kappa, epsilon_w=self.epsilon_w)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class TwoLevelMatrix:
    """Symmetric 2x2 matrix ``[[a, b], [b, d]]`` in the ``{|w>, |r_perp>}`` basis.

    ``det`` optionally carries ``a*d - b**2`` evaluated without cancellation.
    """

    a: complex
    b: complex
    d: complex
    det: complex | None = None

    def determinant(self) -> complex:
        if self.det is not None:
            return complex(self.det)
        return complex(self.a * self.d - self.b * self.b)

    def as_array(self):
        import numpy as np

        return np.array([[self.a, self.b], [self.b, self.d]], dtype=complex)


class RegimeTag(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"
    CRITICAL_EP = "CriticalEP"
    B = "B"
    C = "C"
    D = "D"
    BOUNDARY_BC = "BoundaryBC"
    BOUNDARY_BD = "BoundaryBD"
    BOUNDARY_CD = "BoundaryCD"
    OUT_OF_SCOPE = "OutOfScope"


@dataclass(frozen=True)
class RegimeLabel:
    tag: RegimeTag
    alpha_predicted: float | None


def build_params(N: int, gamma_bar: float, kappa_bar: float, r_bar: float, s: float,
                 epsilon_w: float = 1.0) -> ModelParams:
    """Physical parameters from the scaling form ``gamma_bar N^(-r_bar-1)``, ``kappa_bar N^(-s)``."""
    if isinstance(N, bool) or int(N) != N or N < 3:
        raise ParameterError(f"N must be an integer >= 3, got {N!r}")
    if not (gamma_bar > 0 and kappa_bar > 0):
        raise ParameterError("gamma_bar and kappa_bar must be positive")
    if not (math.isfinite(r_bar) and math.isfinite(s)):
        raise ParameterError("r_bar and s must be finite")
    N = int(N)
    gamma = gamma_bar * float(N) ** (-r_bar - 1.0)
    kappa = kappa_bar * float(N) ** (-s)
    return ModelParams(N=N, gamma=gamma, kappa=kappa, epsilon_w=epsilon_w,
                       gamma_bar=gamma_bar, kappa_bar=kappa_bar, r_bar=r_bar, s=s)


def exponents_from_physical(N: int, gamma: float, kappa: float,
                            gamma_bar: float = 1.0, kappa_bar: float = 1.0) -> tuple[float, float]:
    """Recover ``(r_bar, s)`` from physical rates given the prefactors."""
    if gamma <= 0 or kappa <= 0:
        raise ParameterError("gamma and kappa must be positive to recover exponents")
    log_n = math.log(N)
    r_bar = -math.log(gamma / gamma_bar) / log_n - 1.0
    s = -math.log(kappa / kappa_bar) / log_n
    return r_bar, s


def prefactors_from_physical(N: int, gamma: float, kappa: float,
                             r_bar: float, s: float) -> tuple[float, float]:
    """Recover ``(gamma_bar, kappa_bar)`` from physical rates given the exponents."""
    return gamma * float(N) ** (r_bar + 1.0), kappa * float(N) ** s


def matrix_elements(p: ModelParams) -> TwoLevelMatrix:
    """Entries of the effective Hamiltonian restricted to ``{|w>, |r_perp>}``."""
    n1 = p.N - 1
    a = complex(-(p.gamma + p.epsilon_w), -p.kappa)
    b = complex(-p.gamma * math.sqrt(n1))
    d = complex(-p.gamma * n1)
    det = complex(p.gamma * n1 * p.epsilon_w, p.gamma * n1 * p.kappa)
    return TwoLevelMatrix(a=a, b=b, d=d, det=det)


def initial_state(N: int) -> tuple[float, float]:
    """Components of the uniform superposition ``|s>`` on ``|w>`` and ``|r_perp>``."""
    return 1.0 / math.sqrt(N), math.sqrt(1.0 - 1.0 / N)


def exceptional_point(N: int) -> tuple[float, float]:
    """Hopping and monitoring rates at which the two eigenvalues coalesce (``epsilon_w = 1``)."""
    if isinstance(N, bool) or int(N) != N or N < 3:
        raise ParameterError(f"N must be an integer >= 3, got {N!r}")
    gamma_ep = 1.0 / (N - 2)
    return gamma_ep, 2.0 * gamma_ep * math.sqrt(N - 1)


def classify_regime(r_bar: float, s: float, gamma_bar: float = 1.0,
                    tol: float = 0.0) -> RegimeLabel:
    """Scaling regime of ``(r_bar, s)`` and its predicted time-complexity exponent.

    Closed boundaries are resolved in a fixed priority order: the line
    ``r_bar = 0`` with ``gamma_bar = 1`` first, then ``s = 0, r_bar > 0``,
    then ``s = r_bar < 0``.  ``tol`` widens the equality tests for grid sweeps.
    """
    if not all(math.isfinite(x) for x in (r_bar, s, gamma_bar)):
        return RegimeLabel(RegimeTag.OUT_OF_SCOPE, None)

    def zero(x):
        return abs(x) <= tol

    if zero(r_bar) and gamma_bar == 1.0:
        if zero(s - 0.5):
            return RegimeLabel(RegimeTag.CRITICAL_EP, 0.5)
        if s > 0.5:
            return RegimeLabel(RegimeTag.A1, s)
        return RegimeLabel(RegimeTag.A2, 1.0 - s)
    if zero(s) and r_bar > tol:
        return RegimeLabel(RegimeTag.BOUNDARY_BC, 2.0 * r_bar + 1.0)
    if zero(s - r_bar) and r_bar < -tol:
        return RegimeLabel(RegimeTag.BOUNDARY_CD, r_bar + 1.0)
    if zero(r_bar):
        # Off the critical hopping rate the marked level stays detuned.
        if s > 0:
            return RegimeLabel(RegimeTag.BOUNDARY_BD, s + 1.0)
        return RegimeLabel(RegimeTag.C, 1.0 - s)
    if r_bar > 0:
        if s > 0:
            return RegimeLabel(RegimeTag.B, 2.0 * r_bar + s + 1.0)
        return RegimeLabel(RegimeTag.C, 2.0 * r_bar - s + 1.0)
    if s > r_bar:
        return RegimeLabel(RegimeTag.D, 1.0 + s)
    return RegimeLabel(RegimeTag.C, 2.0 * r_bar - s + 1.0)
