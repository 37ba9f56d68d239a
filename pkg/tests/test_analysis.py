import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from monitored_search.analysis import (PhaseDiagram, ScalingSample, ep_asymptotic_pt,
                                       ep_coefficients, ep_envelope_bounds, ep_time_bounds,
                                       eigenvalue_scaling_prediction, fit_exponent,
                                       geometric_sizes, lindblad_norm, measured_exponents,
                                       phase_diagram, predicted_alpha, query_complexity,
                                       validity_bound_nstar)
from monitored_search.model import (ModelParams, ParameterError, RegimeTag, build_params,
                                    classify_regime, matrix_elements)
from monitored_search.spectral import no_click_probability


@pytest.mark.parametrize("r_bar,s,gbar,mode,alpha", [
    (1.0, 0.5, 1.0, "reset_fast", 1.5),
    (1.0, 0.5, 1.0, "no_reset", 3.5),
    (-2.0, -0.5, 1.0, "reset_fast", 0.5),
    (-2.0, -0.5, 1.0, "no_reset", 0.5),
    (0.0, 0.5, 1.0, "no_reset", 0.5),
    (1.0, -0.5, 1.0, "reset_fast", 0.5),
    (0.0, -0.5, 1.0, "reset_fast", 0.5),
    (0.0, 0.75, 1.0, "reset_fast", 0.75),
])
def test_predicted_alpha_examples(r_bar, s, gbar, mode, alpha):
    assert predicted_alpha(r_bar, s, gbar, mode) == pytest.approx(alpha, abs=1e-12)


def test_predicted_alpha_errors():
    with pytest.raises(ParameterError):
        predicted_alpha(math.nan, 0.5)
    with pytest.raises(ValueError):
        predicted_alpha(0.0, 0.5, mode="other")


@given(alpha=st.floats(-3, 3), prefactor=st.floats(1e-3, 1e3))
def test_fit_recovers_exact_power_law(alpha, prefactor):
    samples = [ScalingSample(N, prefactor * float(N) ** alpha) for N in geometric_sizes(1e2, 1e6)]
    fit = fit_exponent(samples)
    assert fit.alpha_hat == pytest.approx(alpha, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(prefactor), abs=1e-8)
    assert fit.r_squared >= 1 - 1e-12


def test_fit_synthetic_example():
    fit = fit_exponent([ScalingSample(N, 7 * N ** 1.45) for N in (10, 100, 1000, 10**4)])
    assert fit.alpha_hat == pytest.approx(1.45, abs=1e-12)
    assert fit.r_squared >= 1 - 1e-12


@pytest.mark.parametrize("samples", [
    [ScalingSample(10, 1.0), ScalingSample(100, 2.0)],
    [ScalingSample(10, 1.0), ScalingSample(10, 2.0), ScalingSample(100, 3.0)],
    [ScalingSample(10, 1.0), ScalingSample(100, 0.0), ScalingSample(1000, 3.0)],
    [ScalingSample(10, 1.0), ScalingSample(100, math.inf), ScalingSample(1000, 3.0)],
])
def test_fit_rejects_degenerate_samples(samples):
    with pytest.raises(ParameterError):
        fit_exponent(samples)


def test_geometric_sizes():
    sizes = geometric_sizes(1e3, 1e7)
    assert sizes[0] == 1000 and sizes[-1] == 10**7 and len(sizes) == 8
    assert sizes == sorted(set(sizes))


def test_phase_diagram_corner_and_shape():
    grid = np.round(np.arange(-2, 2.01, 0.5), 2)
    pd = phase_diagram(grid, grid, "no_reset")
    assert isinstance(pd, PhaseDiagram)
    assert pd.alpha.shape == (grid.size, grid.size)
    i = list(grid).index(-1.0)
    assert pd.alpha[i, i] == 0.0
    assert pd.grover_or_better[i, i]
    assert np.array_equal(pd.worse_than_classical, pd.alpha > 1)


def test_phase_diagram_single_cell():
    pd = phase_diagram([0.3], [-0.2], "reset_fast", 0.8)
    assert pd.alpha.shape == (1, 1)
    assert pd.alpha[0, 0] == predicted_alpha(0.3, -0.2, 0.8, "reset_fast")
    assert pd.tags[0][0] == classify_regime(0.3, -0.2, 0.8).tag.value


def test_reset_gives_quantum_advantage_below_zero():
    grid = np.round(np.arange(-2, 2.01, 0.25), 2)
    pd = phase_diagram(grid, grid, "reset_fast")
    for i, s in enumerate(grid):
        if s < 0:
            assert np.all(pd.alpha[i] < 1)
            assert np.all(pd.alpha[i] <= s + 1 + 1e-12)


def test_reset_changes_only_weakly_mixed_cells():
    grid = np.round(np.arange(-2, 2.01, 0.25), 2)
    plain = phase_diagram(grid, grid, "no_reset")
    reset = phase_diagram(grid, grid, "reset_fast")
    weak = {RegimeTag.B.value, RegimeTag.C.value, RegimeTag.BOUNDARY_BC.value}
    for i, s in enumerate(grid):
        for j, r in enumerate(grid):
            tag = plain.tags[i][j]
            changed = plain.alpha[i, j] != reset.alpha[i, j]
            if tag in weak:
                assert changed
            elif tag == RegimeTag.A2.value and s < 0:
                # Below the real axis the critical line is also weakly mixed.
                assert changed
            else:
                assert not changed
            assert reset.alpha[i, j] <= plain.alpha[i, j]


REGIME_POINTS = [(0.0, 0.75, 1.0), (0.0, 0.25, 1.0), (0.0, 0.5, 1.0), (1.0, 0.5, 1.0),
                 (1.0, -0.5, 1.0), (-0.5, 0.25, 1.0), (-2.0, -0.5, 1.0), (-1.0, -1.0, 1.0),
                 (0.5, 0.0, 1.0), (0.0, -0.5, 0.9)]


@pytest.mark.parametrize("r_bar,s,gbar", REGIME_POINTS)
def test_eigenvalue_exponents_match_prediction(r_bar, s, gbar):
    measured = measured_exponents(r_bar, s, gbar, 1.0, geometric_sizes(1e3, 1e7))
    slow, fast = eigenvalue_scaling_prediction(r_bar, s, gbar)
    assert measured.slow_time.alpha_hat == pytest.approx(slow, abs=0.05)
    assert measured.fast_time.alpha_hat == pytest.approx(fast, abs=0.05)


@pytest.mark.parametrize("r_bar,s,gbar", [(0.1, 0.25, 1.0), (0.0, 0.5, 0.9)])
def test_slowly_converging_exponents(r_bar, s, gbar):
    # Leading corrections here decay only like N**(-2 r_bar) or N**(-1/2).
    measured = measured_exponents(r_bar, s, gbar, 1.0, geometric_sizes(1e8, 1e14))
    slow, fast = eigenvalue_scaling_prediction(r_bar, s, gbar)
    assert measured.slow_time.alpha_hat == pytest.approx(slow, abs=0.05)
    assert measured.fast_time.alpha_hat == pytest.approx(fast, abs=0.05)


def test_regime_c_slow_exponent():
    assert eigenvalue_scaling_prediction(1.0, -0.5)[0] == pytest.approx(2 * 1.0 + 0.5 + 1)


@given(k=st.floats(0.01, 1.99))
def test_critical_line_curve_starts_at_one(k):
    assert ep_asymptotic_pt(10**6, k, 0.0) == pytest.approx(1.0, abs=1e-12)
    c = ep_coefficients(k)
    assert c["D"] == pytest.approx(math.hypot(c["B"], c["C"]), rel=1e-12)


@pytest.mark.parametrize("N", [10**4, 10**6])
def test_critical_line_curve_matches_exact(N):
    t = np.linspace(0, 5 * math.sqrt(N), 1000)
    exact = no_click_probability(matrix_elements(ModelParams(N, 1 / N, 1 / math.sqrt(N))), N, t)
    assert np.max(np.abs(exact - ep_asymptotic_pt(N, 1.0, t))) < 1 / math.sqrt(N)


def test_critical_line_curve_derivative():
    # dP/dt = -2 kappa / N at t = 0, so in units of sqrt(N) the leading-order slope vanishes.
    N, k = 10**6, 0.7
    h = 1e-3
    slope = (ep_asymptotic_pt(N, k, h) - ep_asymptotic_pt(N, k, 0.0)) / h
    assert slope * math.sqrt(N) == pytest.approx(0.0, abs=1e-3)


def test_weak_monitoring_limit():
    t = np.linspace(0, 1e4, 50)
    assert np.allclose(ep_asymptotic_pt(10**6, 1e-9, t), 1.0, atol=1e-6)


@pytest.mark.parametrize("k", [0.0, -0.5, 2.0, 2.5])
def test_critical_line_curve_domain(k):
    with pytest.raises(ParameterError):
        ep_asymptotic_pt(10**6, k, 1.0)


def test_envelope_example():
    N = 10**6
    t = 3.0 * math.sqrt(N)
    lo, hi = ep_envelope_bounds(N, 1.0, t)
    assert lo == pytest.approx(2 / 3 * math.exp(-3.0), rel=1e-14)
    assert hi == pytest.approx(2 * math.exp(-3.0), rel=1e-14)
    lo0, hi0 = ep_envelope_bounds(N, 1.0, 0.0)
    assert lo0 < 1 < hi0


@pytest.mark.parametrize("N", [10**4, 10**6])
def test_envelope_contains_curves(N):
    t = np.linspace(0, 10 * math.sqrt(N), 1000)
    lo, hi = ep_envelope_bounds(N, 1.0, t)
    asym = ep_asymptotic_pt(N, 1.0, t)
    assert np.all(asym <= hi * (1 + 1e-12)) and np.all(asym >= lo * (1 - 1e-12))
    exact = no_click_probability(matrix_elements(ModelParams(N, 1 / N, 1 / math.sqrt(N))), N, t)
    # The envelope is built from leading-order rates, so the exact curve may poke
    # above it by a relative amount that shrinks like 1/N on this window.
    slack = 1 / math.sqrt(N)
    assert np.all(exact <= hi * (1 + slack)) and np.all(exact >= lo * (1 - slack))


def test_time_bounds_example():
    N = 10**6
    lo, hi = ep_time_bounds(N, 1.0, 1e-3)
    assert lo == pytest.approx(1e3 * 6.502290170873972670, rel=1e-14)
    assert hi == pytest.approx(1e3 * 7.600902459542082361, rel=1e-14)


@given(k=st.floats(0.05, 1.95), N=st.integers(100, 10**9))
def test_time_bounds_ratio_independent_of_size(k, N):
    lo, hi = ep_time_bounds(N, k, 1e-3)
    lo2, hi2 = ep_time_bounds(4 * N, k, 1e-3)
    assert hi / lo == pytest.approx(hi2 / lo2, rel=1e-12)
    assert lo2 / lo == pytest.approx(2.0, rel=1e-12)


def test_time_bounds_edge_and_errors():
    c = ep_coefficients(1.0)
    edge = c["A"] - c["D"]
    lo, _ = ep_time_bounds(10**6, 1.0, edge * (1 - 1e-12))
    assert math.isfinite(lo) and lo >= 0
    for bad in (0.0, edge, 1.0):
        with pytest.raises(ParameterError):
            ep_time_bounds(10**6, 1.0, bad)


@pytest.mark.parametrize("r_bar,s,reset,row", [
    (-1.0, -1.0, False, (-1.0, 0.0, 1.0, 0.5)),
    (0.0, -1.0, True, (-1.0, 0.0, 1.0, 0.5)),
    (0.0, 0.0, False, (0.0, 1.0, 1.0, 1.0)),
    (-2.0, -0.5, False, (-2.0, 0.5, 2.5, 1.5)),
    (0.5, -0.5, False, (-0.5, 2.5, 3.0, 2.75)),
    (0.5, -0.5, True, (-0.5, 0.5, 1.0, 0.75)),
    (-2.0, -0.5, True, (-2.0, 0.5, 2.5, 1.5)),
])
def test_query_rows(r_bar, s, reset, row):
    q = query_complexity(r_bar, s, reset)
    assert (q.dt_exponent, q.tau_exponent, q.nsteps_exponent, q.tau_physical_exponent) == \
        pytest.approx(row, abs=1e-12)


@given(r_bar=st.floats(-3, 3), s=st.floats(-3, 0), reset=st.booleans())
def test_query_identities(r_bar, s, reset):
    q = query_complexity(r_bar, s, reset)
    assert q.nsteps_exponent == pytest.approx(q.tau_exponent - q.dt_exponent, abs=1e-9)
    assert q.tau_physical_exponent == pytest.approx(q.nsteps_exponent + q.dt_exponent / 2, abs=1e-9)


def test_query_domain():
    with pytest.raises(ParameterError):
        query_complexity(0.0, 0.1)


@pytest.mark.parametrize("r_bar,s", [(-1.0, -1.0), (-0.5, -0.2), (0.5, -0.5), (0.0, -1.0)])
def test_step_exponent_matches_generator_norm(r_bar, s):
    samples = []
    for N in geometric_sizes(1e6, 1e10, 5):
        p = build_params(N, 1.0, 1.0, r_bar, s)
        samples.append(ScalingSample(N, 1 / lindblad_norm(N, p.gamma, p.kappa)))
    expected = query_complexity(r_bar, s).dt_exponent
    assert fit_exponent(samples).alpha_hat == pytest.approx(expected, abs=0.05)


def test_validity_bound():
    assert validity_bound_nstar(-1.0, -1.0, 1.0, 1.0, 0.01) == pytest.approx(100.0, rel=1e-12)
    assert validity_bound_nstar(-0.5, -1.0) == math.inf
    assert validity_bound_nstar(0.5, 0.0) == math.inf
    bounds = [validity_bound_nstar(-1.0, -1.0, dt0=d) for d in (1e-2, 1e-4, 1e-8)]
    assert bounds == sorted(bounds)
    with pytest.raises(ParameterError):
        validity_bound_nstar(-1.0, -1.0, dt0=0.0)


def test_validity_bound_is_where_step_hits_floor():
    n_star = validity_bound_nstar(-1.0, -1.5, 2.0, 0.5, 0.01)
    assert n_star == pytest.approx(156.25, rel=1e-12)
    p = build_params(int(round(n_star)), 2.0, 0.5, -1.0, -1.5)
    dt = p.kappa / (p.gamma * p.N) ** 2
    assert dt == pytest.approx(0.01, rel=1e-2)
