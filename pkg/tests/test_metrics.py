import math

import numpy as np
import pytest

from vibrow.dynamics import StateSeries, TimeGrid, analytic_w_dynamics
from vibrow.linops import DensityMatrix, PureState, SpaceLayout, max_abs, partial_trace
from vibrow.metrics import (
    concurrence,
    entanglement_metrics,
    fidelity,
    metric_series,
    spectral_function,
    target_w,
    target_w_vector,
)

Q2 = SpaceLayout((2, 2))
Q3 = SpaceLayout((2, 2, 2))


def pure_pair(amps):
    v = np.asarray(amps, dtype=complex)
    v = v / np.linalg.norm(v)
    return PureState(Q2, v).density()


def w_full_density(n_max=2):
    layout = SpaceLayout.full_model(n_max)
    vec = np.zeros(layout.total, dtype=complex)
    for bits in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
        vec[layout.basis_index(bits + (0, 0))] = 1 / math.sqrt(3)
    return PureState(layout, vec).density()


def test_concurrence_bell_state():
    rho = pure_pair([1, 0, 0, 1])
    assert abs(concurrence(rho) - 1) < 1e-12


def test_concurrence_product_state():
    rho = pure_pair([0, 1, 0, 0])
    assert concurrence(rho) < 1e-12


def test_concurrence_w_reduced_pair():
    rho_pair = partial_trace(w_full_density(), keep=[1, 2])
    # bosons already vacuum; reduce the 3-qubit part
    rho_q = partial_trace(w_full_density(), keep=[0, 1, 2])
    rho_bc = partial_trace(rho_q, keep=[1, 2])
    assert abs(concurrence(rho_bc) - 2 / 3) < 1e-12
    del rho_pair


def test_concurrence_pure_state_oracle():
    # C = 2|ad - bc| for pure two-qubit states
    rng = np.random.default_rng(12)
    for _ in range(100):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        v /= np.linalg.norm(v)
        expected = 2 * abs(v[0] * v[3] - v[1] * v[2])
        assert abs(concurrence(pure_pair(v)) - expected) < 1e-10


def test_concurrence_local_unitary_invariance():
    rng = np.random.default_rng(7)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    rho = pure_pair(v)
    base = concurrence(rho)
    for _ in range(5):
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        ua, _ = np.linalg.qr(z)
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        ub, _ = np.linalg.qr(z)
        u = np.kron(ua, ub)
        rotated = DensityMatrix(Q2, u @ rho.entries @ u.conj().T)
        assert abs(concurrence(rotated) - base) < 1e-9


def test_concurrence_rejects_bad_input():
    with pytest.raises(ValueError):
        concurrence(np.eye(3))


def test_entanglement_metrics_w_state():
    e_tau, c_min_sq, c_ab, c_ac, c_bc = entanglement_metrics(w_full_density())
    assert abs(e_tau - 4 / 3) < 1e-12
    assert abs(c_min_sq - 4 / 9) < 1e-12
    assert abs(c_ab - 2 / 3) < 1e-12 and abs(c_ac - 2 / 3) < 1e-12 and abs(c_bc - 2 / 3) < 1e-12


def test_entanglement_metrics_ghz_state():
    layout = SpaceLayout.full_model(1)
    vec = np.zeros(layout.total, dtype=complex)
    vec[layout.basis_index((0, 0, 0, 0, 0))] = 1 / math.sqrt(2)
    vec[layout.basis_index((1, 1, 1, 0, 0))] = 1 / math.sqrt(2)
    e_tau, c_min_sq, *cs = entanglement_metrics(PureState(layout, vec).density())
    assert e_tau < 1e-12
    assert all(c < 1e-12 for c in cs)


def test_entanglement_metrics_separable_state():
    layout = SpaceLayout.full_model(1)
    rho = PureState.basis(layout, (0, 0, 0, 0, 0)).density()
    metrics = entanglement_metrics(rho)
    assert all(abs(x) < 1e-12 for x in metrics)


def test_entanglement_metrics_permutation_symmetry():
    # symmetric state: all qubit relabelings give identical numbers
    e_tau, c_min_sq, c_ab, c_ac, c_bc = entanglement_metrics(w_full_density())
    assert abs(c_ab - c_ac) < 1e-9 and abs(c_ab - c_bc) < 1e-9


def test_target_w_properties():
    for sign in (+1, -1):
        tar = target_w(sign, n_max=2)
        assert abs(np.trace(tar.entries) - 1) < 1e-12
        assert abs(np.trace(tar.entries @ tar.entries) - 1) < 1e-12
        e_tau, c_min_sq, *_ = entanglement_metrics(tar)
        assert abs(e_tau - 4 / 3) < 1e-12
        assert abs(c_min_sq - 4 / 9) < 1e-12


def test_target_w_coherence_element():
    layout = SpaceLayout.full_model(2)
    tar = target_w(+1, n_max=2)
    i = layout.basis_index((1, 0, 0, 0, 0))
    j = layout.basis_index((0, 1, 0, 0, 0))
    # <0bar,00| sigma |1bar,00> = (1/3) e^{-i 2pi/3} for the +1 target
    expected = np.exp(-1j * 2 * math.pi / 3) / 3
    assert abs(tar.entries[i, j] - expected) < 1e-12


def test_fidelity_pure_cases():
    tar = target_w(+1, n_max=1)
    assert abs(fidelity(tar, tar) - 1) < 1e-10
    other = PureState.basis(SpaceLayout.full_model(1), (1, 1, 1, 0, 0)).density()
    assert fidelity(other, tar) < 1e-12


def test_fidelity_matches_evolved_state_at_alpha_max():
    layout = SpaceLayout.full_model(1)
    amps = analytic_w_dynamics(math.pi / 3)  # sin = +sqrt(3)/2: the "minus" target
    vec = np.zeros(layout.total, dtype=complex)
    for amp, bits in zip(amps, ((1, 0, 0), (0, 1, 0), (0, 0, 1))):
        vec[layout.basis_index(bits + (0, 0))] = amp
    rho = PureState(layout, vec).density()
    assert abs(fidelity(rho, target_w(-1, n_max=1)) - 1) < 1e-10
    # overlap of the two targets: |(1 + 2 e^{i 2pi/3})/3|^2 = 1/3
    assert abs(fidelity(rho, target_w(+1, n_max=1)) - 1 / 3) < 1e-10


def test_fidelity_linear_in_rho():
    tar = target_w(+1, n_max=1)
    a = w_full_density(1)
    b = PureState.basis(SpaceLayout.full_model(1), (0, 0, 0, 0, 0)).density()
    mix = DensityMatrix(a.layout, 0.3 * a.entries + 0.7 * b.entries)
    lhs = fidelity(mix, tar)
    rhs = 0.3 * fidelity(a, tar) + 0.7 * fidelity(b, tar)
    assert abs(lhs - rhs) < 1e-12


def test_fidelity_layout_mismatch():
    with pytest.raises(ValueError):
        fidelity(w_full_density(1), target_w(+1, n_max=2))


def test_spectral_function_peak_height():
    eta = 0.01
    a = spectral_function([0.3], np.array([0.3]), eta)
    assert abs(a[0] - 2 / eta) < 1e-9


def test_spectral_function_integral():
    # quadrature matches the exact finite-window integral 4 arctan(W/eta);
    # the window must span well past +-50 eta for the 2pi sum rule at the 1% level
    eta = 0.02
    grid = np.linspace(-100 * eta, 100 * eta, 40001)
    a = spectral_function([0.0], grid, eta)
    integral = np.trapezoid(a, grid)
    assert abs(integral - 4 * math.atan(100)) / (2 * math.pi) < 1e-6
    assert abs(integral - 2 * math.pi) / (2 * math.pi) < 0.01


def test_spectral_function_positive_and_additive():
    eta = 0.01
    grid = np.linspace(-1, 1, 501)
    a = spectral_function([-0.3, 0.2, 0.25], grid, eta)
    assert np.all(a >= 0)
    parts = sum(spectral_function([e], grid, eta) for e in (-0.3, 0.2, 0.25))
    assert max_abs(a - parts) < 1e-12


def test_spectral_function_rejects_bad_eta():
    with pytest.raises(ValueError):
        spectral_function([0.0], np.array([0.0]), 0.0)


def test_metric_series_analytic_w_family():
    # E_tau of the analytic state peaks at 4/3 exactly where sin^2 = 3/4 and is
    # pi-periodic in alpha
    layout = SpaceLayout.full_model(1)
    alphas = np.linspace(0.0, math.pi, 97)
    psis = np.zeros((alphas.size, layout.total), dtype=complex)
    amps = analytic_w_dynamics(alphas)
    for col, bits in enumerate(((1, 0, 0), (0, 1, 0), (0, 0, 1))):
        psis[:, layout.basis_index(bits + (0, 0))] = amps[:, col]
    grid = TimeGrid(alphas + 1e-9, alphas)  # times only need to increase
    series = StateSeries(grid=grid, layout=layout, psis=psis)
    ms = metric_series(series)
    alpha_star = math.asin(math.sqrt(3) / 2)
    i_star = np.argmin(np.abs(alphas - alpha_star))
    assert abs(ms.e_tau[i_star] - 4 / 3) < 1e-3
    assert np.max(ms.e_tau) <= 4 / 3 + 1e-9
    # periodicity: E_tau(alpha) == E_tau(alpha + pi) on the sampled half-period
    ms2_vals = ms.e_tau[::-1]  # sin^2 symmetric about pi/2 on [0, pi]
    assert max_abs(ms.e_tau - ms2_vals) < 1e-9


def test_metric_series_columns_and_bounds():
    ms = metric_series_from_w()
    cols = ms.as_columns()
    assert set(cols) == {"beta", "e_tau", "c_min_sq", "c_ab", "c_ac", "c_bc", "fidelity_plus", "fidelity_minus"}
    assert np.all(ms.c_ab >= 0) and np.all(ms.c_ab <= 1)
    assert np.all(ms.e_tau <= 4 / 3 + 1e-6)
    assert np.all(ms.fidelity_plus <= 1 + 1e-9)
    assert np.all(ms.c_min_sq == np.minimum.reduce([ms.c_ab**2, ms.c_ac**2, ms.c_bc**2]))


def metric_series_from_w():
    layout = SpaceLayout.full_model(1)
    vec = np.zeros(layout.total, dtype=complex)
    for bits in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
        vec[layout.basis_index(bits + (0, 0))] = 1 / math.sqrt(3)
    times = np.array([0.0, 1.0, 2.0])
    grid = TimeGrid(times, times)
    psis = np.tile(vec, (3, 1))
    return metric_series(StateSeries(grid=grid, layout=layout, psis=psis))
