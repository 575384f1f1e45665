import math

import numpy as np
import pytest

from vibrow.dynamics import PulseSchedule, TimeGrid, evolve_lindblad, evolve_pure
from vibrow.linops import PureState, SpaceLayout, max_abs
from vibrow.metrics import fidelity, target_w_vector
from vibrow.model import ModelParams, build_full_hamiltonian
from vibrow.secondq import (
    SqModelParams,
    build_sq_model,
    dot_occupations,
    injection_collapse_ops,
    injection_evolve,
    injection_fidelity_series,
    jw_operators,
    labeled_ket,
    qubit_sector_indices,
    sq_target,
    sq_target_vector,
)


def test_jw_canonical_anticommutation():
    ds = [op.entries for op in jw_operators()]
    dim = 64
    for i in range(6):
        assert max_abs(ds[i] @ ds[i]) == 0
        for j in range(6):
            anti = ds[i] @ ds[j].conj().T + ds[j].conj().T @ ds[i]
            expected = np.eye(dim) if i == j else np.zeros((dim, dim))
            assert max_abs(anti - expected) < 1e-12
            anti2 = ds[i] @ ds[j] + ds[j] @ ds[i]
            assert max_abs(anti2) < 1e-12


def test_jw_total_number_spectrum():
    ds = [op.entries for op in jw_operators()]
    total = sum(d.conj().T @ d for d in ds)
    vals = np.sort(np.linalg.eigvalsh(total))
    expected = np.sort(np.concatenate([[n] * math.comb(6, n) for n in range(7)]))
    assert max_abs(vals - expected) < 1e-12


def test_sq_model_zero_coupling_diagonal():
    p = SqModelParams(t_hop=(0, 0, 0), g=(0, 0), n_max=1)
    h = build_sq_model(p).entries
    assert max_abs(h - np.diag(np.diag(h))) == 0
    ket = labeled_ket("011111", (1, 0), p.n_max)  # dot 1 occupied, one phonon in mode 1
    idx = np.argmax(np.abs(ket.amplitudes))
    assert abs(h[idx, idx] - (p.eps[0] + p.omega[0])) < 1e-14


def test_sq_model_hermitian():
    h = build_sq_model(SqModelParams(n_max=1)).entries
    assert max_abs(h - h.conj().T) < 1e-12


def test_sq_model_commutes_with_total_number():
    p = SqModelParams(n_max=1)
    h = build_sq_model(p).entries
    ds = [op.entries for op in jw_operators()]
    total = sum(d.conj().T @ d for d in ds)
    total_full = np.kron(total, np.eye((p.n_max + 1) ** 2))
    assert max_abs(h @ total_full - total_full @ h) < 1e-12


def test_sector_restriction_matches_first_quantized():
    fq = ModelParams(n_max=2)
    sq = SqModelParams.from_qubit_params(fq)
    h_sq = build_sq_model(sq).entries
    idx = qubit_sector_indices(sq.n_max)
    restricted = h_sq[np.ix_(idx, idx)]
    h_fq = build_full_hamiltonian(fq).entries
    assert max_abs(restricted - h_fq) < 1e-9
    # and the sector is exactly invariant: no coupling out of it
    mask = np.ones(h_sq.shape[0], dtype=bool)
    mask[idx] = False
    assert max_abs(h_sq[np.ix_(mask, idx)]) < 1e-12


def test_printed_label_convention():
    # "100101" = dots 2, 3, 5 occupied (label 1 means empty)
    ket = labeled_ket("100101", (0, 0), 1)
    occ = dot_occupations(np.outer(ket.amplitudes, ket.amplitudes.conj()), 1)
    assert np.allclose(occ, [0, 1, 1, 0, 1, 0])


def test_sq_target_properties():
    for sign in (+1, -1):
        tar = sq_target(sign, n_max=1)
        assert abs(np.trace(tar.entries) - 1) < 1e-12
        assert abs(np.trace(tar.entries @ tar.entries) - 1) < 1e-12
        occ = dot_occupations(tar.entries, 1)
        assert abs(occ.sum() - 3) < 1e-12


def test_sq_target_phase_overlap():
    # |<phi_+|phi_->|^2 = |(1 + 2 e^{i 2pi/3})/3|^2 = 1/3 by direct inner product
    plus = sq_target_vector(+1, 1)
    minus = sq_target_vector(-1, 1)
    overlap = abs(np.vdot(plus, minus)) ** 2
    assert abs(overlap - 1 / 3) < 1e-12
    assert abs(fidelity(sq_target(+1, 1), sq_target(-1, 1)) - 1 / 3) < 1e-12


def test_injection_dissipator_equals_standard_form():
    # the bracket form -(1/2) Gamma [d d^+ rho - d^+ rho d + h.c.] expands to
    # the standard Lindblad dissipator with jump operator sqrt(Gamma) d^+
    rng = np.random.default_rng(8)
    p = SqModelParams(n_max=1)
    (l_op,) = injection_collapse_ops(p, {3: 0.37})
    el = l_op.entries
    d = el.conj().T / math.sqrt(0.37)
    ddag = d.conj().T
    dim = el.shape[0]
    rho = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = rho @ rho.conj().T
    rho /= np.trace(rho)
    bracket = d @ ddag @ rho - ddag @ rho @ d
    injection_form = -0.5 * 0.37 * (bracket + bracket.conj().T)
    standard = el @ rho @ el.conj().T - 0.5 * (el.conj().T @ el @ rho + rho @ el.conj().T @ el)
    assert max_abs(injection_form - standard) < 1e-12


def test_zero_pulse_state_is_stationary():
    p = SqModelParams(n_max=1, pulse=PulseSchedule())
    times = np.array([0.0, 5.0, 20.0])
    series = injection_evolve(p, TimeGrid(times, times))
    vac = labeled_ket("111111", (0, 0), 1).density().entries
    for rho in series.rhos:
        assert max_abs(rho - vac) < 1e-10


def test_frozen_pulse_fills_injection_dots():
    # hoppings/couplings zeroed: each open dot fills as 1 - e^{-Gamma tau}
    p = SqModelParams(
        t_hop=(0, 0, 0),
        g=(0, 0),
        n_max=1,
        pulse=PulseSchedule.square([2, 3, 5], rate=0.05, duration=200.0),
    )
    times = np.array([0.0, 200.0])
    series = injection_evolve(p, TimeGrid(times, times))
    occ = dot_occupations(series.rhos[-1], p.n_max)
    assert max_abs(occ[[1, 2, 4]] - 1.0) < 1e-3
    assert max_abs(occ[[0, 3, 5]]) < 1e-12
    target = labeled_ket("100101", (0, 0), 1).density().entries
    assert max_abs(series.rhos[-1] - target) < 1e-3


def test_pulse_channels_validated():
    with pytest.raises(ValueError):
        SqModelParams(pulse=PulseSchedule.square([1, 2], rate=0.05, duration=10.0))


def test_blocked_integrator_matches_generic_lindblad():
    # short pulse, both the strang and rk4 sector integrators against the
    # dense reference integrator
    p = SqModelParams(n_max=1, pulse=PulseSchedule.square([2, 3, 5], rate=0.05, duration=2.0))
    times = np.array([0.0, 1.0, 2.0])
    grid = TimeGrid(times, times)
    h = build_sq_model(p)
    ls = injection_collapse_ops(p, {c: 0.05 for c in (2, 3, 5)})
    rho0 = labeled_ket("111111", (0, 0), p.n_max).density()
    ref = evolve_lindblad(h, ls, rho0, grid, method="fixed_rk4", rk4_step=0.05)
    rk4 = injection_evolve(p, grid, step=0.05, method="rk4")
    assert max_abs(rk4.rhos - ref.rhos) < 1e-10
    err_coarse = max_abs(injection_evolve(p, grid, step=0.1, method="strang").rhos - ref.rhos)
    err_fine = max_abs(injection_evolve(p, grid, step=0.05, method="strang").rhos - ref.rhos)
    assert err_coarse < 1e-5
    assert err_fine / err_coarse < 0.35  # second-order splitting


def test_post_pulse_unitary_keeps_sector():
    # pure evolution from |100101> never leaves the 3-particle sector
    p = SqModelParams(n_max=1)
    h = build_sq_model(p)
    psi0 = labeled_ket("100101", (0, 0), p.n_max)
    times = np.linspace(0.0, 50.0, 6)
    series = evolve_pure(h, psi0, TimeGrid(times, times))
    ds = [op.entries for op in jw_operators()]
    total = np.kron(sum(d.conj().T @ d for d in ds), np.eye((p.n_max + 1) ** 2))
    proj3 = np.isclose(np.diag(total).real, 3.0)
    for psi in series.psis:
        leak = np.sum(np.abs(psi[~proj3]) ** 2)
        assert leak < 1e-10


def test_sector_mapping_consistency():
    # fidelity series of the second-quantized pure evolution from |100101>
    # matches the first-quantized evolution from |0bar> against matching targets
    fq = ModelParams(n_max=2)
    sq = SqModelParams.from_qubit_params(fq)
    times = np.linspace(0.0, 3000.0, 40)
    grid = TimeGrid(times, times)

    h_sq = build_sq_model(sq)
    psi0_sq = labeled_ket("100101", (0, 0), sq.n_max)
    series_sq = evolve_pure(h_sq, psi0_sq, grid)
    f_sq = np.abs(series_sq.psis @ sq_target_vector(+1, sq.n_max).conj()) ** 2

    h_fq = build_full_hamiltonian(fq)
    psi0_fq = PureState.basis(fq.layout, (1, 0, 0, 0, 0))
    series_fq = evolve_pure(h_fq, psi0_fq, grid)
    f_fq = np.abs(series_fq.psis @ target_w_vector(+1, fq.n_max).conj()) ** 2

    assert max_abs(f_sq - f_fq) < 1e-6


def test_injection_fidelity_series_qualitative():
    # the injected run keeps the peak sequence but with reduced first peak,
    # compared against the closed-system evolution at the same parameters
    fq = ModelParams(n_max=1)
    sq = SqModelParams.from_qubit_params(fq)
    from vibrow.model import effective_coupling

    omega_eff = effective_coupling(fq)
    grid = TimeGrid.uniform_beta(1.4, 36, omega_eff)
    out = injection_fidelity_series(sq, grid, step=0.1)
    peak_injected = max(out["fidelity_plus"].max(), out["fidelity_minus"].max())

    h_fq = build_full_hamiltonian(fq)
    psi0 = PureState.basis(fq.layout, (1, 0, 0, 0, 0))
    closed = evolve_pure(h_fq, psi0, grid)
    f_plus = np.abs(closed.psis @ target_w_vector(+1, fq.n_max).conj()) ** 2
    f_minus = np.abs(closed.psis @ target_w_vector(-1, fq.n_max).conj()) ** 2
    peak_closed = max(f_plus.max(), f_minus.max())

    assert peak_injected < peak_closed
    assert out["pulse_end_trace_dev"] < 1e-8
    occ = out["pulse_end_occupations"]
    assert occ[[1, 2, 4]].min() > 0.8  # injected dots mostly filled


def test_injection_evolve_guards_long_grids():
    p = SqModelParams(n_max=2)
    times = np.linspace(0.0, 1000.0, 600)
    with pytest.raises(ValueError):
        injection_evolve(p, TimeGrid(times, times))
