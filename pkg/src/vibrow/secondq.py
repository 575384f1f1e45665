"""Second-quantized six-dot model with charge-injection initialization.

Each qubit is a pair of quantum dots (A: dots 1-2, B: 3-4, C: 5-6) holding at
most one spinless electron per dot; dot operators are built by Jordan-Wigner
strings on the layout (2,)*6 (x) two truncated boson modes.  Odd dots couple
to mode 1, even dots to mode 2.

Occupancy bookkeeping: printed dot labels use the convention that n_i = 1
means *no* particle in dot i (the empty level sits above the occupied one in
a charge qubit).  Internally a standard occupation basis (0 = empty,
1 = occupied) is used and labels are translated at the boundary, so "100101"
is the state with dots 2, 3, 5 occupied.

Initialization opens dots 2, 3 and 5 to reservoirs for a gate-pulse window,
integrating rho_dot = -i[H0, rho] + sum_i Gamma_i (d_i^+ rho d_i
- 1/2 {d_i d_i^+, rho}) - the standard-form equivalent of the injection
dissipator - and then propagates unitarily in the H0 eigenbasis.  The pulse
integrator exploits that this Lindbladian keeps rho block-diagonal in total
particle number when started from a number eigenstate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import NumericsError, PulseSchedule, StateSeries, TimeGrid
from .linops import (
    DensityMatrix,
    Operator,
    PureState,
    SpaceLayout,
    hermitian_eig,
    max_abs,
)
from .model import ModelParams

__all__ = [
    "SqModelParams",
    "jw_operators",
    "build_sq_model",
    "injection_collapse_ops",
    "injection_evolve",
    "injection_fidelity_series",
    "sq_target",
    "sq_target_vector",
    "labeled_ket",
    "qubit_sector_indices",
    "dot_occupations",
]

N_DOTS = 6
ALLOWED_PULSE_CHANNELS = (2, 3, 5)  # 1-based dot numbers, per the injection protocol

_A_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # |empty><occupied|
_PARITY = np.array([[1, 0], [0, -1]], dtype=complex)  # (-1)^n


@dataclass(frozen=True)
class SqModelParams:
    """Second-quantized model parameters (units of omega).

    g is the 2-pattern (g_odd, g_even): g[0] couples dots 1, 3, 5 to mode 1 and
    g[1] couples dots 2, 4, 6 to mode 2.
    """

    eps: tuple[float, ...] = (0.05, -0.05, 0.05, -0.05, 0.05, -0.05)
    t_hop: tuple[float, float, float] = (0.005, 0.005, 0.005)
    g: tuple[float, float] = (0.1, 0.1)
    omega: tuple[float, float] = (1.0, 1.0)
    n_max: int = 2
    pulse: PulseSchedule = PulseSchedule.square(ALLOWED_PULSE_CHANNELS, rate=0.05, duration=200.0)

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(x) for x in self.eps))
        object.__setattr__(self, "t_hop", tuple(float(x) for x in self.t_hop))
        object.__setattr__(self, "g", tuple(float(x) for x in self.g))
        object.__setattr__(self, "omega", tuple(float(x) for x in self.omega))
        if len(self.eps) != N_DOTS:
            raise ValueError(f"need {N_DOTS} dot levels, got {len(self.eps)}")
        if len(self.t_hop) != 3 or len(self.g) != 2 or len(self.omega) != 2:
            raise ValueError("t_hop needs 3 entries, g and omega need 2 each")
        if any(w <= 0 for w in self.omega):
            raise ValueError(f"mode energies must be positive, got {self.omega}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        bad = set(self.pulse.channels) - set(ALLOWED_PULSE_CHANNELS)
        if bad:
            raise ValueError(f"pulse channels {sorted(bad)} not in the injection set {ALLOWED_PULSE_CHANNELS}")

    @classmethod
    def from_qubit_params(cls, p: ModelParams, pulse: PulseSchedule | None = None, n_max: int | None = None):
        """Dot-level calibration reproducing the first-quantized model.

        eps_odd - eps_even = delta_n with odd-dot-occupied encoding qubit |0>,
        so the one-electron-per-pair sector matches delta_n/2 sigma_z exactly.
        Requires equal couplings (the 2-pattern cannot express unequal g_n).
        """
        if len(set(p.g)) != 1:
            raise ValueError("second-quantized 2-pattern coupling requires equal g_n")
        eps = []
        for d in p.delta:
            eps.extend((d / 2, -d / 2))
        if pulse is None:
            pulse = PulseSchedule.square(ALLOWED_PULSE_CHANNELS, rate=0.05, duration=200.0)
        return cls(
            eps=tuple(eps),
            t_hop=p.t_hop,
            g=(p.g[0], p.g[0]),
            omega=p.omega,
            n_max=p.n_max if n_max is None else n_max,
            pulse=pulse,
        )

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout((2,) * N_DOTS + (self.n_max + 1, self.n_max + 1))

    @property
    def electronic_layout(self) -> SpaceLayout:
        return SpaceLayout((2,) * N_DOTS)

    def with_(self, **kw) -> "SqModelParams":
        return replace(self, **kw)


def jw_operators(n_modes: int = N_DOTS) -> list[Operator]:
    """Annihilation operators d_i = Z^(i) (x) a (x) I... on (2,)*n_modes."""
    ops = []
    for i in range(n_modes):
        mats = [_PARITY] * i + [_A_LOWER] + [np.eye(2, dtype=complex)] * (n_modes - i - 1)
        full = mats[0]
        for m in mats[1:]:
            full = np.kron(full, m)
        ops.append(Operator(SpaceLayout((2,) * n_modes), full))
    return ops


def _extend_electronic(mat: np.ndarray, n_max: int) -> np.ndarray:
    return np.kron(mat, np.eye((n_max + 1) ** 2, dtype=complex))


def build_sq_model(p: SqModelParams) -> Operator:
    """H0 = H_dot + V + H_b on the 64 (n_max+1)^2 dimensional space."""
    nb = p.n_max + 1
    ds = [d.entries for d in jw_operators()]
    numbers = [d.conj().T @ d for d in ds]

    h_el = sum(e * n for e, n in zip(p.eps, numbers))
    for t, (a, b) in zip(p.t_hop, ((0, 1), (2, 3), (4, 5))):
        hop = ds[a].conj().T @ ds[b]
        h_el = h_el + t * (hop + hop.conj().T)

    h = _extend_electronic(h_el, p.n_max)

    ladder = np.zeros((nb, nb), dtype=complex)
    for n in range(1, nb):
        ladder[n - 1, n] = math.sqrt(n)
    num_b = ladder.conj().T @ ladder
    coord = ladder + ladder.conj().T
    eye_b = np.eye(nb, dtype=complex)
    eye_el = np.eye(64, dtype=complex)

    h = h + p.omega[0] * np.kron(eye_el, np.kron(num_b, eye_b))
    h = h + p.omega[1] * np.kron(eye_el, np.kron(eye_b, num_b))

    coupling_1 = p.g[0] * sum(numbers[i] for i in (0, 2, 4))
    coupling_2 = p.g[1] * sum(numbers[i] for i in (1, 3, 5))
    h = h + np.kron(coupling_1, np.kron(coord, eye_b))
    h = h + np.kron(coupling_2, np.kron(eye_b, coord))
    return Operator(p.layout, h)


def injection_collapse_ops(p: SqModelParams, rates: dict[int, float]) -> list[Operator]:
    """Jump operators sqrt(Gamma_i) d_i^+ on the full layout (1-based channels)."""
    ds = jw_operators()
    out = []
    for channel, rate in sorted(rates.items()):
        if rate == 0.0:
            continue
        ddag = _extend_electronic(ds[channel - 1].entries.conj().T, p.n_max)
        out.append(Operator(p.layout, math.sqrt(rate) * ddag))
    return out


def labeled_ket(label: str, bosons: tuple[int, int], n_max: int) -> PureState:
    """Basis state from a printed dot label (1 = empty) plus boson occupations."""
    if len(label) != N_DOTS or any(c not in "01" for c in label):
        raise ValueError(f"label must be 6 binary digits, got {label!r}")
    occupations = tuple(1 - int(c) for c in label) + tuple(bosons)
    layout = SpaceLayout((2,) * N_DOTS + (n_max + 1, n_max + 1))
    return PureState.basis(layout, occupations)


def sq_target_vector(sign: int, n_max: int) -> np.ndarray:
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    phase = np.exp(1j * sign * 2 * math.pi / 3)
    vec = np.zeros((2**N_DOTS) * (n_max + 1) ** 2, dtype=complex)
    for amp, label in ((1.0, "100101"), (phase, "011001"), (phase, "010110")):
        vec += amp / math.sqrt(3) * labeled_ket(label, (0, 0), n_max).amplitudes
    return vec


def sq_target(sign: int, n_max: int = 2) -> DensityMatrix:
    """Rank-1 target [|100101> + e^{i sign 2pi/3}(|011001> + |010110>)] (x) |00> / sqrt(3)."""
    vec = sq_target_vector(sign, n_max)
    layout = SpaceLayout((2,) * N_DOTS + (n_max + 1, n_max + 1))
    return DensityMatrix(layout, np.outer(vec, vec.conj()))


def qubit_sector_indices(n_max: int) -> np.ndarray:
    """Full-space indices of the one-electron-per-pair sector.

    Ordered like the first-quantized layout (2,2,2,nb,nb) with qubit |0>
    encoded as odd-dot-occupied, so H_sq restricted to these indices can be
    compared entrywise with the first-quantized Hamiltonian.
    """
    layout = SpaceLayout((2,) * N_DOTS + (n_max + 1, n_max + 1))
    idx = []
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for m in range(n_max + 1):
                    for l in range(n_max + 1):
                        occ = (1 - i, i, 1 - j, j, 1 - k, k, m, l)
                        idx.append(layout.basis_index(occ))
    return np.array(idx)


def dot_occupations(rho: np.ndarray, n_max: int) -> np.ndarray:
    """Expectation values <n_i> for the six dots from a full-space rho."""
    nb = (n_max + 1) ** 2
    diag = np.real(np.diag(rho)).reshape((2,) * N_DOTS + (nb,)).sum(axis=-1)
    occ = np.empty(N_DOTS)
    for i in range(N_DOTS):
        occ[i] = np.moveaxis(diag, i, 0)[1].sum()
    return occ


# ---------------------------------------------------------------------------
# number-sector pulse integrator


class _SectorSpace:
    """Particle-number block structure of the injection Lindbladian."""

    def __init__(self, p: SqModelParams):
        self.p = p
        h = build_sq_model(p).entries
        nb = (p.n_max + 1) ** 2
        popcount = np.array([bin(s).count("1") for s in range(2**N_DOTS)])
        full_n = np.repeat(popcount, nb)
        self.indices = [np.where(full_n == n)[0] for n in range(N_DOTS + 1)]
        self.h_blocks = [h[np.ix_(ix, ix)] for ix in self.indices]
        # the Hamiltonian must not couple sectors (structural check)
        off = max(
            max_abs(h[np.ix_(self.indices[a], self.indices[b])])
            for a in range(N_DOTS + 1)
            for b in range(N_DOTS + 1)
            if a != b
        )
        if off > 1e-12:
            raise NumericsError(f"H0 couples particle-number sectors (max element {off:.3e})")
        ds = jw_operators()
        self.feeds: dict[int, list[np.ndarray]] = {}
        self.escapes: dict[int, list[np.ndarray]] = {}
        for channel in ALLOWED_PULSE_CHANNELS:
            ddag = _extend_electronic(ds[channel - 1].entries.conj().T, p.n_max)
            # feed blocks map sector n -> n+1; escape weights are diag(d d^+)
            self.feeds[channel] = [
                ddag[np.ix_(self.indices[n + 1], self.indices[n])] for n in range(N_DOTS)
            ]
            dd_dag = np.real(np.diag(ddag.conj().T @ ddag))
            self.escapes[channel] = [dd_dag[ix] for ix in self.indices]

    def empty_blocks(self):
        return [np.zeros((ix.size, ix.size), dtype=complex) for ix in self.indices]

    def assemble(self, blocks) -> np.ndarray:
        dim = sum(ix.size for ix in self.indices)
        rho = np.zeros((dim, dim), dtype=complex)
        for ix, block in zip(self.indices, blocks):
            rho[np.ix_(ix, ix)] = block
        return rho

    def dissipator_rhs(self, blocks, rates: dict[int, float]):
        out = [np.zeros_like(b) for b in blocks]
        for channel, rate in rates.items():
            if rate == 0.0:
                continue
            for n in range(N_DOTS + 1):
                k = rate * self.escapes[channel][n]
                out[n] -= 0.5 * (k[:, None] * blocks[n] + blocks[n] * k[None, :])
                if n > 0:
                    feed = self.feeds[channel][n - 1]
                    out[n] += rate * (feed @ blocks[n - 1] @ feed.conj().T)
        return out

    def unitary_rhs(self, blocks):
        return [-1j * (h @ b - b @ h) for h, b in zip(self.h_blocks, blocks)]


def _rk4_blocks(blocks, h_step, rhs):
    k1 = rhs(blocks)
    k2 = rhs([b + 0.5 * h_step * k for b, k in zip(blocks, k1)])
    k3 = rhs([b + 0.5 * h_step * k for b, k in zip(blocks, k2)])
    k4 = rhs([b + h_step * k for b, k in zip(blocks, k3)])
    return [
        b + (h_step / 6.0) * (a + 2 * c + 2 * d + e)
        for b, a, c, d, e in zip(blocks, k1, k2, k3, k4)
    ]


def _rk2_blocks(blocks, h_step, rhs):
    # midpoint rule; local error (Gamma h)^3 is far below the O(h^2) Strang
    # splitting error this is embedded in
    k1 = rhs(blocks)
    k2 = rhs([b + 0.5 * h_step * k for b, k in zip(blocks, k1)])
    return [b + h_step * k for b, k in zip(blocks, k2)]


class _PulseIntegrator:
    """Strang splitting: exact sector unitaries around cheap dissipator steps.

    The commutator part is applied exactly through per-sector eigenbases, so
    the step is limited only by the (slow, Gamma-scale) dissipator splitting,
    cross-validated against plain RK4 in the tests.
    """

    def __init__(self, space: _SectorSpace, step: float = 0.1):
        self.space = space
        self.step = step
        self.eigs = [np.linalg.eigh(h) for h in space.h_blocks]
        self._u_cache: dict[float, list[np.ndarray]] = {}

    def _unitaries(self, h_step: float):
        if h_step not in self._u_cache:
            self._u_cache[h_step] = [
                (v * np.exp(-1j * w * h_step)) @ v.conj().T for w, v in self.eigs
            ]
        return self._u_cache[h_step]

    def advance(self, blocks, t0: float, t1: float, rates: dict[int, float], method: str = "strang"):
        if t1 <= t0:
            return blocks
        n = max(1, math.ceil((t1 - t0) / self.step))
        h_step = (t1 - t0) / n

        def diss(b):
            return self.space.dissipator_rhs(b, rates)

        def full_rhs(b):
            return [x + y for x, y in zip(self.space.unitary_rhs(b), diss(b))]

        if method == "strang":
            # merged composition: half dissipator steps only at the segment ends
            us = self._unitaries(h_step)
            blocks = _rk2_blocks(blocks, 0.5 * h_step, diss)
            for k in range(n):
                blocks = [u @ b @ u.conj().T for u, b in zip(us, blocks)]
                if k < n - 1:
                    blocks = _rk2_blocks(blocks, h_step, diss)
                self._trace_check(blocks)
            blocks = _rk2_blocks(blocks, 0.5 * h_step, diss)
        elif method == "rk4":
            for _ in range(n):
                blocks = _rk4_blocks(blocks, h_step, full_rhs)
                self._trace_check(blocks)
        else:
            raise ValueError(f"unknown pulse method {method!r}")
        return blocks

    def _trace_check(self, blocks):
        # per-step structural check: the dissipator is exactly trace-free
        tr = sum(np.trace(b).real for b in blocks)
        prev = getattr(self, "_prev_trace", 1.0)
        if abs(tr - prev) > 1e-10:
            raise NumericsError(f"pulse integrator per-step trace drift {abs(tr - prev):.3e}")
        self._prev_trace = tr


def _segment_rates(p: SqModelParams, t0: float) -> dict[int, float]:
    return {c: p.pulse.rate(c, t0) for c in ALLOWED_PULSE_CHANNELS}


def _integrate_pulse(p: SqModelParams, sample_times=(), step: float = 0.1, method: str = "strang"):
    """Evolve |vacuum><vacuum| through the pulse window, sampling on request.

    Returns (rho_end, samples) with samples the density matrices at the
    requested times (all <= pulse end).
    """
    space = _SectorSpace(p)
    integ = _PulseIntegrator(space, step=step)
    blocks = space.empty_blocks()
    vac_local = np.where(space.indices[0] == 0)[0]
    if vac_local.size != 1:
        raise NumericsError("vacuum state not found in the zero-particle sector")
    blocks[0][vac_local[0], vac_local[0]] = 1.0

    stops = sorted(set(float(t) for t in sample_times) | set(p.pulse.breakpoints().tolist()))
    stops = [t for t in stops if t > 0.0]
    samples = {}
    if any(abs(float(s)) < 1e-12 for s in sample_times):
        samples[0.0] = space.assemble(blocks)
    t_now = 0.0
    for t in stops:
        rates = _segment_rates(p, t_now)
        blocks = integ.advance(blocks, t_now, t, rates, method=method)
        t_now = t
        if any(abs(t - float(s)) < 1e-12 for s in sample_times):
            samples[t] = space.assemble(blocks)
    return space.assemble(blocks), samples


def injection_evolve(
    p: SqModelParams,
    grid: TimeGrid,
    step: float = 0.1,
    method: str = "strang",
    max_stored_entries: int = 50_000_000,
) -> StateSeries:
    """Density matrices on `grid` (times from pulse start) for the injection protocol.

    During the pulse window the Lindblad equation (A.4-equivalent standard
    form) is integrated; afterwards the pulse-end state rotates unitarily in
    the H0 eigenbasis.  Storage of every sample is meant for short diagnostic
    grids; use :func:`injection_fidelity_series` for figure-length series.
    """
    dim = p.layout.total
    if len(grid) * dim * dim > max_stored_entries:
        raise ValueError(
            f"grid would store {len(grid)} x {dim}^2 complex entries; "
            "use injection_fidelity_series for long horizons"
        )
    t_end = p.pulse.end_time()
    during = grid.times[grid.times <= t_end + 1e-12]
    rho_end, samples = _integrate_pulse(p, sample_times=during, step=step, method=method)

    h = build_sq_model(p)
    vals, vecs = hermitian_eig(h)
    rho_tilde = vecs.conj().T @ rho_end @ vecs

    rhos = np.empty((len(grid), dim, dim), dtype=complex)
    for i, t in enumerate(grid.times):
        if t <= t_end + 1e-12:
            key = min(samples.keys(), key=lambda s: abs(s - t)) if samples else None
            if key is None or abs(key - t) > 1e-9:
                raise NumericsError(f"pulse sample at t = {t:g} was not recorded")
            rhos[i] = samples[key]
        else:
            phases = np.exp(-1j * vals * (t - t_end))
            rhos[i] = vecs @ ((phases[:, None] * rho_tilde) * phases.conj()[None, :]) @ vecs.conj().T
        tr_dev = abs(np.trace(rhos[i]) - 1.0)
        if tr_dev > 1e-6:
            raise NumericsError(f"injection trace drift {tr_dev:.3e} at t = {t:g}")
    return StateSeries(grid=grid, layout=p.layout, rhos=rhos)


def injection_fidelity_series(p: SqModelParams, grid: TimeGrid, step: float = 0.1, method: str = "strang"):
    """Fidelity of the post-pulse evolution against the two phase targets.

    `grid` times are measured from the *end* of the pulse.  Returns a dict
    with beta, fidelity_plus, fidelity_minus and diagnostics (pulse-end dot
    occupations and trace deviation).
    """
    rho_end, _ = _integrate_pulse(p, sample_times=(), step=step, method=method)
    h = build_sq_model(p)
    vals, vecs = hermitian_eig(h)
    rho_tilde = vecs.conj().T @ rho_end @ vecs

    out = {"beta": grid.beta, "times": grid.times}
    for name, sign in (("fidelity_plus", +1), ("fidelity_minus", -1)):
        c = vecs.conj().T @ sq_target_vector(sign, p.n_max)
        weight = np.outer(c.conj(), c) * rho_tilde  # W_jk = c_j^* rho~_jk c_k
        phase = np.exp(-1j * np.outer(grid.times, vals))
        out[name] = np.real(np.einsum("tj,jk,tk->t", phase, weight, phase.conj()))
    out["pulse_end_occupations"] = dot_occupations(rho_end, p.n_max)
    out["pulse_end_trace_dev"] = abs(np.trace(rho_end) - 1.0)
    return out
