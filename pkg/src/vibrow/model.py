"""Hamiltonians of three charge qubits coupled to two vibrational modes.

Builds the model in two frames:

* the original frame, where each qubit couples linearly to the modes
  (state |0> of every qubit to mode 1, state |1> to mode 2), and
* the polaron frame, reached by the Lang-Firsov transformation e^S, where the
  linear coupling is traded for pairwise sigma_z sigma_z attraction and the
  tunneling becomes dressed by displacement operators.

All energies are in units of the (common) mode energy omega.  The zero-tunneling
branch energies and the second-order effective coupling between the
one-excitation states |100>, |010>, |001> are available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .linops import (
    P0,
    P1,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    Operator,
    SpaceLayout,
    boson_ladder,
    displacement,
    hermitian_eig,
    kron,
    kron_sum,
)

__all__ = [
    "ModelParams",
    "BranchEnergies",
    "build_full_hamiltonian",
    "build_polaron_hamiltonian",
    "unperturbed_energies",
    "all_branch_energies",
    "effective_coupling",
    "build_effective_h",
    "w_manifold_splitting",
    "W_BASIS_LABELS",
]

# Ordered basis of the one-excitation manifold: |0bar>, |1bar>, |2bar|.
W_BASIS_LABELS = ((1, 0, 0), (0, 1, 0), (0, 0, 1))

_SINGULARITY_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters in units of omega.

    Defaults are the canonical symmetric operating point delta = 0.1,
    t = 0.005, g = 0.1 with equal mode energies.
    """

    delta: tuple[float, float, float] = (0.1, 0.1, 0.1)
    t_hop: tuple[float, float, float] = (0.005, 0.005, 0.005)
    g: tuple[float, float, float] = (0.1, 0.1, 0.1)
    omega: tuple[float, float] = (1.0, 1.0)
    n_max: int = 4
    gamma_dephase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(float(x) for x in self.delta))
        object.__setattr__(self, "t_hop", tuple(float(x) for x in self.t_hop))
        object.__setattr__(self, "g", tuple(float(x) for x in self.g))
        object.__setattr__(self, "omega", tuple(float(x) for x in self.omega))
        if len(self.delta) != 3 or len(self.t_hop) != 3 or len(self.g) != 3:
            raise ValueError("delta, t_hop and g each need 3 components")
        if len(self.omega) != 2:
            raise ValueError("omega needs 2 components")
        if any(w <= 0 for w in self.omega):
            raise ValueError(f"mode energies must be positive, got {self.omega}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.gamma_dephase < 0:
            raise ValueError(f"gamma_dephase must be >= 0, got {self.gamma_dephase}")

    @classmethod
    def symmetric(cls, delta=0.1, t_hop=0.005, g=0.1, omega=1.0, n_max=4, gamma_dephase=0.0):
        return cls((delta,) * 3, (t_hop,) * 3, (g,) * 3, (omega, omega), n_max, gamma_dephase)

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout.full_model(self.n_max)

    @property
    def equal_frequencies(self) -> bool:
        return abs(self.omega[0] - self.omega[1]) <= 1e-12

    @property
    def lambdas(self) -> tuple[float, float, float]:
        """Polaron displacements lambda_n = g_n / omega (equal-frequency case)."""
        if not self.equal_frequencies:
            raise ValueError("lambda_n is only defined here for omega_1 = omega_2")
        return tuple(gn / self.omega[0] for gn in self.g)

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


def _mode_identity(n_max: int) -> Operator:
    return Operator.identity(SpaceLayout((n_max + 1,)))


def _qubit_hamiltonian(p: ModelParams) -> Operator:
    half_delta = [d / 2 for d in p.delta]
    return kron_sum(SIGMA_Z, half_delta) + kron_sum(SIGMA_X, list(p.t_hop))


def _mode_hamiltonian(p: ModelParams) -> Operator:
    b, bdag = boson_ladder(p.n_max)
    num = bdag @ b
    iv = _mode_identity(p.n_max)
    return p.omega[0] * kron([num, iv]) + p.omega[1] * kron([iv, num])


def build_full_hamiltonian(p: ModelParams) -> Operator:
    """Original-frame Hamiltonian on the layout (2, 2, 2, n_max+1, n_max+1).

    H = H_qubits (x) I_v (x) I_v  +  I_8 (x) H_v  +  V, where V couples the
    |0> projector of every qubit to mode 1 and the |1> projector to mode 2
    through the mode coordinate B^+ + B.
    """
    iv = _mode_identity(p.n_max)
    i8 = Operator.identity(SpaceLayout((2, 2, 2)))
    b, bdag = boson_ladder(p.n_max)
    coord = b + bdag

    h = kron([_qubit_hamiltonian(p), iv, iv]) + kron([i8, _mode_hamiltonian(p)])
    h = h + kron([kron_sum(P0, list(p.g)), coord, iv])
    h = h + kron([kron_sum(P1, list(p.g)), iv, coord])
    return h


def build_polaron_hamiltonian(p: ModelParams) -> tuple[Operator, Operator, Operator]:
    """Lang-Firsov frame: returns (H_bar0, V_bar, S).

    H_bar0 carries the detuning terms, the constant -(1/omega) sum g_n^2 shift,
    the pairwise -g_n g_m / omega (sigma_z sigma_z + 1) attraction and the bare
    mode energies.  V_bar is the displacement-dressed tunneling
    t_n (sigma_plus^(n) (x) D(lambda_n) (x) D(-lambda_n) + h.c.).  S is the
    anti-Hermitian generator, so that e^S H e^{-S} = H_bar0 + V_bar up to
    truncation error.

    Only the equal-frequency case is supported: for omega_1 != omega_2 the
    transformed pairwise terms are not given by the model and the call is
    rejected.
    """
    if not p.equal_frequencies:
        raise ValueError(
            f"polaron frame requires omega_1 = omega_2, got {p.omega}; "
            "unequal frequencies would need cross-mode terms the model does not define"
        )
    omega = p.omega[0]
    lams = p.lambdas
    iv = _mode_identity(p.n_max)
    i2 = Operator.single(np.eye(2))
    sz = Operator.single(SIGMA_Z)
    i8 = Operator.identity(SpaceLayout((2, 2, 2)))

    hq = kron_sum(SIGMA_Z, [d / 2 for d in p.delta])
    hq = hq + (-(sum(gn**2 for gn in p.g) / omega)) * i8
    for n, m in ((0, 1), (0, 2), (1, 2)):
        ops = [i2, i2, i2]
        ops[n] = sz
        ops[m] = sz
        zz = kron(ops)
        hq = hq + (-(p.g[n] * p.g[m] / omega)) * (zz + i8)

    h_bar0 = kron([hq, iv, iv]) + kron([i8, _mode_hamiltonian(p)])

    layout = p.layout
    v_bar = Operator(layout, np.zeros((layout.total, layout.total), dtype=complex))
    s_gen = Operator(layout, np.zeros((layout.total, layout.total), dtype=complex))
    b, bdag = boson_ladder(p.n_max)
    antiherm = bdag - b
    sp = Operator.single(SIGMA_PLUS)
    p0 = Operator.single(P0)
    p1 = Operator.single(P1)
    for n in range(3):
        ops = [i2, i2, i2]
        ops[n] = sp
        dressed = kron(ops + [displacement(lams[n], p.n_max), displacement(-lams[n], p.n_max)])
        v_bar = v_bar + p.t_hop[n] * (dressed + dressed.dag())

        ops0 = [i2, i2, i2]
        ops0[n] = p0
        ops1 = [i2, i2, i2]
        ops1[n] = p1
        s_gen = s_gen + lams[n] * kron([kron(ops0), antiherm, iv])
        s_gen = s_gen + lams[n] * kron([kron(ops1), iv, antiherm])

    return h_bar0, v_bar, s_gen


@dataclass(frozen=True)
class BranchEnergies:
    """Zero-tunneling branch energies at fixed mode occupations (m, l).

    Labels are the electronic configurations (i, j, k); the constant
    -(1/omega)(sum g_n^2 + sum_{n<m} g_n g_m) shift is omitted unless the
    energies were built with include_shift=True.
    """

    m: int
    l: int
    values: Mapping[tuple[int, int, int], float]
    shift_included: bool = False

    def __getitem__(self, label) -> float:
        if isinstance(label, str):
            label = tuple(int(c) for c in label)
        return self.values[tuple(label)]

    def items(self):
        return self.values.items()


def _electronic_energy(p: ModelParams, bits: tuple[int, int, int], include_shift: bool) -> float:
    # sigma_z eigenvalue +1 on |0>, -1 on |1>
    omega = p.omega[0]
    s = [1 - 2 * b for b in bits]
    e = 0.5 * sum(d * sn for d, sn in zip(p.delta, s))
    pairs = ((0, 1), (0, 2), (1, 2))
    e -= sum(p.g[n] * p.g[m] * s[n] * s[m] for n, m in pairs) / omega
    if include_shift:
        e -= (sum(gn**2 for gn in p.g) + sum(p.g[n] * p.g[m] for n, m in pairs)) / omega
    return e


def unperturbed_energies(p: ModelParams, m: int, l: int, include_shift: bool = False) -> BranchEnergies:
    """All 8 electronic branches at mode occupations (m, l).

    With include_shift=False the constant shift is omitted, matching the
    closed-form branch energies (e.g. eps_000 = (3/2)delta - 3g^2/omega at the
    symmetric point); include_shift=True restores absolute energies for
    cross-checks against the eigensolver.
    """
    if not p.equal_frequencies:
        raise ValueError("branch energies assume omega_1 = omega_2")
    vib = m * p.omega[0] + l * p.omega[1]
    values = {}
    for i in range(2):
        for j in range(2):
            for k in range(2):
                values[(i, j, k)] = _electronic_energy(p, (i, j, k), include_shift) + vib
    return BranchEnergies(m=m, l=l, values=values, shift_included=include_shift)


def all_branch_energies(p: ModelParams, include_shift: bool = False) -> np.ndarray:
    """Flat array of every branch energy over (i,j,k) x (m,l <= n_max)."""
    out = []
    for m in range(p.n_max + 1):
        for l in range(p.n_max + 1):
            out.extend(unperturbed_energies(p, m, l, include_shift).values.values())
    return np.array(sorted(out))


def _require_symmetric(p: ModelParams, what: str):
    if len(set(p.delta)) != 1 or len(set(p.t_hop)) != 1 or len(set(p.g)) != 1:
        raise ValueError(f"{what} is only evaluated at the symmetric point (equal delta, t, g)")
    if not p.equal_frequencies:
        raise ValueError(f"{what} requires omega_1 = omega_2")


def effective_coupling(p: ModelParams, extended_sum: bool = False) -> float:
    """Second-order coupling Omega between the one-excitation states.

    Closed form -4 g^2 t^2 e^{-2 lambda^2} / (omega delta (delta - 4g^2/omega))
    from the two virtual paths through |000> and the two-excitation branch,
    keeping only zero-phonon intermediate states.  extended_sum=True adds the
    (m+l) = 1 phonon replicas of those paths to quantify the neglect.

    Raises on the two perturbative resonances delta = 0 (degenerate with the
    two-excitation branch) and delta = 4g^2/omega (degenerate with |000>).
    """
    _require_symmetric(p, "effective_coupling")
    omega = p.omega[0]
    delta, t, g = p.delta[0], p.t_hop[0], p.g[0]
    lam = g / omega
    denom_000 = delta - 4 * g**2 / omega  # eps_000 - eps_100 at m = l = 0
    denom_110 = -delta                    # eps_110 - eps_100
    if abs(denom_110) < _SINGULARITY_TOL:
        raise ValueError(
            "effective coupling singular: delta = 0 makes the intermediate "
            "two-excitation branch (eps_110) degenerate with the W manifold"
        )
    if abs(denom_000) < _SINGULARITY_TOL:
        raise ValueError(
            "effective coupling singular: delta = 4g^2/omega makes the intermediate "
            "|000> branch degenerate with the W manifold"
        )
    omega_2nd = -4 * g**2 * t**2 * math.exp(-2 * lam**2) / (omega * delta * denom_000)
    if not extended_sum:
        return omega_2nd

    # Explicit perturbation sum including (m+l) <= 1 intermediate phonon states.
    # <ml|D(lam) (x) D(-lam)|00> factors from the displaced-vacuum column.
    def d_col(sign_lam, m):
        return (sign_lam * lam) ** m * math.exp(-(lam**2) / 2) / math.sqrt(math.factorial(m))

    total = 0.0
    for m in range(2):
        for l in range(2):
            if m + l > 1:
                continue
            vib = (m + l) * omega
            # path through |000, ml>: qubit A flips 1->0 (mode-1 displacement
            # +lam, mode-2 -lam), then qubit B flips 0->1
            amp_a = t * d_col(-1, m) * d_col(1, l)      # <100,00|V|000,ml> boson part conj pattern
            amp_b = t * d_col(-1, m) * d_col(1, l)
            total -= (amp_a * amp_b) / (denom_000 + vib)
            # path through |110, ml>: qubit B flips first, then qubit A
            amp_c = t * d_col(1, m) * d_col(-1, l)
            amp_d = t * d_col(1, m) * d_col(-1, l)
            total -= (amp_c * amp_d) / (denom_110 + vib)
    return total


def build_effective_h() -> tuple[Operator, np.ndarray, np.ndarray]:
    """Dimensionless 3x3 exchange model on (|0bar>, |1bar>, |2bar>).

    h = |0><1| + |0><2| + |1><2| + h.c. with spectrum (2, -1, -1); the full
    effective Hamiltonian is Omega * h.  Eigenvectors are returned as columns
    in the order (symmetric, first degenerate, second degenerate).
    """
    h = np.ones((3, 3), dtype=complex) - np.eye(3)
    eigvals = np.array([2.0, -1.0, -1.0])
    eigvecs = np.column_stack(
        [
            np.array([1, 1, 1]) / math.sqrt(3),
            np.array([1, 1, -2]) / math.sqrt(6),
            np.array([1, -1, 0]) / math.sqrt(2),
        ]
    ).astype(complex)
    return Operator.single(h), eigvals, eigvecs


def w_manifold_indices(layout: SpaceLayout) -> list[int]:
    """Flat indices of |100,00>, |010,00|, |001,00> in the full layout."""
    return [layout.basis_index(bits + (0, 0)) for bits in W_BASIS_LABELS]


def w_manifold_splitting(p: ModelParams) -> tuple[float, float, float]:
    """Exact-diagonalization view of the W manifold of the full Hamiltonian.

    Returns (e_symmetric, e_pair_mean, splitting): the three eigenvalues with
    the largest weight on span{|100,00>, |010,00>, |001,00>} split into the
    non-degenerate one and the (near-)degenerate pair; splitting = e_symmetric
    - e_pair_mean equals 3*Omega to second order.
    """
    h = build_full_hamiltonian(p)
    vals, vecs = hermitian_eig(h)
    idx = w_manifold_indices(p.layout)
    weights = np.sum(np.abs(vecs[idx, :]) ** 2, axis=0)
    top = np.argsort(weights)[-3:]
    energies = np.sort(vals[top])
    gaps = np.diff(energies)
    if gaps[0] < gaps[1]:
        pair, single = energies[:2], energies[2]
    else:
        pair, single = energies[1:], energies[0]
    return float(single), float(pair.mean()), float(single - pair.mean())
