"""Entanglement and spectral diagnostics.

Pairwise entanglement is measured by the Wootters concurrence of the reduced
two-qubit density matrices; the tripartite diagnostics are
E_tau = C_AB^2 + C_AC^2 + C_BC^2 (4/3 for the ideal W state) and
C_min^2 = min of the three squared concurrences (4/9 for the ideal W state).
Fidelity is Tr{sigma_target rho} against the analytic maximally entangled
target.  The spectral function is a Lorentzian-broadened level density
A(eps) = sum_n 2 eta / ((eps - eps_n)^2 + eta^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import StateSeries
from .linops import DensityMatrix, SpaceLayout, partial_trace
from .model import W_BASIS_LABELS

__all__ = [
    "MetricSeries",
    "concurrence",
    "entanglement_metrics",
    "target_w",
    "target_w_vector",
    "fidelity",
    "spectral_function",
    "metric_series",
]

_SY_SY = np.kron(
    np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]])
).real.astype(float)  # sigma_y (x) sigma_y is real (-1 antidiagonal signs)

_CLAMP_FLOOR = -1e-10

METRIC_COLUMNS = ("e_tau", "c_min_sq", "c_ab", "c_ac", "c_bc", "fidelity_plus", "fidelity_minus")


@dataclass
class MetricSeries:
    """Per-sample entanglement observables, ready for CSV emission."""

    beta: np.ndarray
    e_tau: np.ndarray
    c_min_sq: np.ndarray
    c_ab: np.ndarray
    c_ac: np.ndarray
    c_bc: np.ndarray
    fidelity_plus: np.ndarray
    fidelity_minus: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.beta).size
        for name in METRIC_COLUMNS:
            col = np.asarray(getattr(self, name), dtype=float)
            if col.size != n:
                raise ValueError(f"column {name} has length {col.size}, expected {n}")
            setattr(self, name, col)
        self.beta = np.asarray(self.beta, dtype=float)

    def column(self, name: str) -> np.ndarray:
        if name == "beta" or name in METRIC_COLUMNS:
            return getattr(self, name)
        raise KeyError(f"unknown metric column {name!r}")

    def as_columns(self) -> dict[str, np.ndarray]:
        return {"beta": self.beta, **{name: getattr(self, name) for name in METRIC_COLUMNS}}


def _concurrence_batch(rhos: np.ndarray) -> np.ndarray:
    """Wootters concurrence of a stack of 4x4 density matrices.

    The square-rooted eigenvalues of rho (sy x sy) rho* (sy x sy) are computed
    as the singular values of sqrt(rho) (sy x sy) sqrt(rho)* (mathematically
    identical), which avoids the sqrt blow-up of round-off near zero.
    """
    herm = 0.5 * (rhos + rhos.conj().transpose(0, 2, 1))
    vals, vecs = np.linalg.eigh(herm)
    if float(vals.min(initial=0.0)) < _CLAMP_FLOOR:
        raise ValueError(
            f"density-matrix eigenvalue {vals.min():.3e} below the clamp floor {_CLAMP_FLOOR:g}; "
            "input is not a valid two-qubit density matrix"
        )
    roots = np.sqrt(np.clip(vals, 0.0, None))
    sqrt_rho = (vecs * roots[:, None, :]) @ vecs.conj().transpose(0, 2, 1)
    a = sqrt_rho @ _SY_SY @ sqrt_rho.conj()
    lam = np.linalg.svd(a, compute_uv=False)  # descending
    c = lam[:, 0] - lam[:, 1:].sum(axis=-1)
    return np.maximum(c, 0.0)


def concurrence(rho_pair) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    max(0, l1 - l2 - l3 - l4) with l_i the descending square roots of the
    eigenvalues of rho (sy x sy) rho* (sy x sy).
    """
    m = rho_pair.entries if isinstance(rho_pair, DensityMatrix) else np.asarray(rho_pair, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError(f"two-qubit density matrix must be 4x4, got {m.shape}")
    return float(_concurrence_batch(m[None])[0])


def _qubit_rho_batch(series: StateSeries) -> np.ndarray:
    """Reduced 3-qubit density matrices (n_t, 8, 8), bosons traced out."""
    dims = series.layout.dims
    if len(dims) < 3 or dims[:3] != (2, 2, 2):
        raise ValueError(f"expected a layout with three leading qubits, got {dims}")
    nb = math.prod(dims[3:]) if len(dims) > 3 else 1
    if series.is_pure:
        psis = series.psis.reshape(-1, 8, nb)
        return np.einsum("tab,tcb->tac", psis, psis.conj())
    rhos = series.rhos.reshape(-1, 8, nb, 8, nb)
    return np.einsum("tanbn->tab", rhos)


def _pair_rho_batch(rho_q: np.ndarray, keep: tuple[int, int]) -> np.ndarray:
    """Reduce (n_t, 8, 8) three-qubit matrices to a kept pair of qubits."""
    r = rho_q.reshape(-1, 2, 2, 2, 2, 2, 2)
    traced = ({0, 1, 2} - set(keep)).pop()
    letters_row = ["a", "b", "c"]
    letters_col = ["d", "e", "f"]
    letters_col[traced] = letters_row[traced]
    sub = "t" + "".join(letters_row) + "".join(letters_col)
    out = "t" + "".join(letters_row[i] for i in keep) + "".join(letters_col[i] for i in keep)
    return np.einsum(f"{sub}->{out}", r).reshape(-1, 4, 4)


def entanglement_metrics(rho_full: DensityMatrix) -> tuple[float, float, float, float, float]:
    """(E_tau, C_min^2, C_AB, C_AC, C_BC) of a full-layout density matrix.

    Bosons are traced out first, then the excluded qubit of each pair.
    """
    dims = rho_full.layout.dims
    if len(dims) < 3 or dims[:3] != (2, 2, 2):
        raise ValueError(f"expected the full model layout, got {dims}")
    rho_q = partial_trace(rho_full, keep=[0, 1, 2]) if len(dims) > 3 else rho_full
    c_ab = concurrence(partial_trace(rho_q, keep=[0, 1]))
    c_ac = concurrence(partial_trace(rho_q, keep=[0, 2]))
    c_bc = concurrence(partial_trace(rho_q, keep=[1, 2]))
    squares = (c_ab**2, c_ac**2, c_bc**2)
    return (sum(squares), min(squares), c_ab, c_ac, c_bc)


def target_w_vector(sign: int, n_max: int) -> np.ndarray:
    """State vector of the W target (1/sqrt3)[|0bar> + e^{i sign 2pi/3}(|1bar>+|2bar>)] (x) |00>."""
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    layout = SpaceLayout.full_model(n_max)
    phase = np.exp(1j * sign * 2 * math.pi / 3)
    vec = np.zeros(layout.total, dtype=complex)
    amps = (1.0, phase, phase)
    for amp, bits in zip(amps, W_BASIS_LABELS):
        vec[layout.basis_index(bits + (0, 0))] = amp / math.sqrt(3)
    return vec


def target_w(sign: int, n_max: int = 4) -> DensityMatrix:
    """Rank-1 target density matrix on the full layout (boson vacuum)."""
    vec = target_w_vector(sign, n_max)
    return DensityMatrix(SpaceLayout.full_model(n_max), np.outer(vec, vec.conj()))


def fidelity(rho: DensityMatrix, sigma_tar: DensityMatrix) -> float:
    """F = Tr{sigma_target rho}; real in [0, 1] for a rank-1 target."""
    if rho.layout != sigma_tar.layout:
        raise ValueError(f"layout mismatch: {rho.layout.dims} vs {sigma_tar.layout.dims}")
    value = float(np.real(np.trace(sigma_tar.entries @ rho.entries)))
    if value < -1e-9 or value > 1 + 1e-9:
        raise ValueError(f"fidelity {value:.3e} outside [0, 1]; inputs are not valid states")
    return value


def spectral_function(energies, eps_grid, eta: float) -> np.ndarray:
    """A(eps) = sum_n 2 eta / ((eps - eps_n)^2 + eta^2) on the grid."""
    if eta <= 0:
        raise ValueError(f"broadening eta must be positive, got {eta}")
    eps = np.asarray(eps_grid, dtype=float)
    en = np.asarray(energies, dtype=float)
    return (2 * eta / ((eps[:, None] - en[None, :]) ** 2 + eta**2)).sum(axis=1)


def metric_series(series: StateSeries, targets: tuple[np.ndarray, np.ndarray] | None = None) -> MetricSeries:
    """Entanglement observables along a state series.

    `targets` overrides the (plus, minus) target vectors; by default they are
    the W targets on the series layout (requires the canonical 5-factor
    layout for the default targets).
    """
    rho_q = _qubit_rho_batch(series)
    c_ab = _concurrence_batch(_pair_rho_batch(rho_q, (0, 1)))
    c_ac = _concurrence_batch(_pair_rho_batch(rho_q, (0, 2)))
    c_bc = _concurrence_batch(_pair_rho_batch(rho_q, (1, 2)))
    squares = np.stack([c_ab**2, c_ac**2, c_bc**2])
    e_tau = squares.sum(axis=0)
    c_min_sq = squares.min(axis=0)

    if targets is None:
        dims = series.layout.dims
        if len(dims) != 5 or dims[3] != dims[4]:
            raise ValueError("default W targets need the canonical 5-factor layout")
        n_max = dims[3] - 1
        targets = (target_w_vector(+1, n_max), target_w_vector(-1, n_max))
    t_plus, t_minus = targets

    if series.is_pure:
        f_plus = np.abs(series.psis @ t_plus.conj()) ** 2
        f_minus = np.abs(series.psis @ t_minus.conj()) ** 2
    else:
        f_plus = np.real(np.einsum("i,tij,j->t", t_plus.conj(), series.rhos, t_plus))
        f_minus = np.real(np.einsum("i,tij,j->t", t_minus.conj(), series.rhos, t_minus))

    return MetricSeries(
        beta=series.grid.beta,
        e_tau=e_tau,
        c_min_sq=c_min_sq,
        c_ab=c_ab,
        c_ac=c_ac,
        c_bc=c_bc,
        fidelity_plus=f_plus,
        fidelity_minus=f_minus,
    )
