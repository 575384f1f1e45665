"""Dense tensor-product Hilbert-space primitives.

Conventions used throughout the package:

* A composite space is an ordered tuple of factor dimensions.  The canonical
  layout of the full model is ``(2, 2, 2, n_max+1, n_max+1)``: qubits A, B, C
  followed by the two vibrational modes.
* Qubit basis: ``|0>`` is the first basis vector, so ``sigma_z|0> = +|0>``,
  ``P0 = |0><0| = diag(1, 0)`` and ``sigma_plus = |0><1|``.
* Everything is dense complex128.  The largest space handled here is a few
  hundred dimensions, where dense LAPACK beats any sparse machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

__all__ = [
    "SpaceLayout",
    "Operator",
    "PureState",
    "DensityMatrix",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_PLUS",
    "SIGMA_MINUS",
    "P0",
    "P1",
    "kron",
    "kron_sum",
    "boson_ladder",
    "displacement",
    "hermitian_eig",
    "partial_trace",
    "validate_density",
    "max_abs",
]

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_FLOOR = -1e-8
NORM_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)   # |0><1|
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def max_abs(m) -> float:
    """Max-norm of a matrix difference, the tolerance currency of the package."""
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered subsystem dimensions of a tensor-product space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("layout needs at least one factor")
        if any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def basis_index(self, occupations: Sequence[int]) -> int:
        """Flat index of the basis ket with the given per-factor indices."""
        if len(occupations) != len(self.dims):
            raise ValueError("one occupation per factor required")
        return int(np.ravel_multi_index(tuple(occupations), self.dims))

    def basis_ket(self, occupations: Sequence[int]) -> np.ndarray:
        vec = np.zeros(self.total, dtype=complex)
        vec[self.basis_index(occupations)] = 1.0
        return vec

    @classmethod
    def full_model(cls, n_max: int) -> "SpaceLayout":
        """Canonical layout: qubits A, B, C then the two truncated modes."""
        return cls((2, 2, 2, n_max + 1, n_max + 1))


@dataclass(frozen=True)
class Operator:
    """Dense square matrix tagged with its tensor-factor layout."""

    layout: SpaceLayout
    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if m.shape[0] != self.layout.total:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match layout total {self.layout.total}"
            )
        object.__setattr__(self, "entries", m)

    @classmethod
    def single(cls, mat) -> "Operator":
        """Wrap a matrix as an operator on a single factor of its own size."""
        mat = np.asarray(mat, dtype=complex)
        return cls(SpaceLayout((mat.shape[0],)), mat)

    @classmethod
    def identity(cls, layout: SpaceLayout) -> "Operator":
        return cls(layout, np.eye(layout.total, dtype=complex))

    @property
    def dim(self) -> int:
        return self.layout.total

    def dag(self) -> "Operator":
        return Operator(self.layout, self.entries.conj().T)

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return max_abs(self.entries - self.entries.conj().T) < tol

    def _check_same_layout(self, other: "Operator"):
        if self.layout != other.layout:
            raise ValueError(f"layout mismatch: {self.layout.dims} vs {other.layout.dims}")

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same_layout(other)
        return Operator(self.layout, self.entries + other.entries)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same_layout(other)
        return Operator(self.layout, self.entries - other.entries)

    def __neg__(self) -> "Operator":
        return Operator(self.layout, -self.entries)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.layout, self.entries * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_same_layout(other)
        return Operator(self.layout, self.entries @ other.entries)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector on a layout."""

    layout: SpaceLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).ravel()
        if v.size != self.layout.total:
            raise ValueError(f"vector length {v.size} does not match layout {self.layout.dims}")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: |norm - 1| = {abs(norm - 1.0):.3e}")
        object.__setattr__(self, "amplitudes", v)

    @classmethod
    def basis(cls, layout: SpaceLayout, occupations: Sequence[int]) -> "PureState":
        return cls(layout, layout.basis_ket(occupations))

    def density(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(self.layout, np.outer(v, v.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Density matrix on a layout.

    Construction only checks the shape; use :func:`validate_density` to assert
    Hermiticity / unit trace / positivity at whatever tolerance the calling
    context requires (1e-8/-1e-8 for the type invariants, 1e-6/-1e-6 at
    integrator sample points).
    """

    layout: SpaceLayout
    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != self.layout.total:
            raise ValueError(f"density matrix shape {m.shape} does not match layout {self.layout.dims}")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.layout.total

    def trace(self) -> complex:
        return complex(np.trace(self.entries))


def validate_density(
    rho: DensityMatrix | np.ndarray,
    trace_tol: float = TRACE_TOL,
    positivity_floor: float = POSITIVITY_FLOOR,
    hermiticity_tol: float = HERMITICITY_TOL * 100,
    context: str = "",
):
    """Assert the density-matrix invariants, raising ValueError on violation."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    where = f" ({context})" if context else ""
    herm = max_abs(m - m.conj().T)
    if herm > hermiticity_tol:
        raise ValueError(f"density matrix not Hermitian{where}: max|rho - rho^+| = {herm:.3e}")
    tr = np.trace(m)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace deviates{where}: |tr - 1| = {abs(tr - 1.0):.3e}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
    if min_eig < positivity_floor:
        raise ValueError(f"density matrix not positive{where}: min eigenvalue = {min_eig:.3e}")


def kron(factors: Sequence[Operator]) -> Operator:
    """Kronecker product of operators in the given order.

    The resulting layout is the concatenation of the factor layouts, matching
    the convention that the first factor is the most significant index.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("kron of an empty factor list")
    dims: tuple[int, ...] = ()
    out = np.array([[1.0 + 0.0j]])
    for f in factors:
        dims = dims + f.layout.dims
        out = np.kron(out, f.entries)
    return Operator(SpaceLayout(dims), out)


def kron_sum(site_op, coeffs: Sequence[float]) -> Operator:
    """Three-site Kronecker sum a1*A(x)I(x)I + a2*I(x)A(x)I + a3*I(x)I(x)A."""
    a = site_op.entries if isinstance(site_op, Operator) else np.asarray(site_op, dtype=complex)
    if a.shape != (2, 2):
        raise ValueError(f"site operator must be 2x2, got {a.shape}")
    coeffs = list(coeffs)
    if len(coeffs) != 3:
        raise ValueError(f"exactly 3 coefficients required, got {len(coeffs)}")
    eye2 = np.eye(2, dtype=complex)
    out = np.zeros((8, 8), dtype=complex)
    for n, c in enumerate(coeffs):
        ops = [eye2, eye2, eye2]
        ops[n] = a
        out += c * np.kron(np.kron(ops[0], ops[1]), ops[2])
    return Operator(SpaceLayout((2, 2, 2)), out)


def boson_ladder(n_max: int) -> tuple[Operator, Operator]:
    """Truncated annihilation/creation pair with B|n> = sqrt(n)|n-1>.

    The space keeps occupations 0..n_max, so the commutator [B, B^+] equals
    the identity except for the (n_max, n_max) entry, which is -n_max.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    dim = n_max + 1
    b = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        b[n - 1, n] = math.sqrt(n)
    return Operator.single(b), Operator.single(b.conj().T)


def displacement(lam: float, n_max: int) -> Operator:
    """Displacement operator exp(lam (B^+ - B)) on the truncated mode space.

    Computed by matrix exponential of the anti-Hermitian generator; unitary up
    to truncation error.
    """
    b, bdag = boson_ladder(n_max)
    return Operator(b.layout, expm(lam * (bdag.entries - b.entries)))


def hermitian_eig(m: Operator | np.ndarray, tol: float = HERMITICITY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian operator."""
    mat = m.entries if isinstance(m, Operator) else np.asarray(m, dtype=complex)
    dev = max_abs(mat - mat.conj().T)
    if dev > tol:
        raise ValueError(f"matrix not Hermitian: max|M - M^+| = {dev:.3e} > {tol:.1e}")
    values, vectors = np.linalg.eigh(mat)
    return values, vectors


def _trace_subscripts(n_factors: int, keep: Sequence[int]) -> str:
    # Row and column axes of the reshaped rho share a letter on traced factors.
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n_factors])
    col = [letters[n_factors + i] if i in keep else row[i] for i in range(n_factors)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    return "".join(row + col) + "->" + "".join(out)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on the kept factors (trace preserved)."""
    keep = sorted(set(int(k) for k in keep))
    dims = rho.layout.dims
    if not keep:
        raise ValueError("keep must name at least one factor")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise ValueError(f"keep indices {keep} out of range for layout {dims}")
    reshaped = rho.entries.reshape(dims + dims)
    reduced = np.einsum(_trace_subscripts(len(dims), keep), reshaped)
    kept_dims = tuple(dims[i] for i in keep)
    d = math.prod(kept_dims)
    return DensityMatrix(SpaceLayout(kept_dims), reduced.reshape(d, d))
