"""Density operators, canonical vectorization and state-validity checks.

The canonical slot ordering flattens an l x l density matrix into a length-l^2
vector: first the l diagonal entries rho_00 .. rho_{l-1,l-1}, then for each row
k = 0 .. l-2 the upper entries rho_{k,k+1} .. rho_{k,l-1} immediately followed
by their conjugate partners rho_{k+1,k} .. rho_{l-1,k}.  For l = 2 this gives
[rho00, rho11, rho01, rho10]; for l = 3
[rho00, rho11, rho22, rho01, rho02, rho10, rho20, rho12, rho21].

All container types are immutable after construction (arrays are frozen), so
they can be shared freely across parallel trajectory runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NumericsError, StructureError, ValidationError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-9
PAIR_TOL = 1e-9


@lru_cache(maxsize=None)
def slot_order(dim: int) -> tuple[tuple[int, int], ...]:
    """Canonical (row, col) index per vector slot for an l x l matrix."""
    if dim < 1:
        raise ValidationError(f"dimension must be positive, got {dim}")
    slots = [(n, n) for n in range(dim)]
    for k in range(dim - 1):
        slots.extend((k, m) for m in range(k + 1, dim))
        slots.extend((m, k) for m in range(k + 1, dim))
    return tuple(slots)


@lru_cache(maxsize=None)
def slot_index(dim: int) -> dict[tuple[int, int], int]:
    """Inverse of :func:`slot_order`: (row, col) -> slot position."""
    return {nm: i for i, nm in enumerate(slot_order(dim))}


@lru_cache(maxsize=None)
def conjugate_pairs(dim: int) -> tuple[int, ...]:
    """Slot permutation mapping each slot to the one holding its conjugate.

    Diagonal slots map to themselves.
    """
    idx = slot_index(dim)
    return tuple(idx[(m, n)] for (n, m) in slot_order(dim))


@lru_cache(maxsize=None)
def trace_row(dim: int) -> np.ndarray:
    """Row vector t with t @ vec(rho) = Tr(rho); frozen."""
    row = np.zeros(dim * dim)
    row[:dim] = 1.0
    row.setflags(write=False)
    return row


@lru_cache(maxsize=None)
def realification(dim: int) -> np.ndarray:
    """Complex matrix T mapping real coordinates z to paired vectors x = T z.

    Coordinates: each diagonal slot is its own real coordinate; each
    upper-slot/conjugate-slot pair (s, s') contributes coordinates
    (re, im) with x_s = re + i*im and x_{s'} = re - i*im.  A quadratic form
    x^T M x on paired vectors realifies to z^T (T^T M T) z.
    """
    n2 = dim * dim
    pairs = conjugate_pairs(dim)
    T = np.zeros((n2, n2), dtype=complex)
    for s in range(n2):
        sp = pairs[s]
        if sp == s:
            T[s, s] = 1.0
        elif s < sp:
            T[s, s] = 1.0
            T[sp, s] = 1.0
            T[s, sp] = 1.0j
            T[sp, sp] = -1.0j
    T.setflags(write=False)
    return T


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class StateReport:
    """Diagnostics from :func:`validate`; report-only, never raises."""

    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float

    def passes(self, hermiticity_tol: float = HERMITICITY_TOL,
               trace_tol: float = TRACE_TOL,
               eigenvalue_floor: float = EIGENVALUE_FLOOR) -> bool:
        return (self.hermiticity_defect <= hermiticity_tol
                and self.trace_defect <= trace_tol
                and self.min_eigenvalue >= eigenvalue_floor)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite l x l state."""

    matrix: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"density matrix must be square, got shape {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "dim", m.shape[0])
        report = validate(self)
        if report.hermiticity_defect > HERMITICITY_TOL:
            raise ValidationError(
                f"Hermiticity violated: defect {report.hermiticity_defect:.3e} "
                f"> {HERMITICITY_TOL:.0e}")
        if report.trace_defect > TRACE_TOL:
            raise ValidationError(
                f"unit trace violated: defect {report.trace_defect:.3e} > {TRACE_TOL:.0e}")
        if report.min_eigenvalue < EIGENVALUE_FLOOR:
            raise ValidationError(
                f"positivity violated: min eigenvalue {report.min_eigenvalue:.3e} "
                f"< {EIGENVALUE_FLOOR:.0e}")

    @classmethod
    def pure(cls, dim: int, level: int) -> "DensityMatrix":
        """Projector onto one basis level."""
        m = np.zeros((dim, dim), dtype=complex)
        m[level, level] = 1.0
        return cls(m)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True)
class VectorizedState:
    """Length-l^2 complex vector in the canonical slot ordering."""

    values: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        dim = int(round(np.sqrt(v.size)))
        if dim * dim != v.size:
            raise ValidationError(f"vector length {v.size} is not a perfect square")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "dim", dim)


@dataclass(frozen=True)
class Observable:
    """Hermitian operator together with its measurement row D = (vec(o^T))^T."""

    matrix: np.ndarray
    dim: int = field(init=False)
    row: np.ndarray = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"observable must be square, got shape {m.shape}")
        defect = float(np.abs(m - m.conj().T).max())
        if defect > HERMITICITY_TOL:
            raise ValidationError(
                f"observable Hermiticity violated: defect {defect:.3e} > {HERMITICITY_TOL:.0e}")
        dim = m.shape[0]
        # D slot (n, m) holds o[m, n], so that D @ vec(rho) = Tr(rho o).
        row = np.array([m.T[nm] for nm in slot_order(dim)], dtype=complex)
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "row", _frozen(row))


def validate(rho) -> StateReport:
    """Hermiticity defect, trace defect and smallest eigenvalue of a state.

    Accepts a DensityMatrix or a raw array; never raises.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    herm = float(np.abs(m - m.conj().T).max())
    trace = float(abs(np.trace(m) - 1.0))
    eig = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
    return StateReport(hermiticity_defect=herm, trace_defect=trace, min_eigenvalue=eig)


def vectorize(rho: DensityMatrix | np.ndarray) -> VectorizedState:
    """Flatten a density matrix into the canonical slot ordering."""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    vec = np.array([rho.matrix[nm] for nm in slot_order(rho.dim)], dtype=complex)
    return VectorizedState(vec)


def devectorize(x: VectorizedState | np.ndarray) -> DensityMatrix:
    """Inverse of :func:`vectorize`; checks conjugate-pair consistency."""
    if not isinstance(x, VectorizedState):
        x = VectorizedState(x)
    v = x.values
    pairs = conjugate_pairs(x.dim)
    defect = float(np.abs(v - v[list(pairs)].conj()).max())
    if defect > PAIR_TOL:
        raise StructureError(
            f"conjugate-pair slots inconsistent: defect {defect:.3e} > {PAIR_TOL:.0e}")
    m = np.empty((x.dim, x.dim), dtype=complex)
    for i, (n, mm) in enumerate(slot_order(x.dim)):
        m[n, mm] = v[i]
    if defect > 0.0:
        # symmetrize away the (<= PAIR_TOL) slack; exactly paired input is
        # placed verbatim so the vectorize/devectorize round trip is bit-exact
        m = 0.5 * (m + m.conj().T)
        np.fill_diagonal(m, m.diagonal().real)
    return DensityMatrix(m)


def expectation(rho: DensityMatrix, obs: Observable) -> float:
    """Tr(rho o) for a Hermitian observable; the imaginary residue must vanish."""
    if rho.dim != obs.dim:
        raise ValidationError(f"dimension mismatch: state {rho.dim}, observable {obs.dim}")
    val = complex(np.trace(rho.matrix @ obs.matrix))
    if abs(val.imag) > 1e-10:
        raise NumericsError(
            f"expectation has imaginary residue {val.imag:.3e} > 1e-10")
    return val.real
