"""Bilinear generators of the vectorized master equation and their discretization.

The element-wise dynamics of the density operator,

    d rho_nm / dt = (-i w_nm - g_nm) rho_nm + sum_k G_{k->n} rho_kk delta_nm
                    + i (u/hbar) sum_k (mu_nk rho_km - rho_nk mu_km),

map through the canonical slot ordering to

    d xt/dt = (At + i u Nt) xt,

and, after shifting by an equilibrium x_e of At, to the bilinear state-space
form dx/dt = At x + i Nt (x + x_e) u.  Discretization uses the exact matrix
exponential A = exp(At dt) and phi = int_0^dt exp(At s) ds, with the control
column evaluated under a zero-order hold (the state is frozen at the start of
each sampling interval).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, null_space

from .errors import ValidationError
from .states import Observable, slot_index, trace_row

GENERATOR_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PhysicalSystem:
    """Level energies, dipole operator and dissipative rates of one system.

    ``rates[k, j]`` is the transition rate from eigenstate k to eigenstate j
    (1/time); the diagonal is ignored and must be zero.  Units are whatever
    the caller works in, with ``hbar`` expressed consistently (the bundled
    models use atomic units, where hbar = 1).
    """

    energies: np.ndarray
    dipole: np.ndarray
    rates: np.ndarray | None = None
    hbar: float = 1.0

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        mu = np.asarray(self.dipole, dtype=complex)
        dim = e.size
        if mu.shape != (dim, dim):
            raise ValidationError(f"dipole shape {mu.shape} does not match {dim} levels")
        if np.abs(mu - mu.conj().T).max() > 1e-12:
            raise ValidationError("dipole operator must be Hermitian")
        rates = self.rates
        if rates is None:
            rates = np.zeros((dim, dim))
        rates = np.asarray(rates, dtype=float)
        if rates.shape != (dim, dim):
            raise ValidationError(f"rates shape {rates.shape} does not match {dim} levels")
        if rates.min() < 0:
            raise ValidationError("transition rates must be nonnegative")
        if np.abs(np.diag(rates)).max() > 0:
            raise ValidationError("self-transition rates must be zero")
        if self.hbar <= 0:
            raise ValidationError("hbar must be positive")
        object.__setattr__(self, "energies", _frozen(e))
        object.__setattr__(self, "dipole", _frozen(mu))
        object.__setattr__(self, "rates", _frozen(rates))

    @property
    def dim(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class BilinearGenerators:
    """Continuous-time superoperators (At, Nt) and the shift vector x_e."""

    a_tilde: np.ndarray
    n_tilde: np.ndarray
    x_equilibrium: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        At = np.asarray(self.a_tilde, dtype=complex)
        Nt = np.asarray(self.n_tilde, dtype=complex)
        xe = np.asarray(self.x_equilibrium, dtype=complex).ravel()
        n2 = At.shape[0]
        dim = int(round(np.sqrt(n2)))
        if At.shape != (n2, n2) or Nt.shape != (n2, n2) or xe.size != n2 or dim * dim != n2:
            raise ValidationError("generator shapes are inconsistent")
        tr = trace_row(dim)
        resid = float(np.abs(At @ xe).max())
        if resid > GENERATOR_TOL:
            raise ValidationError(
                f"x_e is not an equilibrium: |At x_e| = {resid:.3e} > {GENERATOR_TOL:.0e}")
        for name, gen in (("A", At), ("N", Nt)):
            defect = float(np.abs(tr @ gen).max())
            if defect > GENERATOR_TOL:
                raise ValidationError(
                    f"trace row is not a left null vector of {name}: {defect:.3e}")
        object.__setattr__(self, "a_tilde", _frozen(At))
        object.__setattr__(self, "n_tilde", _frozen(Nt))
        object.__setattr__(self, "x_equilibrium", _frozen(xe))
        object.__setattr__(self, "dim", dim)


@dataclass(frozen=True)
class DiscreteModel:
    """Per-step matrices A = exp(At dt), phi = int_0^dt exp(At s) ds, and D."""

    a: np.ndarray
    phi: np.ndarray
    dt: float
    measurement_row: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(np.asarray(self.a, dtype=complex)))
        object.__setattr__(self, "phi", _frozen(np.asarray(self.phi, dtype=complex)))
        object.__setattr__(self, "measurement_row",
                           _frozen(np.asarray(self.measurement_row, dtype=complex).ravel()))


def dephasing_rates(rates: np.ndarray) -> np.ndarray:
    """Total dephasing rate g_nm = 0.5 sum_j (G_{n->j} + G_{m->j})."""
    out = np.asarray(rates, dtype=float).sum(axis=1)
    return 0.5 * (out[:, None] + out[None, :])


def build_generators(system: PhysicalSystem,
                     x_equilibrium: np.ndarray | None = None) -> BilinearGenerators:
    """Assemble (At, Nt, x_e) from level data through the canonical ordering.

    ``x_equilibrium`` may supply a candidate shift vector (typically the
    vectorized initial state); it is used when it is a null vector of At to
    tolerance.  Otherwise x_e comes from the null space of At: the null
    vector whose diagonal slots form a valid probability distribution, and
    for degenerate null spaces the combination closest to the maximally
    mixed state.
    """
    dim = system.dim
    n2 = dim * dim
    idx = slot_index(dim)
    omega = (system.energies[:, None] - system.energies[None, :]) / system.hbar
    gamma = dephasing_rates(system.rates)
    mu = system.dipole / system.hbar

    At = np.zeros((n2, n2), dtype=complex)
    Nt = np.zeros((n2, n2), dtype=complex)
    for (n, m), i in idx.items():
        At[i, i] += -1j * omega[n, m] - gamma[n, m]
        if n == m:
            for k in range(dim):
                if k != n:
                    At[i, idx[(k, k)]] += system.rates[k, n]
        for k in range(dim):
            Nt[i, idx[(k, m)]] += mu[n, k]
            Nt[i, idx[(n, k)]] -= mu[k, m]

    xe = _select_equilibrium(At, dim, x_equilibrium)
    return BilinearGenerators(a_tilde=At, n_tilde=Nt, x_equilibrium=xe)


def _select_equilibrium(At: np.ndarray, dim: int,
                        candidate: np.ndarray | None) -> np.ndarray:
    if candidate is not None:
        cand = np.asarray(candidate, dtype=complex).ravel()
        if cand.size != At.shape[0]:
            raise ValidationError("candidate x_e has wrong length")
        if float(np.abs(At @ cand).max()) <= GENERATOR_TOL:
            return cand
        # fall through to the null-space selection

    basis = null_space(At, rcond=1e-12)
    if basis.shape[1] == 0:
        raise ValidationError("equilibrium not found: At has empty null space at tolerance")
    # target: uniform populations, zero coherences
    target = np.zeros(At.shape[0], dtype=complex)
    target[:dim] = 1.0 / dim
    coeff, *_ = np.linalg.lstsq(basis, target, rcond=None)
    xe = basis @ coeff
    total = trace_row(dim) @ xe
    if abs(total) < 1e-12:
        raise ValidationError("equilibrium not found: null vector has zero trace")
    xe = xe / total
    pops = xe[:dim]
    if np.abs(pops.imag).max() > 1e-10 or pops.real.min() < -1e-10:
        raise ValidationError("equilibrium not found: null vector is not a valid "
                              "probability distribution on the diagonal")
    if float(np.abs(At @ xe).max()) > GENERATOR_TOL:
        raise ValidationError("equilibrium not found: residual above tolerance")
    return xe


def discretize(gen: BilinearGenerators, dt: float,
               observable: Observable | np.ndarray | None = None) -> DiscreteModel:
    """Exact discretization of the free flow over one sampling period.

    phi is read off the augmented exponential exp([[At, I], [0, 0]] dt)
    rather than quadrature, so the free-evolution invariants (unimodular
    closed-system spectrum, exact trace preservation) hold to rounding.
    """
    if dt <= 0:
        raise ValidationError(f"sampling period must be positive, got {dt}")
    n2 = gen.a_tilde.shape[0]
    aug = np.zeros((2 * n2, 2 * n2), dtype=complex)
    aug[:n2, :n2] = gen.a_tilde
    aug[:n2, n2:] = np.eye(n2)
    big = expm(aug * dt)
    a = big[:n2, :n2]
    phi = big[:n2, n2:]
    if observable is None:
        d_row = np.zeros(n2, dtype=complex)
    elif isinstance(observable, Observable):
        d_row = observable.row
    else:
        d_row = np.asarray(observable, dtype=complex).ravel()
        if d_row.size != n2:
            raise ValidationError("measurement row has wrong length")
    return DiscreteModel(a=a, phi=phi, dt=float(dt), measurement_row=d_row)


def control_matrix(model: DiscreteModel, gen: BilinearGenerators,
                   x: np.ndarray) -> np.ndarray:
    """Control column B(x) = phi @ (i Nt (x + x_e)) for the shifted state x."""
    x = np.asarray(x, dtype=complex).ravel()
    if x.size != gen.x_equilibrium.size:
        raise ValidationError("state vector has wrong length")
    return model.phi @ (1j * (gen.n_tilde @ (x + gen.x_equilibrium)))


def measurement_row(obs: Observable) -> np.ndarray:
    """Row D with D @ vec(rho) = Tr(rho o) under the canonical ordering."""
    return obs.row


def free_propagator_oracle(gen: BilinearGenerators, dt: float,
                           substeps: int = 1000) -> np.ndarray:
    """Classical RK4 integration of dx/dt = At x over one sampling period.

    Independent reference for the matrix-exponential route in
    :func:`discretize`; integrates the full matrix ODE at step dt/substeps.
    """
    n2 = gen.a_tilde.shape[0]
    h = dt / substeps
    At = gen.a_tilde
    X = np.eye(n2, dtype=complex)
    for _ in range(substeps):
        k1 = At @ X
        k2 = At @ (X + 0.5 * h * k1)
        k3 = At @ (X + 0.5 * h * k2)
        k4 = At @ (X + h * k3)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return X
