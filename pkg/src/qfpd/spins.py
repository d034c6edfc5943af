"""Benchmark spin systems: spin-1/2 and spin-1 coupled to a scalar field.

Both are closed systems (no dissipation) with Hamiltonian H = H0 + H1 u(t);
since the interaction enters the master equation as H_u = -mu u, the dipole
operator handed to the generator builder is mu = -H1.  Level energies and
couplings are in the dimensionless units of the benchmarks (hbar = 1).
"""

from __future__ import annotations

import numpy as np

from .dynamics import BilinearGenerators, PhysicalSystem, build_generators
from .states import Observable

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)


def spin_half_system() -> PhysicalSystem:
    """Two-level system with H0 = sigma3/2 and H1 = (sigma1 + sigma2)/2.

    Basis order (|down>, |up>); the control objective of the bundled
    scenario is the population of the second basis state.
    """
    h1 = 0.5 * (SIGMA_1 + SIGMA_2)
    return PhysicalSystem(energies=np.array([0.5, -0.5]), dipole=-h1, hbar=1.0)


def spin_one_system() -> PhysicalSystem:
    """Three-level system with H0 = diag(3/2, 1, 0) and symmetric 0-2/1-2 coupling.

    Basis order (|-1>, |0>, |+1>).
    """
    h1 = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=complex)
    return PhysicalSystem(energies=np.array([1.5, 1.0, 0.0]), dipole=-h1, hbar=1.0)


def spin_half_generators(x_equilibrium: np.ndarray | None = None) -> BilinearGenerators:
    return build_generators(spin_half_system(), x_equilibrium=x_equilibrium)


def spin_one_generators(x_equilibrium: np.ndarray | None = None) -> BilinearGenerators:
    return build_generators(spin_one_system(), x_equilibrium=x_equilibrium)


def level_projector(dim: int, level: int) -> Observable:
    """Projector |level><level| as an observable (population measurement)."""
    m = np.zeros((dim, dim), dtype=complex)
    m[level, level] = 1.0
    return Observable(m)
