"""Shared fixtures: benchmark systems, discrete models, cached scenario runs."""

from dataclasses import dataclass

import numpy as np
import pytest

from qfpd import (ControllerConfig, DensityMatrix, build_generators, discretize,
                  get_scenario, run, vectorize)
from qfpd.morse import LIH, LIH_TARGET, gaussian_target, morse_system
from qfpd.oracles import FIXTURE_RHO, random_density_matrix
from qfpd.spins import level_projector, spin_half_system, spin_one_system


@dataclass(frozen=True)
class Bundle:
    system: object
    generators: object
    model: object
    config: ControllerConfig
    observable: object

    @property
    def fixture_state(self):
        rho = FIXTURE_RHO[self.generators.dim]
        return vectorize(DensityMatrix(rho)).values - self.generators.x_equilibrium


def _bundle(system, dim, obs, dt, gr, omega, horizon=200):
    x0 = vectorize(DensityMatrix.pure(dim, 0)).values
    gen = build_generators(system, x_equilibrium=x0)
    model = discretize(gen, dt, observable=obs)
    cfg = ControllerConfig(gr=gr, omega=omega, od=1.0, horizon=horizon)
    return Bundle(system=system, generators=gen, model=model, config=cfg,
                  observable=obs)


@pytest.fixture(scope="session")
def spin_half_bundle():
    return _bundle(spin_half_system(), 2, level_projector(2, 1), 0.0505, 1e-5, 1.0)


@pytest.fixture(scope="session")
def spin_one_a_bundle():
    return _bundle(spin_one_system(), 3, level_projector(3, 1), 0.0067, 1e-9, 1.0,
                   horizon=600)


@pytest.fixture(scope="session")
def spin_one_b_bundle():
    return _bundle(spin_one_system(), 3, level_projector(3, 2), 0.0404, 1e-9, 0.11,
                   horizon=300)


@pytest.fixture(scope="session")
def morse_bundle():
    return _bundle(morse_system(LIH), 3, gaussian_target(LIH, LIH_TARGET),
                   0.0167, 1e-8, 0.28950, horizon=600)


@pytest.fixture(scope="session")
def builtin_runs():
    """One cached end-to-end run per builtin scenario, with wall times."""
    out = {}
    for name in ("spin-half", "spin-one-a", "spin-one-b", "morse-lih"):
        cfg = get_scenario(name)
        traj, summary = run(cfg)
        out[name] = (cfg, traj, summary)
    return out


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


@pytest.fixture()
def random_state_factory():
    def make(dim, seed=0):
        return random_density_matrix(dim, np.random.default_rng(seed))
    return make
