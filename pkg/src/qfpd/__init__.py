"""Fully probabilistic control of finite-level quantum systems.

State dynamics enter as a vectorized bilinear model of the master equation;
the controller is the Gaussian randomized law obtained by minimizing the
divergence between the closed-loop joint distribution and an ideal one, with
the performance index propagated by discrete Riccati-style recursions.
"""

from .control import (ComplexNormalParams, ControlLaw, ControllerConfig,
                      RiccatiState, backward_recursion, control_law,
                      gamma_closed_form, gamma_quadrature_oracle, omega_step,
                      riccati_step, steady_index)
from .dynamics import (BilinearGenerators, DiscreteModel, PhysicalSystem,
                       build_generators, control_matrix, discretize,
                       measurement_row)
from .errors import (ConfigError, ConvergenceError, CurvatureError, NumericsError,
                     QfpdError, StructureError, ValidationError)
from .morse import (LIH, LIH_TARGET, MorseParameters, TargetGaussian, atomic_units,
                    dipole_matrix, gaussian_target, morse_energies, morse_system,
                    morse_wavefunction)
from .runner import RunSummary, build_scenario, emit_plots, export_csv, run, run_many
from .scenarios import (BUILTIN_SCENARIOS, ScenarioConfig, get_scenario,
                        load_scenario)
from .simulate import (NoiseSpec, Trajectory, measure, run_closed_loop,
                       sample_process_noise, step)
from .spins import level_projector, spin_half_system, spin_one_system
from .states import (DensityMatrix, Observable, StateReport, VectorizedState,
                     devectorize, expectation, slot_order, validate, vectorize)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_SCENARIOS", "BilinearGenerators", "ComplexNormalParams",
    "ConfigError", "ControlLaw", "ControllerConfig", "ConvergenceError",
    "CurvatureError", "DensityMatrix", "DiscreteModel", "LIH", "LIH_TARGET",
    "MorseParameters", "NoiseSpec", "NumericsError", "Observable",
    "PhysicalSystem", "QfpdError", "RiccatiState", "RunSummary",
    "ScenarioConfig", "StateReport", "StructureError", "TargetGaussian",
    "Trajectory", "ValidationError", "VectorizedState", "atomic_units",
    "backward_recursion", "build_generators", "build_scenario", "control_law",
    "control_matrix", "devectorize", "dipole_matrix", "discretize",
    "emit_plots", "expectation", "export_csv", "gamma_closed_form",
    "gamma_quadrature_oracle", "gaussian_target", "get_scenario",
    "level_projector", "load_scenario", "measure", "measurement_row",
    "morse_energies", "morse_system", "morse_wavefunction", "omega_step",
    "riccati_step", "run", "run_closed_loop", "run_many",
    "sample_process_noise", "slot_order", "spin_half_system",
    "spin_one_system", "steady_index", "step", "validate", "vectorize",
]
