"""Scenario execution: system assembly, trajectory runs, CSV/summary/plot output."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .control import ControllerConfig
from .dynamics import BilinearGenerators, DiscreteModel, build_generators, discretize
from .morse import LIH, MorseParameters, TargetGaussian, gaussian_target, morse_system
from .scenarios import MORSE_PARAMETER_KEYS, ScenarioConfig
from .simulate import NoiseSpec, Trajectory, run_closed_loop
from .spins import level_projector, spin_half_system, spin_one_system
from .states import DensityMatrix, Observable, vectorize

BAND_HALFWIDTH = 0.05


@dataclass(frozen=True)
class BuiltScenario:
    """Everything needed to run one configured scenario."""

    config: ScenarioConfig
    generators: BilinearGenerators
    model: DiscreteModel
    controller: ControllerConfig
    observable: Observable
    x0: np.ndarray
    noise: NoiseSpec


@dataclass(frozen=True)
class RunSummary:
    """Headline numbers for one trajectory."""

    scenario: str
    seed: int | None
    final_output: float
    desired: float
    steps_to_band: int | None
    max_trace_defect: float
    max_hermiticity_defect: float
    max_control: float
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "final_output": self.final_output,
            "desired": self.desired,
            "steps_to_band": self.steps_to_band,
            "max_trace_defect": self.max_trace_defect,
            "max_hermiticity_defect": self.max_hermiticity_defect,
            "max_control": self.max_control,
            "wall_time_s": self.wall_time_s,
        }


def _morse_parameters(config: ScenarioConfig) -> MorseParameters:
    params = config.system.parameters
    if not params:
        return LIH
    merged = {k: getattr(LIH, k) for k in MORSE_PARAMETER_KEYS}
    merged.update(params)
    return MorseParameters(**merged)


def build_scenario(config: ScenarioConfig) -> BuiltScenario:
    """Assemble generators, discrete model, target and controller for a config."""
    if config.system.kind == "spin-half":
        system = spin_half_system()
    elif config.system.kind == "spin-one":
        system = spin_one_system()
    else:
        system = morse_system(_morse_parameters(config))
    dim = system.dim

    if config.target.kind == "level-projector":
        obs = level_projector(dim, config.target.level)
    else:
        obs = gaussian_target(_morse_parameters(config),
                              TargetGaussian(gamma0=config.target.gamma0,
                                             r_prime=config.target.r_prime))

    rho0 = DensityMatrix.pure(dim, config.initial.level)
    x0 = vectorize(rho0).values

    if config.equilibrium is not None:
        xe_candidate = np.asarray(config.equilibrium, dtype=complex)
    else:
        xe_candidate = x0
    gen = build_generators(system, x_equilibrium=xe_candidate)
    model = discretize(gen, config.discretization.dt, observable=obs)

    controller = ControllerConfig(gr=config.controller.gr, g=config.controller.g,
                                  omega=config.controller.omega,
                                  ur=config.controller.ur,
                                  od=config.target.desired,
                                  horizon=config.discretization.horizon)
    noise = NoiseSpec(process_std=config.noise.process_std,
                      measure_std=config.noise.measure_std,
                      process_enabled=config.noise.process_enabled,
                      measure_enabled=config.noise.measure_enabled,
                      seed=config.seed)
    return BuiltScenario(config=config, generators=gen, model=model,
                         controller=controller, observable=obs, x0=x0,
                         noise=noise)


def steps_to_band(outputs: np.ndarray, desired: float,
                  halfwidth: float = BAND_HALFWIDTH) -> int | None:
    """First 1-based step from which |o_t - o_d| stays within the band."""
    inside = np.abs(outputs - desired) <= halfwidth
    if not inside[-1]:
        return None
    # last index where the trajectory was outside the band
    outside = np.nonzero(~inside)[0]
    return int(outside[-1] + 2) if outside.size else 1


def summarize(config: ScenarioConfig, traj: Trajectory,
              wall_time_s: float) -> RunSummary:
    return RunSummary(
        scenario=config.name,
        seed=traj.seed,
        final_output=float(traj.outputs[-1]),
        desired=config.target.desired,
        steps_to_band=steps_to_band(traj.outputs, config.target.desired),
        max_trace_defect=float(traj.trace_defects.max()),
        max_hermiticity_defect=float(traj.hermiticity_defects.max()),
        max_control=float(np.abs(traj.controls).max()),
        wall_time_s=wall_time_s)


def run(config: ScenarioConfig, seed: int | None = None) -> tuple[Trajectory, RunSummary]:
    """Build and execute one scenario; the seed argument overrides the config's."""
    start = time.perf_counter()
    built = build_scenario(config)
    use_seed = config.seed if seed is None else seed
    traj = run_closed_loop(
        built.generators, built.model, built.controller, built.x0,
        noise=built.noise, seed=use_seed,
        riccati_mode=config.riccati.mode, riccati_init=config.riccati.init,
        sweeps=config.riccati.sweeps, sample_controls=config.control_sampling,
        renormalize_trace=config.renormalize_trace)
    return traj, summarize(config, traj, time.perf_counter() - start)


def _run_one_seed(args) -> tuple[Trajectory, RunSummary]:
    config, seed = args
    return run(config, seed=seed)


def run_many(config: ScenarioConfig, seeds: list[int],
             workers: int = 1) -> list[tuple[Trajectory, RunSummary]]:
    """Independent trajectories for several seeds, merged in seed order."""
    jobs = [(config, s) for s in seeds]
    if workers <= 1 or len(seeds) <= 1:
        return [_run_one_seed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one_seed, jobs))


def export_csv(traj: Trajectory, path) -> Path:
    """Write the trajectory as CSV with round-trip decimal formatting.

    Columns: step, time, o_t, u_t, R_t, trace_defect, herm_defect, then one
    re/im pair per state slot (7 + 2 l^2 columns).
    """
    path = Path(path)
    n2 = traj.states.shape[1]
    header = ["step", "time", "o_t", "u_t", "R_t", "trace_defect", "herm_defect"]
    for i in range(n2):
        header += [f"x{i}_re", f"x{i}_im"]
    lines = [",".join(header)]
    for t in range(traj.horizon):
        row = [str(t + 1), repr(float(traj.times[t])), repr(float(traj.outputs[t])),
               repr(float(traj.controls[t])), repr(float(traj.control_variances[t])),
               repr(float(traj.trace_defects[t])),
               repr(float(traj.hermiticity_defects[t]))]
        for i in range(n2):
            row += [repr(float(traj.states[t, i].real)),
                    repr(float(traj.states[t, i].imag))]
        lines.append(",".join(row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Re-import an exported CSV as named float columns (bitwise round trip)."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    names = text[0].split(",")
    cols = {n: [] for n in names}
    for line in text[1:]:
        for name, val in zip(names, line.split(",")):
            cols[name].append(float(val))
    return {n: np.asarray(v) for n, v in cols.items()}


def export_summary(summary: RunSummary, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def emit_plots(traj: Trajectory, prefix, desired: float = 1.0) -> list[Path]:
    """Write output-vs-time (with the desired-value reference line) and
    control-vs-time as SVG vector files; returns the two paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    steps = np.arange(1, traj.horizon + 1)

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(steps, traj.outputs, color="tab:blue", label="measured output")
    ref = ax.axhline(desired, color="tab:red", label="desired value")
    ref.set_gid("od-reference")
    ax.set_xlabel("time step")
    ax.set_ylabel("output")
    ax.legend(loc="lower right")
    out_path = prefix.with_name(prefix.name + "_output.svg")
    fig.savefig(out_path, format="svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(steps, traj.controls, color="tab:green")
    ax.set_xlabel("time step")
    ax.set_ylabel("control")
    ctl_path = prefix.with_name(prefix.name + "_control.svg")
    fig.savefig(ctl_path, format="svg")
    plt.close(fig)
    return [out_path, ctl_path]
