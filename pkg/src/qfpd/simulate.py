"""Closed-loop execution: structured noise, state propagation, measurement,
controller-in-the-loop trajectory recording.

One control step follows the implementation procedure of the controller:
re-evaluate the control column B at the current state, advance the
performance-index coefficients, compute the Gaussian control law, apply the
mean control (or a sample from the law), propagate
x_t = A x_{t-1} + B(x_{t-1}) u_{t-1} + zeta_t, and record
o_t = D(x_t + x_e) + sigma_t.  Measurements use the unshifted state so that
o_t is the physical expectation Tr(rho o); the desired value is shifted
accordingly before it enters the index recursions.

Index-update modes:

* ``recursive`` (default): carry (M, P) across time steps and apply the
  backward-step formula a fixed number of times (``sweeps``) per control
  step, starting from a seeded random initialization.  This is the robust
  mode: at exactly diagonal states with a population-projector target the
  frozen-B pair leaves the observed population block uncontrollable and no
  steady index exists, yet the carried recursion still produces the kick
  that bootstraps the transfer.
* ``steady``: solve the fixed point from scratch at every step; raises at
  operating states where the fixed point does not exist.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .control import ControlLaw, ControllerConfig, RiccatiState, control_law, \
    riccati_step, steady_index
from .dynamics import BilinearGenerators, DiscreteModel, control_matrix
from .errors import ConvergenceError, ValidationError
from .states import conjugate_pairs, slot_order, trace_row

VALIDITY_DRIFT_FLAG = 1e-4


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """Magnitudes and switches for process and measurement noise.

    ``process_std`` is a scalar applied to every independent noise
    coordinate, or a length-l^2 per-slot array whose conjugate-pair slots
    must carry equal values.  Sampled process noise keeps pair slots exactly
    conjugate, diagonal slots real, and the diagonal sum exactly zero.
    """

    process_std: float | np.ndarray = 0.0
    measure_std: float = 0.0
    process_enabled: bool = False
    measure_enabled: bool = False
    seed: int | None = None

    def slot_stds(self, dim: int) -> np.ndarray:
        n2 = dim * dim
        if np.isscalar(self.process_std):
            stds = np.full(n2, float(self.process_std))
        else:
            stds = np.asarray(self.process_std, dtype=float).ravel()
            if stds.size != n2:
                raise ValidationError(
                    f"process_std needs {n2} slots, got {stds.size}")
        if stds.min() < 0:
            raise ValidationError("noise standard deviations must be nonnegative")
        pairs = conjugate_pairs(dim)
        if not np.array_equal(stds, stds[list(pairs)]):
            raise ValidationError("conjugate-pair slots must share one std")
        return stds

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def sample_process_noise(spec: NoiseSpec, dim: int,
                         rng: np.random.Generator) -> np.ndarray:
    """One structured draw of the state noise zeta (length l^2).

    Diagonal slots are real with their sum forced to exactly zero; each
    off-diagonal slot and its partner hold exactly conjugate complex values.
    """
    n2 = dim * dim
    stds = spec.slot_stds(dim)
    zeta = np.zeros(n2, dtype=complex)
    if not spec.process_enabled or not stds.any():
        return zeta
    diag = rng.normal(0.0, 1.0, dim) * stds[:dim]
    diag -= diag.mean()
    # pin the residual rounding so the diagonal sum is exactly 0.0
    diag[-1] = -diag[:-1].sum()
    zeta[:dim] = diag
    pairs = conjugate_pairs(dim)
    for s in range(dim, n2):
        sp = pairs[s]
        if s < sp:
            g = rng.normal(0.0, stds[s] / np.sqrt(2.0)) \
                + 1j * rng.normal(0.0, stds[s] / np.sqrt(2.0))
            zeta[s] = g
            zeta[sp] = g.conjugate()
    return zeta


def step(x: np.ndarray, u: float, model: DiscreteModel, gen: BilinearGenerators,
         spec: NoiseSpec | None = None,
         rng: np.random.Generator | None = None) -> np.ndarray:
    """One discrete update of the shifted state, x -> A x + B(x) u (+ zeta)."""
    x = np.asarray(x, dtype=complex).ravel()
    b = control_matrix(model, gen, x)
    out = model.a @ x + b * u
    if spec is not None and spec.process_enabled:
        if rng is None:
            rng = spec.make_rng()
        out = out + sample_process_noise(spec, gen.dim, rng)
    return out


def measure(x: np.ndarray, model: DiscreteModel, gen: BilinearGenerators,
            spec: NoiseSpec | None = None,
            rng: np.random.Generator | None = None) -> float:
    """o = D (x + x_e) + sigma: physical expectation of the target operator."""
    x = np.asarray(x, dtype=complex).ravel()
    val = complex(model.measurement_row @ (x + gen.x_equilibrium))
    out = val.real
    if spec is not None and spec.measure_enabled and spec.measure_std > 0:
        if rng is None:
            rng = spec.make_rng()
        out += rng.normal(0.0, spec.measure_std)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Recorded closed-loop run; arrays cover steps 1..H, plus the t=0 state."""

    dt: float
    initial_state: np.ndarray          # unshifted vectorized state at t=0
    initial_output: float
    times: np.ndarray                  # t * dt for t = 1..H
    states: np.ndarray                 # unshifted vectorized states, (H, l^2)
    outputs: np.ndarray                # o_t
    controls: np.ndarray               # u_{t-1} applied during step t
    control_variances: np.ndarray      # R_t
    trace_defects: np.ndarray
    hermiticity_defects: np.ndarray
    min_eigenvalues: np.ndarray
    validity_flags: np.ndarray         # True where drift exceeded the flag level
    seed: int | None = None

    def __post_init__(self):
        for name in ("initial_state", "times", "states", "outputs", "controls",
                     "control_variances", "trace_defects", "hermiticity_defects",
                     "min_eigenvalues", "validity_flags"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.times.size
        for name in ("states", "outputs", "controls", "control_variances",
                     "trace_defects", "hermiticity_defects", "min_eigenvalues",
                     "validity_flags"):
            if getattr(self, name).shape[0] != n:
                raise ValidationError(f"trajectory field {name} has inconsistent length")

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.states.shape[1])))

    @property
    def horizon(self) -> int:
        return self.times.size


def _state_diagnostics(xt: np.ndarray, dim: int) -> tuple[float, float, float]:
    pairs = list(conjugate_pairs(dim))
    herm = float(np.abs(xt - xt[pairs].conj()).max())
    trace = float(abs(trace_row(dim) @ xt - 1.0))
    rho = np.empty((dim, dim), dtype=complex)
    for i, nm in enumerate(slot_order(dim)):
        rho[nm] = xt[i]
    mineig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return trace, herm, mineig


def run_closed_loop(gen: BilinearGenerators, model: DiscreteModel,
                    cfg: ControllerConfig, x0: np.ndarray,
                    noise: NoiseSpec | None = None,
                    rng: np.random.Generator | None = None,
                    seed: int | None = None,
                    riccati_mode: str = "recursive",
                    riccati_init: str = "random",
                    sweeps: int = 1,
                    sample_controls: bool = False,
                    renormalize_trace: bool = False) -> Trajectory:
    """Execute the full control procedure for ``cfg.horizon`` steps.

    ``x0`` is the unshifted vectorized initial state; ``cfg.od`` is the
    physical desired value (it is shifted internally by D x_e).  All
    randomness (index initialization, control sampling, both noises) flows
    from one generator, seeded by ``seed`` unless ``rng`` is passed.
    """
    if riccati_mode not in ("recursive", "steady"):
        raise ValidationError(f"unknown riccati mode {riccati_mode!r}")
    if riccati_init not in ("random", "zero"):
        raise ValidationError(f"unknown riccati init {riccati_init!r}")
    if sweeps < 1:
        raise ValidationError("sweeps must be at least 1")
    if noise is None:
        noise = NoiseSpec()
    if rng is None:
        rng = np.random.default_rng(seed)

    xe = gen.x_equilibrium
    d = model.measurement_row
    n2 = xe.size
    x0 = np.asarray(x0, dtype=complex).ravel()
    if x0.size != n2:
        raise ValidationError("initial state has wrong length")

    # the index recursions see the shifted target
    offset = complex(d @ xe)
    cfg_eff = replace(cfg, od=cfg.od - offset.real)

    x = x0 - xe
    o0 = measure(x, model, gen, None)

    if riccati_init == "random":
        index = RiccatiState.random(n2, rng)
    else:
        index = RiccatiState.zero(n2, omega=None)

    H = cfg.horizon
    states = np.empty((H, n2), dtype=complex)
    outputs = np.empty(H)
    controls = np.empty(H)
    variances = np.empty(H)
    traces = np.empty(H)
    herms = np.empty(H)
    eigs = np.empty(H)
    flags = np.zeros(H, dtype=bool)

    for t in range(1, H + 1):
        b = control_matrix(model, gen, x)
        if riccati_mode == "recursive":
            for _ in range(sweeps):
                index = riccati_step(index, model, b, cfg_eff)
        else:
            init = RiccatiState.random(n2, rng) if riccati_init == "random" else None
            try:
                index = steady_index(model, b, cfg_eff, init=init)
            except ConvergenceError as err:
                raise ConvergenceError(
                    f"steady index failed at step {t}: {err}",
                    history=err.history, step=t) from err
        law: ControlLaw = control_law(x, index, model, b, cfg_eff)
        u = rng.normal(law.v, np.sqrt(law.r)) if sample_controls else law.v

        x = model.a @ x + b * u
        if noise.process_enabled:
            x = x + sample_process_noise(noise, gen.dim, rng)
        if renormalize_trace:
            xt = x + xe
            total = float((trace_row(gen.dim) @ xt).real)
            x = xt / total - xe

        outputs[t - 1] = measure(x, model, gen, noise, rng)
        xt = x + xe
        states[t - 1] = xt
        controls[t - 1] = u
        variances[t - 1] = law.r
        tr, he, ev = _state_diagnostics(xt, gen.dim)
        traces[t - 1] = tr
        herms[t - 1] = he
        eigs[t - 1] = ev
        flags[t - 1] = max(tr, he) > VALIDITY_DRIFT_FLAG

    return Trajectory(dt=model.dt, initial_state=x0, initial_output=o0,
                      times=model.dt * np.arange(1, H + 1), states=states,
                      outputs=outputs, controls=controls,
                      control_variances=variances, trace_defects=traces,
                      hermiticity_defects=herms, min_eigenvalues=eigs,
                      validity_flags=flags, seed=seed)
