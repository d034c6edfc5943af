"""Declarative scenario configuration: schema, validation, builtins, YAML I/O.

A scenario is a YAML tree (one canonical format) with these sections:

    name: spin-half
    system:
      kind: spin-half            # spin-half | spin-one | morse
      parameters: {...}          # morse only; defaults to the bundled LiH set
    initial:
      level: 0                   # initial pure basis state
    target:
      kind: level-projector      # level-projector | gaussian
      level: 1                   # level-projector only
      gamma0: 47.259             # gaussian only (1/Angstrom)
      r_prime: 2.4871            # gaussian only (Angstrom)
      desired: 1.0               # o_d
    controller:
      gr: 1.0e-05
      g: null                    # defaults to gr
      omega: 1.0
      ur: 0.0
    discretization:
      dt: 0.0505
      horizon: 200
    riccati:
      mode: recursive            # recursive | steady
      init: random               # random | zero
      sweeps: 1
    noise:
      process_std: 0.0
      measure_std: 0.0
      process_enabled: false
      measure_enabled: false
    control_sampling: false
    renormalize_trace: false
    equilibrium: null            # optional explicit x_e (list of l^2 reals)
    seed: 1

Unknown keys anywhere are rejected with the offending key path.
"""

from __future__ import annotations

import io
from dataclasses import asdict, dataclass, field, replace

import yaml

from .errors import ConfigError

SYSTEM_KINDS = ("spin-half", "spin-one", "morse")
TARGET_KINDS = ("level-projector", "gaussian")
RICCATI_MODES = ("recursive", "steady")
RICCATI_INITS = ("random", "zero")

MORSE_PARAMETER_KEYS = ("d0", "r_eq", "m_r", "alpha", "nu", "mu0", "r_star")


@dataclass(frozen=True)
class SystemSection:
    kind: str
    parameters: dict | None = None


@dataclass(frozen=True)
class InitialSection:
    level: int = 0


@dataclass(frozen=True)
class TargetSection:
    kind: str
    level: int | None = None
    gamma0: float | None = None
    r_prime: float | None = None
    desired: float = 1.0


@dataclass(frozen=True)
class ControllerSection:
    gr: float
    omega: float
    g: float | None = None
    ur: float = 0.0


@dataclass(frozen=True)
class DiscretizationSection:
    dt: float
    horizon: int


@dataclass(frozen=True)
class RiccatiSection:
    mode: str = "recursive"
    init: str = "random"
    sweeps: int = 1


@dataclass(frozen=True)
class NoiseSection:
    process_std: float = 0.0
    measure_std: float = 0.0
    process_enabled: bool = False
    measure_enabled: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    system: SystemSection
    target: TargetSection
    controller: ControllerSection
    discretization: DiscretizationSection
    initial: InitialSection = field(default_factory=InitialSection)
    riccati: RiccatiSection = field(default_factory=RiccatiSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    control_sampling: bool = False
    renormalize_trace: bool = False
    equilibrium: tuple | None = None
    seed: int = 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out["equilibrium"] = list(self.equilibrium) if self.equilibrium else None
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _check_keys(data: dict, allowed: tuple, path: str):
    unknown = set(data) - set(allowed)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{path}.{key}: unknown key")


def _number(data: dict, key: str, path: str, default=None, required=False,
            positive=False, nonnegative=False, integer=False, allow_none=False):
    if key not in data or data[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {val!r}")
    if integer:
        if int(val) != val:
            raise ConfigError(f"{path}.{key}: expected an integer, got {val!r}")
        val = int(val)
    else:
        val = float(val)
    if positive and val <= 0:
        raise ConfigError(f"{path}.{key}: must be positive, got {val}")
    if nonnegative and val < 0:
        raise ConfigError(f"{path}.{key}: must be nonnegative, got {val}")
    return val


def _boolean(data: dict, key: str, path: str, default=False):
    if key not in data or data[key] is None:
        return default
    val = data[key]
    if not isinstance(val, bool):
        raise ConfigError(f"{path}.{key}: expected true/false, got {val!r}")
    return val


def _choice(data: dict, key: str, path: str, choices, default=None, required=False):
    if key not in data or data[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    val = data[key]
    if val not in choices:
        raise ConfigError(f"{path}.{key}: must be one of {list(choices)}, got {val!r}")
    return val


def _system_dim(kind: str, parameters: dict | None) -> int:
    if kind == "spin-half":
        return 2
    if kind == "spin-one":
        return 3
    from .errors import ValidationError
    from .morse import LIH, MorseParameters
    if parameters:
        merged = {**{k: getattr(LIH, k) for k in MORSE_PARAMETER_KEYS}, **parameters}
        try:
            return MorseParameters(**merged).levels
        except ValidationError as err:
            raise ConfigError(f"system.parameters: {err}") from err
    return LIH.levels


def from_dict(data: dict, name_hint: str = "scenario") -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a plain mapping."""
    if not isinstance(data, dict):
        raise ConfigError(f"{name_hint}: expected a mapping at the top level")
    name = data.get("name", name_hint)
    _require(isinstance(name, str) and name, f"{name_hint}.name", "must be a nonempty string")
    top_keys = ("name", "system", "initial", "target", "controller",
                "discretization", "riccati", "noise", "control_sampling",
                "renormalize_trace", "equilibrium", "seed")
    _check_keys(data, top_keys, name)

    sys_data = data.get("system")
    _require(isinstance(sys_data, dict), f"{name}.system", "required section missing")
    _check_keys(sys_data, ("kind", "parameters"), f"{name}.system")
    kind = _choice(sys_data, "kind", f"{name}.system", SYSTEM_KINDS, required=True)
    parameters = sys_data.get("parameters")
    if parameters is not None:
        _require(isinstance(parameters, dict), f"{name}.system.parameters",
                 "expected a mapping")
        _require(kind == "morse", f"{name}.system.parameters",
                 "only the morse system takes parameters")
        _check_keys(parameters, MORSE_PARAMETER_KEYS, f"{name}.system.parameters")
        for key in parameters:
            _number(parameters, key, f"{name}.system.parameters", positive=True)
    dim = _system_dim(kind, parameters)
    system = SystemSection(kind=kind, parameters=parameters)

    init_data = data.get("initial", {}) or {}
    _check_keys(init_data, ("level",), f"{name}.initial")
    level0 = _number(init_data, "level", f"{name}.initial", default=0,
                     integer=True, nonnegative=True)
    _require(level0 < dim, f"{name}.initial.level", f"must be below dimension {dim}")
    initial = InitialSection(level=level0)

    tgt_data = data.get("target")
    _require(isinstance(tgt_data, dict), f"{name}.target", "required section missing")
    _check_keys(tgt_data, ("kind", "level", "gamma0", "r_prime", "desired"),
                f"{name}.target")
    tkind = _choice(tgt_data, "kind", f"{name}.target", TARGET_KINDS, required=True)
    if tkind == "level-projector":
        tlevel = _number(tgt_data, "level", f"{name}.target", required=True,
                         integer=True, nonnegative=True)
        _require(tlevel < dim, f"{name}.target.level", f"must be below dimension {dim}")
        target = TargetSection(kind=tkind, level=tlevel,
                               desired=_number(tgt_data, "desired", f"{name}.target",
                                               default=1.0))
    else:
        _require(kind == "morse", f"{name}.target.kind",
                 "gaussian targets require the morse system")
        target = TargetSection(
            kind=tkind,
            gamma0=_number(tgt_data, "gamma0", f"{name}.target", required=True,
                           positive=True),
            r_prime=_number(tgt_data, "r_prime", f"{name}.target", required=True,
                            positive=True),
            desired=_number(tgt_data, "desired", f"{name}.target", default=1.0))

    ctl_data = data.get("controller")
    _require(isinstance(ctl_data, dict), f"{name}.controller", "required section missing")
    _check_keys(ctl_data, ("gr", "g", "omega", "ur"), f"{name}.controller")
    controller = ControllerSection(
        gr=_number(ctl_data, "gr", f"{name}.controller", required=True, positive=True),
        g=_number(ctl_data, "g", f"{name}.controller", default=None, positive=True),
        omega=_number(ctl_data, "omega", f"{name}.controller", required=True,
                      positive=True),
        ur=_number(ctl_data, "ur", f"{name}.controller", default=0.0))

    disc_data = data.get("discretization")
    _require(isinstance(disc_data, dict), f"{name}.discretization",
             "required section missing")
    _check_keys(disc_data, ("dt", "horizon"), f"{name}.discretization")
    discretization = DiscretizationSection(
        dt=_number(disc_data, "dt", f"{name}.discretization", required=True,
                   positive=True),
        horizon=_number(disc_data, "horizon", f"{name}.discretization", required=True,
                        integer=True, positive=True))

    ric_data = data.get("riccati", {}) or {}
    _check_keys(ric_data, ("mode", "init", "sweeps"), f"{name}.riccati")
    riccati = RiccatiSection(
        mode=_choice(ric_data, "mode", f"{name}.riccati", RICCATI_MODES,
                     default="recursive"),
        init=_choice(ric_data, "init", f"{name}.riccati", RICCATI_INITS,
                     default="random"),
        sweeps=_number(ric_data, "sweeps", f"{name}.riccati", default=1,
                       integer=True, positive=True))

    noise_data = data.get("noise", {}) or {}
    _check_keys(noise_data, ("process_std", "measure_std", "process_enabled",
                             "measure_enabled"), f"{name}.noise")
    noise = NoiseSection(
        process_std=_number(noise_data, "process_std", f"{name}.noise", default=0.0,
                            nonnegative=True),
        measure_std=_number(noise_data, "measure_std", f"{name}.noise", default=0.0,
                            nonnegative=True),
        process_enabled=_boolean(noise_data, "process_enabled", f"{name}.noise"),
        measure_enabled=_boolean(noise_data, "measure_enabled", f"{name}.noise"))

    equil = data.get("equilibrium")
    if equil is not None:
        _require(isinstance(equil, (list, tuple)), f"{name}.equilibrium",
                 "expected a list of numbers")
        _require(len(equil) == dim * dim, f"{name}.equilibrium",
                 f"expected {dim * dim} entries")
        for i, v in enumerate(equil):
            _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                     f"{name}.equilibrium[{i}]", "expected a number")
        equil = tuple(float(v) for v in equil)

    return ScenarioConfig(
        name=name, system=system, initial=initial, target=target,
        controller=controller, discretization=discretization, riccati=riccati,
        noise=noise,
        control_sampling=_boolean(data, "control_sampling", name),
        renormalize_trace=_boolean(data, "renormalize_trace", name),
        equilibrium=equil,
        seed=_number(data, "seed", name, default=1, integer=True))


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario file (builtin names resolve first)."""
    text = open(path, "r", encoding="utf-8").read()
    return loads_scenario(text, name_hint=str(path))


def loads_scenario(text: str, name_hint: str = "scenario") -> ScenarioConfig:
    try:
        data = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        if mark is not None:
            raise ConfigError(
                f"parse error at line {mark.line + 1}, column {mark.column + 1}: "
                f"{getattr(err, 'problem', err)}") from err
        raise ConfigError(f"parse error: {err}") from err
    return from_dict(data, name_hint=name_hint)


def _builtin(name: str, **kw) -> ScenarioConfig:
    return from_dict({"name": name, **kw}, name_hint=name)


BUILTIN_SCENARIOS: dict[str, ScenarioConfig] = {
    "spin-half": _builtin(
        "spin-half",
        system={"kind": "spin-half"},
        initial={"level": 0},
        target={"kind": "level-projector", "level": 1, "desired": 1.0},
        controller={"gr": 1.0e-5, "omega": 1.0},
        discretization={"dt": 0.0505, "horizon": 200},
        seed=1),
    "spin-one-a": _builtin(
        "spin-one-a",
        system={"kind": "spin-one"},
        initial={"level": 0},
        target={"kind": "level-projector", "level": 1, "desired": 1.0},
        controller={"gr": 1.0e-9, "omega": 1.0},
        discretization={"dt": 0.0067, "horizon": 600},
        seed=1),
    "spin-one-b": _builtin(
        "spin-one-b",
        system={"kind": "spin-one"},
        initial={"level": 0},
        target={"kind": "level-projector", "level": 2, "desired": 1.0},
        controller={"gr": 1.0e-9, "omega": 0.11},
        discretization={"dt": 0.0404, "horizon": 300},
        seed=1),
    "morse-lih": _builtin(
        "morse-lih",
        system={"kind": "morse"},
        initial={"level": 0},
        target={"kind": "gaussian", "gamma0": 47.2590, "r_prime": 2.4871,
                "desired": 1.0},
        controller={"gr": 1.0e-8, "omega": 0.28950},
        discretization={"dt": 0.0167, "horizon": 600},
        seed=1),
}


def get_scenario(name_or_path) -> ScenarioConfig:
    """Resolve a builtin name or load a scenario file."""
    key = str(name_or_path)
    if key in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[key]
    return load_scenario(name_or_path)


def apply_overrides(config: ScenarioConfig, seed: int | None = None,
                    horizon: int | None = None,
                    noise_off: bool = False) -> ScenarioConfig:
    """Command-line style overrides on a validated config."""
    if seed is not None:
        config = replace(config, seed=int(seed))
    if horizon is not None:
        if horizon < 1:
            raise ConfigError("horizon override must be positive")
        config = replace(config, discretization=replace(config.discretization,
                                                        horizon=int(horizon)))
    if noise_off:
        config = replace(config, noise=replace(config.noise, process_enabled=False,
                                               measure_enabled=False))
    return config
