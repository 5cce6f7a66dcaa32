"""Run configuration: flat dotted-key text files, defaults, validation."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .reports import format_float

EXPERIMENTS = (
    "linear-limit",
    "weak-decay",
    "dispersion",
    "lin-vs-nonlin",
    "rigid-lid-scaling",
    "reconstruct",
    "null-check",
)

# key -> (type tag, default applicable to every experiment unless overridden)
_SCHEMA = {
    "experiment": "str",
    "out": "str",
    "seed": "int",
    "jobs": "int",
    "params.mu": "float",
    "params.mu_list": "floats",
    "params.epsilon": "float",
    "params.eps_list": "floats",
    "params.h_min": "float",
    "params.a0": "float",
    "grid.L": "float",
    "grid.n": "int",
    "grid.n_z": "int",
    "solver.dt": "float",
    "solver.T": "float",
    "solver.dn_mode": "str",
    "solver.monitor_every": "int",
    "solver.tol": "float",
    "solver.energy_order": "int",
    "data.zeta_kind": "str",
    "data.zeta_amplitude": "float",
    "data.zeta_width": "float",
    "data.psi_kind": "str",
    "data.psi_amplitude": "float",
    "data.psi_width": "float",
    "data.phi_width": "float",
    "time.t": "float",
    "time.t_list": "floats",
}

_BASE_DEFAULTS = {
    "out": "results",
    "seed": 0,
    "jobs": 1,
    "params.mu": 0.5,
    "params.mu_list": [],
    "params.epsilon": 0.1,
    "params.eps_list": [],
    "params.h_min": 0.05,
    "params.a0": 0.5,
    "grid.L": 40.0,
    "grid.n": 256,
    "grid.n_z": 32,
    "solver.dt": 1e-3,
    "solver.T": 1.0,
    "solver.dn_mode": "elliptic",
    "solver.monitor_every": 10,
    "solver.tol": 1e-12,
    "solver.energy_order": 3,
    "data.zeta_kind": "gaussian",
    "data.zeta_amplitude": 1.0,
    "data.zeta_width": 1.0,
    "data.psi_kind": "none",
    "data.psi_amplitude": 0.0,
    "data.psi_width": 1.0,
    "data.phi_width": 1.0,
    "time.t": 1.0,
    "time.t_list": [],
}

_EXPERIMENT_DEFAULTS = {
    "linear-limit": {
        "params.mu": 0.25,
        "params.eps_list": [1e-1, 1e-2, 1e-3],
        "grid.L": 200.0,
        "grid.n": 4096,
        "data.zeta_width": 0.7,
        "time.t": 1.0,
    },
    "weak-decay": {
        "params.mu": 1.0,
        "params.eps_list": [0.1, 0.05, 0.02, 0.01],
        "grid.L": 200.0,
        "grid.n": 4096,
        "data.phi_width": 2.0,
        "time.t": 1.0,
    },
    "dispersion": {
        "params.mu_list": [0.25, 1.0],
        "grid.L": 400.0,
        "grid.n": 8192,
        "time.t_list": [1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0, 80.0, 100.0],
    },
    "lin-vs-nonlin": {
        "params.mu": 0.5,
        "params.eps_list": [0.2, 0.1, 0.05, 0.025],
        "grid.L": 120.0,
        "grid.n": 1024,
        "grid.n_z": 32,
        "solver.dt": 5e-3,
        "solver.T": 1.0,
        "solver.monitor_every": 4,
    },
    "rigid-lid-scaling": {
        "params.mu": 0.5,
        "params.eps_list": [0.2, 0.1, 0.05, 0.025],
        "grid.L": 120.0,
        "grid.n": 1024,
        "grid.n_z": 24,
        "solver.dt": 5e-3,
        "solver.T": 1.0,
        "solver.monitor_every": 5,
    },
    "reconstruct": {
        "params.mu": 0.5,
        "params.epsilon": 0.2,
        "grid.L": 40.0,
        "grid.n": 256,
        "grid.n_z": 16,
        "solver.dt": 4e-3,
        "solver.T": 0.2,
        "solver.monitor_every": 4,
        "data.zeta_amplitude": 0.5,
        "data.psi_kind": "gaussian",
        "data.psi_amplitude": 0.25,
        "data.psi_width": 1.5,
    },
    "null-check": {
        "params.mu": 0.25,
        "params.epsilon": 0.1,
        "grid.L": 40.0,
        "grid.n": 256,
        "grid.n_z": 32,
    },
}


def _parse_value(key, raw):
    kind = _SCHEMA[key]
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "floats":
            if raw == "":
                return []
            return [float(part) for part in raw.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    raise ConfigError(f"unknown schema kind {kind!r}")


@dataclass
class RunConfig:
    """Validated experiment configuration with all defaults filled in."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self):
        return self.values["experiment"]

    def to_text(self):
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if isinstance(val, list):
                rendered = ",".join(format_float(v) for v in val)
            elif isinstance(val, float):
                rendered = format_float(val)
            else:
                rendered = str(val)
            lines.append(f"{key} = {rendered}")
        return "\n".join(lines) + "\n"

    def as_manifest(self):
        out = {}
        for key, val in self.values.items():
            out[key] = list(val) if isinstance(val, list) else val
        return out


def _validate(values):
    exp = values.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(
            f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    if not 0.0 < values["params.mu"] <= 1.0:
        raise ConfigError(f"params.mu must be in (0, 1], got {values['params.mu']}")
    for mu in values["params.mu_list"]:
        if not 0.0 < mu <= 1.0:
            raise ConfigError(f"params.mu_list entry {mu} outside (0, 1]")
    eps = values["params.epsilon"]
    if not 0.0 < eps <= 1.0:
        raise ConfigError(f"params.epsilon must be in (0, 1], got {eps}")
    eps_list = values["params.eps_list"]
    for e in eps_list:
        if not 0.0 < e <= 1.0:
            raise ConfigError(f"params.eps_list entry {e} outside (0, 1]")
    if len(eps_list) > 1 and not np.all(np.diff(eps_list) < 0):
        raise ConfigError("params.eps_list must be strictly decreasing")
    sweeps = ("linear-limit", "weak-decay", "lin-vs-nonlin", "rigid-lid-scaling")
    if exp in sweeps and len(eps_list) == 0:
        raise ConfigError(f"{exp} needs a non-empty params.eps_list")
    if exp == "dispersion" and len(values["time.t_list"]) == 0:
        raise ConfigError("dispersion needs a non-empty time.t_list")
    n = values["grid.n"]
    if n < 8 or (n & (n - 1)) != 0:
        raise ConfigError(f"grid.n must be a power of two >= 8, got {n}")
    if values["grid.L"] <= 0:
        raise ConfigError("grid.L must be positive")
    if values["grid.n_z"] < 8:
        raise ConfigError("grid.n_z must be at least 8")
    if values["solver.dt"] <= 0 or values["solver.T"] <= 0:
        raise ConfigError("solver.dt and solver.T must be positive")
    if values["solver.dn_mode"] not in ("elliptic", "expansion1"):
        raise ConfigError("solver.dn_mode must be elliptic or expansion1")
    if values["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    for key in ("data.zeta_kind", "data.psi_kind"):
        if values[key] not in ("gaussian", "none"):
            raise ConfigError(f"{key} must be gaussian or none")
    t_list = values["time.t_list"]
    if len(t_list) > 1 and not np.all(np.diff(t_list) > 0):
        raise ConfigError("time.t_list must be strictly increasing")


def make_config(experiment, overrides=None):
    """RunConfig for an experiment from defaults plus explicit overrides."""
    values = dict(_BASE_DEFAULTS)
    values["experiment"] = experiment
    values.update(_EXPERIMENT_DEFAULTS.get(experiment, {}))
    for key, val in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        values[key] = val
    _validate(values)
    return RunConfig(values=values)


def parse_config_text(text, overrides=None):
    """Parse flat `key = value` lines; unknown keys are a hard error."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        raw[key] = _parse_value(key, value)
    overrides = dict(overrides or {})
    experiment = overrides.pop("experiment", None) or raw.pop("experiment", None)
    raw.pop("experiment", None)
    if experiment is None:
        raise ConfigError("config must name an experiment")
    merged = dict(raw)
    merged.update(overrides)
    return make_config(experiment, merged)


def parse_config_file(path, overrides=None):
    with open(path) as handle:
        return parse_config_text(handle.read(), overrides)
