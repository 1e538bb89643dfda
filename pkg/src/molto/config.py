"""Flat key = value configuration files for the benchmark problems.

Every key a problem kind understands has a typed schema entry with a default
and an optional range check. Unknown keys are rejected with their line
number; every default that fills a missing key is reported as a warning so
nothing is overridden silently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from . import problems
from .asd import ASDConfig
from .elasticity import MaterialParams
from .errors import ConfigError
from .optimizer import RunConfig

KINDS = ("girder", "gripper", "lbracket", "clamped_tri", "surrogate")


def _positive(v):
    return v > 0


def _fraction(v):
    return 0.0 < v < 1.0


def _nonneg(v):
    return v >= 0


# key -> (type tag, default, validator or None)
_RUN_KEYS = {
    "max_iterations": ("int", 800, _positive),
    "window": ("int", 5, lambda v: v >= 2),
    "tol_objective": ("float", 1e-4, _positive),
    "tol_constraint": ("float", 1e-3, _positive),
    "wave_speed": ("float", 0.2, _positive),
    "wave_damping": ("float", 0.1, _nonneg),
    "interface_width": ("float", 0.3, _positive),
    "step_size": ("float", 1.0, _positive),
    "weight_inertia": ("float", 0.5, _positive),
    "weight_damping": ("float", 6.0, _positive),
    "weight_stiffness": ("float", 10.0, _positive),
    "weight_clamp": ("float", 1e-3, _fraction),
    "weight_ratio": ("float", 1.0, _nonneg),
    "penalty": ("float", 0.05, _positive),
    "multiplier_init": ("float", 0.0, _nonneg),
}

_MATERIAL_KEYS = {
    "young": ("float", 1.0, _positive),
    "poisson": ("float", 0.3, lambda v: 0.0 <= v < 0.5),
    "ersatz_exponent": ("float", 3.0, lambda v: v > 1.0),
    "ersatz_floor": ("float", 1e-3, _fraction),
}

_ASD_KEYS = {
    "edge_tolerance": ("float", 0.04, _positive),
    "max_levels": ("int", 3, _nonneg),
    "dedup_tolerance": ("float", 1e-3, _nonneg),
    "jobs": ("int", 1, _positive),
    "out_dir": ("str", "molto_out", None),
    "weights_init": ("weights", None, None),
}

_FEM_COMMON = {
    **_RUN_KEYS, **_MATERIAL_KEYS, **_ASD_KEYS,
    "traction": ("float", 1.0, _positive),
}

_SCHEMAS = {
    "girder": {
        **_FEM_COMMON,
        "length": ("float", 1.0, _positive),
        "nx": ("int", 60, _positive),
        "ny": ("int", 30, _positive),
        "volume_fraction": ("float", 0.45, _fraction),
    },
    "clamped_tri": {
        **_FEM_COMMON,
        "length": ("float", 1.0, _positive),
        "nx": ("int", 60, _positive),
        "ny": ("int", 30, _positive),
        "volume_fraction": ("float", 0.45, _fraction),
    },
    "gripper": {
        **_FEM_COMMON,
        "nx": ("int", 40, _positive),
        "ny": ("int", 20, _positive),
        "volume_fraction": ("float", 0.30, _fraction),
        "spring_in": ("float", 1e5, _nonneg),
        "spring_out": ("float", 1e3, _nonneg),
        "dir_in": ("vector", (1.0, 0.0), None),
        "dir_out": ("vector", (0.0, -1.0), None),
    },
    "lbracket": {
        **_FEM_COMMON,
        "nx": ("int", 40, _positive),
        "outer": ("float", 1.0, _positive),
        "cut": ("float", 0.6, _positive),
        "stress_exponent": ("float", 5.0, lambda v: v >= 1.0),
        "yield_stress": ("float", 42.0, _positive),
        "stress_limit": ("float", 0.05, _positive),
        "filter_eta": ("float", 1e-4, _nonneg),
        "filter_gamma": ("float", 2.0, _positive),
    },
    "surrogate": {
        **_ASD_KEYS,
    },
}


@dataclass
class ProblemConfig:
    kind: str
    values: dict = field(default_factory=dict)
    applied_defaults: list = field(default_factory=list, compare=False)

    def __getitem__(self, key):
        return self.values[key]

    def run_config(self) -> RunConfig:
        v = self.values
        if self.kind == "surrogate":
            return RunConfig()
        return RunConfig(
            max_iterations=v["max_iterations"], window=v["window"],
            tol_objective=v["tol_objective"], tol_constraint=v["tol_constraint"],
            wave_speed=v["wave_speed"], wave_damping=v["wave_damping"],
            interface_width=v["interface_width"], step_size=v["step_size"],
            weight_inertia=v["weight_inertia"], weight_damping=v["weight_damping"],
            weight_stiffness=v["weight_stiffness"], weight_clamp=v["weight_clamp"],
            weight_ratio=v["weight_ratio"], penalty=v["penalty"],
            multiplier_init=v["multiplier_init"],
            use_filter=self.kind == "lbracket",
            filter_eta=v.get("filter_eta", 1e-4),
            filter_gamma=v.get("filter_gamma", 2.0))

    def asd_config(self) -> ASDConfig:
        v = self.values
        return ASDConfig(edge_tolerance=v["edge_tolerance"],
                         max_levels=v["max_levels"],
                         dedup_tolerance=v["dedup_tolerance"],
                         jobs=v["jobs"], run=self.run_config())

    def initial_weights(self):
        return [tuple(w) for w in self.values["weights_init"]]

    def material(self) -> MaterialParams:
        v = self.values
        return MaterialParams(young=v["young"], poisson=v["poisson"],
                              exponent=v["ersatz_exponent"],
                              floor=v["ersatz_floor"])

    def build_problem(self):
        v = self.values
        m = len(self.initial_weights()[0])
        if self.kind == "surrogate":
            return problems.SurrogateProblem(m)
        if self.kind == "girder":
            return problems.make_girder(nx=v["nx"], ny=v["ny"],
                                        traction=v["traction"],
                                        length=v["length"], mat=self.material())
        if self.kind == "clamped_tri":
            return problems.make_clamped_tri(nx=v["nx"], ny=v["ny"],
                                             traction=v["traction"],
                                             length=v["length"],
                                             mat=self.material())
        if self.kind == "gripper":
            return problems.make_gripper(
                nx=v["nx"], ny=v["ny"], traction_mag=v["traction"],
                spring_in=v["spring_in"], spring_out=v["spring_out"],
                dir_in=v["dir_in"], dir_out=v["dir_out"],
                volume_fraction=v["volume_fraction"], mat=self.material())
        return problems.make_lbracket(
            nx=v["nx"], outer=v["outer"], cut=v["cut"],
            traction_mag=v["traction"], stress_exponent=v["stress_exponent"],
            yield_stress=v["yield_stress"], stress_limit=v["stress_limit"],
            mat=self.material())


def _parse_value(kind_tag, raw, key, lineno):
    try:
        if kind_tag == "int":
            return int(raw)
        if kind_tag == "float":
            return float(raw)
        if kind_tag == "str":
            return raw
        if kind_tag == "vector":
            parts = tuple(float(p) for p in raw.split())
            if len(parts) != 2:
                raise ValueError("expected two components")
            return parts
        if kind_tag == "weights":
            groups = [g.strip() for g in raw.split(";") if g.strip()]
            vectors = []
            for g in groups:
                vec = tuple(float(p) for p in g.split())
                if len(vec) < 1:
                    raise ValueError("empty weight vector")
                vectors.append(vec)
            if not vectors:
                raise ValueError("no weight vectors given")
            return vectors
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: cannot parse '{key}': {exc}") from exc
    raise ConfigError(f"unknown schema type {kind_tag}")


def _validate(config: ProblemConfig):
    v = config.values
    weights = v["weights_init"]
    m = len(weights[0])
    if any(len(w) != m for w in weights):
        raise ConfigError("weights_init vectors have inconsistent dimensions")
    for w in weights:
        if abs(sum(w) - 1.0) > 1e-9 or any(c <= 0.0 or c >= 1.0 for c in w):
            raise ConfigError(f"weights_init vector {w} is not in the open simplex")
    expected_m = {"girder": 2, "gripper": 2, "lbracket": 2, "clamped_tri": 3}
    if config.kind in expected_m and m != expected_m[config.kind]:
        raise ConfigError(f"{config.kind} requires {expected_m[config.kind]} "
                          f"objectives, weights_init has {m}")
    if config.kind == "lbracket" and not v["cut"] < v["outer"]:
        raise ConfigError("cut must be smaller than outer")


def parse_config(text: str, source: str = "<string>") -> ProblemConfig:
    entries = {}
    lines = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        entries[key] = raw
        lines[key] = lineno

    kind = entries.pop("problem", None)
    if kind is None:
        raise ConfigError(f"{source}: missing required key 'problem'")
    if kind not in KINDS:
        raise ConfigError(f"{source}: line {lines['problem']}: unknown problem "
                          f"kind '{kind}' (choose from {', '.join(KINDS)})")
    schema = _SCHEMAS[kind]

    values, applied_defaults = {}, []
    for key, raw in entries.items():
        if key not in schema:
            raise ConfigError(f"{source}: line {lines[key]}: unknown key "
                              f"'{key}' for problem '{kind}'")
        tag, _, validator = schema[key]
        value = _parse_value(tag, raw, key, lines[key])
        if validator is not None and not validator(value):
            raise ConfigError(f"{source}: line {lines[key]}: value {raw!r} "
                              f"out of range for '{key}'")
        values[key] = value
    for key, (tag, default, _) in schema.items():
        if key not in values:
            if default is None:
                raise ConfigError(f"{source}: missing required key '{key}'")
            values[key] = default
            applied_defaults.append(key)
            warnings.warn(f"{source}: using default {key} = {default}")

    config = ProblemConfig(kind=kind, values=values,
                           applied_defaults=applied_defaults)
    _validate(config)
    return config


def load_config(path) -> ProblemConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def serialize_config(config: ProblemConfig) -> str:
    out = [f"problem = {config.kind}"]
    for key in _SCHEMAS[config.kind]:
        value = config.values[key]
        if key == "weights_init":
            rendered = " ; ".join(" ".join(repr(c) for c in w) for w in value)
        elif isinstance(value, tuple):
            rendered = " ".join(repr(c) for c in value)
        else:
            rendered = repr(value) if isinstance(value, float) else str(value)
        out.append(f"{key} = {rendered}")
    return "\n".join(out) + "\n"
