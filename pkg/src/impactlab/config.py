"""Experiment configuration: a plain-text sectioned key=value format.

The parser validates against a per-kind schema and reports every problem
it finds in one ConfigError rather than stopping at the first.  Configs
serialize canonically (sections and keys sorted), so equal configs hash
identically regardless of key order in the source text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import ConfigError

KINDS = (
    "flow",
    "book",
    "stats",
    "response",
    "calibrate",
    "impact-curve",
    "surface",
    "decay",
    "llob",
    "coimpact",
)


@dataclass(frozen=True)
class KeySpec:
    """Declared key: value type, default (None = required), and an optional
    predicate with a message for validation."""

    type: str = "float"
    default: object = None
    check: object = None
    message: str = ""


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _fraction(v):
    return 0 <= v <= 1


EXPERIMENT_SECTION = {
    "kind": KeySpec("str", None, lambda v: v in KINDS, f"must be one of {KINDS}"),
    "seed": KeySpec("int", 0, _non_negative, "must be >= 0"),
    "replicas": KeySpec("int", 1, lambda v: v >= 1, "must be >= 1"),
}

ZI_SECTION = {
    "levels": KeySpec("int", 10, lambda v: v >= 2, "must be >= 2"),
    "tick": KeySpec("float", 1.0, _positive, "must be > 0"),
    "base": KeySpec("float", 100.0),
    "depth": KeySpec("int", 5, _positive, "must be > 0"),
    "limit_rate": KeySpec("float", 1.0, _non_negative, "must be >= 0"),
    "cancel_rate": KeySpec("float", 0.2, _non_negative, "must be >= 0"),
    "market_rate": KeySpec("float", 1.0, _non_negative, "must be >= 0"),
    "horizon": KeySpec("float", 100.0, _positive, "must be > 0"),
}

HAWKES_SECTION = {
    "mu": KeySpec("float", 0.5, _positive, "must be > 0"),
    "g0_self": KeySpec("float", 0.3, _non_negative, "must be >= 0"),
    "g0_cross": KeySpec("float", 0.1, _non_negative, "must be >= 0"),
    "beta": KeySpec("float", 1.0, _positive, "must be > 0"),
    "horizon": KeySpec("float", 1000.0, _positive, "must be > 0"),
}

SPLITTING_SECTION = {
    "agents": KeySpec("int", 25, _positive, "must be > 0"),
    "alpha": KeySpec("float", 1.5, lambda v: 1 < v < 2, "must be in (1, 2)"),
    "rate": KeySpec("float", 1.0, _positive, "must be > 0"),
    "herding": KeySpec("float", 0.0, _fraction, "must be in [0, 1]"),
    "horizon": KeySpec("float", 1000.0, _positive, "must be > 0"),
}

KERNEL_KEYS = {
    "family": KeySpec(
        "str",
        "power-law",
        lambda v: v in ("constant", "exponential", "power-law"),
        "must be constant, exponential or power-law",
    ),
    "g0": KeySpec("float", 1.0, _positive, "must be > 0"),
    "gamma": KeySpec("float", 0.5, _positive, "must be > 0"),
    "beta": KeySpec("float", 1.0, _positive, "must be > 0"),
}

STATS_SECTION = {
    "max_lag": KeySpec("int", 200, _positive, "must be > 0"),
    "fit_lo": KeySpec("int", 5, _positive, "must be > 0"),
    "fit_hi": KeySpec("int", 100, _positive, "must be > 0"),
}

RESPONSE_SECTION = dict(
    KERNEL_KEYS,
    max_lag=KeySpec("int", 50, _positive, "must be > 0"),
    delta=KeySpec("float", 1.0, lambda v: 0 < v <= 1, "must be in (0, 1]"),
)

CALIBRATE_SECTION = dict(
    KERNEL_KEYS,
    n=KeySpec("int", 20000, lambda v: v >= 100, "must be >= 100"),
    max_lag=KeySpec("int", 40, _positive, "must be > 0"),
)

IMPACT_SECTION = dict(
    KERNEL_KEYS,
    delta=KeySpec("float", 0.5, lambda v: 0 < v <= 1, "must be in (0, 1]"),
    phi_min=KeySpec("float", 1e-4, _positive, "must be > 0"),
    phi_max=KeySpec("float", 0.1, _positive, "must be > 0"),
    n_phi=KeySpec("int", 12, lambda v: v >= 2, "must be >= 2"),
    T=KeySpec("float", 0.25, _positive, "must be > 0"),
    sigma=KeySpec("float", 1.0, _positive, "must be > 0"),
    noise=KeySpec("float", 0.0, _non_negative, "must be >= 0"),
    n_each=KeySpec("int", 1, _positive, "must be > 0"),
)

SURFACE_SECTION = dict(
    KERNEL_KEYS,
    delta=KeySpec("float", 0.5, lambda v: 0 < v <= 1, "must be in (0, 1]"),
    T_values=KeySpec("floats", (0.1, 0.2, 0.4, 0.8), _positive, "must be > 0"),
    eta_values=KeySpec("floats", (0.01, 0.02, 0.05, 0.1), _positive, "must be > 0"),
    sigma=KeySpec("float", 1.0, _positive, "must be > 0"),
    noise=KeySpec("float", 0.0, _non_negative, "must be >= 0"),
    n_each=KeySpec("int", 1, _positive, "must be > 0"),
)

DECAY_SECTION = dict(
    KERNEL_KEYS,
    delta=KeySpec("float", 0.5, lambda v: 0 < v <= 1, "must be in (0, 1]"),
    eta=KeySpec("float", 0.1, lambda v: 0 < v <= 1, "must be in (0, 1]"),
    T=KeySpec("float", 0.25, _positive, "must be > 0"),
    post=KeySpec("float", 1.0, _positive, "must be > 0"),
    sigma=KeySpec("float", 1.0, _positive, "must be > 0"),
    n_each=KeySpec("int", 1, _positive, "must be > 0"),
)

LLOB_SECTION = {
    "D": KeySpec("float", 1.0, _positive, "must be > 0"),
    "nu": KeySpec("float", 1e-6, _positive, "must be > 0"),
    "lam": KeySpec("float", 1.0, _positive, "must be > 0"),
    "T": KeySpec("float", 1.0, _positive, "must be > 0"),
    "eta_min": KeySpec("float", 1e-3, _positive, "must be > 0"),
    "eta_max": KeySpec("float", 100.0, _positive, "must be > 0"),
    "n_eta": KeySpec("int", 25, lambda v: v >= 4, "must be >= 4"),
}

COIMPACT_SECTION = {
    "N": KeySpec("int", 10, _positive, "must be > 0"),
    "rho": KeySpec("float", 0.3, _fraction, "must be in [0, 1]"),
    "n_mc": KeySpec("int", 20000, lambda v: v >= 1000, "must be >= 1000"),
    "phi_min": KeySpec("float", 1e-4, _positive, "must be > 0"),
    "phi_max": KeySpec("float", 1.0, _positive, "must be > 0"),
    "n_phi": KeySpec("int", 30, lambda v: v >= 4, "must be >= 4"),
    "Y": KeySpec("float", 1.0, _positive, "must be > 0"),
    "delta": KeySpec("float", 0.5, lambda v: 0 < v <= 1, "must be in (0, 1]"),
    "alpha": KeySpec("float", 1.5, _positive, "must be > 0"),
    "xmin": KeySpec("float", 1e-4, _positive, "must be > 0"),
    "xmax": KeySpec("float", 0.1, _positive, "must be > 0"),
}

GENERATOR_SECTIONS = {
    "zi": ZI_SECTION,
    "hawkes": HAWKES_SECTION,
    "splitting": SPLITTING_SECTION,
}

# Which sections each kind accepts beyond [experiment]: (required, optional)
SCHEMAS = {
    "flow": ((), ("zi", "hawkes", "splitting")),
    "book": (("zi",), ()),
    "stats": (("splitting",), ("stats",)),
    "response": (("splitting", "response"), ()),
    "calibrate": (("calibrate",), ()),
    "impact-curve": (("impact",), ()),
    "surface": (("surface",), ()),
    "decay": (("decay",), ()),
    "llob": (("llob",), ()),
    "coimpact": (("coimpact",), ()),
}

SECTION_SCHEMAS = {
    "experiment": EXPERIMENT_SECTION,
    "zi": ZI_SECTION,
    "hawkes": HAWKES_SECTION,
    "splitting": SPLITTING_SECTION,
    "stats": STATS_SECTION,
    "response": RESPONSE_SECTION,
    "calibrate": CALIBRATE_SECTION,
    "impact": IMPACT_SECTION,
    "surface": SURFACE_SECTION,
    "decay": DECAY_SECTION,
    "llob": LLOB_SECTION,
    "coimpact": COIMPACT_SECTION,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description."""

    kind: str
    seed: int
    replicas: int
    sections: dict = field(default_factory=dict)

    def section(self, name):
        return self.sections[name]

    def generator(self):
        """(name, values) of the generator section for flow experiments."""
        for name in GENERATOR_SECTIONS:
            if name in self.sections:
                return name, self.sections[name]
        raise KeyError("no generator section present")


def _coerce(raw, spec, where, problems):
    try:
        if spec.type == "int":
            value = int(raw)
        elif spec.type == "float":
            value = float(raw)
        elif spec.type == "floats":
            value = tuple(float(p) for p in raw.split(",") if p.strip() != "")
            if not value:
                raise ValueError("empty list")
        else:
            value = raw
    except ValueError:
        problems.append(f"{where}: cannot parse {raw!r} as {spec.type}")
        return None
    if spec.check is not None:
        if spec.type == "floats":
            ok = all(spec.check(v) for v in value)
        else:
            ok = spec.check(value)
        if not ok:
            problems.append(f"{where}: {spec.message or 'invalid value'}")
            return None
    return value


def _parse_raw(text, problems):
    """Raw section/key extraction with duplicate detection."""
    sections = {}
    current = None
    seen_lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if not name:
                problems.append(f"line {lineno}: empty section name")
                current = None
                continue
            if name in sections:
                problems.append(
                    f"line {lineno}: duplicate section [{name}] "
                    f"(first at line {seen_lines[name]})"
                )
            else:
                sections[name] = {}
                seen_lines[name] = lineno
            current = name
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected key = value, got {stripped!r}")
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if current is None:
            problems.append(f"line {lineno}: key {key!r} outside any section")
            continue
        if key in sections[current]:
            problems.append(
                f"line {lineno}: duplicate key {key!r} in section [{current}] "
                f"(first at line {seen_lines[(current, key)]})"
            )
            continue
        sections[current][key] = raw
        seen_lines[(current, key)] = lineno
    return sections


def parse_config(text):
    """Parse and validate; raises ConfigError listing every problem."""
    problems = []
    raw = _parse_raw(text, problems)
    if "experiment" not in raw:
        problems.append("missing required section [experiment]")
        raise ConfigError(problems)
    exp_raw = raw["experiment"]
    exp = {}
    for key, spec in EXPERIMENT_SECTION.items():
        if key in exp_raw:
            exp[key] = _coerce(exp_raw[key], spec, f"[experiment] {key}", problems)
        elif spec.default is None:
            problems.append(f"[experiment]: missing required key {key!r}")
        else:
            exp[key] = spec.default
    for key in exp_raw:
        if key not in EXPERIMENT_SECTION:
            problems.append(f"[experiment]: unknown key {key!r}")
    kind = exp.get("kind")
    if kind not in SCHEMAS:
        raise ConfigError(problems)
    required, optional = SCHEMAS[kind]
    allowed = set(required) | set(optional)
    if kind == "flow":
        present = [s for s in GENERATOR_SECTIONS if s in raw]
        if len(present) == 0:
            problems.append(
                "flow experiments need one generator section "
                "([zi], [hawkes] or [splitting])"
            )
        elif len(present) > 1:
            problems.append(
                f"flow experiments take exactly one generator section, got {present}"
            )
    sections = {}
    for name in raw:
        if name == "experiment":
            continue
        if name not in allowed:
            problems.append(f"unknown section [{name}] for kind {kind!r}")
            continue
        schema = SECTION_SCHEMAS[name]
        values = {}
        for key, spec in schema.items():
            if key in raw[name]:
                values[key] = _coerce(raw[name][key], spec, f"[{name}] {key}", problems)
            elif spec.default is None:
                problems.append(f"[{name}]: missing required key {key!r}")
            else:
                values[key] = spec.default
        for key in raw[name]:
            if key not in schema:
                problems.append(f"[{name}]: unknown key {key!r}")
        sections[name] = values
    for name in required:
        if name not in sections:
            problems.append(f"missing required section [{name}] for kind {kind!r}")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        kind=kind, seed=exp["seed"], replicas=exp["replicas"], sections=sections
    )


def _format_value(value):
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config):
    """Canonical text form: sections and keys sorted, one key = value per
    line; parses back to an equal config."""
    lines = ["[experiment]"]
    lines.append(f"kind = {config.kind}")
    lines.append(f"replicas = {config.replicas}")
    lines.append(f"seed = {config.seed}")
    for name in sorted(config.sections):
        lines.append("")
        lines.append(f"[{name}]")
        for key in sorted(config.sections[name]):
            lines.append(f"{key} = {_format_value(config.sections[name][key])}")
    return "\n".join(lines) + "\n"


def config_hash(config):
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()


def replica_seed(master_seed, index):
    """Deterministic 64-bit per-replica seed derived from the master."""
    digest = hashlib.sha256(f"{master_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
