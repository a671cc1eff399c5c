"""Experiment configuration: a flat ``section.key = value`` text format.

The format is deliberately minimal: one assignment per line, ``#`` starts
a comment, no nesting. parse_config validates every line and collects
*all* problems before raising, so a preset with three typos reports three
messages, each with its line number. serialize_config writes the
canonical form back out (sorted sections, explicit defaults), which makes
run manifests diffable.
"""

from dataclasses import dataclass, fields
import math

GRAPH_KINDS = ("path_1d", "cycle_1d", "lattice_2d")
MODEL_KINDS = ("gradient", "general")
POTENTIALS = ("zero", "quadratic", "double_well")
INTERACTIONS = ("zero", "cubic_distance")
DRIFTS = ("van_der_pol", "duffing")
INIT_KINDS = ("gaussian", "uniform", "csv")
STOP_KINDS = ("time", "dissipation_below", "rhs_below")
BOUNDARIES = ("neumann", "periodic")


class ConfigError(ValueError):
    """Raised by parse_config; .errors lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class GraphConfig:
    kind: str = ""
    a: float = 0.0
    b: float = 1.0
    n: int = 0
    xlo: float = 0.0
    xhi: float = 1.0
    ylo: float = 0.0
    yhi: float = 1.0
    dx: float = 0.0
    boundary: str = "neumann"


@dataclass(frozen=True)
class ModelConfig:
    kind: str = ""
    potential: str = "zero"
    interaction: str = "zero"
    beta: float = 1.0
    drift: str = ""
    xi: float = 0.0
    omega: float = 1.0
    r: float = 0.0


@dataclass(frozen=True)
class InitConfig:
    kind: str = "uniform"
    center: tuple = ()
    variance: float = 1.0
    path: str = ""


@dataclass(frozen=True)
class TimeConfig:
    dt: float = math.nan          # nan means automatic step selection
    safety: float = 0.5
    t_end: float = 0.0
    stop: str = "time"
    stop_eps: float = 0.0


@dataclass(frozen=True)
class OutputConfig:
    dir: str = ""
    checkpoint_every: int = 100
    density_every: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    graph: GraphConfig
    model: ModelConfig
    init: InitConfig
    time: TimeConfig
    output: OutputConfig
    seed: int = 0


def _parse_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _parse_dt(text):
    if text == "auto":
        return math.nan
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise ValueError("must be 'auto' or a positive number")
    return value


def _parse_int(text):
    return int(text, 10)


def _parse_center(text):
    return tuple(float(part) for part in text.split(","))


def _parse_choice(options):
    def parse(text):
        if text not in options:
            raise ValueError("must be one of " + ", ".join(options))
        return text
    return parse


_KEY_PARSERS = {
    "name": str,
    "seed": _parse_int,
    "graph.kind": _parse_choice(GRAPH_KINDS),
    "graph.a": _parse_float,
    "graph.b": _parse_float,
    "graph.n": _parse_int,
    "graph.xlo": _parse_float,
    "graph.xhi": _parse_float,
    "graph.ylo": _parse_float,
    "graph.yhi": _parse_float,
    "graph.dx": _parse_float,
    "graph.boundary": _parse_choice(BOUNDARIES),
    "model.kind": _parse_choice(MODEL_KINDS),
    "model.potential": _parse_choice(POTENTIALS),
    "model.interaction": _parse_choice(INTERACTIONS),
    "model.beta": _parse_float,
    "model.drift": _parse_choice(DRIFTS),
    "model.xi": _parse_float,
    "model.omega": _parse_float,
    "model.r": _parse_float,
    "init.kind": _parse_choice(INIT_KINDS),
    "init.center": _parse_center,
    "init.variance": _parse_float,
    "init.path": str,
    "time.dt": _parse_dt,
    "time.safety": _parse_float,
    "time.t_end": _parse_float,
    "time.stop": _parse_choice(STOP_KINDS),
    "time.stop_eps": _parse_float,
    "output.dir": str,
    "output.checkpoint_every": _parse_int,
    "output.density_every": _parse_int,
}

# Keys that only make sense for a particular graph/model/init kind; anything
# set outside its kind is reported as an error rather than silently ignored.
_GRAPH_KEY_KINDS = {
    "graph.a": ("path_1d", "cycle_1d"),
    "graph.b": ("path_1d", "cycle_1d"),
    "graph.n": ("path_1d", "cycle_1d"),
    "graph.xlo": ("lattice_2d",),
    "graph.xhi": ("lattice_2d",),
    "graph.ylo": ("lattice_2d",),
    "graph.yhi": ("lattice_2d",),
    "graph.dx": ("lattice_2d",),
    "graph.boundary": ("lattice_2d",),
}
_MODEL_KEY_KINDS = {
    "model.potential": ("gradient",),
    "model.interaction": ("gradient",),
    "model.drift": ("general",),
    "model.xi": ("general",),
    "model.omega": ("general",),
    "model.r": ("general",),
}


def _scan(text, errors):
    """Tokenize into {key: value-string}, reporting malformed lines."""
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEY_PARSERS:
            errors.append(f"line {lineno}: unknown key '{key}'")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key '{key}'")
            continue
        if not value:
            errors.append(f"line {lineno}: empty value for '{key}'")
            continue
        seen[key] = (lineno, value)
    return seen


def parse_config(text):
    """Parse and validate experiment text; raise ConfigError on any problem."""
    errors = []
    seen = _scan(text, errors)

    values = {}
    for key, (lineno, raw) in seen.items():
        try:
            values[key] = _KEY_PARSERS[key](raw)
        except ValueError as exc:
            detail = str(exc) or "invalid value"
            errors.append(f"line {lineno}: {key}: {detail}")

    def lineof(key):
        return seen[key][0]

    def require(key):
        if key not in seen:
            errors.append(f"missing required key '{key}'")
            return False
        return key in values

    # --- graph ---------------------------------------------------------
    gkind = values.get("graph.kind", "")
    if require("graph.kind") and gkind:
        for key, kinds in _GRAPH_KEY_KINDS.items():
            if key in seen and gkind not in kinds:
                errors.append(
                    f"line {lineof(key)}: {key} does not apply to "
                    f"graph.kind = {gkind}"
                )
        if gkind in ("path_1d", "cycle_1d"):
            if require("graph.n") and "graph.n" in values:
                n = values["graph.n"]
                least = 2 if gkind == "path_1d" else 3
                if n < least:
                    errors.append(
                        f"line {lineof('graph.n')}: graph.n must be >= {least}"
                    )
            a = values.get("graph.a", 0.0)
            b = values.get("graph.b", 1.0)
            if not a < b:
                key = "graph.b" if "graph.b" in seen else "graph.a"
                where = f"line {lineof(key)}: " if key in seen else ""
                errors.append(where + "graph interval needs a < b")
        else:
            ok = require("graph.dx")
            if ok and not values.get("graph.dx", 0.0) > 0:
                errors.append(f"line {lineof('graph.dx')}: graph.dx must be positive")
            for lo, hi in (("graph.xlo", "graph.xhi"), ("graph.ylo", "graph.yhi")):
                if values.get(lo, 0.0) >= values.get(hi, 1.0):
                    key = hi if hi in seen else lo
                    where = f"line {lineof(key)}: " if key in seen else ""
                    errors.append(where + f"need {lo} < {hi}")

    # --- model ---------------------------------------------------------
    mkind = values.get("model.kind", "")
    if require("model.kind") and mkind:
        for key, kinds in _MODEL_KEY_KINDS.items():
            if key in seen and mkind not in kinds:
                errors.append(
                    f"line {lineof(key)}: {key} does not apply to "
                    f"model.kind = {mkind}"
                )
        if "model.beta" in values and not values["model.beta"] > 0:
            errors.append(f"line {lineof('model.beta')}: model.beta must be positive")
        if mkind == "general":
            require("model.drift")
            if values.get("model.drift") == "duffing":
                if "model.omega" in values and not values["model.omega"] > 0:
                    errors.append(
                        f"line {lineof('model.omega')}: model.omega must be positive"
                    )

    # --- init ----------------------------------------------------------
    ikind = values.get("init.kind", "uniform")
    if ikind == "gaussian":
        if "init.variance" in values and not values["init.variance"] > 0:
            errors.append(
                f"line {lineof('init.variance')}: init.variance must be positive"
            )
        if "init.center" in values and gkind:
            expected = 2 if gkind == "lattice_2d" else 1
            if len(values["init.center"]) != expected:
                errors.append(
                    f"line {lineof('init.center')}: init.center needs "
                    f"{expected} coordinate(s) for graph.kind = {gkind}"
                )
    elif ikind == "csv":
        require("init.path")
    for key in ("init.center", "init.variance"):
        if key in seen and ikind != "gaussian":
            errors.append(
                f"line {lineof(key)}: {key} only applies to init.kind = gaussian"
            )
    if "init.path" in seen and ikind != "csv":
        errors.append(
            f"line {lineof('init.path')}: init.path only applies to init.kind = csv"
        )

    # --- time ----------------------------------------------------------
    require("name")
    if require("time.t_end") and "time.t_end" in values:
        if not values["time.t_end"] > 0:
            errors.append(f"line {lineof('time.t_end')}: time.t_end must be positive")
    if "time.safety" in values and not 0 < values["time.safety"] <= 1:
        errors.append(f"line {lineof('time.safety')}: time.safety must be in (0, 1]")
    skind = values.get("time.stop", "time")
    if skind != "time":
        if "time.stop_eps" in values and not values["time.stop_eps"] > 0:
            errors.append(
                f"line {lineof('time.stop_eps')}: time.stop_eps must be positive "
                f"for stop = {skind}"
            )
        elif "time.stop_eps" not in seen:
            errors.append(f"missing required key 'time.stop_eps' (stop = {skind})")

    # --- output --------------------------------------------------------
    for key in ("output.checkpoint_every", "output.density_every"):
        if key in values and values[key] < 0:
            errors.append(f"line {lineof(key)}: {key} must be >= 0")
    if "output.checkpoint_every" in values and values["output.checkpoint_every"] == 0:
        errors.append(
            f"line {lineof('output.checkpoint_every')}: "
            "output.checkpoint_every must be >= 1"
        )

    if errors:
        raise ConfigError(errors)

    def section(cls, prefix):
        kwargs = {}
        for f in fields(cls):
            key = f"{prefix}.{f.name}"
            if key in values:
                kwargs[f.name] = values[key]
        return cls(**kwargs)

    name = values["name"]
    output = section(OutputConfig, "output")
    if not output.dir:
        output = OutputConfig(
            dir=name,
            checkpoint_every=output.checkpoint_every,
            density_every=output.density_every,
        )
    return ExperimentConfig(
        name=name,
        graph=section(GraphConfig, "graph"),
        model=section(ModelConfig, "model"),
        init=section(InitConfig, "init"),
        time=section(TimeConfig, "time"),
        output=output,
        seed=values.get("seed", 0),
    )


def _format_value(value):
    if isinstance(value, float):
        return "auto" if math.isnan(value) else f"{value:.17g}"
    if isinstance(value, tuple):
        return ", ".join(f"{part:.17g}" for part in value)
    return str(value)


def serialize_config(cfg):
    """Canonical text for an ExperimentConfig (parses back to an equal one)."""
    lines = [f"name = {cfg.name}", f"seed = {cfg.seed}", ""]
    for prefix in ("graph", "model", "init", "time", "output"):
        sub = getattr(cfg, prefix)
        kind = getattr(sub, "kind", None)
        for f in fields(sub):
            key = f"{prefix}.{f.name}"
            keep = True
            if key in _GRAPH_KEY_KINDS:
                keep = kind in _GRAPH_KEY_KINDS[key]
            elif key in _MODEL_KEY_KINDS:
                keep = kind in _MODEL_KEY_KINDS[key]
            elif prefix == "init":
                if f.name in ("center", "variance"):
                    keep = kind == "gaussian"
                elif f.name == "path":
                    keep = kind == "csv"
            if key == "init.center" and not sub.center:
                keep = False
            if key == "model.drift" and not sub.drift:
                keep = False
            if keep:
                lines.append(f"{key} = {_format_value(getattr(sub, f.name))}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def load_config(path):
    """parse_config on a file's contents."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    return parse_config(text)
