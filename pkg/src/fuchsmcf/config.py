"""Plain ``key = value`` run configuration shared by the flow engine and the CLI."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

PROFILES = ("constant", "sine", "bump", "steep", "file")
COMMANDS = ("flow", "probe", "verify", "barrier", "angle-ode", "group")
PLOT_KINDS = ("height-decay", "angle-bound", "probe")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RunConfig:
    command: str = "flow"
    # chart
    L: float = 2 * math.pi
    Y: float = 1.0
    Nx: int = 128
    Ny: int = 64
    # initial data
    profile: str = "constant"
    a0: float = 1.0
    amplitude: float = 0.0
    offset: float = 0.0
    kx: float = 1.0
    ky: float = 1.0
    init_file: str = ""
    # bounds and probe
    eps: float = 0.0
    C: float = 1.0
    # time stepping
    cfl: float = 0.2
    dt: float = 0.0  # 0 selects the CFL step
    t_max: float = 3.0
    theta_floor: float = 1e-3
    stop_on_converge: bool = True
    record_every: int = 1
    # tolerances
    tol_C: float = 1.0  # monitors allow C * h^2 slack
    probe_tol: float = 1e-2
    # output
    output_series: str = ""
    output_summary: str = ""
    output_plot: str = ""
    plot_kind: str = "height-decay"
    seed: int = 0


_RANGES = {
    "L": (0.0, None, False), "Y": (0.0, 5.0, False), "a0": (0.0, 5.0, False),
    "amplitude": (0.0, 5.0, True), "kx": (0.0, None, True), "ky": (0.0, None, True),
    "eps": (0.0, 1.0, True), "C": (0.0, None, False), "cfl": (0.0, 0.5, False),
    "dt": (0.0, None, True), "t_max": (0.0, None, True), "theta_floor": (0.0, 1.0, False),
    "tol_C": (0.0, None, True), "probe_tol": (0.0, None, True),
}


def _in_range(key, value) -> str | None:
    if key in ("Nx", "Ny") and value < 4:
        return f"{key} must be >= 4"
    if key == "record_every" and value < 1:
        return "record_every must be >= 1"
    if key == "offset" and abs(value) > 5.0:
        return "offset must satisfy |offset| <= 5"
    if key == "eps" and value >= 1.0:
        return "eps must lie in [0, 1)"
    if key in _RANGES:
        lo, hi, closed = _RANGES[key]
        if value < lo or (value == lo and not closed):
            return f"{key} must be {'>=' if closed else '>'} {lo:g}"
        if hi is not None and value > hi:
            return f"{key} must be <= {hi:g}"
    if key == "profile" and value not in PROFILES:
        return f"profile must be one of {', '.join(PROFILES)}"
    if key == "command" and value not in COMMANDS:
        return f"command must be one of {', '.join(COMMANDS)}"
    if key == "plot_kind" and value not in PLOT_KINDS:
        return f"plot_kind must be one of {', '.join(PLOT_KINDS)}"
    return None


def _convert(kind, raw: str):
    if kind is bool:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError(f"non-finite number {raw!r}")
        return v
    return raw


_TYPES = {"bool": bool, "int": int, "float": float, "str": str}


def field_types() -> dict:
    return {f.name: _TYPES[f.type] if isinstance(f.type, str) else f.type for f in fields(RunConfig)}


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment); errors cite the line number."""
    types = field_types()
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in types:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            value = _convert(types[key], raw)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {key} = {raw!r}: {exc}", lineno) from None
        problem = _in_range(key, value)
        if problem:
            raise ConfigError(problem, lineno)
        values[key] = value
    cfg = replace(base or RunConfig(), **values)
    if cfg.profile == "file" and not cfg.init_file:
        raise ConfigError("profile = file needs init_file")
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            s = "true" if v else "false"
        elif isinstance(v, float):
            s = repr(v)
        else:
            s = str(v)
        out.append(f"{f.name} = {s}")
    return "\n".join(out) + "\n"
