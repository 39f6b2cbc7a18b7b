"""Run configuration: an INI file with ``[run]``, ``[model]``, ``[initial]`` and
``[numerical]`` sections.  Every key is optional; missing keys take the preset
values of the selected scenario.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass

from .flowmodel import ModelParams
from .mesh import GRADIENT_SCHEMES
from .scenarios import CASES, DURATION, GROUP_OFFSET, GROUP_RADIUS, SNAPSHOT_TIMES, ScenarioSpec, preset
from .stepper import NumericalParams


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, line: int | None = None):
        self.key = key
        self.line = line
        where = f"{key} (line {line})" if line else key
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    duration: float
    snapshots: tuple[float, ...]
    out_dir: str | None = None
    render_density: bool = True
    render_trajectories: bool = True
    v_free: float = 1.3
    rho_jam: float = 5.4
    beta_dyn: float = 0.5
    zigzag_a: float = math.pi / 2
    zigzag_b: float = 1.0 / (2.0 * math.pi)
    spiral_center_x: float = 60.0
    spiral_center_y: float = 60.0
    spiral_b: float = 0.2
    group_x: float = GROUP_OFFSET[0]
    group_y: float = GROUP_OFFSET[1]
    group_frame: str = "relative"
    group_radius: float = 20.0
    quadrature_depth: int = 3
    dt: float = 1.0
    remesh_alpha: float = 0.01
    cell_area: float = 56.9
    x_min: float = 0.0
    x_max: float = 120.0
    y_min: float = 0.0
    y_max: float = 120.0
    remesh_margin: float | None = None
    gradient_scheme: str = "line"
    epsilon: float = 1e-9
    epsilon_axis: float = 1e-6

    def model_params(self) -> ModelParams:
        return ModelParams(self.v_free, self.rho_jam, self.beta_dyn, self.zigzag_a, self.zigzag_b,
                           (self.spiral_center_x, self.spiral_center_y), self.spiral_b)

    def numerical_params(self) -> NumericalParams:
        return NumericalParams(self.dt, self.remesh_alpha, self.cell_area, (self.x_min, self.x_max),
                               (self.y_min, self.y_max), self.remesh_margin, self.gradient_scheme,
                               self.epsilon, self.epsilon_axis)

    def scenario_spec(self) -> ScenarioSpec:
        return preset(self.scenario, model=self.model_params(), numerics=self.numerical_params(),
                      group_offset=(self.group_x, self.group_y), group_frame=self.group_frame,
                      group_radius=self.group_radius, quadrature_depth=self.quadrature_depth)


SECTIONS = {
    "run": ("scenario", "duration", "snapshots", "out_dir", "render_density", "render_trajectories"),
    "model": ("v_free", "rho_jam", "beta_dyn", "zigzag_a", "zigzag_b", "spiral_center_x",
              "spiral_center_y", "spiral_b"),
    "initial": ("group_x", "group_y", "group_frame", "group_radius", "quadrature_depth"),
    "numerical": ("dt", "remesh_alpha", "cell_area", "x_min", "x_max", "y_min", "y_max", "remesh_margin",
                  "gradient_scheme", "epsilon", "epsilon_axis"),
}
SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}

_POSITIVE = {"v_free", "rho_jam", "zigzag_a", "group_radius", "dt", "cell_area", "epsilon", "epsilon_axis"}
_NONNEG = {"beta_dyn", "duration", "remesh_margin", "quadrature_depth"}
_CHOICES = {"scenario": CASES, "group_frame": ("relative", "absolute"), "gradient_scheme": GRADIENT_SCHEMES}
_BOOLS = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def scenario_defaults(scenario: str) -> dict:
    return {"scenario": scenario, "duration": DURATION[scenario], "snapshots": SNAPSHOT_TIMES[scenario],
            "group_radius": GROUP_RADIUS[scenario]}


def _key_lines(text: str) -> dict[str, int]:
    lines: dict[str, int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            lines.setdefault(section, no)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section:
            lines.setdefault(f"{section}.{m.group(1).strip().lower()}", no)
    return lines


def _convert(key: str, raw):
    if not isinstance(raw, str):
        return raw
    s = raw.strip()
    if key == "snapshots":
        return tuple(float(p) for p in s.replace(";", ",").split(",") if p.strip())
    if key in ("render_density", "render_trajectories"):
        try:
            return _BOOLS[s.lower()]
        except KeyError:
            raise ValueError(f"expected a boolean, got {s!r}") from None
    if key in ("scenario", "group_frame", "gradient_scheme", "out_dir"):
        return s
    if key == "quadrature_depth":
        return int(s)
    if key == "remesh_margin" and s.lower() == "auto":
        return None
    return float(s)


def _check(key: str, value) -> str | None:
    if key in _CHOICES and value not in _CHOICES[key]:
        return f"must be one of {', '.join(_CHOICES[key])}, got {value!r}"
    if isinstance(value, float) and not math.isfinite(value):
        return f"must be finite, got {value}"
    if key in _POSITIVE and not value > 0:
        return f"must be positive, got {value}"
    if key in _NONNEG and value is not None and not value >= 0:
        return f"must be nonnegative, got {value}"
    if key == "remesh_alpha" and not 0 < value < 1:
        return f"must be in (0, 1), got {value}"
    if key == "snapshots" and any(not math.isfinite(t) for t in value):
        return "must be finite times"
    return None


def _on_grid(t: float, dt: float) -> bool:
    k = round(t / dt)
    return abs(k * dt - t) <= 1e-9 * max(1.0, abs(t))


def build_config(values: dict, lines: dict[str, int] | None = None) -> RunConfig:
    """Validate ``values`` (already typed or raw strings) into a RunConfig."""
    lines = lines or {}

    def err(key, msg):
        path = f"{SECTION_OF.get(key, 'run')}.{key}"
        return ConfigError(path, msg, lines.get(path))

    scenario = values.get("scenario")
    if scenario is None:
        raise err("scenario", "no scenario selected (set [run] scenario or pass --scenario)")
    if scenario not in CASES:
        raise err("scenario", f"must be one of {', '.join(CASES)}, got {scenario!r}")
    merged = scenario_defaults(scenario)
    for key, raw in values.items():
        if key not in SECTION_OF:
            raise err(key, "unknown key")
        try:
            merged[key] = _convert(key, raw)
        except ValueError as exc:
            raise err(key, f"invalid value {raw!r}: {exc}") from None
    for key, value in merged.items():
        msg = _check(key, value)
        if msg:
            raise err(key, msg)
    if merged.get("x_max", 120.0) <= merged.get("x_min", 0.0):
        raise err("x_max", "must exceed x_min")
    if merged.get("y_max", 120.0) <= merged.get("y_min", 0.0):
        raise err("y_max", "must exceed y_min")
    dt = merged.get("dt", 1.0)
    duration = merged["duration"]
    if not _on_grid(duration, dt):
        raise err("duration", f"{duration} is not a multiple of dt={dt}")
    for t in merged["snapshots"]:
        if not 0 <= t <= duration:
            raise err("snapshots", f"time {t} outside [0, {duration}]")
        if not _on_grid(t, dt):
            raise err("snapshots", f"time {t} is not a multiple of dt={dt}")
    merged["snapshots"] = tuple(sorted(set(merged["snapshots"])))
    cfg = RunConfig(**merged)
    try:
        spec = cfg.scenario_spec()
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from None
    (gx, gy), r0 = spec.group_center, spec.group_radius
    if gx - r0 < cfg.x_min or gx + r0 > cfg.x_max or gy - r0 < cfg.y_min or gy + r0 > cfg.y_max:
        raise err("group_x", f"group disc at ({gx:g}, {gy:g}) radius {r0:g} is not inside the domain")
    return cfg


def parse_config(text: str = "", **overrides) -> RunConfig:
    """Parse INI text; keyword overrides (e.g. from the command line) win."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError("config", str(exc).splitlines()[0], line) from None
    lines = _key_lines(text)
    values: dict = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section", lines.get(section))
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                path = f"{section}.{key}"
                raise ConfigError(path, "unknown key", lines.get(path))
            values[key] = raw
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(values, lines)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if value is None:
        return "auto"
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    data = asdict(cfg)
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        for key in keys:
            if key == "out_dir" and data[key] is None:
                continue
            out.append(f"{key} = {_fmt(data[key])}")
        out.append("")
    return "\n".join(out)

