"""Flat ``key = value`` scenario files.

Every tunable of the pipeline has one key.  Angles are written in degrees;
``#`` starts a comment.  Unknown keys, malformed values and parameter
invariants are reported with the offending line.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath

from .explorer import ExplorationSettings
from .geometry import ViewPoint
from .infogain import ENDPOINT_MODES
from .world import WorldMap


class ConfigError(ValueError):
    pass


BUILTIN_PREFIX = "builtin:"

# sections named after the ExplorationSettings attribute holding that parameter group
SECTIONS = ("sensor", "boundariness", "optimizer", "goal", "rrt", "termination")


@dataclass(frozen=True)
class Key:
    name: str
    section: str | None  # one of SECTIONS, or None for ExplorationSettings itself
    attr: str
    kind: str  # float | int | bool | str | deg | floats3


KEYS = [
    Key("sensor.max_range", "sensor", "max_range", "float"),
    Key("sensor.fov_deg", "sensor", "fov", "deg"),
    Key("sensor.beam_aperture_deg", "sensor", "beam_aperture", "deg"),
    Key("sensor.angular_resolution_deg", "sensor", "angular_resolution", "deg"),
    Key("sensor.range_noise_eps", "sensor", "range_noise_eps", "float"),
    Key("sensor.noise_std", "sensor", "noise_std", "float"),
    Key("map.l_min", None, "l_min", "float"),
    Key("map.l_max", None, "l_max", "float"),
    Key("boundariness.weight", "boundariness", "weight", "float"),
    Key("boundariness.sigma", "boundariness", "sigma", "float"),
    Key("boundariness.corner_occlusion", "boundariness", "corner_occlusion", "bool"),
    Key("objective.alpha", None, "alpha", "float"),
    Key("objective.weights", None, "weights", "floats3"),
    Key("objective.endpoint_mode", None, "endpoint_mode", "str"),
    Key("optimizer.enabled", None, "optimize", "bool"),
    Key("optimizer.step_size", "optimizer", "step_size", "float"),
    Key("optimizer.max_iterations", "optimizer", "max_iterations", "int"),
    Key("optimizer.tolerance", "optimizer", "tolerance", "float"),
    Key("optimizer.shrink", "optimizer", "shrink", "float"),
    Key("optimizer.min_step", "optimizer", "min_step", "float"),
    Key("optimizer.collision_check", "optimizer", "collision_check", "bool"),
    Key("goal.lambda_distance", "goal", "lambda_distance", "float"),
    Key("goal.lambda_obstacles", "goal", "lambda_obstacles", "float"),
    Key("goal.box_half_width", "goal", "box_half_width", "float"),
    Key("goal.samples", "goal", "samples", "int"),
    Key("goal.occlusion", "goal", "occlusion", "bool"),
    Key("goal.min_distance", "goal", "min_distance", "float"),
    Key("rrt.max_iterations", "rrt", "max_iterations", "int"),
    Key("rrt.steer_step", "rrt", "steer_step", "float"),
    Key("rrt.goal_bias", "rrt", "goal_bias", "float"),
    Key("rrt.shortcut_attempts", "rrt", "shortcut_attempts", "int"),
    Key("rrt.inflation", "rrt", "inflation", "float"),
    Key("termination.bd_threshold", "termination", "bd_threshold", "float"),
    Key("termination.min_boundary_cells", "termination", "min_boundary_cells", "int"),
    Key("termination.gain_window", "termination", "gain_window", "int"),
    Key("termination.max_episodes", "termination", "max_episodes", "int"),
    Key("explore.vertex_spacing", None, "vertex_spacing", "float"),
    Key("explore.planning_retries", None, "planning_retries", "int"),
]
_BY_NAME = {k.name: k for k in KEYS}
TOP_LEVEL = ("world", "start", "seed", "output")


def _parse_value(kind: str, text: str):
    if kind == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"not a finite number: {text!r}")
        return v
    if kind == "deg":
        return math.radians(_parse_value("float", text))
    if kind == "int":
        return int(text)
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "floats3":
        parts = text.replace(",", " ").split()
        if len(parts) != 3:
            raise ValueError(f"expected three numbers, got {text!r}")
        return tuple(_parse_value("float", p) for p in parts)
    return text


def _format_value(kind: str, v) -> str:
    if kind == "deg":
        return repr(math.degrees(v))
    if kind == "bool":
        return "true" if v else "false"
    if kind == "floats3":
        return " ".join(repr(float(x)) for x in v)
    if kind == "float":
        return repr(float(v))
    return str(v)


def resolve_world(spec: str, base_dir: FsPath | None = None) -> FsPath:
    if spec.startswith(BUILTIN_PREFIX):
        name = spec[len(BUILTIN_PREFIX):]
        ref = resources.files("gradexplore") / "data" / f"{name}.txt"
        return FsPath(str(ref))
    p = FsPath(spec).expanduser()
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    return p


def builtin_worlds() -> list[str]:
    folder = resources.files("gradexplore") / "data"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".txt"))


@dataclass
class ScenarioConfig:
    world: str = "builtin:rooms"
    start: ViewPoint = ViewPoint(1.0, 1.0, 0.0)
    seed: int = 0
    output: str = "out"
    settings: ExplorationSettings = field(default_factory=ExplorationSettings)
    base_dir: FsPath | None = None

    def world_path(self) -> FsPath:
        return resolve_world(self.world, self.base_dir)

    def load_world(self) -> WorldMap:
        return WorldMap.load(self.world_path())

    def get(self, name: str):
        if name in TOP_LEVEL:
            return getattr(self, name)
        key = _BY_NAME[name]
        holder = self.settings if key.section is None else getattr(self.settings, key.section)
        return getattr(holder, key.attr)

    def to_text(self) -> str:
        x, y, th = self.start
        lines = [
            f"world = {self.world}",
            f"start = {x!r} {y!r} {math.degrees(th)!r}",
            f"seed = {self.seed}",
            f"output = {self.output}",
        ]
        section = None
        for key in KEYS:
            head = key.name.split(".")[0]
            if head != section:
                lines.append("")
                section = head
            lines.append(f"{key.name} = {_format_value(key.kind, self.get(key.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<config>", base_dir: FsPath | None = None,
                  overrides: list[str] | None = None) -> "ScenarioConfig":
        entries: dict[str, tuple[str, str]] = {}  # key -> (value text, location)
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{source}:{n}"
            if "=" not in line:
                raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in _BY_NAME and k not in TOP_LEVEL:
                raise ConfigError(f"{where}: unknown key {k!r}")
            if k in entries:
                raise ConfigError(f"{where}: duplicate key {k!r} (first set at {entries[k][1]})")
            entries[k] = (v, where)
        for item in overrides or []:
            where = f"--set {item}"
            if "=" not in item:
                raise ConfigError(f"{where}: expected key=value")
            k, v = (s.strip() for s in item.split("=", 1))
            if k not in _BY_NAME and k not in TOP_LEVEL:
                raise ConfigError(f"{where}: unknown key {k!r}")
            entries[k] = (v, where)
        return cls._build(entries, base_dir)

    @classmethod
    def load(cls, path, overrides: list[str] | None = None) -> "ScenarioConfig":
        path = FsPath(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        return cls.from_text(text, str(path), path.parent, overrides)

    @classmethod
    def _build(cls, entries: dict[str, tuple[str, str]], base_dir) -> "ScenarioConfig":
        cfg = cls(base_dir=base_dir)
        top: dict = {}
        per_section: dict[str | None, dict] = {}
        first_loc: dict[str | None, str] = {}
        for name, (text, where) in entries.items():
            try:
                if name == "start":
                    parts = text.replace(",", " ").split()
                    if len(parts) != 3:
                        raise ValueError("expected 'x y theta_deg'")
                    x, y, th = (float(p) for p in parts)
                    top["start"] = ViewPoint(x, y, math.radians(th))
                elif name == "seed":
                    top["seed"] = int(text)
                elif name in ("world", "output"):
                    if not text:
                        raise ValueError("empty value")
                    top[name] = text
                else:
                    key = _BY_NAME[name]
                    per_section.setdefault(key.section, {})[key.attr] = _parse_value(key.kind, text)
                    first_loc.setdefault(key.section, where)
            except ValueError as exc:
                raise ConfigError(f"{where}: {name}: {exc}") from None

        settings = cfg.settings
        for section, values in per_section.items():
            if section is None:
                continue
            try:
                group = dataclasses.replace(getattr(settings, section), **values)
                settings = dataclasses.replace(settings, **{section: group})
            except ValueError as exc:
                raise ConfigError(f"{first_loc[section]}: {section}: {exc}") from None
        try:
            settings = dataclasses.replace(settings, **per_section.get(None, {}))
            _validate_settings(settings)
        except ValueError as exc:
            raise ConfigError(f"{first_loc.get(None, '<config>')}: {exc}") from None
        cfg.settings = settings
        for name, value in top.items():
            setattr(cfg, name, value)
        if "world" in entries or not cfg.world.startswith(BUILTIN_PREFIX):
            path = cfg.world_path()
            if not path.is_file():
                where = entries["world"][1] if "world" in entries else "<config>"
                raise ConfigError(f"{where}: world map {str(path)!r} does not exist")
        return cfg


def _validate_settings(s: ExplorationSettings) -> None:
    if s.alpha < 0:
        raise ValueError("objective.alpha must be non-negative")
    if any(w <= 0 for w in s.weights):
        raise ValueError("objective.weights must all be positive")
    if s.endpoint_mode not in ENDPOINT_MODES:
        raise ValueError(f"objective.endpoint_mode must be one of {ENDPOINT_MODES}")
    if not s.l_min < 0 < s.l_max:
        raise ValueError("need map.l_min < 0 < map.l_max")
    if s.vertex_spacing < 0 or s.planning_retries < 1:
        raise ValueError("need explore.vertex_spacing >= 0 and explore.planning_retries >= 1")
