"""Scenario configuration: TOML file -> validated ``Scenario``.

Schema (all sections optional, defaults shown in the models below)::

    duration_ms = 1000
    tick_ms = 1

    [sensor]       k, d, deflection_limit, sigma, quantization, seed
    [arm]          model = "default" | "inline", q0, torque_caps,
                   joints = [{axis, origin_xyz, origin_rpy, limits}, ...] (inline),
                   tool_xyz, tool_rpy (inline)
    [scaling]      translation_scale, workspace_min, workspace_max
    [slave]        start
    [tactile]      f_max, f_threshold, hysteresis
    [transport]    base_latency, jitter, drop_rate, seed
    [environment]  kind = "free" | "scripted" | "wall",
                   profile (scripted), stiffness/point/normal/lever (wall)
    [input]        kind = "pose" | "joint", waypoints, grip, pedal
    [output]       trace, summary, messages

Validation is all-or-nothing; every problem is reported with its dotted
field path (``transport.jitter: ...``).
"""

from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..feedback import DEFAULT_TORQUE_CAP_NMM, TactileConfig
from ..kinematics import ArmModel, JointSpec, ScalingPolicy, default_arm
from ..sensor import SensorParams
from .sim import FreeSpace, InputScript, Scenario, ScriptedProfile, SpringWall
from .transport import TransportModel

Vec3 = tuple[float, float, float]


class ConfigError(ValueError):
    """One or more config fields failed validation."""

    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


class ConfigParseError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class SensorSection(_Section):
    k: float = Field(0.196, gt=0)
    d: float = Field(16.0, gt=0)
    deflection_limit: float = Field(5.6, gt=0)
    sigma: float = Field(0.0, ge=0)
    quantization: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0)


class JointSection(_Section):
    axis: Vec3
    origin_xyz: Vec3 = (0.0, 0.0, 0.0)
    origin_rpy: Vec3 = (0.0, 0.0, 0.0)
    limits: tuple[float, float] = (-math.pi, math.pi)
    label: str = ""

    @field_validator("limits")
    @classmethod
    def _ordered(cls, v: tuple[float, float]) -> tuple[float, float]:
        if not v[0] < v[1]:
            raise ValueError("min must be < max")
        return v

    @field_validator("axis")
    @classmethod
    def _nonzero(cls, v: Vec3) -> Vec3:
        if not any(v):
            raise ValueError("axis must be non-zero")
        return v


class ArmSection(_Section):
    model: Literal["default", "inline"] = "default"
    q0: tuple[float, float, float, float, float, float, float] = (0.0,) * 7
    torque_caps: float | tuple[float, float, float, float, float, float, float] = DEFAULT_TORQUE_CAP_NMM
    joints: list[JointSection] | None = None
    tool_xyz: Vec3 = (0.0, 0.0, 0.0)
    tool_rpy: Vec3 = (0.0, 0.0, 0.0)

    @field_validator("torque_caps")
    @classmethod
    def _positive_caps(cls, v):
        caps = (v,) * 7 if isinstance(v, (int, float)) else v
        if any(c <= 0 for c in caps):
            raise ValueError("torque caps must be > 0")
        return v

    @model_validator(mode="after")
    def _joints_for_inline(self) -> "ArmSection":
        if self.model == "inline" and (self.joints is None or len(self.joints) != 7):
            raise ValueError("arm.joints must list exactly 7 joints when arm.model = 'inline'")
        return self


class ScalingSection(_Section):
    translation_scale: float = Field(0.25, gt=0, le=1)
    workspace_min: Vec3 = (-100.0, -100.0, -100.0)
    workspace_max: Vec3 = (100.0, 100.0, 100.0)

    @field_validator("workspace_max")
    @classmethod
    def _box(cls, v: Vec3, info) -> Vec3:
        lo = info.data.get("workspace_min")
        if lo is not None and any(a > b for a, b in zip(lo, v)):
            raise ValueError("workspace_max must be >= workspace_min on every axis")
        return v


class SlaveSection(_Section):
    start: Vec3 = (0.0, 0.0, 0.0)


class TactileSection(_Section):
    f_max: float = Field(10.0, gt=0)
    f_threshold: float = Field(5.0, gt=0)
    hysteresis: float = Field(0.2, ge=0)


class TransportSection(_Section):
    base_latency: float = Field(0.0, ge=0)
    jitter: float = Field(0.0, ge=0)
    drop_rate: float = Field(0.0, ge=0, lt=1)
    seed: int = Field(0, ge=0)

    @field_validator("jitter")
    @classmethod
    def _jitter_bounded(cls, v: float, info) -> float:
        base = info.data.get("base_latency")
        if base is not None and v > base:
            raise ValueError(f"jitter ({v}) must be <= base_latency ({base})")
        return v


class EnvironmentSection(_Section):
    kind: Literal["free", "scripted", "wall"] = "free"
    profile: list[tuple[float, float, float, float, float]] | None = None
    stiffness: float = Field(0.05, ge=0)
    point: Vec3 = (0.0, 0.0, 0.0)
    normal: Vec3 = (0.0, 0.0, 1.0)
    lever: tuple[float, float] = (0.0, 0.0)

    @field_validator("profile")
    @classmethod
    def _profile(cls, v):
        if v is None:
            return v
        if not v:
            raise ValueError("profile needs at least one row")
        if any(b[0] < a[0] for a, b in zip(v, v[1:])):
            raise ValueError("profile times must be non-decreasing")
        if any(row[4] < 0 for row in v):
            raise ValueError("grip force column must be >= 0")
        return v

    @model_validator(mode="after")
    def _profile_for_scripted(self) -> "EnvironmentSection":
        if self.kind == "scripted" and self.profile is None:
            raise ValueError("environment.profile is required when environment.kind = 'scripted'")
        if not any(self.normal):
            raise ValueError("environment.normal must be non-zero")
        return self


class InputSection(_Section):
    kind: Literal["pose", "joint"] = "pose"
    waypoints: list[list[float]] = Field(default_factory=list)
    grip: list[tuple[float, float]] = Field(default_factory=list)
    pedal: list[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _shape(self) -> "InputSection":
        width = 4 if self.kind == "pose" else 8
        for i, row in enumerate(self.waypoints):
            if len(row) != width:
                raise ValueError(f"input.waypoints[{i}] must have {width} values for kind '{self.kind}'")
        for name, rows in (("waypoints", self.waypoints), ("grip", self.grip)):
            if any(b[0] < a[0] for a, b in zip(rows, rows[1:])):
                raise ValueError(f"input.{name} times must be non-decreasing")
        if any(g[1] < 0 for g in self.grip):
            raise ValueError("input.grip forces must be >= 0")
        return self


class OutputSection(_Section):
    trace: str | None = "trace.csv"
    summary: str | None = "summary.json"
    messages: str | None = None


class ScenarioConfig(_Section):
    duration_ms: int = Field(1000, ge=0)
    tick_ms: int = Field(1, gt=0)
    sensor: SensorSection = Field(default_factory=SensorSection)
    arm: ArmSection = Field(default_factory=ArmSection)
    scaling: ScalingSection = Field(default_factory=ScalingSection)
    slave: SlaveSection = Field(default_factory=SlaveSection)
    tactile: TactileSection = Field(default_factory=TactileSection)
    transport: TransportSection = Field(default_factory=TransportSection)
    environment: EnvironmentSection = Field(default_factory=EnvironmentSection)
    input: InputSection = Field(default_factory=InputSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def build_arm(self) -> ArmModel:
        if self.arm.model == "default":
            return default_arm()
        joints = tuple(
            JointSpec(j.axis, j.origin_xyz, j.origin_rpy, j.limits, j.label) for j in self.arm.joints or ()
        )
        return ArmModel(joints, self.arm.tool_xyz, self.arm.tool_rpy, name="inline")

    def to_scenario(self) -> Scenario:
        env_cfg = self.environment
        if env_cfg.kind == "scripted":
            environment = ScriptedProfile(tuple(tuple(r) for r in env_cfg.profile or ()))
        elif env_cfg.kind == "wall":
            environment = SpringWall(env_cfg.stiffness, env_cfg.point, env_cfg.normal, env_cfg.lever)
        else:
            environment = FreeSpace()
        caps = self.arm.torque_caps
        caps = (float(caps),) * 7 if isinstance(caps, (int, float)) else tuple(caps)
        s = self.sensor
        return Scenario(
            sensor=SensorParams(s.k, s.d, s.deflection_limit),
            noise_sigma=s.sigma,
            noise_quantization=s.quantization,
            noise_seed=s.seed,
            arm=self.build_arm(),
            q0=self.arm.q0,
            torque_caps=caps,
            scaling=ScalingPolicy(
                self.scaling.translation_scale, self.scaling.workspace_min, self.scaling.workspace_max
            ),
            slave_start=self.slave.start,
            tactile=TactileConfig(self.tactile.f_max, self.tactile.f_threshold, self.tactile.hysteresis),
            transport=TransportModel(
                self.transport.base_latency, self.transport.jitter, self.transport.drop_rate, self.transport.seed
            ),
            environment=environment,
            inputs=InputScript(
                self.input.kind,
                tuple(tuple(r) for r in self.input.waypoints),
                tuple(tuple(r) for r in self.input.grip),
                tuple(self.input.pedal),
            ),
            duration_ms=self.duration_ms,
            tick_ms=self.tick_ms,
        )


def _format_loc(loc: tuple) -> str:
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        elif parts:
            parts.append(f".{item}")
        else:
            parts.append(str(item))
    return "".join(parts) or "<root>"


def parse_value(text: str) -> Any:
    """TOML literal if it parses as one (numbers, bools, arrays, quoted strings), else the raw string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.path=value`` assignments in place."""
    for item in overrides:
        path, sep, raw = item.partition("=")
        if not sep or not path.strip():
            raise ConfigError([f"override {item!r}: expected path=value"])
        keys = path.strip().split(".")
        node = data
        for key in keys[:-1]:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigError([f"{path}: '{key}' is not a section"])
            node = child
        node[keys[-1]] = parse_value(raw.strip())
    return data


def validate(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        problems = []
        for err in exc.errors():
            msg = err["msg"].removeprefix("Value error, ")
            problems.append(f"{_format_loc(err['loc'])}: {msg}")
        raise ConfigError(problems) from None


def load_config(path: str | Path, overrides: list[str] | None = None) -> ScenarioConfig:
    """Read, override and validate a scenario file.

    Raises FileNotFoundError, ConfigParseError or ConfigError.
    """
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigParseError(f"{path}: {exc}") from None
    apply_overrides(data, overrides or [])
    return validate(data)
