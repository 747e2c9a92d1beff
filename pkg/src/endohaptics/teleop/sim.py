"""Deterministic tick-driven master/slave teleoperation loop.

Each tick runs three phases in a fixed order:

1. master console: sample encoders (and pedal), turn the master tool
   displacement into a scaled SlaveCommand when the manipulators are
   selected;
2. slave: apply commands delivered by the link, evaluate the environment,
   run the sensor pipeline and report wrench and grip back;
3. master console: consume delivered reports and compute joint feedback
   torques and vibration commands.

Cross-side traffic goes through two simulated ``Channel`` objects; the
console-local frames (MasterState, FeedbackCommand) are emitted for the
message log only. With phases ordered this way a report produced from a
command sent at t reaches the console at t + 2 * ceil(L / tick) * tick, i.e.
no extra processing tick is added on top of the two link hops.
"""

from __future__ import annotations

import enum
import json
import math
from bisect import bisect_right
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence, TextIO, BinaryIO

import numpy as np

from ..feedback import (
    GripForce,
    JointTorques7,
    TactileConfig,
    VibrationCommand,
    ZERO_TORQUES,
    kinesthetic_torques,
    tactile_command,
)
from ..kinematics import (
    IDENTITY_QUAT,
    ArmModel,
    JointState7,
    PoseDelta,
    ScalingPolicy,
    fk_matrix,
    quat_from_matrix,
    quat_multiply,
    scale_motion,
)
from ..sensor import (
    PhotoNoiseModel,
    SensorError,
    SensorParams,
    Wrench3,
    calibration_matrix,
    sense,
)
from .protocol import MessageKind, TeleopMessage, encode
from .transport import Channel, TransportModel

PROCESSING_TICKS = 0

TRACE_COLUMNS = (
    ["t_ms", "mode"]
    + [f"master_q{i}" for i in range(1, 8)]
    + ["slave_x", "slave_y", "slave_z"]
    + ["true_Fz", "true_Mx", "true_My", "sensed_Fz", "sensed_Mx", "sensed_My", "grip_N"]
    + [f"tau{i}" for i in range(1, 8)]
    + ["motor1", "motor2", "dropped_msgs"]
)


class ControlMode(enum.Enum):
    MANIPULATORS = "Manipulators"
    CAMERA_ARM = "CameraArm"

    def toggled(self) -> "ControlMode":
        return ControlMode.CAMERA_ARM if self is ControlMode.MANIPULATORS else ControlMode.MANIPULATORS


class InvariantViolation(RuntimeError):
    def __init__(self, tick: int, invariant: str, detail: str = ""):
        super().__init__(f"tick {tick}: invariant '{invariant}' violated" + (f": {detail}" if detail else ""))
        self.tick = tick
        self.invariant = invariant


@dataclass
class SimClock:
    tick: int = 1
    t: int = 0

    def __post_init__(self) -> None:
        if int(self.tick) != self.tick or self.tick <= 0:
            raise ValueError(f"tick must be a positive integer number of ms, got {self.tick}")

    def step(self) -> None:
        self.t += self.tick


def expected_feedback_latency(base_latency: float, tick: int) -> int:
    """Hop count for jitter-free links: command hop + report hop + processing."""
    hop = math.ceil(base_latency / tick) * tick
    return 2 * hop + PROCESSING_TICKS * tick


def _interp_rows(times: list[float], rows: list[list[float]], t: float) -> list[float]:
    """Piecewise-linear interpolation of ``rows`` at ``t``, held at both ends."""
    if t <= times[0]:
        return rows[0]
    if t >= times[-1]:
        return rows[-1]
    i = bisect_right(times, t) - 1
    t0, t1 = times[i], times[i + 1]
    a = (t - t0) / (t1 - t0)
    return [v0 + a * (v1 - v0) for v0, v1 in zip(rows[i], rows[i + 1])]


# --- environment stubs -------------------------------------------------------

Environment = Callable[[int, Sequence[float], float], tuple[Wrench3, float]]


@dataclass(frozen=True)
class FreeSpace:
    """No contact; grip force follows the grip drive."""

    def __call__(self, t: int, position: Sequence[float], grip_drive: float) -> tuple[Wrench3, float]:
        return Wrench3(), max(grip_drive, 0.0)


@dataclass(frozen=True)
class ScriptedProfile:
    """Piecewise-linear wrench and grip profile; rows (t_ms, Fz, Mx, My, grip_N)."""

    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 5 or len(arr) == 0:
            raise ValueError("profile rows must be (t_ms, Fz, Mx, My, grip_N)")
        if np.any(np.diff(arr[:, 0]) < 0):
            raise ValueError("profile times must be non-decreasing")
        if np.any(arr[:, 4] < 0):
            raise ValueError("profile grip force must be >= 0")
        object.__setattr__(self, "_times", arr[:, 0].tolist())
        object.__setattr__(self, "_values", arr[:, 1:].tolist())

    def __call__(self, t: int, position: Sequence[float], grip_drive: float) -> tuple[Wrench3, float]:
        vals = _interp_rows(self._times, self._values, t)
        return Wrench3(vals[0], vals[1], vals[2]), vals[3]


@dataclass(frozen=True)
class SpringWall:
    """Linear spring behind a plane.

    Penetration is the depth of the slave tool tip behind the plane through
    ``point`` with outward ``normal``. Contact compresses the sensor, so
    Fz = -stiffness * depth; an off-axis contact point ``lever`` (x, y, mm)
    adds Mx = lever_y * Fz and My = -lever_x * Fz.
    """

    stiffness: float
    point: tuple[float, float, float] = (0.0, 0.0, 0.0)
    normal: tuple[float, float, float] = (0.0, 0.0, 1.0)
    lever: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        n = np.asarray(self.normal, dtype=float)
        if self.stiffness < 0 or not np.isfinite(np.linalg.norm(n)) or np.linalg.norm(n) == 0:
            raise ValueError("wall needs stiffness >= 0 and a non-zero normal")
        object.__setattr__(self, "_n", tuple(float(v) for v in n / np.linalg.norm(n)))

    def __call__(self, t: int, position: Sequence[float], grip_drive: float) -> tuple[Wrench3, float]:
        depth = max(0.0, sum((a - x) * n for a, x, n in zip(self.point, position, self._n)))
        fz = -self.stiffness * depth
        return Wrench3(fz, self.lever[1] * fz, -self.lever[0] * fz), max(grip_drive, 0.0)


# --- inputs ------------------------------------------------------------------


@dataclass(frozen=True)
class TickInputs:
    master_q: tuple[float, ...] | None = None
    master_offset: tuple[float, float, float] | None = None
    grip_drive: float = 0.0
    pedal_presses: int = 0


@dataclass(frozen=True)
class InputScript:
    """Scripted operator input.

    ``kind='joint'``: waypoint rows (t_ms, q1..q7).
    ``kind='pose'``: waypoint rows (t_ms, dx, dy, dz), a tool-tip offset in mm
    from the master home pose; the joint posture stays at ``q0``.
    Values are linearly interpolated and held outside the waypoint span.
    Each pedal time fires one press on the first tick at or after it.
    """

    kind: str = "pose"
    waypoints: tuple[tuple[float, ...], ...] = ()
    grip: tuple[tuple[float, float], ...] = ()
    pedal: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        width = {"joint": 8, "pose": 4}.get(self.kind)
        if width is None:
            raise ValueError(f"input kind must be 'joint' or 'pose', got {self.kind!r}")
        wp = np.asarray(self.waypoints, dtype=float).reshape(-1, width) if self.waypoints else np.empty((0, width))
        gr = np.asarray(self.grip, dtype=float).reshape(-1, 2) if self.grip else np.empty((0, 2))
        for name, arr in (("waypoints", wp), ("grip", gr)):
            if np.any(np.diff(arr[:, 0]) < 0):
                raise ValueError(f"{name} times must be non-decreasing")
        object.__setattr__(self, "_wp", (wp[:, 0].tolist(), wp[:, 1:].tolist()))
        object.__setattr__(self, "_gr", (gr[:, 0].tolist(), gr[:, 1:].tolist()))

    @staticmethod
    def _interp(table: tuple[list[float], list[list[float]]], t: float) -> list[float] | None:
        times, rows = table
        return _interp_rows(times, rows, t) if times else None

    def at(self, t: int, prev_t: int | None) -> TickInputs:
        vals = self._interp(self._wp, t)
        grip = self._interp(self._gr, t)
        presses = sum(1 for p in self.pedal if (prev_t is None or p > prev_t) and p <= t)
        return TickInputs(
            master_q=tuple(vals) if (vals is not None and self.kind == "joint") else None,
            master_offset=tuple(vals) if (vals is not None and self.kind == "pose") else None,
            grip_drive=grip[0] if grip is not None else 0.0,
            pedal_presses=presses,
        )


# --- scenario and trace ------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    sensor: SensorParams = field(default_factory=SensorParams)
    noise_sigma: float = 0.0
    noise_quantization: float = 0.0
    noise_seed: int = 0
    arm: ArmModel = None  # type: ignore[assignment]
    q0: tuple[float, ...] = (0.0,) * 7
    torque_caps: tuple[float, ...] = (5000.0,) * 7
    scaling: ScalingPolicy = field(default_factory=ScalingPolicy)
    slave_start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    tactile: TactileConfig = field(default_factory=TactileConfig)
    transport: TransportModel = field(default_factory=TransportModel)
    environment: Environment = field(default_factory=FreeSpace)
    inputs: InputScript = field(default_factory=InputScript)
    duration_ms: int = 1000
    tick_ms: int = 1

    def __post_init__(self) -> None:
        if self.arm is None:
            from ..kinematics import default_arm

            object.__setattr__(self, "arm", default_arm())
        if self.duration_ms < 0:
            raise ValueError("duration_ms must be >= 0")
        SimClock(self.tick_ms)


@dataclass(frozen=True)
class TraceRecord:
    t_ms: int
    mode: ControlMode
    master_q: tuple[float, ...]
    slave_position: tuple[float, float, float]
    true_wrench: Wrench3
    sensed_wrench: Wrench3
    grip: float
    torques: JointTorques7
    vibration: VibrationCommand
    dropped_msgs: int

    def csv_row(self) -> str:
        r = repr
        vals = [str(self.t_ms), self.mode.value]
        vals += [r(float(v)) for v in self.master_q]
        vals += [r(float(v)) for v in self.slave_position]
        vals += [r(float(v)) for v in self.true_wrench]
        vals += [r(float(v)) for v in self.sensed_wrench]
        vals.append(r(float(self.grip)))
        vals += [r(float(v)) for v in self.torques.tau]
        vals.append(r(float(self.vibration.motor1_intensity)))
        vals.append("1" if self.vibration.motor2_on else "0")
        vals.append(str(self.dropped_msgs))
        return ",".join(vals)


@dataclass
class StepResult:
    messages: list[TeleopMessage]
    record: TraceRecord


@dataclass
class SummaryStats:
    ticks: int = 0
    duration_ms: int = 0
    max_wrench_error: tuple[float, float, float] = (0.0, 0.0, 0.0)
    feedback_latency_ms: dict = field(default_factory=dict)
    expected_latency_ms: int = 0
    saturation: dict = field(default_factory=dict)
    messages: dict = field(default_factory=dict)
    master_translation_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    slave_translation_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    translation_scale: float = 1.0
    final_mode: str = ControlMode.MANIPULATORS.value

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format(self) -> str:
        lat = self.feedback_latency_ms
        sat = self.saturation
        msg = self.messages
        ez, ex, ey = self.max_wrench_error
        lines = [
            f"ticks                 : {self.ticks} ({self.duration_ms} ms)",
            f"max |sensed - true|   : Fz {ez:.3e} N, Mx {ex:.3e} N*mm, My {ey:.3e} N*mm",
        ]
        if lat.get("count"):
            lines.append(
                f"feedback latency (ms) : min {lat['min']} / mean {lat['mean']:.3f} / max {lat['max']}"
                f" over {lat['count']} samples (jitter-free expectation {self.expected_latency_ms})"
            )
        else:
            lines.append("feedback latency (ms) : no samples")
        lines.append(
            "saturation counts     : "
            + ", ".join(f"{k} {v}" for k, v in sorted(sat.items()))
        )
        lines.append(
            f"messages              : sent {msg.get('sent', 0)}, delivered {msg.get('delivered', 0)}, "
            f"dropped {msg.get('dropped', 0)}, gaps detected {msg.get('gaps', 0)}, "
            f"in flight at end {msg.get('in_flight', 0)}"
        )
        mx, my, mz = self.master_translation_mm
        sx, sy, sz = self.slave_translation_mm
        lines.append(f"master translation mm : ({mx:.6g}, {my:.6g}, {mz:.6g})")
        lines.append(f"slave translation mm  : ({sx:.6g}, {sy:.6g}, {sz:.6g})")
        return "\n".join(lines)


# --- the simulator -----------------------------------------------------------


class TeleopSim:
    """Single-threaded simulation state; advance with :meth:`step`."""

    def __init__(self, scenario: Scenario):
        self.scenario = sc = scenario
        self.clock = SimClock(sc.tick_ms)
        self.mode = ControlMode.MANIPULATORS
        self.slave_mode = ControlMode.MANIPULATORS
        self._cal = calibration_matrix(sc.sensor)
        self._noise = (
            PhotoNoiseModel(sc.noise_sigma, sc.noise_quantization, sc.noise_seed)
            if (sc.noise_sigma > 0 or sc.noise_quantization > 0)
            else None
        )
        down_rng, up_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(sc.transport.seed).spawn(2))
        self.down = Channel(sc.transport, down_rng)
        self.up = Channel(sc.transport, up_rng)
        self._seq = {"console": 0, "master": 0, "slave": 0}
        self._last_t = {"console": -1, "master": -1, "slave": -1}
        self._last_rx = {"down": -1, "up": -1}

        # master console
        self._ref_p: tuple[float, ...] | None = None
        self._ref_R: np.ndarray | None = None
        self._fk_cache: tuple = ((), None, None)  # (q, R, p) of the last posture
        self.commanded = tuple(float(v) for v in sc.slave_start)
        self.master_translation = (0.0, 0.0, 0.0)
        self.fb_wrench = Wrench3()
        self.fb_grip = 0.0
        self.torques = ZERO_TORQUES
        self.vibration = VibrationCommand()
        self._origins: dict[int, int | None] = {}
        self.latencies: list[int] = []

        # slave
        self.slave_p = tuple(float(v) for v in sc.slave_start)
        self.slave_quat = np.array([1.0, 0.0, 0.0, 0.0])
        self.grip_drive = 0.0

        self.max_err = [0.0, 0.0, 0.0]
        self.counts = {"sensor": 0, "torque": 0, "workspace": 0, "slave_workspace": 0, "joint": 0}
        self._prev_input_t: int | None = None

    # -- messaging

    def _message(self, sender: str, kind: MessageKind, payload: Sequence[float]) -> TeleopMessage:
        t = self.clock.t
        seq = self._seq[sender]
        if t < self._last_t[sender]:
            raise InvariantViolation(t, "t_sim-monotone", f"{sender} t_sim went backwards")
        msg = TeleopMessage(kind, seq, t, tuple(float(v) for v in payload))
        self._seq[sender] = seq + 1
        self._last_t[sender] = t
        return msg

    def _check_delivery(self, link: str, channel: Channel, d) -> None:
        t = self.clock.t
        if t + 1e-9 < d.sent_at + channel.model.min_latency:
            raise InvariantViolation(t, "causality", f"{link} seq {d.message.seq} delivered early")
        if d.message.seq <= self._last_rx[link]:
            raise InvariantViolation(t, "sequence-order", f"{link} seq {d.message.seq} after {self._last_rx[link]}")
        self._last_rx[link] = d.message.seq

    # -- pedal

    def handle_pedal(self) -> ControlMode:
        """Toggle the console mode; motion made before the switch is not carried over."""
        self.mode = self.mode.toggled()
        self._ref_p = None
        self._ref_R = None
        return self.mode

    # -- one tick

    def step(self, inputs: TickInputs) -> StepResult:
        sc = self.scenario
        t = self.clock.t
        emitted: list[TeleopMessage] = []

        # phase 1: master console
        q_state = JointState7.within(sc.arm, inputs.master_q if inputs.master_q is not None else sc.q0)
        if q_state.clamped:
            self.counts["joint"] += 1
        cached_q, R, p = self._fk_cache
        if q_state.q != cached_q:
            R, p_arr = fk_matrix(sc.arm, q_state)
            p = tuple(p_arr.tolist())
            self._fk_cache = (q_state.q, R, p)
        if inputs.master_offset is not None:
            p = tuple(a + b for a, b in zip(p, inputs.master_offset))
        if not all(math.isfinite(v) for v in p):
            raise InvariantViolation(t, "finite-signals", "master pose")
        emitted.append(self._message("console", MessageKind.MASTER_STATE, q_state.q))

        for _ in range(inputs.pedal_presses):
            mode = self.handle_pedal()
            msg = self._message("master", MessageKind.PEDAL_EVENT, (1.0 if mode is ControlMode.CAMERA_ARM else 0.0,))
            emitted.append(msg)
            self.down.send(msg, t)

        if self.mode is ControlMode.MANIPULATORS:
            if self._ref_p is None:
                dp = (0.0, 0.0, 0.0)
                dq = IDENTITY_QUAT
            else:
                dp = tuple(a - b for a, b in zip(p, self._ref_p))
                # same posture object: no rotation, skip the round trip through R @ R^T
                dq = IDENTITY_QUAT if R is self._ref_R else tuple(quat_from_matrix(R @ self._ref_R.T).tolist())
                if not all(math.isfinite(v) for v in dp):
                    raise InvariantViolation(t, "finite-signals", "master displacement")
            scaled = scale_motion(PoseDelta(dp, dq), sc.scaling, self.commanded)
            if scaled.clamped:
                self.counts["workspace"] += 1
            self.commanded = tuple(a + b for a, b in zip(self.commanded, scaled.translation))
            self.master_translation = tuple(a + b for a, b in zip(self.master_translation, dp))
            msg = self._message(
                "master", MessageKind.SLAVE_COMMAND, (*scaled.translation, *scaled.rotation, inputs.grip_drive)
            )
            emitted.append(msg)
            self.down.send(msg, t)
        self._ref_p, self._ref_R = p, R

        # phase 2: slave
        fresh_origin: int | None = None
        held = self.slave_mode is ControlMode.CAMERA_ARM
        before = self.slave_p
        for d in self.down.receive(t):
            self._check_delivery("down", self.down, d)
            msg = d.message
            if msg.kind is MessageKind.PEDAL_EVENT:
                self.slave_mode = ControlMode.CAMERA_ARM if msg.payload[0] else ControlMode.MANIPULATORS
                held = held and self.slave_mode is ControlMode.CAMERA_ARM
            elif msg.kind is MessageKind.SLAVE_COMMAND and self.slave_mode is ControlMode.MANIPULATORS:
                target = [a + b for a, b in zip(self.slave_p, msg.payload[0:3])]
                bounded = [
                    min(max(v, lo), hi)
                    for v, lo, hi in zip(target, sc.scaling.workspace_min, sc.scaling.workspace_max)
                ]
                if bounded != target:
                    self.counts["slave_workspace"] += 1
                self.slave_p = tuple(bounded)
                dq = msg.payload[3:7]
                if dq != IDENTITY_QUAT:
                    qn = quat_multiply(dq, self.slave_quat)
                    self.slave_quat = qn / np.linalg.norm(qn)
                self.grip_drive = msg.payload[7]
                fresh_origin = msg.t_sim
        if held and self.slave_p != before:
            raise InvariantViolation(t, "mode-gating", "slave moved in CameraArm mode")

        true_w, grip = sc.environment(t, self.slave_p, self.grip_drive)
        try:
            sensed, saturated = sense(true_w, sc.sensor, self._cal, self._noise)
        except SensorError as exc:
            raise InvariantViolation(t, "finite-signals", str(exc)) from None
        if saturated:
            self.counts["sensor"] += 1
        self.max_err = [max(e, abs(a - b)) for e, a, b in zip(self.max_err, sensed, true_w)]
        msg = self._message("slave", MessageKind.WRENCH_REPORT, tuple(sensed))
        self._origins[msg.seq] = fresh_origin
        emitted.append(msg)
        self.up.send(msg, t)
        msg = self._message("slave", MessageKind.GRIP_REPORT, (grip,))
        emitted.append(msg)
        self.up.send(msg, t)

        # phase 3: master console feedback
        for d in self.up.receive(t):
            self._check_delivery("up", self.up, d)
            msg = d.message
            if msg.kind is MessageKind.WRENCH_REPORT:
                self.fb_wrench = Wrench3(*msg.payload)
                origin = self._origins.pop(msg.seq, None)
                if origin is not None:
                    self.latencies.append(t - origin)
            elif msg.kind is MessageKind.GRIP_REPORT:
                self.fb_grip = msg.payload[0]
        torques = kinesthetic_torques(self.fb_wrench, sc.arm, q_state, sc.torque_caps)
        if torques.saturated:
            self.counts["torque"] += 1
        self.torques = torques
        self.vibration = tactile_command(GripForce(self.fb_grip), sc.tactile, self.vibration)
        emitted.append(
            self._message(
                "console",
                MessageKind.FEEDBACK_COMMAND,
                (*torques.tau, self.vibration.motor1_intensity, 1.0 if self.vibration.motor2_on else 0.0),
            )
        )

        record = TraceRecord(
            t_ms=t,
            mode=self.mode,
            master_q=q_state.q,
            slave_position=self.slave_p,
            true_wrench=true_w,
            sensed_wrench=sensed,
            grip=grip,
            torques=torques,
            vibration=self.vibration,
            dropped_msgs=self.down.dropped + self.up.dropped,
        )
        self.clock.step()
        return StepResult(emitted, record)

    def summary(self) -> SummaryStats:
        sc = self.scenario
        lat = np.asarray(self.latencies, dtype=float)
        if len(lat):
            values, counts = np.unique(lat.astype(int), return_counts=True)
            latency = {
                "count": int(len(lat)),
                "min": int(lat.min()),
                "max": int(lat.max()),
                "mean": float(lat.mean()),
                "histogram": {str(int(v)): int(c) for v, c in zip(values, counts)},
            }
        else:
            latency = {"count": 0, "histogram": {}}
        ticks = self.clock.t // self.clock.tick
        return SummaryStats(
            ticks=ticks,
            duration_ms=self.clock.t,
            max_wrench_error=tuple(float(v) for v in self.max_err),
            feedback_latency_ms=latency,
            expected_latency_ms=expected_feedback_latency(sc.transport.base_latency, sc.tick_ms),
            saturation=dict(self.counts),
            messages={
                "sent": self.down.sent + self.up.sent,
                "delivered": self.down.delivered + self.up.delivered,
                "dropped": self.down.dropped + self.up.dropped,
                "gaps": self.down.gaps + self.up.gaps,
                "in_flight": self.down.pending + self.up.pending,
            },
            master_translation_mm=tuple(float(v) for v in self.master_translation),
            slave_translation_mm=tuple(float(a - b) for a, b in zip(self.slave_p, sc.slave_start)),
            translation_scale=sc.scaling.translation_scale,
            final_mode=self.mode.value,
        )


def run_scenario(
    scenario: Scenario,
    out_sink: TextIO | None = None,
    message_sink: BinaryIO | None = None,
) -> SummaryStats:
    """Run every tick of ``scenario``; trace rows go to ``out_sink`` as CSV."""
    sim = TeleopSim(scenario)
    if out_sink is not None:
        out_sink.write(",".join(TRACE_COLUMNS) + "\n")
    prev_t: int | None = None
    for _ in range(scenario.duration_ms // scenario.tick_ms):
        t = sim.clock.t
        result = sim.step(scenario.inputs.at(t, prev_t))
        prev_t = t
        if out_sink is not None:
            out_sink.write(result.record.csv_row() + "\n")
        if message_sink is not None:
            for m in result.messages:
                message_sink.write(encode(m))
    return sim.summary()
