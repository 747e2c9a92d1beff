"""Master/slave message frames and their binary wire format.

Each frame is::

    u32  length of everything after this field, bytes
    u8   kind tag
    u32  seq
    u64  t_sim, ms
    f64 * n  payload, field order per kind (see PAYLOAD_FIELDS)

All integers and doubles are little-endian.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator

_HEADER = struct.Struct("<BIQ")
_LENGTH = struct.Struct("<I")


class MessageKind(enum.IntEnum):
    MASTER_STATE = 1
    SLAVE_COMMAND = 2
    WRENCH_REPORT = 3
    GRIP_REPORT = 4
    FEEDBACK_COMMAND = 5
    PEDAL_EVENT = 6


PAYLOAD_FIELDS: dict[MessageKind, tuple[str, ...]] = {
    MessageKind.MASTER_STATE: tuple(f"q{i}" for i in range(1, 8)),
    MessageKind.SLAVE_COMMAND: ("dx", "dy", "dz", "qw", "qx", "qy", "qz", "grip_drive"),
    MessageKind.WRENCH_REPORT: ("fz", "mx", "my"),
    MessageKind.GRIP_REPORT: ("f",),
    MessageKind.FEEDBACK_COMMAND: tuple(f"tau{i}" for i in range(1, 8)) + ("motor1", "motor2"),
    MessageKind.PEDAL_EVENT: ("camera_arm",),
}


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class TeleopMessage:
    kind: MessageKind
    seq: int
    t_sim: int
    payload: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(PAYLOAD_FIELDS[self.kind])
        if len(self.payload) != n:
            raise ProtocolError(f"{self.kind.name} carries {n} fields, got {len(self.payload)}")
        if not (0 <= self.seq < 2**32) or not (0 <= self.t_sim < 2**64):
            raise ProtocolError(f"seq/t_sim out of range: {self.seq}, {self.t_sim}")

    def field(self, name: str) -> float:
        return self.payload[PAYLOAD_FIELDS[self.kind].index(name)]


def encode(msg: TeleopMessage) -> bytes:
    body = _HEADER.pack(int(msg.kind), msg.seq, msg.t_sim) + struct.pack(
        f"<{len(msg.payload)}d", *msg.payload
    )
    return _LENGTH.pack(len(body)) + body


def decode(frame: bytes) -> TeleopMessage:
    """Decode exactly one frame (length prefix included)."""
    if len(frame) < _LENGTH.size:
        raise ProtocolError("truncated length prefix")
    (length,) = _LENGTH.unpack_from(frame)
    if len(frame) != _LENGTH.size + length:
        raise ProtocolError(f"frame length {len(frame) - _LENGTH.size} != declared {length}")
    return _decode_body(frame[_LENGTH.size :])


def _decode_body(body: bytes) -> TeleopMessage:
    if len(body) < _HEADER.size:
        raise ProtocolError("truncated header")
    tag, seq, t_sim = _HEADER.unpack_from(body)
    try:
        kind = MessageKind(tag)
    except ValueError:
        raise ProtocolError(f"unknown kind tag {tag}") from None
    n = len(PAYLOAD_FIELDS[kind])
    if len(body) != _HEADER.size + 8 * n:
        raise ProtocolError(f"{kind.name} body is {len(body)} bytes, expected {_HEADER.size + 8 * n}")
    payload = struct.unpack_from(f"<{n}d", body, _HEADER.size)
    return TeleopMessage(kind, seq, t_sim, payload)


def iter_frames(stream: BinaryIO) -> Iterator[TeleopMessage]:
    """Yield messages from a byte stream until EOF."""
    while True:
        prefix = stream.read(_LENGTH.size)
        if not prefix:
            return
        if len(prefix) < _LENGTH.size:
            raise ProtocolError("truncated length prefix")
        (length,) = _LENGTH.unpack(prefix)
        body = stream.read(length)
        if len(body) != length:
            raise ProtocolError(f"stream ended inside a {length}-byte frame")
        yield _decode_body(body)
