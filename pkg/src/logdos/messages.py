"""GET/DATA messages, PID accumulation and the logged digest.

A GET picks up one PID per inter-domain hop; the matching DATA sheds one
per hop on the way back. An AS logs the digest of (SID, PIDs on arrival)
and later checks DATA against the digest of (SID, PIDs left after
stripping), which is the same list by routing symmetry.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from enum import Enum

SID_BYTES = 16
NID_BYTES = 16
DIGEST_BYTES = 16


class MalformedPacket(ValueError):
    pass


class Truth(str, Enum):
    LEGITIMATE = "legitimate"
    ATTACK = "attack"


@dataclass(frozen=True)
class GetMessage:
    sid: bytes
    consumer: bytes
    pids: tuple[int, ...] = ()
    issue_tick: int = 0


@dataclass(frozen=True)
class DataMessage:
    sid: bytes
    pids: tuple[int, ...]
    ground_truth: Truth = Truth.LEGITIMATE
    size_bytes: int = 1500
    # PID epoch the sender built its list under; only D-PID routers look at it
    epoch: int = field(default=0, compare=False)


def seed_key(run_seed: int) -> bytes:
    return (run_seed & ((1 << 64) - 1)).to_bytes(8, "big")


def serialize(sid: bytes, prefix: tuple[int, ...] | list[int]) -> bytes:
    n = len(prefix)
    return sid + struct.pack(f">I{n}Q", n, *prefix)


def digest_of(sid: bytes, prefix: tuple[int, ...] | list[int], run_seed: int) -> bytes:
    """Keyed 128-bit BLAKE2b over ``sid || u32 len || u64 pids`` (big-endian)."""
    return hashlib.blake2b(
        serialize(sid, prefix), digest_size=DIGEST_BYTES, key=seed_key(run_seed)
    ).digest()


def forward_append(msg: GetMessage, pid: int) -> GetMessage:
    return replace(msg, pids=msg.pids + (pid,))


def return_strip(msg: DataMessage) -> tuple[DataMessage, int]:
    if not msg.pids:
        raise MalformedPacket("DATA message has no PIDs left to strip")
    return replace(msg, pids=msg.pids[:-1]), msg.pids[-1]


def response_to(get: GetMessage, size_bytes: int = 1500) -> DataMessage:
    """DATA answering ``get``, carrying the full PID list it arrived with."""
    return DataMessage(sid=get.sid, pids=get.pids, size_bytes=size_bytes)
