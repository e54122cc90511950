"""Typed events, the newline-delimited JSON wire format and dotted-glob patterns."""
from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any

DEFAULT_MAX_FRAME = 65536
WIRE_KEYS = ("class", "name", "params", "sender", "seq", "ts")

NAME_RE = re.compile(r"[a-z0-9_]+(\.[a-z0-9_]+)*\Z")
_SEGMENT_RE = re.compile(r"[a-z0-9_]+\Z")


class EventError(Exception):
    pass


class OversizeEvent(EventError):
    def __init__(self, size, limit):
        super().__init__(f"encoded event is {size} bytes, limit is {limit}")
        self.size = size
        self.limit = limit


class MalformedFrame(EventError):
    """A frame or event failed validation; ``key`` names the offending field."""

    def __init__(self, key, reason=""):
        super().__init__(f"{key}: {reason}" if reason else key)
        self.key = key
        self.reason = reason


class EventClass(str, enum.Enum):
    SENSE = "sense"
    ACTION = "action"
    MONITOR = "monitor"


def _check_value(value, key, depth=0):
    if depth > 8:
        raise MalformedFrame("params", f"{key!r} nested too deeply")
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise MalformedFrame("params", f"{key!r} is not finite")
        return value
    if isinstance(value, (list, tuple)):
        return [_check_value(v, key, depth + 1) for v in value]
    raise MalformedFrame("params", f"{key!r} has unsupported type {type(value).__name__}")


def valid_name(name) -> bool:
    return isinstance(name, str) and NAME_RE.match(name) is not None


@dataclass(frozen=True)
class Event:
    """One broker message.

    ``params`` keeps insertion order; tuples are normalised to lists so that
    an event compares equal to its decoded wire form.
    """

    cls: EventClass
    name: str
    params: dict[str, Any] = field(default_factory=dict)
    sender: str = ""
    seq: int = 0
    ts: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "cls", EventClass(self.cls))
        except ValueError:
            raise MalformedFrame("class", f"unknown class {self.cls!r}") from None
        if not valid_name(self.name):
            raise MalformedFrame("name", f"{self.name!r} violates the name grammar")
        if not isinstance(self.params, dict):
            raise MalformedFrame("params", "must be an object")
        clean = {}
        for k, v in self.params.items():
            if not isinstance(k, str):
                raise MalformedFrame("params", f"key {k!r} is not a string")
            clean[k] = _check_value(v, k)
        object.__setattr__(self, "params", clean)
        if not isinstance(self.sender, str):
            raise MalformedFrame("sender", "must be a string")
        for key in ("seq", "ts"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, int):
                raise MalformedFrame(key, "must be an integer")
        if self.seq < 0:
            raise MalformedFrame("seq", "must be non-negative")

    @classmethod
    def make(cls, name, params=None, sender="", seq=0, ts=0):
        """Build an event whose class is taken from the first name segment."""
        head = name.split(".", 1)[0]
        return cls(EventClass(head), name, dict(params or {}), sender, seq, ts)

    def to_wire(self) -> dict:
        return {
            "class": self.cls.value,
            "name": self.name,
            "params": self.params,
            "sender": self.sender,
            "seq": self.seq,
            "ts": self.ts,
        }

    def get(self, key, default=None):
        return self.params.get(key, default)


def encode_event(event: Event, max_frame: int = DEFAULT_MAX_FRAME) -> bytes:
    line = json.dumps(event.to_wire(), separators=(",", ":"), ensure_ascii=False, allow_nan=False)
    data = line.encode("utf-8") + b"\n"
    if len(data) > max_frame:
        raise OversizeEvent(len(data), max_frame)
    return data


def decode_event(data: bytes | str) -> Event:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrame("frame", f"not UTF-8: {exc}") from None
    if data.endswith("\n"):
        data = data[:-1]
    if "\n" in data:
        raise MalformedFrame("frame", "interior newline")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedFrame("frame", f"bad JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise MalformedFrame("frame", "not a JSON object")
    for key in WIRE_KEYS:
        if key not in obj:
            raise MalformedFrame(key, "missing")
    for key in obj:
        if key not in WIRE_KEYS:
            raise MalformedFrame(key, "unexpected key")
    return Event(obj["class"], obj["name"], obj["params"], obj["sender"], obj["seq"], obj["ts"])


def valid_pattern(pattern) -> bool:
    if not isinstance(pattern, str) or not pattern:
        return False
    segs = pattern.split(".")
    for i, seg in enumerate(segs):
        if seg == "**":
            if i != len(segs) - 1:
                return False
        elif seg != "*" and not _SEGMENT_RE.match(seg):
            return False
    return True


def match_pattern(pattern: str, name: str) -> bool:
    """Dotted glob: ``*`` matches one segment, a trailing ``**`` zero or more."""
    pat = pattern.split(".")
    segs = name.split(".")
    if pat[-1] == "**":
        head = pat[:-1]
        if len(segs) < len(head):
            return False
        segs = segs[: len(head)]
        pat = head
    if len(pat) != len(segs):
        return False
    return all(p == "*" or p == s for p, s in zip(pat, segs))
