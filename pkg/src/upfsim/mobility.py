"""Streaming reader for vehicular mobility traces.

The trace is a time-ordered text file with one ``time vehicle_id x y speed``
record per line (the Cologne ``koln.tr`` layout). Records are grouped into
fixed-length slots; only one slot is held in memory at a time.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from itertools import islice
from typing import Iterable, Iterator

from .topology import _text_lines


class TraceParseError(ValueError):
    """Raised on malformed or out-of-order trace lines."""


@dataclass(frozen=True)
class TraceEntry:
    time: float
    vehicle_id: str
    x: float
    y: float
    speed: float


@dataclass
class TimeSlotSnapshot:
    slot_index: int
    active_ues: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.active_ues)


def parse_trace_line(line: str, lineno: int = 0) -> TraceEntry:
    fields = line.split()
    if len(fields) < 5:
        raise TraceParseError(f"line {lineno}: expected 5 fields, got {len(fields)}")
    try:
        t = float(fields[0])
        x = float(fields[2])
        y = float(fields[3])
        speed = float(fields[4])
    except ValueError as exc:
        raise TraceParseError(f"line {lineno}: {exc}") from None
    if t < 0 or not (math.isfinite(t) and math.isfinite(x) and math.isfinite(y)):
        raise TraceParseError(f"line {lineno}: invalid time or coordinate")
    return TraceEntry(t, sys.intern(fields[1]), x, y, speed)


def iter_trace(stream) -> Iterator[tuple[int, TraceEntry]]:
    for lineno, line in enumerate(_text_lines(stream), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, parse_trace_line(line, lineno)


def stream_slots(
    stream,
    slot_duration: float = 5.0,
    *,
    time_tolerance: float = 0.0,
    anchor: str = "zero",
) -> Iterator[TimeSlotSnapshot]:
    """Yield one snapshot per slot window ``[n*D, (n+1)*D)``.

    A vehicle is active in a slot if it has at least one record inside the
    window; its position is that of its latest record there (ties resolved by
    file order). Empty slots between populated ones are still yielded.

    With ``anchor="zero"`` slot indices count from t=0 of the file, so the
    first snapshot has index ``floor(t0 / D)``. With ``anchor="first_entry"``
    windows are measured from the first timestamp and indexing starts at 0.

    Timestamps may go backwards by at most ``time_tolerance`` seconds; such
    records are folded into the current slot.
    """
    if slot_duration <= 0:
        raise ValueError("slot_duration must be positive")
    if anchor not in ("zero", "first_entry"):
        raise ValueError(f"unknown anchor {anchor!r}")

    origin = None
    current: TimeSlotSnapshot | None = None
    latest: dict[str, float] = {}
    last_time = -math.inf

    for lineno, entry in iter_trace(stream):
        if entry.time < last_time - time_tolerance:
            raise TraceParseError(
                f"line {lineno}: time {entry.time} precedes {last_time} beyond tolerance"
            )
        last_time = max(last_time, entry.time)
        if origin is None:
            origin = 0.0 if anchor == "zero" else entry.time
        slot = math.floor((entry.time - origin) / slot_duration)
        if current is None:
            current = TimeSlotSnapshot(slot)
        elif slot > current.slot_index:
            yield current
            for empty in range(current.slot_index + 1, slot):
                yield TimeSlotSnapshot(empty)
            current = TimeSlotSnapshot(slot)
            latest = {}
        vid = entry.vehicle_id
        if entry.time >= latest.get(vid, -math.inf):
            latest[vid] = entry.time
            current.active_ues[vid] = (entry.x, entry.y)
    if current is not None:
        yield current


def limit_slots(slots: Iterable[TimeSlotSnapshot], max_slots: int | None) -> Iterator[TimeSlotSnapshot]:
    """Yield at most ``max_slots`` snapshots, then stop pulling from ``slots``."""
    if max_slots is None:
        return iter(slots)
    if max_slots < 0:
        raise ValueError("max_slots must be non-negative")
    return islice(slots, max_slots)


def slot_at(slots: Iterable[TimeSlotSnapshot], slot_index: int) -> TimeSlotSnapshot:
    for snap in slots:
        if snap.slot_index == slot_index:
            return snap
        if snap.slot_index > slot_index:
            break
    raise LookupError(f"slot {slot_index} not present in trace")
