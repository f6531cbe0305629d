import io
import tracemalloc

import pytest

from upfsim.mobility import TraceParseError, limit_slots, stream_slots
from upfsim.synthetic import synthetic_trace


def slots_of(text, dt=5.0, **kw):
    return list(stream_slots(io.StringIO(text), dt, **kw))


def test_latest_entry_in_window():
    (s0,) = slots_of("0.0 a 1 1 0\n4.0 a 9 9 0\n")
    assert s0.slot_index == 0
    assert s0.active_ues == {"a": (9.0, 9.0)}


def test_same_timestamp_last_in_file_wins():
    (s0,) = slots_of("1.0 a 1 1 0\n1.0 a 2 2 0\n")
    assert s0.active_ues["a"] == (2.0, 2.0)


def test_gap_means_off():
    slots = slots_of("0.0 a 0 0 0\n4.0 b 0 0 0\n11.0 a 5 5 0\n12.0 b 6 6 0\n")
    assert [s.slot_index for s in slots] == [0, 1, 2]
    assert set(slots[1].active_ues) == set()
    assert set(slots[2].active_ues) == {"a", "b"}


def test_empty_slots_are_emitted():
    slots = slots_of("0.0 a 0 0 0\n27.0 a 0 0 0\n")
    assert [s.slot_index for s in slots] == [0, 1, 2, 3, 4, 5]
    assert [len(s) for s in slots] == [1, 0, 0, 0, 0, 1]


def test_zero_anchor_indexes_from_file_origin():
    slots = slots_of("12.0 a 0 0 0\n16.0 a 0 0 0\n")
    assert [s.slot_index for s in slots] == [2, 3]


def test_first_entry_anchor():
    slots = slots_of("12.0 a 0 0 0\n16.0 a 0 0 0\n", anchor="first_entry")
    assert [s.slot_index for s in slots] == [0]


def test_window_bounds():
    slots = slots_of("0.0 a 0 0 0\n5.0 b 0 0 0\n9.999 c 0 0 0\n10.0 d 0 0 0\n")
    for snap in slots:
        assert set(snap.active_ues) == {
            0: {"a"}, 1: {"b", "c"}, 2: {"d"}
        }[snap.slot_index]


def test_out_of_order_rejected_with_line():
    with pytest.raises(TraceParseError, match="line 2"):
        slots_of("10.0 a 0 0 0\n3.0 b 0 0 0\n")


def test_out_of_order_within_tolerance():
    slots = slots_of("10.0 a 0 0 0\n9.5 b 0 0 0\n", time_tolerance=1.0)
    assert set(slots[0].active_ues) == {"a", "b"}


def test_malformed_line():
    with pytest.raises(TraceParseError, match="line 1"):
        slots_of("0.0 a x 0 0\n")
    with pytest.raises(TraceParseError):
        slots_of("0.0 a 1\n")


def test_bytes_input():
    slots = list(stream_slots(io.BytesIO(b"0.0 7 1.5 2.5 3.0\n"), 5))
    assert slots[0].active_ues == {"7": (1.5, 2.5)}


def test_invalid_slot_duration():
    with pytest.raises(ValueError):
        slots_of("0.0 a 0 0 0\n", dt=0)


def test_limit_zero():
    assert list(limit_slots(iter(slots_of("0.0 a 0 0 0\n")), 0)) == []


def test_limit_three_of_ten():
    text = "".join(f"{5 * i}.0 a 0 0 0\n" for i in range(10))
    out = list(limit_slots(stream_slots(io.StringIO(text), 5), 3))
    assert [s.slot_index for s in out] == [0, 1, 2]


class CountingStream(io.StringIO):
    def __init__(self, text):
        super().__init__(text)
        self.lines_read = 0

    def __next__(self):
        line = super().__next__()
        self.lines_read += 1
        return line


def test_limit_stops_reading_input():
    text = "".join(f"{i}.0 a 0 0 0\n" for i in range(1000))
    stream = CountingStream(text)
    out = list(limit_slots(stream_slots(stream, 5), 3))
    assert len(out) == 3
    # three slots of five lines plus the single look-ahead line
    assert stream.lines_read == 16


def test_union_of_active_equals_distinct_ids():
    text = synthetic_trace(n_vehicles=40, duration=60, seed=2)
    ids = {line.split()[1] for line in text.splitlines()}
    seen = set()
    for snap in stream_slots(io.StringIO(text), 5):
        seen |= set(snap.active_ues)
    assert seen == ids


def test_restream_is_identical():
    text = synthetic_trace(n_vehicles=30, duration=40, seed=5)
    a = [(s.slot_index, s.active_ues) for s in slots_of(text)]
    b = [(s.slot_index, s.active_ues) for s in slots_of(text)]
    assert a == b


def _peak_memory(text):
    stream = io.BytesIO(text.encode())
    tracemalloc.start()
    for _ in stream_slots(stream, 5):
        pass
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return peak


def test_memory_independent_of_length():
    base = synthetic_trace(n_vehicles=50, duration=50, seed=1)
    lines = base.splitlines()
    span = 50.0
    # repeat the trace 10x, shifted in time so it stays ordered
    repeated = []
    for r in range(10):
        for line in lines:
            t, rest = line.split(" ", 1)
            repeated.append(f"{float(t) + r * span:.1f} {rest}")
    long_text = "\n".join(repeated) + "\n"
    # the input buffer itself is allocated before tracing starts
    short_peak = _peak_memory(base)
    long_peak = _peak_memory(long_text)
    assert long_peak < 2 * short_peak + 64_000
