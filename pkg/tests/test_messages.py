import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from logdos.messages import (
    DataMessage,
    GetMessage,
    MalformedPacket,
    digest_of,
    forward_append,
    response_to,
    return_strip,
    serialize,
)

pid = st.integers(0, 2**64 - 1)
sid = st.binary(min_size=16, max_size=16)


def test_digest_deterministic():
    s = bytes(16)
    assert digest_of(s, [1, 2], 7) == digest_of(s, (1, 2), 7)
    assert len(digest_of(s, [], 7)) == 16


def test_digest_depends_on_seed():
    assert digest_of(bytes(16), [1], 1) != digest_of(bytes(16), [1], 2)


def test_length_prefix_disambiguates():
    s = bytes(16)
    assert serialize(s, []) != serialize(s, [0])
    assert digest_of(s, [], 3) != digest_of(s, [0], 3)


def test_serialization_layout():
    s = bytes(range(16))
    assert serialize(s, [1, 2**64 - 1]) == s + b"\x00\x00\x00\x02" + (1).to_bytes(8, "big") + b"\xff" * 8


def test_prefix_extension_collisions():
    seen = set()
    rnd = os.urandom
    for _ in range(100_000):
        s = rnd(16)
        a = int.from_bytes(rnd(8), "big")
        b = int.from_bytes(rnd(8), "big")
        d1, d2 = digest_of(s, [a], 5), digest_of(s, [a, b], 5)
        assert d1 != d2
        seen.add(d1)
        seen.add(d2)
    assert len(seen) == 200_000


def test_forward_trace():
    g = GetMessage(sid=bytes(16), consumer=bytes(16))
    for p in (101, 102, 103, 104):  # appended by the four forwarding ASes
        g = forward_append(g, p)
    assert g.pids == (101, 102, 103, 104)


def test_return_trace():
    d = DataMessage(sid=bytes(16), pids=(101, 102, 103, 104))
    stripped = []
    for _ in range(4):
        d, p = return_strip(d)
        stripped.append(p)
    assert stripped == [104, 103, 102, 101] and d.pids == ()
    with pytest.raises(MalformedPacket):
        return_strip(d)


@given(sid, st.lists(pid, max_size=10), pid)
def test_strip_inverts_append(s, pids, extra):
    g = forward_append(GetMessage(sid=s, consumer=bytes(16), pids=tuple(pids)), extra)
    assert len(g.pids) == len(pids) + 1
    d, p = return_strip(response_to(g))
    assert p == extra and d.pids == tuple(pids)


@given(sid, st.lists(pid, min_size=1, max_size=8), st.integers(0, 2**64 - 1))
def test_routing_symmetry(s, links, seed):
    # GET crosses ASes a_0..a_n; record the arrival prefix at each
    g = GetMessage(sid=s, consumer=bytes(16))
    arrival = []
    for p in links:
        arrival.append(g.pids)
        g = forward_append(g, p)
    arrival.append(g.pids)  # at the provider's AS
    d = response_to(g)
    # DATA starts at the provider's AS with the full list, strips at each later AS
    got = [d.pids]
    for _ in links:
        d, _ = return_strip(d)
        got.append(d.pids)
    assert got == arrival[::-1]
    assert [digest_of(s, x, seed) for x in got] == [digest_of(s, x, seed) for x in arrival[::-1]]
