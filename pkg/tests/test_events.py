import json
import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from childbot.events import (
    Broker,
    BrokerClient,
    BrokerConfig,
    BrokerServer,
    Event,
    MalformedFrame,
    OversizeEvent,
    Subscription,
    broker_route,
    decode_event,
    encode_event,
    match_pattern,
)

segment = st.from_regex(r"[a-z0-9_]{1,6}", fullmatch=True)
names = st.lists(segment, min_size=1, max_size=4).map(".".join)
scalars = st.one_of(
    st.none(), st.booleans(), st.integers(-10**12, 10**12),
    st.floats(allow_nan=False, allow_infinity=False), st.text(max_size=20),
)
values = st.one_of(scalars, st.lists(scalars, max_size=4))
events = st.builds(
    Event,
    cls=st.sampled_from(["sense", "action", "monitor"]),
    name=names,
    params=st.dictionaries(st.text(max_size=8), values, max_size=5),
    sender=st.text(max_size=10),
    seq=st.integers(0, 2**40),
    ts=st.integers(0, 2**45),
)


def test_encode_is_single_json_line():
    e = Event("sense", "sense.speech.rec", {"text": "yes"}, "asr", 1, 0)
    data = encode_event(e)
    assert data.endswith(b"\n") and data.count(b"\n") == 1
    assert b'"class":"sense"' in data
    assert set(json.loads(data)) == {"class", "name", "params", "sender", "seq", "ts"}


@settings(max_examples=300)
@given(events)
def test_roundtrip_property(e):
    assert decode_event(encode_event(e)) == e


def test_newlines_in_strings_stay_escaped():
    e = Event("sense", "sense.x", {"t": "a\nb c"}, "s", 1, 0)
    data = encode_event(e)
    assert data.count(b"\n") == 1
    assert decode_event(data) == e


def test_oversize_event():
    e = Event("sense", "sense.x", {"blob": "x" * 100_000}, "s", 1, 0)
    with pytest.raises(OversizeEvent):
        encode_event(e)


def test_missing_class_identified():
    line = b'{"name":"sense.x","params":{},"sender":"a","seq":1,"ts":0}\n'
    with pytest.raises(MalformedFrame) as err:
        decode_event(line)
    assert err.value.key == "class"


def test_bad_name_grammar():
    line = b'{"class":"sense","name":"Sense..bad","params":{},"sender":"a","seq":1,"ts":0}'
    with pytest.raises(MalformedFrame) as err:
        decode_event(line)
    assert err.value.key == "name"


@pytest.mark.parametrize("line,key", [
    (b"not json", "frame"),
    (b"[1,2]", "frame"),
    (b'{"class":"bogus","name":"a","params":{},"sender":"a","seq":1,"ts":0}', "class"),
    (b'{"class":"sense","name":"a","params":[],"sender":"a","seq":1,"ts":0}', "params"),
    (b'{"class":"sense","name":"a","params":{},"sender":"a","seq":"1","ts":0}', "seq"),
    (b'{"class":"sense","name":"a","params":{},"sender":"a","seq":1,"ts":0,"x":1}', "x"),
])
def test_malformed_frames(line, key):
    with pytest.raises(MalformedFrame) as err:
        decode_event(line)
    assert err.value.key == key


@pytest.mark.parametrize("pattern,name,expected", [
    ("sense.**", "sense.speech.rec", True),
    ("sense.*.rec", "sense.speech.rec", True),
    ("action.**", "sense.speech.rec", False),
    ("**", "a", True),
    ("sense.**", "sense", True),
    ("sense.*", "sense", False),
    ("sense.*", "sense.a.b", False),
    ("sense.speech", "sense.speech", True),
])
def test_match_pattern(pattern, name, expected):
    assert match_pattern(pattern, name) is expected


def test_invalid_pattern_rejected():
    for bad in ["", "a.**.b", "A.b", "a..b"]:
        with pytest.raises(ValueError):
            Subscription("c", bad)


def test_route_single_match():
    e = Event.make("sense.gesture.rec", {}, sender="vision", seq=1)
    assert broker_route(e, {"dialog": "sense.**", "nao": "action.**"}) == ["dialog"]


def test_route_broadcast_excludes_sender():
    e = Event.make("sense.x", {}, sender="a", seq=1)
    subs = [Subscription("a", "**"), Subscription("b", "**"), Subscription("c", "**"), Subscription("b", "sense.*")]
    assert broker_route(e, subs) == ["b", "c"]


def test_route_is_pure():
    rng = random.Random(3)
    subs = [Subscription(f"c{i}", p) for i, p in enumerate(["**", "sense.**", "action.*", "sense.*.rec"])]
    for _ in range(100):
        name = rng.choice(["sense.speech.rec", "action.speak", "monitor.x", "sense.touch"])
        e = Event.make(name, sender="s", seq=1)
        first = broker_route(e, subs)
        assert broker_route(e, subs) == first
        assert set(broker_route(e, list(reversed(subs)))) == set(first)


def test_in_process_fifo_per_sender():
    b = Broker()
    pub = b.connect("asr")
    r1 = b.connect("dialog", ["sense.**"])
    r2 = b.connect("logger", ["**"])
    for i in range(1000):
        pub.publish("sense.speech.rec", {"i": i})
    for conn in (r1, r2):
        seqs = [e.seq for e in conn.drain() if e.sender == "asr"]
        assert seqs == list(range(1, 1001))


def test_in_process_rejects_non_increasing_seq():
    b = Broker()
    b.connect("x", ["**"])
    b.publish(Event.make("sense.a", sender="s", seq=5))
    with pytest.raises(MalformedFrame):
        b.publish(Event.make("sense.a", sender="s", seq=5))


def test_dropped_client_reported():
    b = Broker()
    mon = b.connect("mon", ["monitor.**"])
    dead = b.connect("dead", ["sense.**"])
    dead.closed = True
    pub = b.connect("pub")
    assert pub.publish("sense.a").name == "sense.a"
    drops = [e for e in mon.drain() if e.name == "monitor.broker.dropped"]
    assert drops and drops[0].params["client"] == "dead"
    assert all(s.client != "dead" for s in b.subscriptions)


def test_broker_never_forwards_undecodable():
    b = Broker()
    r = b.connect("r", ["**"])
    with pytest.raises(MalformedFrame):
        b.publish_frame(b'{"class":"sense"}')
    assert r.drain() == []


def test_config_frame_floor():
    with pytest.raises(ValueError):
        BrokerConfig(max_frame=100)


@pytest.fixture
def tcp_broker():
    server = BrokerServer(BrokerConfig(port=0))
    host, port = server.serve_in_thread()
    yield server, host, port
    server.close()


def test_tcp_routing_and_fifo(tcp_broker):
    server, host, port = tcp_broker
    dialog = BrokerClient("dialog", ["sense.**"], host, port)
    nao = BrokerClient("nao", ["action.**"], host, port)
    asr = BrokerClient("asr", ["monitor.**"], host, port)
    assert server.wait_for_clients(["dialog", "nao", "asr"])
    for i in range(200):
        asr.publish("sense.speech.rec", {"i": i})
    got = [dialog.recv(timeout=5) for _ in range(200)]
    assert [e.params["i"] for e in got] == list(range(200))
    assert [e.seq for e in got] == list(range(1, 201))
    assert nao.recv(timeout=0.2) is None
    for c in (dialog, nao, asr):
        c.close()


def test_tcp_bad_frame_not_forwarded(tcp_broker):
    server, host, port = tcp_broker
    mon = BrokerClient("mon", ["**"], host, port)
    raw = BrokerClient("raw", [], host, port)
    assert server.wait_for_clients(["mon", "raw"])
    raw._sock.sendall(b"this is not json\n")
    raw.publish("sense.after")
    seen = [mon.recv(timeout=5), mon.recv(timeout=5)]
    names = [e.name for e in seen]
    assert names == ["monitor.broker.rejected", "sense.after"]
    mon.close()
    raw.close()


def test_tcp_client_threads_share_connection(tcp_broker):
    server, host, port = tcp_broker
    sink = BrokerClient("sink", ["sense.**"], host, port)
    src = BrokerClient("src", [], host, port)
    assert server.wait_for_clients(["sink", "src"])

    def work():
        for _ in range(50):
            src.publish("sense.t")

    ts = [threading.Thread(target=work) for _ in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    seqs = [sink.recv(timeout=5).seq for _ in range(200)]
    assert seqs == sorted(seqs) and len(set(seqs)) == 200
    sink.close()
    src.close()
