import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivebridge.bus import Bus


@pytest.fixture
def bus():
    return Bus()


def test_register_publisher(bus):
    h = bus.register_publisher("perception", "/detections")
    assert bus.lookup("/detections").publishers == {"perception"}
    assert bus.register_publisher("perception", "/detections") is h
    assert len(bus.lookup("/detections").publishers) == 1


def test_two_publishers_on_one_topic(bus):
    bus.register_publisher("ctrl", "/cmd")
    bus.register_publisher("ctrl2", "/cmd")
    assert bus.lookup("/cmd").publishers == {"ctrl", "ctrl2"}


@pytest.mark.parametrize("topic", ["", "/", "detections", "/has space", None])
def test_invalid_topic(bus, topic):
    with pytest.raises(ValueError):
        bus.register_publisher("n", topic)


def test_subscriber_fifo(bus):
    pub = bus.register_publisher("p", "/t")
    sub = bus.register_subscriber("s", "/t", 16)
    for i in range(3):
        pub.publish(i, float(i))
    assert [e.seq for e in sub.drain()] == [0, 1, 2]


def test_no_replay_for_late_subscriber(bus):
    pub = bus.register_publisher("p", "/t")
    pub.publish("early", 0.0)
    sub = bus.register_subscriber("s", "/t")
    pub.publish("late", 1.0)
    assert [e.payload for e in sub.drain()] == ["late"]


def test_capacity_zero_rejected(bus):
    with pytest.raises(ValueError):
        bus.register_subscriber("s", "/t", 0)


def test_drop_oldest(bus):
    pub = bus.register_publisher("p", "/t")
    sub = bus.register_subscriber("s", "/t", 2)
    for i in range(3):
        pub.publish(i, 0.0)
    assert sub.dropped == 1
    assert [e.payload for e in sub.drain()] == [1, 2]


def test_first_publish_seq_zero_and_100_messages(bus):
    pub = bus.register_publisher("p", "/t")
    sub = bus.register_subscriber("s", "/t", 128)
    assert pub.publish("x", 0.0).seq == 0
    for i in range(1, 100):
        pub.publish(i, 0.0)
    got = sub.drain()
    assert len(got) == 100 and [e.seq for e in got] == list(range(100))


def test_interleaved_publishers_keep_call_order(bus):
    a = bus.register_publisher("a", "/t")
    b = bus.register_publisher("b", "/t")
    sub = bus.register_subscriber("s", "/t", 64)
    log = []
    rng = random.Random(3)
    for k in range(40):
        h = rng.choice([a, b])
        env = h.publish(k, float(k))
        log.append((env.publisher, env.seq))
    got = [(e.publisher, e.seq) for e in sub.drain()]
    assert got == log
    for name in "ab":
        seqs = [s for p, s in got if p == name]
        assert seqs == list(range(len(seqs)))


def test_clock_regression(bus):
    pub = bus.register_publisher("p", "/t")
    pub.publish(1, 5.0)
    pub.publish(2, 5.0)
    with pytest.raises(ValueError):
        pub.publish(3, 4.9)


def test_lookup_unknown_and_counts(bus):
    rec = bus.lookup("/nothing")
    assert rec.publishers == frozenset() and rec.subscribers == frozenset()
    bus.register_publisher("p", "/t")
    bus.register_subscriber("s1", "/t")
    bus.register_subscriber("s2", "/t")
    rec = bus.lookup("/t")
    assert (len(rec.publishers), len(rec.subscribers)) == (1, 2)


def test_shutdown_removes_node(bus):
    pub = bus.register_publisher("p", "/t")
    bus.register_subscriber("p", "/u")
    bus.register_subscriber("q", "/t")
    bus.shutdown_node("p")
    assert "p" not in bus.lookup("/t").publishers
    assert "p" not in bus.lookup("/u").subscribers
    assert bus.lookup("/t").subscribers == {"q"}
    with pytest.raises(ValueError):
        pub.publish("x", 0.0)


def test_take(bus):
    pub = bus.register_publisher("p", "/t")
    sub = bus.register_subscriber("s", "/t")
    assert sub.take() is None
    pub.publish("a", 0.0)
    assert sub.take().payload == "a"
    assert len(sub) == 0


def test_concurrent_publishers_lose_nothing(bus):
    sub = bus.register_subscriber("s", "/t", 10_000)
    handles = [bus.register_publisher(f"p{i}", "/t") for i in range(4)]

    def work(h):
        for k in range(500):
            h.publish(k, float(k))

    threads = [threading.Thread(target=work, args=(h,)) for h in handles]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    got = sub.drain()
    assert len(got) == 2000
    for h in handles:
        assert [e.seq for e in got if e.publisher == h.node_id] == list(range(500))


ops = st.lists(st.tuples(st.sampled_from(["pub", "sub", "unpub", "unsub", "shutdown"]),
                         st.sampled_from(["n0", "n1", "n2"]),
                         st.sampled_from(["/a", "/b"])), max_size=30)


@settings(max_examples=100)
@given(ops)
def test_registry_matches_history(seq):
    bus = Bus()
    model = {}  # (topic, role) -> set of nodes
    for op, node, topic in seq:
        if op == "pub":
            bus.register_publisher(node, topic)
            model.setdefault((topic, "p"), set()).add(node)
        elif op == "sub":
            bus.register_subscriber(node, topic)
            model.setdefault((topic, "s"), set()).add(node)
        elif op == "unpub":
            bus.unregister_publisher(node, topic)
            model.get((topic, "p"), set()).discard(node)
        elif op == "unsub":
            bus.unregister_subscriber(node, topic)
            model.get((topic, "s"), set()).discard(node)
        else:
            bus.shutdown_node(node)
            for nodes in model.values():
                nodes.discard(node)
    for topic in ("/a", "/b"):
        rec = bus.lookup(topic)
        assert rec.publishers == model.get((topic, "p"), set())
        assert rec.subscribers == model.get((topic, "s"), set())
