"""Replicated in-memory pub/sub: replication, failover, consumer groups."""

import threading

import pytest

from sensorcep.broker import (
    Cluster,
    FaultEvent,
    PartitionUnavailableError,
    UnderReplicatedError,
    UnknownBrokerError,
    UnknownTopicError,
    parse_fault_schedule,
    run_schedule,
)


def cluster_with(topic="events", partitions=1, **kwargs):
    cluster = Cluster(**kwargs)
    cluster.create_topic(topic, partitions=partitions)
    return cluster


def logs_for(cluster, topic="events", partition=0):
    key = (topic, partition)
    return {bid: list(node.logs.get(key, [])) for bid, node in cluster.brokers.items()}


def test_publish_lands_on_exactly_two_replicas():
    cluster = cluster_with()
    offset = cluster.publish("events", b"m0")
    assert offset == 0
    logs = logs_for(cluster)
    holders = [bid for bid, log in logs.items() if log]
    assert len(holders) == 2
    for bid in holders:
        assert logs[bid][0].payload == b"m0"
        assert logs[bid][0].offset == 0


def test_offsets_are_dense_per_partition():
    cluster = cluster_with()
    offsets = [cluster.publish("events", b"m%d" % i) for i in range(10)]
    assert offsets == list(range(10))


def test_unknown_topic_and_broker():
    cluster = Cluster()
    with pytest.raises(UnknownTopicError):
        cluster.publish("nope", b"x")
    with pytest.raises(UnknownTopicError):
        cluster.consume("nope", "g")
    with pytest.raises(UnknownBrokerError):
        cluster.fail_broker("Z")


def test_replication_factor_validation():
    with pytest.raises(ValueError):
        Cluster(replication_factor=4)
    with pytest.raises(ValueError):
        Cluster(replication_factor=0)
    with pytest.raises(ValueError):
        Cluster(broker_ids=())


def test_consume_advances_group_offset():
    cluster = cluster_with()
    for i in range(5):
        cluster.publish("events", b"m%d" % i)
    first = cluster.consume("events", "g", max_messages=2)
    assert [m.payload for m in first] == [b"m0", b"m1"]
    second = cluster.consume("events", "g", max_messages=10)
    assert [m.payload for m in second] == [b"m2", b"m3", b"m4"]
    assert cluster.consume("events", "g") == []
    assert cluster.committed("g", "events") == 5


def test_groups_are_isolated():
    cluster = cluster_with()
    cluster.publish("events", b"m0")
    assert [m.payload for m in cluster.consume("events", "a")] == [b"m0"]
    assert [m.payload for m in cluster.consume("events", "b")] == [b"m0"]


def test_failed_broker_does_not_lose_messages():
    cluster = cluster_with()
    for i in range(100):
        cluster.publish("events", b"m%d" % i)
    cluster.fail_broker("A")
    got = []
    while True:
        batch = cluster.consume("events", "g", max_messages=17)
        if not batch:
            break
        got.extend(batch)
    assert [m.payload for m in got] == [b"m%d" % i for i in range(100)]
    assert [m.offset for m in got] == list(range(100))


def test_fail_recover_without_traffic_changes_nothing():
    cluster = cluster_with()
    cluster.publish("events", b"m0")
    before = logs_for(cluster)
    cluster.fail_broker("B")
    cluster.recover_broker("B")
    assert logs_for(cluster) == before


def test_recovered_broker_resyncs_to_log_end():
    cluster = cluster_with()
    cluster.publish("events", b"m0")
    cluster.fail_broker("A")
    for i in range(1, 51):
        cluster.publish("events", b"m%d" % i)
    cluster.recover_broker("A")
    logs = logs_for(cluster)
    lengths = {bid: len(log) for bid, log in logs.items()}
    # every broker that holds the partition is current after recovery
    current = [bid for bid, n in lengths.items() if n == 51]
    assert len(current) >= 2
    reference = [m.payload for m in logs[current[0]]]
    for bid in current[1:]:
        assert [m.payload for m in logs[bid]] == reference


def test_two_failures_block_publishing_until_recovery():
    cluster = cluster_with()
    cluster.publish("events", b"m0")
    cluster.fail_broker("A")
    cluster.fail_broker("B")
    with pytest.raises(UnderReplicatedError):
        cluster.publish("events", b"m1")
    cluster.recover_broker("A")
    assert cluster.publish("events", b"m1") == 1


def test_consume_unavailable_when_no_current_replica_is_live():
    cluster = cluster_with()
    cluster.publish("events", b"m0")
    holders = [bid for bid, log in logs_for(cluster).items() if log]
    for bid in holders:
        cluster.fail_broker(bid)
    with pytest.raises(PartitionUnavailableError):
        cluster.consume("events", "g")
    cluster.recover_broker(holders[0])
    assert [m.payload for m in cluster.consume("events", "g")] == [b"m0"]


def test_round_robin_partition_assignment():
    cluster = cluster_with(partitions=2)
    for i in range(6):
        cluster.publish("events", b"m%d" % i)
    part0 = cluster.consume_partition("events", 0, "g", 10)
    part1 = cluster.consume_partition("events", 1, "g", 10)
    assert [m.payload for m in part0] == [b"m0", b"m2", b"m4"]
    assert [m.payload for m in part1] == [b"m1", b"m3", b"m5"]
    assert [m.offset for m in part1] == [0, 1, 2]


def test_publish_to_chooses_partition():
    cluster = cluster_with(partitions=3)
    cluster.publish_to("events", 2, b"direct")
    assert cluster.consume_partition("events", 2, "g", 5)[0].payload == b"direct"
    with pytest.raises(UnknownTopicError):
        cluster.publish_to("events", 9, b"x")


def test_parse_fault_schedule_round_trip():
    text = """# comment
    at 10 fail A

    at 3 recover B
    AT 5 FAIL C
    """
    events = parse_fault_schedule(text)
    assert events == [FaultEvent(3, "recover", "B"),
                      FaultEvent(5, "fail", "C"),
                      FaultEvent(10, "fail", "A")]


def test_parse_fault_schedule_rejects_garbage():
    with pytest.raises(ValueError) as err:
        parse_fault_schedule("at ten fail A")
    assert "line 1" in str(err.value)


def test_run_schedule_applies_faults_before_publish():
    cluster = cluster_with()
    schedule = [FaultEvent(2, "fail", "A"), FaultEvent(4, "recover", "A")]
    offsets = run_schedule(cluster, "events", [b"m%d" % i for i in range(5)], schedule)
    assert offsets == list(range(5))
    assert cluster.brokers["A"].alive  # recovered before the 4th publish
    got = cluster.consume("events", "g", max_messages=50)
    assert [m.payload for m in got] == [b"m%d" % i for i in range(5)]


def test_concurrent_publishers_and_consumer():
    cluster = cluster_with()
    per_thread = 200
    def produce(prefix):
        for i in range(per_thread):
            cluster.publish("events", b"%s-%d" % (prefix, i))
    threads = [threading.Thread(target=produce, args=(name,))
               for name in (b"x", b"y")]
    for t in threads:
        t.start()
    got = []
    while len(got) < 2 * per_thread or any(t.is_alive() for t in threads):
        got.extend(cluster.consume("events", "g", max_messages=64))
    for t in threads:
        t.join()
    got.extend(cluster.consume("events", "g", max_messages=1000))
    payloads = [m.payload for m in got]
    assert len(payloads) == 2 * per_thread
    assert len(set(payloads)) == 2 * per_thread
    # per-producer order is preserved within the shared partition
    xs = [p for p in payloads if p.startswith(b"x")]
    assert xs == sorted(xs, key=lambda p: int(p.split(b"-")[1]))
