import pytest

from src.app.ledger.chain import validate_chain
from src.app.models.pydantic.messages import BlockAck, BlockDeliver, Redirect, SubmitAck, SubmitRejected
from src.app.models.pydantic.network import FREE_COMPUTE, LinkModel, peer
from src.app.models.pydantic.ordering import BlockCutPolicy, Envelope, RaftTiming
from src.app.network.simulator import Network, SimNode
from src.app.nodes import NoLeader, OrdererNode
from src.app.services.topology_service import build_deployment

POLICY = BlockCutPolicy(max_message_count=10, max_bytes=512 * 1024, batch_timeout_ms=250)


class BlockSink(SimNode):
    """Stands in for a committing peer: keeps delivered blocks and acks them."""

    def __init__(self):
        super().__init__(peer(0))
        self.blocks = {}

    def on_message(self, src, message):
        if isinstance(message, BlockDeliver):
            self.blocks.setdefault(message.block.number, message.block)
            self.send(src, BlockAck(peer=0, next_expected=len(self.blocks)))


def build(seed=0, size=3):
    network = Network(seed=seed, link=LinkModel(base_latency_ms=5, jitter_ms=2, loss_rate=0))
    sink = network.add_node(BlockSink())
    orderers = [
        network.add_node(OrdererNode(i, size, [sink.address], POLICY, RaftTiming(), seed=seed)) for i in range(size)
    ]
    return network, sink, orderers


def leaders(orderers):
    return [o for o in orderers if o.is_leader and not o.crashed]


def elect(network, orderers):
    network.run_until(lambda: len(leaders(orderers)) == 1, deadline=network.now + 5_000)
    return leaders(orderers)[0]


def test_one_leader_is_elected(make_transactions):
    network, _, orderers = build()
    with pytest.raises(NoLeader):
        orderers[0].submit_envelope(Envelope(transaction=make_transactions(1)[0]))
    leader = elect(network, orderers)
    network.run_for(500)
    assert leaders(orderers) == [leader]
    followers = [o for o in orderers if o is not leader]
    assert all(o.leader_hint == leader.address for o in followers)


def test_followers_redirect_and_leaders_ack(make_transactions):
    network, _, orderers = build(seed=1)
    leader = elect(network, orderers)
    network.run_for(200)
    tx = make_transactions(1)[0]
    follower = next(o for o in orderers if o is not leader)
    reply = follower.submit_envelope(Envelope(transaction=tx))
    assert isinstance(reply, Redirect) and reply.leader == leader.address
    assert leader.submit_envelope(Envelope(transaction=tx)) == SubmitAck(txid=tx.id)

    forged = tx.model_copy(update={"id": b"\x05" * 32})
    assert isinstance(leader.submit_envelope(Envelope(transaction=forged)), SubmitRejected)


def test_blocks_are_delivered_and_identical_on_every_orderer(make_transactions):
    network, sink, orderers = build(seed=2)
    leader = elect(network, orderers)
    for tx in make_transactions(13):
        leader.submit_envelope(Envelope(transaction=tx))
    network.run_until(lambda: len(sink.blocks) == 2, deadline=network.now + 2_000)
    network.run_for(300)
    delivered = [sink.blocks[n] for n in sorted(sink.blocks)]
    assert [len(b.transactions) for b in delivered] == [10, 3]
    assert validate_chain(delivered) is None
    assert all(o.blocks == delivered for o in orderers)


def test_leader_crash_elects_a_successor_that_keeps_cutting(make_transactions):
    network, sink, orderers = build(seed=3)
    first = elect(network, orderers)
    txs = make_transactions(12)
    for tx in txs[:10]:
        first.submit_envelope(Envelope(transaction=tx))
    network.run_until(lambda: len(sink.blocks) == 1, deadline=network.now + 2_000)

    term = first.raft.current_term
    network.crash(first.address)
    second = elect(network, orderers)
    assert second is not first
    assert second.raft.current_term > term
    for tx in txs[10:]:
        second.submit_envelope(Envelope(transaction=tx))
    network.run_until(lambda: len(sink.blocks) == 2, deadline=network.now + 2_000)
    assert len(sink.blocks[1].transactions) == 2

    network.restart(first.address)
    network.run_for(1_000)
    assert first.blocks == [sink.blocks[0], sink.blocks[1]]


def submit_all(built, transactions):
    leader = built.wait_for_leader(built.network.now + 5_000)
    for tx in transactions:
        assert leader.submit_envelope(Envelope(transaction=tx)) == SubmitAck(txid=tx.id)


def test_peers_commit_the_same_blocks_through_orderer_crash_and_partition(make_transactions):
    built = build_deployment(seed=4, cost=FREE_COMPUTE, link=LinkModel(base_latency_ms=5, jitter_ms=2, loss_rate=0))
    network = built.network
    network.start()
    txs = make_transactions(30)

    submit_all(built, txs[:10])
    network.run_for(500)
    first = built.leader()
    network.crash(first.address)
    submit_all(built, txs[10:20])
    network.run_for(500)
    network.restart(first.address)
    network.run_for(500)

    leader = built.wait_for_leader(network.now + 5_000)
    isolated = next(o for o in built.orderers if o is not leader)
    network.partition([[isolated.address]])
    submit_all(built, txs[20:])
    network.run_for(500)
    network.heal()
    network.run_until(
        lambda: all(p.height == 3 for p in built.peers) and all(len(o.blocks) == 3 for o in built.orderers),
        deadline=network.now + 5_000,
    )

    chain = built.peers[0].chain
    assert validate_chain(chain) is None
    assert [tx.id for block in chain for tx in block.transactions] == [tx.id for tx in txs]
    assert all(p.chain == chain for p in built.peers)
    assert len(set(built.state_hashes().values())) == 1


def test_dropped_block_deliveries_are_resent_on_heartbeat(make_transactions):
    built = build_deployment(seed=6, cost=FREE_COMPUTE, link=LinkModel(base_latency_ms=5, jitter_ms=0, loss_rate=0))
    network = built.network
    send = network.send
    dropped = []

    def lossy_send(src, dst, message):
        if isinstance(message, BlockDeliver) and message.block.number == 0 and dst not in dropped:
            dropped.append(dst)
            return
        send(src, dst, message)

    network.send = lossy_send
    network.start()
    submit_all(built, make_transactions(20))
    network.run_until(lambda: all(p.height == 2 for p in built.peers), deadline=network.now + 2_000)

    assert set(dropped) == set(built.peer_addresses)
    assert all(p.chain == built.peers[0].chain for p in built.peers)
    assert [b.number for b in built.peers[0].chain] == [0, 1]


def test_peers_converge_over_a_lossy_link(make_transactions):
    built = build_deployment(seed=8, cost=FREE_COMPUTE, link=LinkModel(base_latency_ms=5, jitter_ms=2, loss_rate=0.1))
    network = built.network
    network.start()
    submit_all(built, make_transactions(25))
    network.run_for(3_000)
    leader = built.wait_for_leader(network.now + 5_000)
    height = len(leader.blocks)
    network.run_until(lambda: all(p.height == height for p in built.peers), deadline=network.now + 5_000)

    assert height >= 1
    assert network.stats.dropped_loss > 0
    headers = [b.header for b in leader.blocks]
    assert all([b.header for b in p.chain] == headers for p in built.peers)
    assert len(set(built.state_hashes().values())) == 1
