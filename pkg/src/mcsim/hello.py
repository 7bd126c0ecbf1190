"""Hello beaconing over every interface, reception, and neighbour tables."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .engine import Engine, Event, ms_to_us
from .policy import ChannelPolicy, Default, apply_rx_channel_rule, header_stamp, select_tx_channel
from .radio import HELLO_SIZE_BYTES, Interface, Medium, Packet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HelloConfig:
    enabled: bool = False
    interval_ms: int = 1000
    jitter_ms: int = 100
    allowed_loss: int = 3
    size_bytes: int = HELLO_SIZE_BYTES

    def __post_init__(self) -> None:
        if self.interval_ms <= 0:
            raise ValueError("hello interval must be > 0")
        if self.jitter_ms < 0:
            raise ValueError("hello jitter must be >= 0")
        if self.allowed_loss < 1:
            raise ValueError("allowed_loss must be >= 1")

    @property
    def interval_us(self) -> int:
        return ms_to_us(self.interval_ms)

    @property
    def jitter_us(self) -> int:
        return ms_to_us(self.jitter_ms)

    @property
    def hold_us(self) -> int:
        return self.allowed_loss * self.interval_us


@dataclass
class NeighborEntry:
    neighbor: int
    last_heard: int
    heard_on_iface: int
    heard_on_channel: int
    expiry: Event | None = None


class HelloProtocol:
    def __init__(self, engine: Engine, medium: Medium, config: HelloConfig, policy: ChannelPolicy | None = None) -> None:
        self.engine = engine
        self.medium = medium
        self.config = config
        self.policy = policy if policy is not None else Default()
        n = len(medium.ifaces)
        self.tables: list[dict[int, NeighborEntry]] = [{} for _ in range(n)]
        self.ever_heard: list[set[int]] = [set() for _ in range(n)]
        self._hello_seq = [0] * n
        self._data_seq = [0] * n
        self._last_seq: list[dict[int, int]] = [{} for _ in range(n)]
        self.firings = 0
        medium.on_receive = self._on_receive

    def _jitter(self, node: int) -> int:
        j = self.config.jitter_us
        return self.engine.stream(node).randint(0, j) if j else 0

    def start(self) -> None:
        """Arm the first HelloTimer of every node at t = now + jitter."""
        if not self.config.enabled:
            return
        for node in range(len(self.tables)):
            self.engine.schedule_in(self._jitter(node), "HelloTimer", self._fire, node)

    def _fire(self, node: int) -> None:
        self.firings += 1
        self.send_hello(node)

    def send_hello(self, node: int) -> list[Event]:
        """Send one Hello copy per interface and re-arm the node's timer."""
        if not self.config.enabled:
            return []
        seq = self._hello_seq[node]
        self._hello_seq[node] = seq + 1
        now = self.engine.now
        policy = self.policy
        events = []
        for iface in self.medium.ifaces[node]:
            ch = select_tx_channel(policy, node, iface)
            pkt = Packet("HELLO", node, seq, header_stamp(policy, node, ch), now, self.config.size_bytes)
            events.extend(self.medium.transmit(iface, pkt, ch))
        self.engine.schedule_in(self.config.interval_us + self._jitter(node), "HelloTimer", self._fire, node)
        return events

    def _on_receive(self, iface: Interface, pkt: Packet) -> None:
        if pkt.pkt_type != "HELLO":
            return
        self.recv_hello(iface.node, pkt, iface.index)
        target = apply_rx_channel_rule(self.policy, iface.node, iface, pkt)
        if target is not None:
            self.medium.retune(iface, target)

    def recv_hello(self, node: int, pkt: Packet, via_iface: int) -> str:
        """Update ``node``'s table for a received Hello.

        Returns ``"new"``, ``"refresh"`` or ``"duplicate"``. A copy of an
        already-seen ``(src, seq)`` only bumps the duplicate counter.
        """
        last = self._last_seq[node].get(pkt.src)
        if last is not None and pkt.seq <= last:
            self.medium.counters[(node, via_iface)].duplicates += 1
            return "duplicate"
        self._last_seq[node][pkt.src] = pkt.seq
        now = self.engine.now
        table = self.tables[node]
        entry = table.get(pkt.src)
        channel = self.medium.ifaces[node][via_iface].channel
        delta = "refresh"
        if entry is None:
            entry = table[pkt.src] = NeighborEntry(pkt.src, now, via_iface, channel)
            self.ever_heard[node].add(pkt.src)
            delta = "new"
            log.debug("t=%d node %d discovered %d on iface %d", now, node, pkt.src, via_iface)
        else:
            entry.last_heard = now
            entry.heard_on_iface = via_iface
            entry.heard_on_channel = channel
            if entry.expiry is not None:
                self.engine.cancel(entry.expiry)
        entry.expiry = self.engine.schedule_in(self.config.hold_us, "NeighborExpiry", self._expire, node, pkt.src)
        return delta

    def _expire(self, node: int, neighbor: int) -> None:
        self.tables[node].pop(neighbor, None)

    def neighbors(self, node: int) -> tuple[int, ...]:
        return tuple(sorted(self.tables[node]))

    def broadcast_all_channels(self, node: int, payload_size: int) -> list[Event]:
        """Send one copy of a DATA packet on every channel.

        Channels are dealt to interfaces round-robin: round ``r`` sends
        channel ``r * num_interfaces + i`` on interface ``i``, and rounds
        follow each other back to back.
        """
        medium = self.medium
        num_channels = medium.num_channels
        ifaces = medium.ifaces[node]
        seq = self._data_seq[node]
        self._data_seq[node] = seq + 1
        now = self.engine.now
        dur = medium.duration(Packet("DATA", node, seq, 0, now, payload_size))
        events = []
        for ch in range(num_channels):
            rnd, i = divmod(ch, len(ifaces))
            pkt = Packet("DATA", node, seq, ch, now, payload_size)
            events.append(self.engine.schedule(now + rnd * dur, "Transmit", medium.transmit, ifaces[i], pkt, ch))
        return events
