"""Channels, interfaces, unit-disk propagation and the reception rule.

A frame is received by an interface only if the interface stays tuned to the
frame's channel for the whole airtime, is not transmitting at any point of
it, and hears no overlapping frame of a different packet on that channel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .engine import Engine, Event
from .stats import CounterSet
from .trace import TraceRecord, TraceWriter, tune_record

DEFAULT_NUM_CHANNELS = 16
DEFAULT_RANGE_M = 250.0
DEFAULT_BITRATE = 2_000_000
DEFAULT_PROPAGATION_US = 1
HELLO_SIZE_BYTES = 64


class Outcome(enum.Enum):
    RECEIVED = "received"
    COLLIDED = "collided"
    IGNORED = "ignored"


class IfaceState(enum.Enum):
    IDLE = "idle"
    TRANSMITTING = "transmitting"
    RECEIVING = "receiving"


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"position must be finite, got ({self.x}, {self.y})")


def in_range(a: Position, b: Position, radio_range: float) -> bool:
    return math.hypot(a.x - b.x, a.y - b.y) <= radio_range


def airtime_us(size_bytes: int, bitrate: int) -> int:
    """Transmission duration in whole microseconds, rounded up."""
    return -(-size_bytes * 8 * 1_000_000 // bitrate)


@dataclass(slots=True)
class Packet:
    pkt_type: str
    src: int
    seq: int
    channel_index: int
    sent_at: int
    size_bytes: int = HELLO_SIZE_BYTES


class Interface:
    __slots__ = ("node", "index", "channel", "tx_until", "arrivals")

    def __init__(self, node: int, index: int, channel: int) -> None:
        self.node = node
        self.index = index
        self.channel = channel
        self.tx_until = 0
        # frames currently audible on this interface
        self.arrivals: list[Arrival] = []

    def state(self, now: int) -> IfaceState:
        if now < self.tx_until:
            return IfaceState.TRANSMITTING
        if any(a.end > now and not a.busy for a in self.arrivals):
            return IfaceState.RECEIVING
        return IfaceState.IDLE

    def __repr__(self) -> str:
        return f"Interface(node={self.node}, index={self.index}, channel={self.channel})"


@dataclass(slots=True)
class Transmission:
    iface: Interface
    channel: int
    packet: Packet
    start: int
    end: int


@dataclass(slots=True)
class Arrival:
    tx: Transmission
    iface: Interface
    start: int
    end: int
    collided: bool = False
    busy: bool = False
    mismatch: bool = False
    outcome: Outcome | None = None
    reason: str | None = None


ReceiveHandler = Callable[[Interface, Packet], None]


class Medium:
    """The shared radio medium for one run."""

    def __init__(
        self,
        engine: Engine,
        positions: Sequence[Position],
        num_interfaces: int,
        num_channels: int = DEFAULT_NUM_CHANNELS,
        radio_range: float = DEFAULT_RANGE_M,
        bitrate: int = DEFAULT_BITRATE,
        propagation_delay: int = DEFAULT_PROPAGATION_US,
        initial_channels: Sequence[Sequence[int]] | None = None,
        trace: TraceWriter | None = None,
        log_deliveries: bool = False,
    ) -> None:
        if num_channels < 1:
            raise ValueError("num_channels must be >= 1")
        if num_interfaces < 1:
            raise ValueError("num_interfaces must be >= 1")
        self.engine = engine
        self.positions = list(positions)
        self.num_interfaces = num_interfaces
        self.num_channels = num_channels
        self.radio_range = radio_range
        self.bitrate = bitrate
        self.propagation_delay = propagation_delay
        self.trace = trace if trace is not None else TraceWriter()
        self.on_receive: ReceiveHandler | None = None
        self.deliveries: list[Arrival] | None = [] if log_deliveries else None

        n = len(self.positions)
        if initial_channels is None:
            initial_channels = [[i % num_channels for i in range(num_interfaces)]] * n
        self.ifaces: list[list[Interface]] = []
        for node in range(n):
            chans = initial_channels[node]
            if len(chans) != num_interfaces:
                raise ValueError(f"node {node}: expected {num_interfaces} initial channels, got {len(chans)}")
            for ch in chans:
                self._check_channel(ch)
            self.ifaces.append([Interface(node, i, ch) for i, ch in enumerate(chans)])
        self.counters: dict[tuple[int, int], CounterSet] = {
            (node, i): CounterSet() for node in range(n) for i in range(num_interfaces)
        }
        self.neighbours: list[list[int]] = [
            [m for m in range(n) if m != node and in_range(self.positions[node], self.positions[m], radio_range)]
            for node in range(n)
        ]

    def _check_channel(self, channel: int) -> None:
        if not 0 <= channel < self.num_channels:
            raise ValueError(f"channel {channel} outside [0, {self.num_channels})")

    def in_range(self, a: int, b: int) -> bool:
        return in_range(self.positions[a], self.positions[b], self.radio_range)

    def duration(self, packet: Packet) -> int:
        return airtime_us(packet.size_bytes, self.bitrate)

    def announce_tuning(self) -> None:
        """Trace the initial channel of every interface (not counted as retunes)."""
        now = self.engine.now
        for node_ifaces in self.ifaces:
            for iface in node_ifaces:
                self.trace.emit(tune_record(now, iface.node, iface.index, iface.channel))

    def _emit(self, op: str, iface: Interface, channel: int, packet: Packet, reason: str | None = None) -> None:
        self.trace.emit(TraceRecord(
            op, self.engine.now, iface.node, iface.index, channel,
            packet.pkt_type, packet.src, packet.seq, reason,
        ))

    def transmit(self, iface: Interface, packet: Packet, channel: int) -> list[Event]:
        """Put ``packet`` on the air from ``iface`` on ``channel``.

        A request made while the interface is still transmitting is dropped.
        A request made while it is receiving aborts those receptions.
        """
        self._check_channel(channel)
        engine = self.engine
        now = engine.now
        counters = self.counters[(iface.node, iface.index)]
        if now < iface.tx_until:
            counters.tx_dropped += 1
            self._emit("d", iface, channel, packet, "BUSY")
            return []
        for a in iface.arrivals:
            if a.end > now:
                a.busy = True
        dur = self.duration(packet)
        tx = Transmission(iface, channel, packet, now, now + dur)
        iface.tx_until = tx.end
        counters.sends += 1
        self._emit("s", iface, channel, packet)

        events = []
        at = now + self.propagation_delay
        for m in self.neighbours[iface.node]:
            for rx in self.ifaces[m]:
                if rx.channel == channel:
                    events.append(engine.schedule(at, "DeliverStart", self._deliver_start, rx, tx))
        return events

    def _deliver_start(self, rx: Interface, tx: Transmission) -> None:
        now = self.engine.now
        counters = self.counters[(rx.node, rx.index)]
        counters.deliver_starts += 1
        arrival = Arrival(tx, rx, now, now + (tx.end - tx.start))
        if rx.channel != tx.channel:
            self._finish(arrival, Outcome.IGNORED, "MISMATCH")
            return
        if now < rx.tx_until:
            arrival.busy = True
        pid = (tx.packet.src, tx.packet.seq)
        live = []
        for other in rx.arrivals:
            if other.end <= now:
                continue
            live.append(other)
            if (other.tx.packet.src, other.tx.packet.seq) != pid:
                other.collided = True
                arrival.collided = True
        live.append(arrival)
        rx.arrivals = live
        counters.in_flight += 1
        self.engine.schedule(arrival.end, "DeliverEnd", self._deliver_end, arrival)

    def _deliver_end(self, arrival: Arrival) -> None:
        rx = arrival.iface
        try:
            rx.arrivals.remove(arrival)
        except ValueError:
            pass  # already dropped from the audible set by a retune
        self.counters[(rx.node, rx.index)].in_flight -= 1
        if arrival.mismatch:
            self._finish(arrival, Outcome.IGNORED, "MISMATCH")
        elif arrival.busy:
            self._finish(arrival, Outcome.IGNORED, "BUSY")
        elif arrival.collided:
            self._finish(arrival, Outcome.COLLIDED, "COLLISION")
        else:
            self._finish(arrival, Outcome.RECEIVED, None)
            if self.on_receive is not None:
                self.on_receive(rx, arrival.tx.packet)

    def _finish(self, arrival: Arrival, outcome: Outcome, reason: str | None) -> None:
        arrival.outcome = outcome
        arrival.reason = reason
        rx = arrival.iface
        counters = self.counters[(rx.node, rx.index)]
        if outcome is Outcome.RECEIVED:
            counters.receptions += 1
            self._emit("r", rx, arrival.tx.channel, arrival.tx.packet)
        else:
            if reason == "MISMATCH":
                counters.drops_mismatch += 1
            elif reason == "BUSY":
                counters.drops_busy += 1
            else:
                counters.drops_collision += 1
            self._emit("d", rx, arrival.tx.channel, arrival.tx.packet, reason)
        if self.deliveries is not None:
            self.deliveries.append(arrival)

    def retune(self, iface: Interface, channel: int) -> Interface:
        """Tune ``iface`` to ``channel``; frames in flight on the old channel are lost."""
        self._check_channel(channel)
        now = self.engine.now
        if channel != iface.channel:
            keep = []
            for a in iface.arrivals:
                if a.end > now:
                    a.mismatch = True
                else:
                    keep.append(a)
            iface.arrivals = keep
            iface.channel = channel
        self.counters[(iface.node, iface.index)].retunes += 1
        self.trace.emit(tune_record(now, iface.node, iface.index, channel))
        return iface
