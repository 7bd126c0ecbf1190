"""Channel-selection policies.

``Default``
    transmit on whatever channel the interface is tuned to.
``ExplicitStamp(c)``
    every copy is stamped with, and sent on, channel ``c``.
``StaticMap(map, fallback)``
    all interfaces of a node are pinned to ``map[node]`` (or ``fallback``) at
    start-up and transmit there.
``HeaderDriven(stamps)``
    transmit on the tuned channel; a receiving interface retunes to the
    ``channel_index`` carried in each Hello it receives. ``stamps`` holds the
    per-node channel decision written into outgoing headers; nodes without an
    entry stamp their transmit channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

from .radio import Interface, Packet


@dataclass(frozen=True)
class Default:
    pass


@dataclass(frozen=True)
class ExplicitStamp:
    channel: int


@dataclass(frozen=True)
class StaticMap:
    mapping: Mapping[int, int]
    fallback: int

    def channel_for(self, node: int) -> int:
        return self.mapping.get(node, self.fallback)


@dataclass(frozen=True)
class HeaderDriven:
    stamps: Mapping[int, int] = field(default_factory=dict)


ChannelPolicy = Union[Default, ExplicitStamp, StaticMap, HeaderDriven]


def referenced_channels(policy: ChannelPolicy) -> list[int]:
    if isinstance(policy, ExplicitStamp):
        return [policy.channel]
    if isinstance(policy, StaticMap):
        return [policy.fallback, *policy.mapping.values()]
    if isinstance(policy, HeaderDriven):
        return list(policy.stamps.values())
    return []


def referenced_nodes(policy: ChannelPolicy) -> list[int]:
    if isinstance(policy, StaticMap):
        return list(policy.mapping)
    if isinstance(policy, HeaderDriven):
        return list(policy.stamps)
    return []


def select_tx_channel(policy: ChannelPolicy, node: int, iface: Interface) -> int:
    if isinstance(policy, ExplicitStamp):
        return policy.channel
    if isinstance(policy, StaticMap):
        return policy.channel_for(node)
    return iface.channel


def header_stamp(policy: ChannelPolicy, node: int, tx_channel: int) -> int:
    """Channel decision written into the ``channel_index`` header field."""
    if isinstance(policy, HeaderDriven):
        return policy.stamps.get(node, tx_channel)
    return tx_channel


def initial_retunes(policy: ChannelPolicy, node: int, num_interfaces: int) -> list[tuple[int, int]]:
    """(iface, channel) retunes installed at scenario start."""
    if isinstance(policy, StaticMap):
        ch = policy.channel_for(node)
        return [(i, ch) for i in range(num_interfaces)]
    return []


def apply_rx_channel_rule(policy: ChannelPolicy, node: int, iface: Interface, pkt: Packet) -> int | None:
    """Channel the receiving interface should move to after ``pkt``, if any.

    Only header-driven selection reacts to traffic; the static map acts once
    at start-up through :func:`initial_retunes`.
    """
    if isinstance(policy, HeaderDriven) and pkt.pkt_type == "HELLO":
        return pkt.channel_index
    return None
