"""Line-oriented trace records and post-hoc trace auditing.

Line format::

    <op> <time> <node> <iface> <ch> <pkt_type> <src> <seq> [<reason>]

``time`` is integer microseconds. ``tune`` records carry sentinel packet
fields (``HELLO``, ``src = node``, ``seq = 0``). A ``d`` record whose ``src``
equals its ``node`` is a transmit request dropped because the interface was
already transmitting; every other ``d`` is a receive-side drop.
"""

from __future__ import annotations

import bisect
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

OPS = ("s", "r", "d", "tune")
PKT_TYPES = ("HELLO", "DATA")
REASONS = ("COLLISION", "BUSY", "MISMATCH")


class TraceFormatError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True, slots=True)
class TraceRecord:
    op: str
    time: int
    node: int
    iface: int
    channel: int
    pkt_type: str
    src: int
    seq: int
    reason: str | None = None

    def format(self) -> str:
        line = (
            f"{self.op} {self.time} {self.node} {self.iface} {self.channel} "
            f"{self.pkt_type} {self.src} {self.seq}"
        )
        if self.reason is not None:
            line += " " + self.reason
        return line

    @property
    def is_tx_drop(self) -> bool:
        return self.op == "d" and self.src == self.node


def tune_record(time: int, node: int, iface: int, channel: int) -> TraceRecord:
    return TraceRecord("tune", time, node, iface, channel, "HELLO", node, 0)


def _nonneg_int(tok: str, name: str, line_no: int) -> int:
    if not tok.isdigit() or (len(tok) > 1 and tok[0] == "0"):
        raise TraceFormatError(line_no, f"{name} must be a non-negative decimal integer, got {tok!r}")
    return int(tok)


def parse_line(line: str, line_no: int = 0) -> TraceRecord:
    if line.endswith("\n"):
        line = line[:-1]
    parts = line.split(" ")
    if " ".join(parts) != line or "" in parts:
        raise TraceFormatError(line_no, "fields must be separated by single spaces")
    if len(parts) not in (8, 9):
        raise TraceFormatError(line_no, f"expected 8 or 9 fields, got {len(parts)}")
    op, time, node, iface, ch, pkt_type, src, seq = parts[:8]
    reason = parts[8] if len(parts) == 9 else None
    if op not in OPS:
        raise TraceFormatError(line_no, f"unknown op {op!r}")
    if pkt_type not in PKT_TYPES:
        raise TraceFormatError(line_no, f"unknown packet type {pkt_type!r}")
    if op == "d":
        if reason not in REASONS:
            raise TraceFormatError(line_no, f"drop record needs a reason from {REASONS}")
    elif reason is not None:
        raise TraceFormatError(line_no, f"{op!r} records carry no reason")
    return TraceRecord(
        op,
        _nonneg_int(time, "time", line_no),
        _nonneg_int(node, "node", line_no),
        _nonneg_int(iface, "iface", line_no),
        _nonneg_int(ch, "channel", line_no),
        pkt_type,
        _nonneg_int(src, "src", line_no),
        _nonneg_int(seq, "seq", line_no),
        reason,
    )


def iter_records(lines: Iterable[str]) -> Iterator[TraceRecord]:
    for no, line in enumerate(lines, 1):
        yield parse_line(line, no)


def read_trace(path: str | Path) -> list[TraceRecord]:
    with open(path, encoding="ascii") as fh:
        return list(iter_records(fh))


class TraceWriter:
    """Single-writer trace sink.

    Writes to ``stream`` when given; records are also kept in memory when
    ``keep`` is set (tests and audits on in-memory runs).
    """

    def __init__(self, stream: IO[str] | None = None, keep: bool = False) -> None:
        self.stream = stream
        self.records: list[TraceRecord] | None = [] if keep else None
        self.count = 0

    def emit(self, record: TraceRecord) -> None:
        if self.stream is not None:
            self.stream.write(record.format() + "\n")
        if self.records is not None:
            self.records.append(record)
        self.count += 1

    def text(self) -> str:
        if self.records is None:
            raise RuntimeError("trace writer was not asked to keep records")
        return "".join(r.format() + "\n" for r in self.records)


# --- audit -----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    line_no: int
    kind: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line_no}: {self.kind}: {self.message}"


@dataclass
class AuditReport:
    lines: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(1 for v in self.violations if v.kind == kind)

    def add(self, line_no: int, kind: str, message: str) -> None:
        self.violations.append(Violation(line_no, kind, message))


@dataclass(frozen=True)
class Topology:
    """What the audit needs to replay deliveries from a trace."""

    positions: Sequence[tuple[float, float]]
    radio_range: float
    num_interfaces: int
    propagation_delay: int
    durations: dict[str, int]
    horizon: int | None = None

    def neighbours(self) -> list[list[int]]:
        out: list[list[int]] = []
        r = self.radio_range
        for i, (xi, yi) in enumerate(self.positions):
            out.append([
                j for j, (xj, yj) in enumerate(self.positions)
                if j != i and math.hypot(xi - xj, yi - yj) <= r
            ])
        return out


def audit(source: str | Path | Iterable[str], topology: Topology | None = None) -> AuditReport:
    """Check a trace for ordering, provenance and channel-match violations.

    With a ``topology`` the audit additionally replays every transmission
    against ranges and tuning history and flags deliveries that are missing,
    unaccounted for, or dropped/received without justification. It also checks
    that every Hello firing was replicated on all interfaces.
    """
    report = AuditReport()
    if isinstance(source, (str, Path)):
        with open(source, encoding="ascii") as fh:
            lines = fh.readlines()
    else:
        lines = list(source)
    report.lines = len(lines)

    records: list[tuple[int, TraceRecord]] = []
    for no, line in enumerate(lines, 1):
        try:
            records.append((no, parse_line(line, no)))
        except TraceFormatError as exc:
            report.add(no, "malformed", str(exc).split(": ", 1)[1])

    last_time = 0
    sent: set[tuple[int, int, int, str]] = set()
    # per interface: [channel now, time of latest tune, channel before that time]
    tuned: dict[tuple[int, int], list] = {}
    for no, rec in records:
        if rec.time < last_time:
            report.add(no, "time", f"time {rec.time} precedes {last_time}")
        last_time = max(last_time, rec.time)
        key = (rec.node, rec.iface)
        if rec.op == "s":
            sent.add((rec.src, rec.seq, rec.channel, rec.pkt_type))
        elif rec.op == "tune":
            state = tuned.get(key)
            if state is None:
                tuned[key] = [rec.channel, rec.time, None]
            elif rec.time > state[1]:
                tuned[key] = [rec.channel, rec.time, state[0]]
            else:
                state[0] = rec.channel
        elif rec.op == "r":
            if (rec.src, rec.seq, rec.channel, rec.pkt_type) not in sent:
                report.add(no, "provenance", f"receive of {rec.pkt_type} {rec.src}/{rec.seq} on ch {rec.channel} with no prior send")
            # a frame occupies [start, end): tunes stamped at the end instant do not apply to it
            state = tuned.get(key)
            current = None if state is None else (state[0] if state[1] < rec.time else state[2])
            if current != rec.channel:
                report.add(no, "channel", f"node {rec.node} iface {rec.iface} tuned to {current} received on ch {rec.channel}")

    if topology is not None:
        _check_replication(records, topology.num_interfaces, report)
        _check_deliveries(records, topology, report)
    report.violations.sort(key=lambda v: v.line_no)
    return report


def _check_replication(records: list[tuple[int, TraceRecord]], num_interfaces: int, report: AuditReport) -> None:
    copies: dict[tuple[int, int], list[int]] = defaultdict(list)
    for no, rec in records:
        if rec.op == "s" and rec.pkt_type == "HELLO":
            copies[(rec.src, rec.seq)].append(no)
    for (src, seq), nos in copies.items():
        if len(nos) != num_interfaces:
            report.add(nos[0], "replication", f"hello {src}/{seq} sent {len(nos)} times, expected {num_interfaces}")


@dataclass
class _Arrival:
    line_no: int
    node: int
    iface: int
    channel: int
    pkt_type: str
    src: int
    seq: int
    start: int
    end: int

    def outcome(self, op: str, time: int, reason: str | None) -> tuple:
        return (op, time, self.node, self.iface, self.channel, self.pkt_type, self.src, self.seq, reason)


def _check_deliveries(records: list[tuple[int, TraceRecord]], topo: Topology, report: AuditReport) -> None:
    neigh = topo.neighbours()
    tuned: dict[tuple[int, int], int] = {}
    # per-iface channel timeline: parallel lists of (time, channel after tune)
    tune_times: dict[tuple[int, int], list[int]] = defaultdict(list)
    tune_chans: dict[tuple[int, int], list[int]] = defaultdict(list)
    tx_by_iface: dict[tuple[int, int], list[tuple[int, int]]] = defaultdict(list)
    arrivals: list[_Arrival] = []
    outcomes: Counter = Counter()
    outcome_line: dict[tuple, int] = {}

    for no, rec in records:
        key = (rec.node, rec.iface)
        if rec.op == "tune":
            tuned[key] = rec.channel
            tune_times[key].append(rec.time)
            tune_chans[key].append(rec.channel)
        elif rec.op == "s":
            dur = topo.durations.get(rec.pkt_type)
            if dur is None:
                report.add(no, "topology", f"no airtime known for {rec.pkt_type}")
                continue
            tx_by_iface[key].append((rec.time, rec.time + dur))
            start = rec.time + topo.propagation_delay
            for m in neigh[rec.node] if rec.node < len(neigh) else ():
                for j in range(topo.num_interfaces):
                    if tuned.get((m, j)) == rec.channel:
                        arrivals.append(_Arrival(no, m, j, rec.channel, rec.pkt_type, rec.src, rec.seq, start, start + dur))
        elif rec.op in ("r", "d") and not rec.is_tx_drop:
            k = (rec.op, rec.time, rec.node, rec.iface, rec.channel, rec.pkt_type, rec.src, rec.seq, rec.reason)
            outcomes[k] += 1
            outcome_line.setdefault(k, no)

    def channel_at(key: tuple[int, int], t: int) -> int | None:
        i = bisect.bisect_right(tune_times[key], t)
        return tune_chans[key][i - 1] if i else None

    def changed_within(key: tuple[int, int], lo: int, hi: int, ch: int) -> int | None:
        times, chans = tune_times[key], tune_chans[key]
        i = bisect.bisect_right(times, lo)
        while i < len(times) and times[i] < hi:
            if chans[i] != ch:
                return times[i]
            i += 1
        return None

    expected: Counter = Counter()
    audible: dict[tuple[int, int], list[tuple[int, int, tuple[int, int]]]] = defaultdict(list)
    live: list[tuple[_Arrival, int]] = []
    for a in arrivals:
        key = (a.node, a.iface)
        if channel_at(key, a.start) != a.channel:
            expected[a.outcome("d", a.start, "MISMATCH")] += 1
            continue
        cut = changed_within(key, a.start, a.end, a.channel)
        aud_end = a.end if cut is None else cut
        audible[key].append((a.start, aud_end, (a.src, a.seq)))
        live.append((a, aud_end))

    max_dur = max(topo.durations.values(), default=0)
    starts: dict[tuple[int, int], list[int]] = {}
    for key, items in audible.items():
        items.sort()
        starts[key] = [s for s, _, _ in items]
    tx_starts = {key: [s for s, _ in txs] for key, txs in tx_by_iface.items()}

    for a, aud_end in live:
        key = (a.node, a.iface)
        reason = None
        if aud_end < a.end:
            reason = "MISMATCH"
        else:
            txs = tx_by_iface.get(key, [])
            i = bisect.bisect_left(tx_starts.get(key, []), a.start - max_dur)
            while i < len(txs) and txs[i][0] < a.end:
                if a.start < txs[i][1]:
                    reason = "BUSY"
                    break
                i += 1
            if reason is None:
                items = audible[key]
                i = bisect.bisect_left(starts[key], a.start - max_dur)
                while i < len(items) and items[i][0] < aud_end:
                    _, e, pid = items[i]
                    if pid != (a.src, a.seq) and a.start < e:
                        reason = "COLLISION"
                        break
                    i += 1
        expected[a.outcome("r" if reason is None else "d", a.end, reason)] += 1

    for k in sorted(set(expected) | set(outcomes), key=lambda k: (k[1], k[2], k[3], k[6], k[7], k[0])):
        if topo.horizon is not None and k[1] > topo.horizon:
            continue
        got, want = outcomes.get(k, 0), expected.get(k, 0)
        if got == want:
            continue
        desc = f"{k[0]} {k[5]} {k[6]}/{k[7]} at node {k[2]} iface {k[3]} ch {k[4]} t={k[1]}" + (f" {k[8]}" if k[8] else "")
        if got < want:
            kind = "missing-reception" if k[0] == "r" else "missing-drop"
            report.add(outcome_line.get(k, 0), kind, f"expected {want}x {desc}, found {got}")
        else:
            report.add(outcome_line[k], "unexpected", f"found {got}x {desc}, expected {want}")
