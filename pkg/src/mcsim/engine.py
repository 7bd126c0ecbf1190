"""Deterministic discrete-event scheduler.

Virtual time is an integer count of microseconds. Events with equal
timestamps run in the order they were scheduled.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

US_PER_MS = 1_000
US_PER_S = 1_000_000


def ms_to_us(ms: int) -> int:
    return int(ms) * US_PER_MS


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current time."""


@dataclass(eq=False, slots=True)
class Event:
    fire_at: int
    seq: int
    kind: str
    callback: Callable[..., Any] = field(repr=False)
    args: tuple = field(default=(), repr=False)
    cancelled: bool = False


class Engine:
    def __init__(self, seed: int = 0) -> None:
        self.now = 0
        self.seed = seed
        self._queue: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._streams: dict[int, random.Random] = {}
        self.executed = 0
        self.on_execute: Callable[[Event], None] | None = None

    def __len__(self) -> int:
        return sum(1 for _, _, ev in self._queue if not ev.cancelled)

    def schedule(self, fire_at: int, kind: str, callback: Callable[..., Any], *args: Any) -> Event:
        if fire_at < self.now:
            raise SchedulingError(f"cannot schedule {kind} at {fire_at}us, now is {self.now}us")
        ev = Event(fire_at, self._seq, kind, callback, args)
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, ev.seq, ev))
        return ev

    def schedule_in(self, delay: int, kind: str, callback: Callable[..., Any], *args: Any) -> Event:
        return self.schedule(self.now + delay, kind, callback, *args)

    @staticmethod
    def cancel(event: Event) -> None:
        event.cancelled = True

    def run_until(self, t_end: int) -> int:
        """Execute every pending event with ``fire_at <= t_end``.

        Returns the number of events executed by this call. The clock is left
        at ``t_end`` so that later scheduling stays relative to the horizon.
        """
        queue = self._queue
        pop = heapq.heappop
        hook = self.on_execute
        count = 0
        while queue and queue[0][0] <= t_end:
            fire_at, _, ev = pop(queue)
            if ev.cancelled:
                continue
            self.now = fire_at
            if hook is not None:
                hook(ev)
            ev.callback(*ev.args)
            count += 1
        self.now = max(self.now, t_end)
        self.executed += count
        return count

    def stream(self, index: int) -> random.Random:
        """Per-node random substream.

        Seeded from ``(seed, index)`` only, so adding nodes never shifts the
        draws of existing ones.
        """
        rng = self._streams.get(index)
        if rng is None:
            rng = random.Random(f"mcsim/{self.seed}/{index}")
            self._streams[index] = rng
        return rng
