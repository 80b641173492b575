"""Bounded FIFO queues, a strict-priority bank, and a sorted PIFO buffer."""

from __future__ import annotations

from bisect import insort
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .model import Packet


class BoundedFifoQueue:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("queue capacity must be positive")
        self.capacity = capacity
        self.contents: deque = deque()

    def __len__(self):
        return len(self.contents)

    def full(self) -> bool:
        return len(self.contents) >= self.capacity

    def enqueue(self, pkt: Packet) -> bool:
        if len(self.contents) >= self.capacity:
            return False
        self.contents.append(pkt)
        return True

    def dequeue(self) -> Optional[Packet]:
        return self.contents.popleft() if self.contents else None

    def __iter__(self):
        return iter(self.contents)


class QueueBank:
    """``n`` bounded FIFOs drained in strict priority.

    Queue indices are 1-based; queue 1 has the highest priority.
    """

    def __init__(self, capacities):
        capacities = tuple(capacities)
        if not capacities:
            raise ValueError("a bank needs at least one queue")
        self.queues = [BoundedFifoQueue(c) for c in capacities]
        self.capacities = capacities
        self.total_capacity = sum(capacities)
        self.occupancy = 0

    def __len__(self):
        return self.occupancy

    def queue(self, i: int) -> BoundedFifoQueue:
        if not 1 <= i <= len(self.queues):
            raise IndexError(f"queue index {i} outside 1..{len(self.queues)}")
        return self.queues[i - 1]

    def enqueue(self, i: int, pkt: Packet) -> bool:
        """Append to queue ``i``; False means the queue was full (tail drop)."""
        if self.queue(i).enqueue(pkt):
            self.occupancy += 1
            return True
        return False

    def dequeue(self) -> Optional[Packet]:
        if not self.occupancy:
            return None
        for q in self.queues:
            if q.contents:
                self.occupancy -= 1
                return q.contents.popleft()
        raise AssertionError("occupancy counter out of sync")  # pragma: no cover

    def dequeue_with_index(self):
        """Like ``dequeue`` but also report the serving queue index."""
        if not self.occupancy:
            return None, None
        for i, q in enumerate(self.queues, start=1):
            if q.contents:
                self.occupancy -= 1
                return q.contents.popleft(), i
        raise AssertionError("occupancy counter out of sync")  # pragma: no cover

    def lengths(self) -> list[int]:
        return [len(q) for q in self.queues]


def bank_enqueue(bank: QueueBank, i: int, pkt: Packet) -> bool:
    return bank.enqueue(i, pkt)


def bank_dequeue(bank: QueueBank) -> Optional[Packet]:
    return bank.dequeue()


@dataclass(frozen=True)
class Enqueued:
    pass


@dataclass(frozen=True)
class EnqueuedEvicting:
    victim: Packet


@dataclass(frozen=True)
class Rejected:
    pass


class PifoBuffer:
    """Buffer kept sorted by ``(rank, id)``; the head departs first.

    When full, an arrival that sorts before the tail displaces the tail
    packet (the highest rank, latest arrival among equals). Ties go to the
    incumbents.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("PIFO capacity must be positive")
        self.capacity = capacity
        self._items: list = []  # (rank, id, packet), ascending

    def __len__(self):
        return len(self._items)

    @property
    def contents(self) -> list[Packet]:
        return [item[2] for item in self._items]

    def offer(self, pkt: Packet):
        items = self._items
        key = (pkt.rank, pkt.id, pkt)
        if len(items) < self.capacity:
            insort(items, key)
            return Enqueued()
        tail = items[-1]
        if (pkt.rank, pkt.id) < (tail[0], tail[1]):
            items.pop()
            insort(items, key)
            return EnqueuedEvicting(tail[2])
        return Rejected()

    def dequeue(self) -> Optional[Packet]:
        if not self._items:
            return None
        return self._items.pop(0)[2]


def pifo_offer(buf: PifoBuffer, pkt: Packet):
    return buf.offer(pkt)


def pifo_dequeue(buf: PifoBuffer) -> Optional[Packet]:
    return buf.dequeue()
