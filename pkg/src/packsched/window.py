"""Circular rank window and the empirical quantile it provides."""

from __future__ import annotations

from .model import RankDistribution


class SlidingWindow:
    """Last ``capacity`` observed ranks in a circular buffer.

    A per-rank histogram is kept alongside the ring so that ``quantile`` is a
    prefix sum instead of a scan of every slot.
    """

    def __init__(self, capacity: int, max_rank: int = 0):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self.entries = [0] * capacity
        self.write_index = 0
        self.fill = 0
        self._counts = [0] * (max_rank + 1)

    def push(self, rank: int) -> None:
        counts = self._counts
        if rank >= len(counts):
            counts.extend([0] * (rank + 1 - len(counts)))
        i = self.write_index
        if self.fill == self.capacity:
            counts[self.entries[i]] -= 1
        else:
            self.fill += 1
        self.entries[i] = rank
        counts[rank] += 1
        i += 1
        self.write_index = 0 if i == self.capacity else i

    def count_below(self, rank: int) -> int:
        """Number of stored ranks strictly below ``rank``."""
        if rank <= 0:
            return 0
        return sum(self._counts[:rank])

    def quantile(self, rank: int) -> float:
        """Fraction of stored ranks strictly below ``rank`` (0 when empty)."""
        if self.fill == 0:
            return 0.0
        return self.count_below(rank) / self.fill

    def ranks(self) -> list[int]:
        """Stored ranks, oldest first."""
        if self.fill < self.capacity:
            return self.entries[:self.fill]
        i = self.write_index
        return self.entries[i:] + self.entries[:i]

    def snapshot(self) -> RankDistribution:
        if self.fill == 0:
            raise ValueError("no samples in window")
        top = max(self.ranks())
        return RankDistribution.from_counts(self._counts[:top + 1])

    def __len__(self):
        return self.fill

    def __repr__(self):
        return f"SlidingWindow(capacity={self.capacity}, ranks={self.ranks()!r})"


def window_push(w: SlidingWindow, rank: int) -> SlidingWindow:
    w.push(rank)
    return w


def window_quantile(w: SlidingWindow, rank: int) -> float:
    return w.quantile(rank)


def window_snapshot(w: SlidingWindow) -> RankDistribution:
    return w.snapshot()
