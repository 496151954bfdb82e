"""RPL node state machine: ranks, trickle, parent selection, control messages."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

INFINITE_RANK = 65535
ROOT_RANK = 256
MIN_HOP_RANK_INCREASE = 256


def compute_rank(parent_rank: int, link_etx: float) -> int:
    """Child rank under MRHOF-ETX: parent rank plus at least one full rank unit."""
    if parent_rank >= INFINITE_RANK:
        return INFINITE_RANK
    step = max(round(link_etx * MIN_HOP_RANK_INCREASE), MIN_HOP_RANK_INCREASE)
    return min(parent_rank + step, INFINITE_RANK)


def select_parent(
    candidates: dict[int, int],
    etx_of: Callable[[int], float],
    current: Optional[int] = None,
    hysteresis: int = 192,
    exclude: Optional[Callable[[int], bool]] = None,
    worst: bool = False,
) -> Optional[int]:
    """Pick the preferred parent from advertised-rank candidates.

    Normal mode minimizes the resulting own rank and only abandons the current
    parent when a challenger improves the rank by more than the hysteresis
    threshold. worst=True inverts the objective (worst-parent attack). Ties go
    to the lowest node id. Candidates with infinite rank, or rejected by the
    exclude predicate (loop guard), are never eligible.
    """
    yields = {}
    for cand, rank in candidates.items():
        if rank >= INFINITE_RANK:
            continue
        if exclude is not None and exclude(cand):
            continue
        yields[cand] = compute_rank(rank, etx_of(cand))
    if not yields:
        return None
    if worst:
        return max(yields, key=lambda c: (yields[c], -c))
    best = min(yields, key=lambda c: (yields[c], c))
    if current is not None and current in yields and current != best:
        if yields[current] - yields[best] <= hysteresis:
            return current
    return best


@dataclass
class TrickleTimer:
    """Simplified RFC-6206-style timer: the DIO decision happens at interval expiry.

    All times are fixed-point milliseconds.
    """

    i_min_ms: int
    doublings: int
    redundancy_k: int
    i_current_ms: int = 0
    counter_c: int = 0
    next_fire_ms: int = 0
    epoch: int = 0  # stale scheduled expiries are detected via epoch mismatch

    def __post_init__(self):
        if self.i_current_ms == 0:
            self.i_current_ms = self.i_min_ms

    @property
    def i_max_ms(self) -> int:
        return self.i_min_ms << self.doublings

    def start(self, now_ms: int) -> None:
        self.i_current_ms = self.i_min_ms
        self.counter_c = 0
        self.epoch += 1
        self.next_fire_ms = now_ms + self.i_current_ms

    def heard_consistent(self) -> None:
        self.counter_c += 1

    def expire(self, now_ms: int) -> bool:
        """Advance past an expiry; returns whether a DIO fires (c < k)."""
        fire = self.counter_c < self.redundancy_k
        self.i_current_ms = min(self.i_current_ms * 2, self.i_max_ms)
        self.counter_c = 0
        self.next_fire_ms = now_ms + self.i_current_ms
        return fire

    def reset(self, now_ms: int) -> bool:
        """Shrink back to i_min on inconsistency; no-op if already at i_min."""
        if self.i_current_ms <= self.i_min_ms:
            return False
        self.start(now_ms)
        return True


# --- control / data message types -------------------------------------------------


@dataclass
class Dio:
    sender: int
    rank: int
    version: int
    dis_response: bool = False

    kind = "dio"


@dataclass
class Dis:
    sender: int

    kind = "dis"


@dataclass
class Dao:
    sender: int
    target: int

    kind = "dao"


@dataclass
class DataPacket:
    src: int
    dst: int
    seq: int
    hop_path: list[int] = field(default_factory=list)
    f_flag: bool = False
    bounced: bool = False

    kind = "data"

    @property
    def pid(self) -> tuple[int, int]:
        return (self.src, self.seq)


def walk_to_root(parents: dict[int, Optional[int]], start: int, limit: int) -> Optional[list[int]]:
    """Follow preferred-parent pointers; None if a cycle or dead end is hit within limit steps."""
    path = [start]
    cur = start
    for _ in range(limit):
        nxt = parents.get(cur)
        if nxt is None:
            return None
        path.append(nxt)
        if nxt == 0:
            return path
        if nxt in path[:-1]:
            return None
        cur = nxt
    return None
