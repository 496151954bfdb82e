"""The seven attacker behaviors, as pure decision helpers over benign node state."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .rpl import DataPacket

ATTACK_KINDS = ("DR", "IV", "BH", "SF", "WP", "DI", "HF")

# onset far beyond any horizon == attack disabled
NEVER = math.inf


@dataclass
class AttackConfig:
    kind: str
    attacker: int
    start_time_s: float = 600.0
    sf_drop_prob: float = 0.5
    hf_interval_s: float = 2.0
    iv_refire_count: int = 10
    dr_advertised_rank: int = 257

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; expected one of {ATTACK_KINDS}")
        if self.kind == "SF" and not 0.0 < self.sf_drop_prob < 1.0:
            raise ValueError("sf_drop_prob must be in (0, 1)")
        if self.kind == "HF" and self.hf_interval_s <= 0:
            raise ValueError("hf_interval must be positive")

    @property
    def enabled(self) -> bool:
        return self.start_time_s != NEVER

    def tag(self) -> str:
        """Descriptor used to key post-onset RNG substreams and the run cache."""
        return f"{self.kind}:{self.attacker}"


def dr_advertised_rank(true_rank: int, cfg: AttackConfig) -> int:
    """Decreased-rank attacker lies with the minimum legal non-root rank."""
    return cfg.dr_advertised_rank


class IvState:
    """Increased-version escalation: start at current version + 1 and re-increment
    once per `refire` own DIO transmissions, so each inflated version has time to
    propagate (and the network to rebuild) before the next push."""

    def __init__(self, refire: int):
        self.refire = refire
        self.advertised: Optional[int] = None
        self.fires_since_bump = 0

    def next_version(self, own_version: int) -> int:
        if self.advertised is None:
            self.advertised = own_version + 1
            return self.advertised
        self.fires_since_bump += 1
        if self.fires_since_bump >= self.refire:
            self.advertised = max(self.advertised, own_version) + 1
            self.fires_since_bump = 0
        return max(self.advertised, own_version)


def bh_should_drop(pkt: DataPacket, attacker: int) -> bool:
    """Blackhole drops every transit data packet; own traffic keeps cover."""
    return pkt.src != attacker and pkt.dst != attacker


def sf_should_drop(pkt: DataPacket, attacker: int, rng, p: float) -> bool:
    """Selective forwarding drops transit data with probability p (seeded stream)."""
    if pkt.src == attacker or pkt.dst == attacker:
        return False
    return rng.random() < p


def di_mark(pkt: DataPacket, attacker: int) -> DataPacket:
    """DAG-inconsistency attacker sets the forwarding-error flag on transit data."""
    if pkt.src != attacker and not pkt.f_flag:
        pkt.f_flag = True
    return pkt


def hf_schedule_times_ms(start_ms: int, interval_ms: int, horizon_ms: int) -> list[int]:
    """DIS broadcast instants for the hello-flood attacker."""
    if interval_ms <= 0:
        raise ValueError("hf interval must be positive")
    return list(range(start_ms, horizon_ms, interval_ms))
