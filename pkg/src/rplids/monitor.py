"""Passive per-node traffic observation and fixed-width feature windows.

A MonitorLog consumes exactly the trace events whose subject is its own node
(own tx/rx plus own state changes; one-hop broadcasts arrive as deliveries).
Feeding the same events again therefore reproduces the same features, which is
what makes offline replay from an EventTrace equal the online computation.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional

FEATURE_NAMES = [
    "dio_tx",
    "dio_rx",
    "dis_tx",
    "dis_rx",
    "dao_tx",
    "dao_rx",
    "data_tx",
    "data_rx",
    "data_fwd",
    "data_dropped",
    "data_bounced",
    "neighbors_heard",
    "parent_changes",
    "trickle_resets",
    "rank_current",
    "rank_min",
    "rank_max",
    "rank_mean",
    "rank_changes",
    "version_current",
    "version_max_seen",
    "version_changes",
    "adv_rank_min",
    "adv_rank_max",
    "adv_rank_mean",
    "adv_rank_std",
    "control_rate",
    "data_rate",
    "etx_current",
    "etx_mean",
    "updown_ratio",
    "dao_dup_rx",
    "f_flag_rx",
    "dis_responses",
    "ctrl_interarrival_mean",
]

FEATURE_COUNT = len(FEATURE_NAMES)
assert FEATURE_COUNT == 35

_COUNTER_KEYS = (
    "dio_tx",
    "dio_rx",
    "dis_tx",
    "dis_rx",
    "dao_tx",
    "dao_rx",
    "data_tx",
    "data_rx",
    "data_fwd",
    "data_dropped",
    "data_bounced",
    "parent_changes",
    "trickle_resets",
    "rank_changes",
    "version_changes",
    "dao_dup_rx",
    "f_flag_rx",
    "dis_responses",
    "data_up",
    "data_down",
)


class MonitorLog:
    """Raw per-window counters plus carried gauges for one monitoring node."""

    def __init__(self, node_id: int, window_ms: int, initial_rank: int, initial_version: int):
        self.node_id = node_id
        self.window_ms = window_ms
        # gauges carried across windows
        self.rank = initial_rank
        self.version = initial_version
        self.version_max = initial_version
        self.parent: Optional[int] = None
        self.etx_mirror: dict[int, float] = {}
        self.dao_mirror: dict[int, int] = {}
        self._alpha = 0.1
        self._cur: int = 0
        self._vectors: list[list[float]] = []
        self._reset_window()

    # --- window bookkeeping -------------------------------------------------

    def _reset_window(self) -> None:
        self.counts = dict.fromkeys(_COUNTER_KEYS, 0)
        self.rank_samples = [self.rank]
        self.adv_ranks: list[int] = []
        self.neighbors: set[int] = set()
        self.etx_samples = [self._pp_etx()] if self.parent is not None else []
        self.ctrl_rx_times: list[int] = []

    def _pp_etx(self) -> float:
        if self.parent is None:
            return 0.0
        s = self.etx_mirror.get(self.parent, 1.0)
        return min(1.0 / max(s, 0.0625), 16.0)

    def _roll_to(self, time_ms: int) -> None:
        while time_ms >= (self._cur + 1) * self.window_ms:
            self._vectors.append(self._extract())
            self._cur += 1
            self._reset_window()

    def observe(self, ev) -> None:
        if ev.subject != self.node_id:
            return
        self._roll_to(ev.time_ms)
        detail = dict(ev.detail)
        kind = ev.kind
        c = self.counts
        if kind == "msg_tx":
            msg = detail["msg"]
            if msg == "dio":
                c["dio_tx"] += 1
                if detail.get("resp"):
                    c["dis_responses"] += 1
            elif msg == "dis":
                c["dis_tx"] += 1
            elif msg == "dao":
                c["dao_tx"] += 1
            else:
                if detail.get("bnc"):
                    c["data_bounced"] += 1
                    c["data_down"] += 1
                else:
                    c["data_up"] += 1
                    if detail["src"] == self.node_id:
                        c["data_tx"] += 1
                    else:
                        c["data_fwd"] += 1
            if "ok" in detail and "to" in detail:
                # modeled link-layer ack: maintain the same EWMA the node uses
                nbr = detail["to"]
                prev = self.etx_mirror.get(nbr, 1.0)
                self.etx_mirror[nbr] = (1.0 - self._alpha) * prev + self._alpha * float(detail["ok"])
                if nbr == self.parent:
                    self.etx_samples.append(self._pp_etx())
        elif kind == "msg_delivery":
            msg = detail["msg"]
            self.neighbors.add(detail["frm"])
            if msg == "dio":
                c["dio_rx"] += 1
                self.adv_ranks.append(detail["rank"])
                if detail["ver"] > self.version_max:
                    self.version_max = detail["ver"]
                self.ctrl_rx_times.append(ev.time_ms)
            elif msg == "dis":
                c["dis_rx"] += 1
                self.ctrl_rx_times.append(ev.time_ms)
            elif msg == "dao":
                c["dao_rx"] += 1
                tgt, frm = detail["tgt"], detail["frm"]
                if self.dao_mirror.get(tgt) == frm:
                    c["dao_dup_rx"] += 1
                self.dao_mirror[tgt] = frm
                self.ctrl_rx_times.append(ev.time_ms)
            else:
                c["data_rx"] += 1
                if detail.get("f"):
                    c["f_flag_rx"] += 1
                if detail.get("bnc"):
                    c["data_down"] += 1
                else:
                    c["data_up"] += 1
        elif kind == "drop":
            if detail.get("msg") == "data" and detail["reason"] != "radio_loss":
                c["data_dropped"] += 1
        elif kind == "parent_change":
            c["parent_changes"] += 1
            new = detail["new"]
            self.parent = None if new == -1 else new
            if self.parent is not None:
                self.etx_samples.append(self._pp_etx())
        elif kind == "version_change":
            c["version_changes"] += 1
            self.version = detail["new"]
            if self.version > self.version_max:
                self.version_max = self.version
            self.dao_mirror.clear()  # node clears its routing table on adoption
        elif kind == "rank_change":
            c["rank_changes"] += 1
            self.rank = detail["new"]
            self.rank_samples.append(self.rank)
        elif kind == "trickle_reset":
            c["trickle_resets"] += 1
        # app_send / timer_fire carry no feature signal of their own

    # --- extraction -----------------------------------------------------------

    def _extract(self) -> list[float]:
        c = self.counts
        w_s = self.window_ms / 1000.0
        rs = self.rank_samples
        rank_mean = sum(rs) / len(rs)
        if self.adv_ranks:
            n = len(self.adv_ranks)
            mean = sum(self.adv_ranks) / n
            var = sum(v * v for v in self.adv_ranks) / n - mean * mean
            adv = (min(self.adv_ranks), max(self.adv_ranks), mean, math.sqrt(max(var, 0.0)))
        else:
            adv = (0.0, 0.0, 0.0, 0.0)
        ctrl = c["dio_tx"] + c["dio_rx"] + c["dis_tx"] + c["dis_rx"] + c["dao_tx"] + c["dao_rx"]
        data = c["data_tx"] + c["data_fwd"] + c["data_bounced"] + c["data_rx"]
        if len(self.ctrl_rx_times) >= 2:
            gaps = [
                (b - a) / 1000.0
                for a, b in zip(self.ctrl_rx_times, self.ctrl_rx_times[1:])
            ]
            inter = sum(gaps) / len(gaps)
        else:
            inter = 0.0
        etx_mean = sum(self.etx_samples) / len(self.etx_samples) if self.etx_samples else 0.0
        return [
            float(c["dio_tx"]),
            float(c["dio_rx"]),
            float(c["dis_tx"]),
            float(c["dis_rx"]),
            float(c["dao_tx"]),
            float(c["dao_rx"]),
            float(c["data_tx"]),
            float(c["data_rx"]),
            float(c["data_fwd"]),
            float(c["data_dropped"]),
            float(c["data_bounced"]),
            float(len(self.neighbors)),
            float(c["parent_changes"]),
            float(c["trickle_resets"]),
            float(self.rank),
            float(min(rs)),
            float(max(rs)),
            rank_mean,
            float(c["rank_changes"]),
            float(self.version),
            float(self.version_max),
            float(c["version_changes"]),
            float(adv[0]),
            float(adv[1]),
            float(adv[2]),
            float(adv[3]),
            ctrl / w_s,
            data / w_s,
            self._pp_etx(),
            etx_mean,
            c["data_up"] / (c["data_down"] + 1.0),
            float(c["dao_dup_rx"]),
            float(c["f_flag_rx"]),
            float(c["dis_responses"]),
            inter,
        ]

    def finalize(self, horizon_ms: int) -> None:
        """Close every fully elapsed window; a partial trailing window is discarded."""
        full = horizon_ms // self.window_ms
        while self._cur < full:
            self._vectors.append(self._extract())
            self._cur += 1
            self._reset_window()

    def vectors(self) -> list[list[float]]:
        return self._vectors


def replay_features(
    trace: Iterable,
    node_id: int,
    window_ms: int,
    horizon_ms: int,
    initial_rank: int,
    initial_version: int,
) -> list[list[float]]:
    """Recompute one node's feature windows from a recorded EventTrace."""
    mon = MonitorLog(node_id, window_ms, initial_rank, initial_version)
    for ev in trace:
        if ev.subject == node_id:
            mon.observe(ev)
    mon.finalize(horizon_ms)
    return mon.vectors()


def window_count(horizon_s: float, window_s: float) -> int:
    return int(horizon_s * 1000) // int(window_s * 1000)


def label_windows(
    run_kind: str,
    n_windows: int,
    window_s: float,
    attack_start_s: float,
    warmup_s: float,
) -> list[tuple[int, str]]:
    """Which windows enter a dataset, and with which label.

    Benign-run windows before the warm-up and attack-run windows before the
    attack onset are discarded.
    """
    if run_kind not in ("benign", "attack"):
        raise ValueError(f"run_kind must be 'benign' or 'attack', got {run_kind!r}")
    kept = []
    for idx in range(n_windows):
        start = idx * window_s
        if run_kind == "benign":
            if start >= warmup_s:
                kept.append((idx, "benign"))
        else:
            if start >= attack_start_s:
                kept.append((idx, "malicious"))
    return kept
