"""Deterministic discrete-event kernel: radio, timers, traffic, tracing.

Time is fixed-point milliseconds. One Simulation = one isolated single-threaded
event loop; nothing is shared between concurrently running simulations.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .attacks import AttackConfig, IvState, bh_should_drop, di_mark, dr_advertised_rank, sf_should_drop
from .config import SimConfig
from .monitor import MonitorLog
from .rpl import (
    INFINITE_RANK,
    ROOT_RANK,
    DataPacket,
    Dao,
    Dio,
    Dis,
    TrickleTimer,
    compute_rank,
    select_parent,
)
from .topology import GridTopology

MS = 1000

EVENT_KINDS = (
    "msg_tx",
    "msg_delivery",
    "timer_fire",
    "app_send",
    "drop",
    "parent_change",
    "version_change",
    "rank_change",
    "trickle_reset",
)


@dataclass(frozen=True)
class Event:
    time_ms: int
    seq: int
    kind: str
    subject: int
    detail: tuple  # sorted (key, value) pairs, values are ints/strs only

    def line(self) -> str:
        detail = ";".join(f"{k}={v}" for k, v in self.detail)
        return f"{self.time_ms},{self.seq},{self.kind},{self.subject},{detail}"


def _ms(seconds: float) -> int:
    return int(round(seconds * MS))


class RngStreams:
    """Named per-(node, purpose) substreams derived from the scenario seed.

    Streams are re-keyed at attack onset: draws before the onset come from the
    benign-phase stream, draws at or after it from a stream keyed with the
    attack descriptor. A disabled attack never touches the post-onset streams,
    which keeps its trace bit-identical to the benign run.
    """

    def __init__(self, seed: int, attack_tag: str, onset_ms: float):
        self.seed = seed
        self.attack_tag = attack_tag
        self.onset_ms = onset_ms
        self._pre: dict[tuple[int, str], random.Random] = {}
        self._post: dict[tuple[int, str], random.Random] = {}

    def _derive(self, node: int, purpose: str, phase: str) -> random.Random:
        raw = hashlib.blake2b(
            f"{self.seed}|{node}|{purpose}|{phase}".encode(), digest_size=8
        ).digest()
        return random.Random(int.from_bytes(raw, "big"))

    def get(self, node: int, purpose: str, now_ms: int) -> random.Random:
        if now_ms >= self.onset_ms:
            pool, phase = self._post, f"post|{self.attack_tag}"
        else:
            pool, phase = self._pre, "pre"
        key = (node, purpose)
        if key not in pool:
            pool[key] = self._derive(node, purpose, phase)
        return pool[key]


class Node:
    """Per-node RPL state; mutated only by the owning simulation's event loop."""

    def __init__(self, nid: int, sim: "Simulation"):
        cfg = sim.cfg
        self.id = nid
        self.sim = sim
        self.is_root = nid == sim.topo.root
        self.rank = ROOT_RANK if self.is_root else INFINITE_RANK
        self.version = cfg.root_version if self.is_root else 0
        self.parent_candidates: dict[int, int] = {}
        self.preferred_parent: Optional[int] = None
        self.ewma_success: dict[int, float] = {}
        self.routing_table: dict[int, int] = {}
        self.trickle = TrickleTimer(
            i_min_ms=_ms(cfg.trickle_imin_s),
            doublings=cfg.trickle_doublings,
            redundancy_k=cfg.trickle_redundancy_k,
        )
        self.trickle_active = False
        self.pending_dio_ms: Optional[int] = None
        self.dao_loop_started = False
        self.dis_pending = False
        self.data_seq = 0
        self.forwarded_data = 0
        self.dio_sent = 0
        self.iv_state: Optional[IvState] = None

    # --- state helpers ---------------------------------------------------

    @property
    def joined(self) -> bool:
        return self.rank < INFINITE_RANK

    def etx_of(self, nbr: int) -> float:
        s = self.ewma_success.get(nbr, 1.0)
        return min(1.0 / max(s, 0.0625), 16.0)

    def note_tx_outcome(self, nbr: int, delivered: bool) -> None:
        # modeled link-layer ack; only meaningful when a loss probability is configured
        alpha = self.sim.cfg.etx_alpha
        prev = self.ewma_success.get(nbr, 1.0)
        self.ewma_success[nbr] = (1.0 - alpha) * prev + alpha * (1.0 if delivered else 0.0)
        if nbr == self.preferred_parent:
            self.refresh_rank()

    def _set_rank(self, new: int, allow_trickle_reset: bool = True) -> None:
        if new == self.rank:
            return
        old, self.rank = self.rank, new
        if old >= INFINITE_RANK > new:
            self.sim.joined_count += 1
        elif new >= INFINITE_RANK > old:
            self.sim.joined_count -= 1
        self.sim.log("rank_change", self.id, old=old, new=new)
        if allow_trickle_reset and abs(new - old) >= 256 and self.joined and self.trickle_active:
            self.reset_trickle()

    def _attack_active(self, kind: str) -> bool:
        atk = self.sim.attack
        return (
            atk is not None
            and atk.kind == kind
            and atk.attacker == self.id
            and self.sim.now_ms >= self.sim.attack_start_ms
        )

    # --- rank / parent machinery ------------------------------------------

    def refresh_rank(self) -> None:
        if self.is_root:
            return
        if self.preferred_parent is None:
            new = INFINITE_RANK
        else:
            new = compute_rank(
                self.parent_candidates[self.preferred_parent], self.etx_of(self.preferred_parent)
            )
        # joining/leaving always takes effect; otherwise only significant changes
        # are adopted and advertised (ETX estimator drift stays internal)
        if (
            self.rank < INFINITE_RANK
            and new < INFINITE_RANK
            and abs(new - self.rank) < self.sim.cfg.rank_update_threshold
        ):
            return
        self._set_rank(new)

    def reselect_parent(self) -> bool:
        """Re-run parent selection; returns True when the parent or rank changed."""
        if self.is_root:
            return False
        worst = self._attack_active("WP")
        old_parent, old_rank = self.preferred_parent, self.rank
        choice = select_parent(
            self.parent_candidates,
            self.etx_of,
            current=None if worst else self.preferred_parent,
            hysteresis=self.sim.cfg.parent_switch_threshold,
            exclude=lambda cand: self.sim.creates_loop(self.id, cand),
            worst=worst,
        )
        if choice != self.preferred_parent:
            self.sim.log(
                "parent_change",
                self.id,
                old=-1 if old_parent is None else old_parent,
                new=-1 if choice is None else choice,
            )
            self.preferred_parent = choice
        self.refresh_rank()
        if self.joined and not self.trickle_active:
            self.start_trickle()
        if self.preferred_parent != old_parent and self.preferred_parent is not None:
            self.send_dao()
            if not self.dao_loop_started:
                self.dao_loop_started = True
                self.sim.push(self.sim.now_ms + _ms(self.sim.cfg.dao_interval_s), "dao", self.id)
        return self.preferred_parent != old_parent or self.rank != old_rank

    # --- trickle ----------------------------------------------------------

    def start_trickle(self) -> None:
        self.trickle.start(self.sim.now_ms)
        self.trickle_active = True
        self.sim.push(self.trickle.next_fire_ms, "trickle", self.id, self.trickle.epoch)

    def reset_trickle(self) -> None:
        if not self.trickle_active:
            return
        if self.trickle.reset(self.sim.now_ms):
            self.sim.log("trickle_reset", self.id)
            self.sim.push(self.trickle.next_fire_ms, "trickle", self.id, self.trickle.epoch)

    def stop_trickle(self) -> None:
        self.trickle_active = False
        self.trickle.epoch += 1  # invalidates anything already scheduled

    def on_trickle_expire(self, epoch: int) -> None:
        if not self.trickle_active or epoch != self.trickle.epoch or not self.joined:
            return
        fired = self.trickle.expire(self.sim.now_ms)
        self.sim.log("timer_fire", self.id, fired=int(fired))
        if fired:
            self.send_dio(dis_response=False)
        self.sim.push(self.trickle.next_fire_ms, "trickle", self.id, self.trickle.epoch)

    # --- control-plane messaging -------------------------------------------

    def send_dio(self, dis_response: bool) -> None:
        rank_adv = self.rank
        ver_adv = self.version
        if self._attack_active("DR"):
            rank_adv = dr_advertised_rank(self.rank, self.sim.attack)
        if self._attack_active("IV"):
            if self.iv_state is None:
                self.iv_state = IvState(self.sim.attack.iv_refire_count)
            ver_adv = self.iv_state.next_version(self.version)
        self.dio_sent += 1
        self.sim.transmit(self.id, Dio(self.id, rank_adv, ver_adv, dis_response))

    def send_dao(self) -> None:
        if self.is_root or self.preferred_parent is None:
            return
        self.sim.transmit(self.id, Dao(self.id, self.id), to=self.preferred_parent)

    def handle_dio(self, dio: Dio) -> None:
        self.parent_candidates[dio.sender] = dio.rank
        adopted = False
        if dio.version > self.version:
            adopted = True
            self.sim.log("version_change", self.id, old=self.version, new=dio.version)
            self.version = dio.version
            self.routing_table.clear()
            if not self.is_root:
                # global repair: drop out and rejoin under the new version
                self.stop_trickle()
                self._set_rank(INFINITE_RANK, allow_trickle_reset=False)
                if self.preferred_parent is not None:
                    self.sim.log("parent_change", self.id, old=self.preferred_parent, new=-1)
                    self.preferred_parent = None
                self.parent_candidates = {dio.sender: dio.rank}
        changed = self.reselect_parent()
        if adopted:
            if self.is_root:
                self.reset_trickle()
            elif not self.joined and not self.dis_pending:
                self.dis_pending = True
                self.sim.push(self.sim.now_ms + _ms(self.sim.cfg.dis_retry_interval_s), "dis", self.id)
        elif not changed and self.trickle_active:
            self.trickle.heard_consistent()

    def handle_dis(self) -> None:
        if not self.joined:
            return
        if self.pending_dio_ms == self.sim.now_ms:
            return  # coalesce same-tick solicitations into one response
        self.pending_dio_ms = self.sim.now_ms
        self.sim.push(self.sim.now_ms, "dio_now", self.id)
        self.reset_trickle()

    def on_dio_now(self) -> None:
        self.pending_dio_ms = None
        if self.joined:
            self.send_dio(dis_response=True)

    def handle_dao(self, dao: Dao, frm: int) -> None:
        if not self.joined:
            self.sim.log("drop", self.id, reason="dao_unjoined", msg="dao", tgt=dao.target)
            return
        self.routing_table[dao.target] = frm
        if not self.is_root and self.preferred_parent is not None:
            self.sim.transmit(self.id, Dao(self.id, dao.target), to=self.preferred_parent)

    # --- data plane ---------------------------------------------------------

    def originate_data(self) -> None:
        pkt = DataPacket(src=self.id, dst=self.sim.topo.root, seq=self.data_seq)
        self.data_seq += 1
        self.sim.log("app_send", self.id, pseq=pkt.seq, dst=pkt.dst)
        self.sim.counters["data_sent"] += 1
        self.handle_data(pkt, frm=None)

    def handle_data(self, pkt: DataPacket, frm: Optional[int]) -> None:
        sim = self.sim
        if pkt.bounced:
            sim.drop_data(pkt, self.id, "bounced")
            return
        if pkt.f_flag and frm is not None:
            # forwarding-error signal: purge routes through the child, return the packet
            purged = [t for t, nh in self.routing_table.items() if nh == frm]
            for t in purged:
                del self.routing_table[t]
            pkt.bounced = True
            pkt.hop_path.append(self.id)
            sim.transmit(self.id, pkt, to=frm)
            return
        if pkt.dst == self.id:
            sim.counters["data_delivered"] += 1
            return
        if frm is not None:
            if self._attack_active("BH") and bh_should_drop(pkt, self.id):
                sim.drop_data(pkt, self.id, "blackhole")
                return
            if self._attack_active("SF"):
                rng = sim.rngs.get(self.id, "sf", sim.now_ms)
                if sf_should_drop(pkt, self.id, rng, sim.attack.sf_drop_prob):
                    sim.drop_data(pkt, self.id, "selective")
                    return
            if self._attack_active("DI"):
                di_mark(pkt, self.id)
        if pkt.dst != sim.topo.root and pkt.dst in self.routing_table:
            next_hop = self.routing_table[pkt.dst]
        else:
            next_hop = self.preferred_parent
        if next_hop is None:
            sim.drop_data(pkt, self.id, "no_route")
            return
        if frm is not None:
            self.forwarded_data += 1
        pkt.hop_path.append(self.id)
        sim.transmit(self.id, pkt, to=next_hop)


@dataclass
class SimResult:
    digest: str
    trace: list[Event]
    counters: dict[str, int]
    features: dict[int, list[list[float]]]  # node -> per-window 35-vectors
    window_count: int
    window_s: float
    final_rank: dict[int, int]
    final_parent: dict[int, Optional[int]]
    final_version: dict[int, int]
    root_routes: int
    all_joined_s: Optional[float]
    horizon_s: float

    def trace_lines(self):
        return (ev.line() for ev in self.trace)


class Simulation:
    def __init__(
        self,
        topo: GridTopology,
        cfg: SimConfig,
        attack: Optional[AttackConfig] = None,
        seed: int = 1,
        horizon_s: Optional[float] = None,
    ):
        self.topo = topo
        self.cfg = cfg
        self.attack = attack
        self.seed = seed
        self.horizon_ms = _ms(horizon_s if horizon_s is not None else cfg.horizon_s)
        if attack is not None and attack.attacker not in topo.positions:
            raise ValueError(f"attacker node {attack.attacker} not in topology")
        self.attack_start_ms: float = math.inf
        tag = "benign"
        if attack is not None and attack.enabled:
            self.attack_start_ms = _ms(attack.start_time_s)
            tag = attack.tag()
        self.rngs = RngStreams(seed, tag, self.attack_start_ms)
        self.now_ms = 0
        self._seq = 0
        self._heap: list[tuple] = []
        self.trace: list[Event] = []
        self.counters = {
            "data_sent": 0,
            "data_delivered": 0,
            "data_dropped": 0,
            "tx": 0,
            "dio_tx": 0,
            "dis_tx": 0,
            "dao_tx": 0,
        }
        self.drop_reasons: dict[str, int] = {}
        self.joined_count = 0
        self.nodes = {nid: Node(nid, self) for nid in sorted(topo.positions)}
        self.joined_count = sum(1 for n in self.nodes.values() if n.joined)
        window_ms = _ms(cfg.window_s)
        self.monitors = {
            nid: MonitorLog(nid, window_ms, initial_rank=n.rank, initial_version=n.version)
            for nid, n in self.nodes.items()
        }
        self.all_joined_ms: Optional[int] = None

    # --- scheduling / logging ----------------------------------------------

    def push(self, time_ms: int, action: str, *args) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time_ms, self._seq, action, args))

    def log(self, kind: str, subject: int, **detail) -> Event:
        self._seq += 1
        ev = Event(self.now_ms, self._seq, kind, subject, tuple(sorted(detail.items())))
        self.trace.append(ev)
        self.monitors[subject].observe(ev)
        return ev

    def creates_loop(self, child: int, candidate: int) -> bool:
        cur = candidate
        for _ in range(len(self.nodes)):
            if cur == child:
                return True
            nxt = self.nodes[cur].preferred_parent
            if nxt is None:
                return False
            cur = nxt
        return True  # walk did not terminate: treat as loop

    # --- radio ---------------------------------------------------------------

    def transmit(self, sender: int, msg, to: Optional[int] = None) -> None:
        cfg = self.cfg
        detail = _msg_detail(msg)
        neighbors = sorted(self.topo.neighbors(sender))
        if to is None:
            receivers = neighbors
            detail["bcast"] = 1
        else:
            detail["bcast"] = 0
            detail["to"] = to
            if to not in neighbors:
                self.log("msg_tx", sender, **detail)
                self.log("drop", sender, reason="out_of_range", **_msg_detail(msg))
                if msg.kind == "data":
                    self._account_drop(msg, "out_of_range")
                return
            receivers = [to]
        lost: dict[int, bool] = {}
        for r in receivers:
            if cfg.loss_probability > 0.0:
                draw = self.rngs.get(r, "loss", self.now_ms).random()
                lost[r] = draw < cfg.loss_probability
            else:
                lost[r] = False
        if to is not None and cfg.loss_probability > 0.0:
            detail["ok"] = int(not lost[to])
        self.counters["tx"] += 1
        self.counters[f"{msg.kind}_tx"] = self.counters.get(f"{msg.kind}_tx", 0) + 1
        self.log("msg_tx", sender, **detail)
        if to is not None and cfg.loss_probability > 0.0:
            self.nodes[sender].note_tx_outcome(to, not lost[to])
        for r in receivers:
            if lost[r]:
                self.log("drop", r, reason="radio_loss", **_msg_detail(msg))
                if msg.kind == "data":
                    self._account_drop(msg, "radio_loss")
            else:
                self.push(self.now_ms + cfg.link_latency_ms, "deliver", r, sender, msg)

    def drop_data(self, pkt: DataPacket, subject: int, reason: str) -> None:
        self.log("drop", subject, reason=reason, **_msg_detail(pkt))
        self._account_drop(pkt, reason)

    def _account_drop(self, pkt: DataPacket, reason: str) -> None:
        self.counters["data_dropped"] += 1
        self.drop_reasons[reason] = self.drop_reasons.get(reason, 0) + 1

    # --- event loop ------------------------------------------------------------

    def _bootstrap(self) -> None:
        cfg = self.cfg
        root = self.nodes[self.topo.root]
        root.start_trickle()
        n_total = len(self.nodes)
        for nid, node in self.nodes.items():
            if node.is_root:
                continue
            offset = _ms(cfg.data_interval_s * nid / n_total)
            self.push(offset, "app", nid)
            node.dis_pending = True
            self.push(_ms(cfg.dis_retry_interval_s) + nid * 100, "dis", nid)
        if self.attack is not None and self.attack.enabled:
            start = int(self.attack_start_ms)
            if start < self.horizon_ms:
                self.push(start, "attack_on")
                if self.attack.kind == "HF":
                    interval = _ms(self.attack.hf_interval_s)
                    for t in range(start, self.horizon_ms, interval):
                        self.push(t, "hf")

    def _dispatch(self, action: str, args: tuple) -> None:
        if action == "deliver":
            receiver, sender, msg = args
            self.log("msg_delivery", receiver, frm=sender, **_msg_detail(msg))
            node = self.nodes[receiver]
            if msg.kind == "dio":
                node.handle_dio(msg)
            elif msg.kind == "dis":
                node.handle_dis()
            elif msg.kind == "dao":
                node.handle_dao(msg, sender)
            else:
                node.handle_data(msg, frm=sender)
        elif action == "trickle":
            nid, epoch = args
            self.nodes[nid].on_trickle_expire(epoch)
        elif action == "dio_now":
            self.nodes[args[0]].on_dio_now()
        elif action == "app":
            nid = args[0]
            self.nodes[nid].originate_data()
            self.push(self.now_ms + _ms(self.cfg.data_interval_s), "app", nid)
        elif action == "dao":
            nid = args[0]
            node = self.nodes[nid]
            if node.joined:
                node.send_dao()
            self.push(self.now_ms + _ms(self.cfg.dao_interval_s), "dao", nid)
        elif action == "dis":
            nid = args[0]
            node = self.nodes[nid]
            node.dis_pending = False
            if not node.joined:
                self.transmit(nid, Dis(nid))
                node.dis_pending = True
                self.push(self.now_ms + _ms(self.cfg.dis_retry_interval_s), "dis", nid)
        elif action == "attack_on":
            attacker = self.nodes[self.attack.attacker]
            if self.attack.kind in ("DR", "IV"):
                attacker.reset_trickle()
            elif self.attack.kind == "WP":
                attacker.reselect_parent()
        elif action == "hf":
            self.transmit(self.attack.attacker, Dis(self.attack.attacker))
        else:  # pragma: no cover - defensive
            raise RuntimeError(f"unknown action {action}")

    def run(self) -> SimResult:
        self._bootstrap()
        while self._heap:
            time_ms, _seq, action, args = heapq.heappop(self._heap)
            if time_ms >= self.horizon_ms:
                break
            if time_ms < self.now_ms:  # pragma: no cover - causality guard
                raise RuntimeError("event scheduled in the past")
            self.now_ms = time_ms
            self._dispatch(action, args)
            if self.all_joined_ms is None and self.joined_count == len(self.nodes):
                self.all_joined_ms = self.now_ms
        features = {}
        for nid, mon in self.monitors.items():
            mon.finalize(self.horizon_ms)
            features[nid] = mon.vectors()
        digest = trace_digest(self.trace)
        root = self.nodes[self.topo.root]
        return SimResult(
            digest=digest,
            trace=self.trace,
            counters=dict(self.counters, **{f"drop_{k}": v for k, v in self.drop_reasons.items()}),
            features=features,
            window_count=self.horizon_ms // _ms(self.cfg.window_s),
            window_s=self.cfg.window_s,
            final_rank={nid: n.rank for nid, n in self.nodes.items()},
            final_parent={nid: n.preferred_parent for nid, n in self.nodes.items()},
            final_version={nid: n.version for nid, n in self.nodes.items()},
            root_routes=len(root.routing_table),
            all_joined_s=None if self.all_joined_ms is None else self.all_joined_ms / MS,
            horizon_s=self.horizon_ms / MS,
        )


def _msg_detail(msg) -> dict:
    if msg.kind == "dio":
        d = {"msg": "dio", "rank": msg.rank, "ver": msg.version}
        if msg.dis_response:
            d["resp"] = 1
        return d
    if msg.kind == "dis":
        return {"msg": "dis"}
    if msg.kind == "dao":
        return {"msg": "dao", "tgt": msg.target}
    return {
        "msg": "data",
        "src": msg.src,
        "dst": msg.dst,
        "pseq": msg.seq,
        "f": int(msg.f_flag),
        "bnc": int(msg.bounced),
    }


def trace_digest(trace: list[Event]) -> str:
    h = hashlib.blake2b(digest_size=8)
    for ev in trace:
        h.update(ev.line().encode())
        h.update(b"\n")
    return h.hexdigest()


def run_simulation(
    topo: GridTopology,
    cfg: SimConfig,
    attack: Optional[AttackConfig] = None,
    seed: int = 1,
    horizon_s: Optional[float] = None,
) -> SimResult:
    return Simulation(topo, cfg, attack=attack, seed=seed, horizon_s=horizon_s).run()
