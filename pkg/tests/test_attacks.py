"""Attacker decision helpers and whole-run attack invariants."""

import random

import pytest

from rplids.attacks import (
    AttackConfig,
    IvState,
    NEVER,
    bh_should_drop,
    di_mark,
    dr_advertised_rank,
    hf_schedule_times_ms,
    sf_should_drop,
)
from rplids.config import SimConfig
from rplids.rpl import DataPacket
from rplids.simulation import run_simulation
from rplids.topology import default_grid


@pytest.fixture(scope="module")
def cfg():
    return SimConfig()


@pytest.fixture(scope="module")
def topo(cfg):
    return default_grid(cfg)


@pytest.fixture(scope="module")
def benign_900(topo, cfg):
    return run_simulation(topo, cfg, seed=1, horizon_s=900)


def test_attack_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(kind="XX", attacker=3)
    with pytest.raises(ValueError):
        AttackConfig(kind="SF", attacker=3, sf_drop_prob=0.0)
    with pytest.raises(ValueError):
        AttackConfig(kind="HF", attacker=3, hf_interval_s=0)


def test_dr_advertises_minimum_legal_rank():
    cfg = AttackConfig(kind="DR", attacker=4)
    assert dr_advertised_rank(1280, cfg) == 257
    assert dr_advertised_rank(512, cfg) == 257


def test_iv_initial_increment():
    iv = IvState(refire=10)
    assert iv.next_version(1) == 2


def test_iv_reincrement_after_refire_fires():
    iv = IvState(refire=10)
    assert iv.next_version(1) == 2
    # network adopts 2; for the next 9 fires the attacker holds at 2
    for _ in range(9):
        assert iv.next_version(2) == 2
    assert iv.next_version(2) == 3  # 10th fire since the bump


def test_bh_drops_only_transit():
    transit = DataPacket(src=7, dst=0, seq=1)
    own = DataPacket(src=4, dst=0, seq=1)
    assert bh_should_drop(transit, attacker=4) is True
    assert bh_should_drop(own, attacker=4) is False


def test_sf_boundary_probabilities():
    pkt = DataPacket(src=7, dst=0, seq=1)
    rng = random.Random(0)
    assert all(not sf_should_drop(pkt, 4, rng, 1e-12) for _ in range(100))
    assert all(sf_should_drop(pkt, 4, rng, 1 - 1e-12) for _ in range(100))


def test_sf_binomial_concentration():
    # 10,000 transit packets at p=0.5: drops within [4700, 5300]
    pkt = DataPacket(src=7, dst=0, seq=1)
    rng = random.Random(12345)
    drops = sum(sf_should_drop(pkt, 4, rng, 0.5) for _ in range(10_000))
    assert 4700 <= drops <= 5300


def test_sf_never_drops_own(cfg):
    own = DataPacket(src=4, dst=0, seq=1)
    rng = random.Random(0)
    assert not any(sf_should_drop(own, 4, rng, 0.99) for _ in range(100))


def test_di_marks_transit_only():
    transit = DataPacket(src=7, dst=0, seq=1)
    assert di_mark(transit, attacker=4).f_flag is True
    again = di_mark(transit, attacker=4)
    assert again.f_flag is True  # idempotent
    own = DataPacket(src=4, dst=0, seq=2)
    assert di_mark(own, attacker=4).f_flag is False


def test_hf_schedule_counting():
    times = hf_schedule_times_ms(0, 2000, 600_000)
    assert len(times) == 300
    with pytest.raises(ValueError):
        hf_schedule_times_ms(0, 0, 1000)


# --- whole-run invariants ---------------------------------------------------------


@pytest.mark.parametrize("kind", ["DR", "IV", "BH", "SF", "WP", "DI", "HF"])
def test_disabled_attack_is_bit_identical(topo, cfg, benign_900, kind):
    atk = AttackConfig(kind=kind, attacker=13, start_time_s=NEVER)
    res = run_simulation(topo, cfg, attack=atk, seed=1, horizon_s=900)
    assert res.digest == benign_900.digest


def test_bh_attacker_stops_forwarding(topo, cfg):
    atk = AttackConfig(kind="BH", attacker=2, start_time_s=600)
    res = run_simulation(topo, cfg, attack=atk, seed=1, horizon_s=1200)
    fwd_after = [
        ev for ev in res.trace
        if ev.kind == "msg_tx" and ev.subject == 2 and ev.time_ms >= 600_000
        and dict(ev.detail).get("msg") == "data" and dict(ev.detail)["src"] != 2
    ]
    assert fwd_after == []
    assert res.counters.get("drop_blackhole", 0) > 0


def test_bh_matches_benign_before_start(topo, cfg, benign_900):
    atk = AttackConfig(kind="BH", attacker=2, start_time_s=600)
    res = run_simulation(topo, cfg, attack=atk, seed=1, horizon_s=900)
    cut = lambda r: [ev.line() for ev in r.trace if ev.time_ms < 600_000]
    assert cut(res) == cut(benign_900)


def test_dr_attracts_new_children(topo, cfg):
    # deep attacker: neighbors gain > 192 rank by switching to the liar
    atk = AttackConfig(kind="DR", attacker=22, start_time_s=600)
    res = run_simulation(topo, cfg, attack=atk, seed=1, horizon_s=900)
    switches = [
        ev for ev in res.trace
        if ev.kind == "parent_change" and dict(ev.detail)["new"] == 22 and ev.time_ms >= 600_000
    ]
    assert switches, "no node adopted the decreased-rank attacker as parent"
    # within 5 trickle minimum intervals of onset
    assert min(ev.time_ms for ev in switches) <= 600_000 + 5 * 4000


def test_iv_version_exceeds_root_issued(topo, cfg):
    atk = AttackConfig(kind="IV", attacker=13, start_time_s=600)
    res = run_simulation(topo, cfg, attack=atk, seed=1, horizon_s=1200)
    benign_versions = [v for n, v in res.final_version.items() if n != 13]
    assert max(benign_versions) > cfg.root_version


def test_hf_inflates_dio_count(topo, cfg, benign_900):
    atk = AttackConfig(kind="HF", attacker=13, start_time_s=600)
    res = run_simulation(topo, cfg, attack=atk, seed=1, horizon_s=900)
    assert res.counters["dio_tx"] > benign_900.counters["dio_tx"]
    assert res.counters["dis_tx"] > benign_900.counters["dis_tx"]


def test_hf_only_neighbors_receive_dis(topo, cfg):
    atk = AttackConfig(kind="HF", attacker=29, start_time_s=600)
    res = run_simulation(topo, cfg, attack=atk, seed=1, horizon_s=900)
    receivers = {
        ev.subject for ev in res.trace
        if ev.kind == "msg_delivery" and dict(ev.detail).get("msg") == "dis"
        and dict(ev.detail)["frm"] == 29 and ev.time_ms >= 600_000
    }
    assert receivers == topo.neighbors(29)


def test_wp_attacker_picks_worse_parent(topo, cfg, benign_900):
    atk = AttackConfig(kind="WP", attacker=13, start_time_s=600)
    res = run_simulation(topo, cfg, attack=atk, seed=1, horizon_s=1200)
    assert res.final_rank[13] > benign_900.final_rank[13]
