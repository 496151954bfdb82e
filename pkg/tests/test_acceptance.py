"""Acceptance suite: one test per acceptance criterion, at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
PASS/FAIL lines as they complete. The full module takes roughly 15-20 minutes;
simulations are shared across criteria through a module-scoped run cache
(point RPLIDS_ACCEPTANCE_CACHE at a directory to keep it warm between runs).
"""

import math
import os
import random
import time

import numpy as np
import pytest

from rplids.architectures import (
    ALL_SCHEMES,
    VotingScheme,
    build_dataset,
    cidwl_dataset,
    communication_cost,
    dcid_decide,
    dcid_evaluate,
    evaluate_pooled,
)
from rplids.attacks import AttackConfig, NEVER
from rplids.config import SimConfig
from rplids.experiments import (
    RQ1_ATTACKERS,
    RQ23_ID_POOL,
    RunCache,
    Scenario,
    gen_rq1,
    gen_rq2,
    gen_rq3,
    id_pool_subsets,
    run_plan,
)
from rplids.forest import Metrics, kfold_cv, stable_seed
from rplids.monitor import FEATURE_COUNT
from rplids.rpl import INFINITE_RANK, walk_to_root
from rplids.simulation import run_simulation
from rplids.topology import default_grid

HORIZON = 3600.0

# three attacker positions for the sampled locality/voting criteria:
# the three shallowest pool attackers by computed DODAG level (L2, L3, L4)
SAMPLED_ATTACKERS = (2, 13, 19)

# ring-sampled ID sets from the RQ2/RQ3 pool for the sampled voting sub-plan
SETS_BY_SIZE = {
    3: [(0, 1, 10), (8, 15, 25)],
    5: [(0, 1, 8, 10, 15), (0, 14, 23, 24, 25)],
    9: [tuple(sorted(RQ23_ID_POOL))],
}
PAIR_SETS = [(0, 1), (10, 15), (8, 25), (23, 24)]


def _report(num: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[A{num:02d}] {name}: {status}" + (f"  ({detail})" if detail else ""))
    assert ok, f"criterion {num} ({name}) failed: {detail}"


@pytest.fixture(scope="module")
def cfg():
    return SimConfig()


@pytest.fixture(scope="module")
def topo(cfg):
    return default_grid(cfg)


@pytest.fixture(scope="module")
def cache(cfg, topo, tmp_path_factory):
    root = os.environ.get("RPLIDS_ACCEPTANCE_CACHE")
    if not root:
        root = tmp_path_factory.mktemp("acceptance-cache")
    return RunCache(root, cfg, topo)


def _pair(cache, cfg, kind, attacker):
    benign, _ = cache.get(None, cfg.seed, HORIZON)
    attack, _ = cache.get(
        AttackConfig(
            kind=kind,
            attacker=attacker,
            start_time_s=cfg.attack_start_s,
            sf_drop_prob=cfg.sf_drop_probability,
            hf_interval_s=cfg.hf_interval_s,
        ),
        cfg.seed,
        HORIZON,
    )
    return benign, attack


_cidwl_memo: dict = {}


def _cidwl_metrics(cache, cfg, kind, attacker, id_node) -> Metrics:
    key = (kind, attacker, id_node)
    if key not in _cidwl_memo:
        benign, attack = _pair(cache, cfg, kind, attacker)
        X, y = cidwl_dataset(id_node, benign, attack, cfg.warmup_s, attacker)
        _cidwl_memo[key] = evaluate_pooled(
            X, y, k_folds=cfg.cv_folds, seed=stable_seed("acc", kind, attacker, id_node),
            n_trees=cfg.forest_trees, min_leaf=cfg.forest_min_leaf,
        )
    return _cidwl_memo[key]


# --- criterion 1: scenario combinatorics (exact) -----------------------------------


def test_c01_scenario_combinatorics(cfg):
    t0 = time.time()
    n1 = len(gen_rq1(cfg))
    n2 = len(gen_rq2(cfg))
    n3 = {s: len(gen_rq3(cfg, s)) for s in ("minority", "50", "60", "70", "80")}
    elapsed = time.time() - t0
    ok = n1 == 1827 and n2 == 31626 and all(v == 31626 for v in n3.values()) and elapsed < 60
    _report(1, "scenario combinatorics", ok, f"rq1={n1} rq2={n2} rq3={sorted(n3.values())} in {elapsed:.1f}s")


# --- criterion 9: voting logic (exact) ----------------------------------------------


def test_c09_voting_logic_properties():
    rng = random.Random(20240817)
    majorities = [VotingScheme("majority", r) for r in (50, 60, 70, 80)]
    failures = 0
    for _ in range(10_000):
        k = rng.randint(2, 9)
        alarms = [rng.random() < rng.random() for _ in range(k)]
        count = sum(alarms)
        if dcid_decide(alarms, VotingScheme("minority")) != any(alarms):
            failures += 1
        fired = []
        for scheme in majorities:
            got = dcid_decide(alarms, scheme)
            if got != (count * 100 >= scheme.ratio * k):
                failures += 1
            fired.append(got)
        for loose, strict in zip(fired, fired[1:]):
            if strict and not loose:
                failures += 1
        if any(fired) and not dcid_decide(alarms, VotingScheme("minority")):
            failures += 1
    _report(9, "voting logic property suite", failures == 0, f"{failures} failures / 10000 cases")


# --- criterion 10: classifier oracle (exact) -----------------------------------------


def test_c10_classifier_oracle():
    rng = np.random.default_rng(7)
    identity_ok = True
    for _ in range(1000):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 40, size=4))
        if tp + fp + tn + fn == 0:
            continue
        m = Metrics(tp=tp, fp=fp, tn=tn, fn=fn)
        if not math.isclose(m.accuracy, (tp + tn) / (tp + fp + tn + fn)):
            identity_ok = False
        if (tp + fn) and not math.isclose(m.tpr, tp / (tp + fn)):
            identity_ok = False
        if (fp + tn) and not math.isclose(m.fpr, fp / (fp + tn)):
            identity_ok = False

    y = np.array([0, 1] * 50)
    X = np.where(y == 0, -0.5 - rng.random(100), 0.5 + rng.random(100)).reshape(-1, 1)
    sep = kfold_cv(X, y, k=10, seed=5, n_trees=100)

    Xn = rng.normal(size=(100, 10))
    yn = np.array([0] * 50 + [1] * 50)
    rng.shuffle(yn)
    noise = kfold_cv(Xn, yn, k=10, seed=5, n_trees=100)

    ok = identity_ok and sep.accuracy == 1.0 and 0.35 <= noise.accuracy <= 0.65
    _report(10, "classifier oracle", ok,
            f"identities={'ok' if identity_ok else 'BAD'} separable={sep.accuracy:.3f} noise={noise.accuracy:.3f}")


# --- criterion 11: cost model dominance (exact) ---------------------------------------


def test_c11_cost_dominance(cfg, topo):
    rng = random.Random(11)
    subsets = id_pool_subsets()
    sample = rng.sample(subsets, 100)
    bad = 0
    for ids in sample:
        g = communication_cost("CIDwG", ids, topo, HORIZON, cfg.window_s)
        d = communication_cost("DCID", ids, topo, HORIZON, cfg.window_s)
        l = communication_cost("CIDwL", ids[:1], topo, HORIZON, cfg.window_s)
        if not (d.extra_bytes < g.extra_bytes and l.extra_bytes == 0 and l.extra_messages == 0):
            bad += 1
    _report(11, "cost model dominance", bad == 0, f"{bad} violations / 100 sampled ID sets")


# --- criterion 3: benign convergence (property) ----------------------------------------


def test_c03_benign_convergence(cfg, topo):
    res = run_simulation(topo, cfg, seed=cfg.seed, horizon_s=360)
    joined = res.all_joined_s is not None and res.all_joined_s <= 300
    finite = all(r < INFINITE_RANK for r in res.final_rank.values())
    acyclic = True
    for node in res.final_rank:
        if node == 0:
            continue
        path = walk_to_root(res.final_parent, node, limit=topo.node_count)
        if path is None:
            acyclic = False
            break
        ranks = [res.final_rank[n] for n in path]
        if not all(a > b for a, b in zip(ranks, ranks[1:])):
            acyclic = False
            break
    levels = len(set(res.final_rank.values()))
    ok = joined and finite and acyclic and levels >= 8 and res.root_routes == 29
    _report(3, "benign convergence", ok,
            f"joined@{res.all_joined_s}s acyclic={acyclic} rank_levels={levels} root_routes={res.root_routes}")


# --- criterion 12: attack-off equivalence (exact) ---------------------------------------


def test_c12_attack_off_equivalence(cfg, topo):
    benign = run_simulation(topo, cfg, seed=cfg.seed, horizon_s=900)
    mismatches = []
    for kind in ("DR", "IV", "BH", "SF", "WP", "DI", "HF"):
        atk = AttackConfig(kind=kind, attacker=13, start_time_s=NEVER)
        res = run_simulation(topo, cfg, attack=atk, seed=cfg.seed, horizon_s=900)
        if res.digest != benign.digest:
            mismatches.append(kind)
    _report(12, "attack-off equivalence", not mismatches, f"mismatches={mismatches or 'none'}")


# --- criterion 2: determinism (exact) ----------------------------------------------------


def test_c02_determinism(cfg, topo, tmp_path_factory):
    a = run_simulation(topo, cfg, seed=cfg.seed, horizon_s=1200)
    b = run_simulation(topo, cfg, seed=cfg.seed, horizon_s=1200)
    digests_equal = a.digest == b.digest

    base = tmp_path_factory.mktemp("determinism")
    scenarios = [
        Scenario(rq=1, attack="BH", attacker=2, arch="CIDwL", id_nodes=(i,), scheme=None,
                 seed=cfg.seed, horizon_s=1200.0, attack_start_s=cfg.attack_start_s,
                 sf_drop_prob=cfg.sf_drop_probability, hf_interval_s=cfg.hf_interval_s)
        for i in (0, 1)
    ]
    out1, out2 = base / "r1.csv", base / "r2.csv"
    run_plan(scenarios, out1, base / "cache", cfg)
    run_plan(scenarios, out2, base / "cache", cfg)  # warm cache
    bytes_equal = out1.read_bytes() == out2.read_bytes()
    _report(2, "determinism", digests_equal and bytes_equal,
            f"trace_digests_equal={digests_equal} results_byte_identical={bytes_equal}")


# --- criterion 4: IV detectability (directional) -------------------------------------------


def test_c04_iv_detectable_everywhere(cfg, cache):
    accs = {}
    for attacker in RQ1_ATTACKERS:
        accs[attacker] = _cidwl_metrics(cache, cfg, "IV", attacker, 0).accuracy
    worst = min(accs.values())
    _report(4, "IV detectability at root", worst >= 0.95,
            "accs=" + " ".join(f"{a}:{v:.2f}" for a, v in accs.items()))


# --- criterion 5: locality effect for BH and HF (directional) --------------------------------


def test_c05_locality_effect(cfg, topo, cache):
    benign, _ = cache.get(None, cfg.seed, HORIZON)
    # the 1-hop observer is the attacker's benign-run preferred parent
    benign_run = run_simulation(topo, cfg, seed=cfg.seed, horizon_s=360)
    detail = []
    ok = True
    for kind in ("BH", "HF"):
        diffs = []
        for attacker in SAMPLED_ATTACKERS:
            near = benign_run.final_parent[attacker]
            far_nodes = [
                n for n in topo.positions
                if n != attacker and topo.hop_distance(n, attacker) >= 5
            ]
            near_acc = _cidwl_metrics(cache, cfg, kind, attacker, near).accuracy
            far_accs = [_cidwl_metrics(cache, cfg, kind, attacker, n).accuracy for n in far_nodes]
            diffs.append(near_acc - sum(far_accs) / len(far_accs))
        mean_diff = sum(diffs) / len(diffs)
        detail.append(f"{kind}:{mean_diff:.3f}")
        ok = ok and mean_diff >= 0.20
    _report(5, "locality effect (1-hop vs >=5 hops)", ok, " ".join(detail) + " need>=0.20")


# --- criterion 6: root-ID degradation (directional) -------------------------------------------


def test_c06_root_degradation(cfg, cache):
    detail = []
    ok = True
    for kind in ("BH", "HF", "DI"):
        accs = [_cidwl_metrics(cache, cfg, kind, attacker, 0).accuracy for attacker in RQ1_ATTACKERS]
        spread = max(accs) - min(accs)
        detail.append(f"{kind}:{spread:.3f}")
        ok = ok and spread >= 0.25
    _report(6, "root-ID degradation across attacker levels", ok, " ".join(detail) + " need>=0.25")


# --- criteria 7 and 8: sampled RQ3 voting sub-plan ----------------------------------------------


@pytest.fixture(scope="module")
def voting_results(cfg, cache):
    """scheme means per attack over the sampled sub-plan, plus FPRs at k=2 and k=9."""
    results: dict[str, dict[str, list[float]]] = {}
    fprs: dict[tuple[str, int], list[float]] = {}
    for kind in ("DR", "IV", "BH", "SF", "WP", "DI", "HF"):
        per_scheme: dict[str, list[float]] = {s.name: [] for s in ALL_SCHEMES}
        for attacker in SAMPLED_ATTACKERS:
            benign, attack = _pair(cache, cfg, kind, attacker)
            for size, sets in SETS_BY_SIZE.items():
                for id_set in sets:
                    per_node, y = {}, None
                    for n in id_set:
                        Xn, y = build_dataset([n], benign, attack, cfg.warmup_s)
                        per_node[n] = Xn
                    res = dcid_evaluate(
                        per_node, y, ALL_SCHEMES, k_folds=cfg.cv_folds,
                        seed=stable_seed("vote", kind, attacker, id_set),
                        n_trees=cfg.forest_trees, min_leaf=cfg.forest_min_leaf,
                    )
                    for name, m in res.items():
                        per_scheme[name].append(m.accuracy)
                    if size == 9:
                        fprs.setdefault((kind, 9), []).append(res["majority50"].fpr)
            if kind in ("BH", "HF"):
                for pair in PAIR_SETS:
                    per_node, y = {}, None
                    for n in pair:
                        Xn, y = build_dataset([n], benign, attack, cfg.warmup_s)
                        per_node[n] = Xn
                    res = dcid_evaluate(
                        per_node, y, [VotingScheme("majority", 50)], k_folds=cfg.cv_folds,
                        seed=stable_seed("vote", kind, attacker, pair),
                        n_trees=cfg.forest_trees, min_leaf=cfg.forest_min_leaf,
                    )
                    fprs.setdefault((kind, 2), []).append(res["majority50"].fpr)
        results[kind] = {name: sum(v) / len(v) for name, v in per_scheme.items()}
    return results, fprs


def test_c07_voting_scheme_ordering(voting_results):
    means, _ = voting_results
    detail = []
    ok = True
    for kind, by_scheme in means.items():
        if kind == "IV":
            spread = max(by_scheme.values()) - min(by_scheme.values())
            good = spread <= 0.02
            detail.append(f"IV:spread={spread:.3f}")
        else:
            good = (
                by_scheme["majority50"] >= by_scheme["majority80"]
                and by_scheme["majority50"] >= by_scheme["minority"]
            )
            detail.append(
                f"{kind}:50%={by_scheme['majority50']:.3f}"
                f" min={by_scheme['minority']:.3f} 80%={by_scheme['majority80']:.3f}"
            )
        ok = ok and good
    _report(7, "voting-scheme ordering", ok, " ".join(detail))


def test_c08_dcid_fpr_trend(voting_results):
    _, fprs = voting_results
    detail = []
    ok = True
    for kind in ("BH", "HF"):
        f2 = sum(fprs[(kind, 2)]) / len(fprs[(kind, 2)])
        f9 = sum(fprs[(kind, 9)]) / len(fprs[(kind, 9)])
        detail.append(f"{kind}: fpr2={f2:.3f} fpr9={f9:.3f}")
        ok = ok and f9 < f2
    _report(8, "DCID FPR drops with more ID nodes", ok, " ".join(detail))
