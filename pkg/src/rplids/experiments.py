"""Scenario generation (RQ1-RQ3), cached batch execution, aggregation, heatmaps."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import os
import statistics
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from .architectures import (
    CostReport,
    RunFeatures,
    VotingScheme,
    build_dataset,
    cidwg_dataset,
    cidwl_dataset,
    communication_cost,
    dcid_evaluate,
    evaluate_pooled,
)
from .attacks import AttackConfig
from .config import SimConfig
from .forest import stable_seed
from .monitor import FEATURE_NAMES, label_windows
from .simulation import run_simulation
from .topology import GridTopology, default_grid, topology_digest

log = logging.getLogger("rplids")

ATTACKS = ("DR", "IV", "BH", "SF", "WP", "DI", "HF")
RQ1_ATTACKERS = (5, 2, 11, 20, 13, 22, 19, 28, 29)
RQ23_ID_POOL = (0, 1, 10, 15, 8, 25, 14, 23, 24)

RESULT_COLUMNS = (
    "scenario_id",
    "rq",
    "attack",
    "attacker",
    "arch",
    "scheme",
    "id_nodes",
    "accuracy",
    "tpr",
    "fpr",
    "extra_msgs",
    "extra_bytes",
    "seed",
    "horizon",
)


@dataclass(frozen=True)
class Scenario:
    rq: int
    attack: str
    attacker: int
    arch: str
    id_nodes: tuple[int, ...]
    scheme: Optional[str]
    seed: int
    horizon_s: float
    attack_start_s: float
    sf_drop_prob: float
    hf_interval_s: float

    def canonical(self) -> str:
        ids = ",".join(str(n) for n in self.id_nodes)
        return (
            f"rq={self.rq}|attack={self.attack}|attacker={self.attacker}"
            f"|arch={self.arch}|ids={ids}|scheme={self.scheme or 'none'}"
            f"|seed={self.seed}|horizon={self.horizon_s:g}|start={self.attack_start_s:g}"
            f"|sfp={self.sf_drop_prob:g}|hfi={self.hf_interval_s:g}"
        )

    @property
    def scenario_id(self) -> str:
        return hashlib.blake2b(self.canonical().encode(), digest_size=8).hexdigest()

    def validate(self, topo: GridTopology) -> None:
        known = topo.positions.keys()
        if self.attacker not in known:
            raise ValueError(f"attacker {self.attacker} not in topology")
        unknown = [n for n in self.id_nodes if n not in known]
        if unknown:
            raise ValueError(f"ID nodes {unknown} not in topology")
        if not self.id_nodes:
            raise ValueError("id_nodes must be nonempty")
        if self.attacker in self.id_nodes:
            raise ValueError("attacker cannot be an ID node")
        if self.arch == "CIDwL" and len(self.id_nodes) != 1:
            raise ValueError("CIDwL takes exactly one ID node")
        if self.arch in ("CIDwG", "DCID") and not 2 <= len(self.id_nodes) <= 9:
            raise ValueError(f"{self.arch} takes 2..9 ID nodes")
        if (self.scheme is not None) != (self.arch == "DCID"):
            raise ValueError("voting scheme is required exactly for DCID")
        if self.attack not in ATTACKS:
            raise ValueError(f"unknown attack {self.attack}")

    def to_json(self) -> str:
        d = asdict(self)
        d["id_nodes"] = list(self.id_nodes)
        d["scenario_id"] = self.scenario_id
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        names = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in d.items() if k in names}
        kwargs["id_nodes"] = tuple(kwargs["id_nodes"])
        return cls(**kwargs)


def _base_kwargs(cfg: SimConfig, horizon_s: Optional[float], seed: Optional[int]) -> dict:
    return {
        "seed": cfg.seed if seed is None else seed,
        "horizon_s": cfg.horizon_s if horizon_s is None else horizon_s,
        "attack_start_s": cfg.attack_start_s,
        "sf_drop_prob": cfg.sf_drop_probability,
        "hf_interval_s": cfg.hf_interval_s,
    }


def gen_rq1(
    cfg: SimConfig,
    horizon_s: Optional[float] = None,
    seed: Optional[int] = None,
    attacks: Sequence[str] = ATTACKS,
    attackers: Sequence[int] = RQ1_ATTACKERS,
    id_nodes: Optional[Sequence[int]] = None,
) -> list[Scenario]:
    """CIDwL scenarios: every (attack, attacker, single ID node != attacker)."""
    base = _base_kwargs(cfg, horizon_s, seed)
    ids = range(cfg.grid_cols * cfg.grid_rows) if id_nodes is None else id_nodes
    out = []
    for attack in attacks:
        for attacker in attackers:
            for ident in ids:
                if ident == attacker:
                    continue
                out.append(
                    Scenario(
                        rq=1, attack=attack, attacker=attacker, arch="CIDwL",
                        id_nodes=(ident,), scheme=None, **base,
                    )
                )
    return out


def id_pool_subsets(pool: Sequence[int] = RQ23_ID_POOL) -> list[tuple[int, ...]]:
    """All 502 subsets of the ID pool with 2..9 members, in deterministic order."""
    out = []
    for size in range(2, len(pool) + 1):
        out.extend(itertools.combinations(pool, size))
    return out


def gen_rq2(
    cfg: SimConfig,
    horizon_s: Optional[float] = None,
    seed: Optional[int] = None,
    attacks: Sequence[str] = ATTACKS,
    attackers: Sequence[int] = RQ1_ATTACKERS,
    pool: Sequence[int] = RQ23_ID_POOL,
) -> list[Scenario]:
    """CIDwG scenarios over every 2..9-member subset of the ID pool."""
    base = _base_kwargs(cfg, horizon_s, seed)
    out = []
    for attack in attacks:
        for attacker in attackers:
            for subset in id_pool_subsets(pool):
                out.append(
                    Scenario(
                        rq=2, attack=attack, attacker=attacker, arch="CIDwG",
                        id_nodes=tuple(sorted(subset)), scheme=None, **base,
                    )
                )
    return out


def gen_rq3(
    cfg: SimConfig,
    scheme: str,
    horizon_s: Optional[float] = None,
    seed: Optional[int] = None,
    attacks: Sequence[str] = ATTACKS,
    attackers: Sequence[int] = RQ1_ATTACKERS,
    pool: Sequence[int] = RQ23_ID_POOL,
) -> list[Scenario]:
    """DCID scenarios: RQ2 combinatorics under one voting scheme."""
    scheme_name = VotingScheme.parse(scheme).name
    base = _base_kwargs(cfg, horizon_s, seed)
    out = []
    for attack in attacks:
        for attacker in attackers:
            for subset in id_pool_subsets(pool):
                out.append(
                    Scenario(
                        rq=3, attack=attack, attacker=attacker, arch="DCID",
                        id_nodes=tuple(sorted(subset)), scheme=scheme_name, **base,
                    )
                )
    return out


def replicate_seeds(scenarios: Sequence[Scenario], seeds: Sequence[int]) -> list[Scenario]:
    return [replace(s, seed=seed) for seed in seeds for s in scenarios]


def save_plan(scenarios: Sequence[Scenario], path: str | Path) -> None:
    with open(path, "w") as fh:
        for s in scenarios:
            fh.write(s.to_json() + "\n")


def load_plan(path: str | Path) -> list[Scenario]:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            out.append(Scenario.from_dict(json.loads(line)))
    return out


# --- simulation-pair cache ----------------------------------------------------------


def attack_config_for(scn: Scenario) -> AttackConfig:
    return AttackConfig(
        kind=scn.attack,
        attacker=scn.attacker,
        start_time_s=scn.attack_start_s,
        sf_drop_prob=scn.sf_drop_prob,
        hf_interval_s=scn.hf_interval_s,
    )


class RunCache:
    """Per-(attack, attacker, seed, horizon, topology, config) feature-window store.

    Architecture and ID-set choices never change the simulated traffic, so a
    full RQ2/RQ3 batch reuses 63 attack runs plus one benign run per seed.
    Writes are atomic (temp dir + rename); a corrupted entry is resimulated.
    """

    def __init__(self, root: str | Path, cfg: SimConfig, topo: GridTopology):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.topo = topo

    def descriptor(self, attack: Optional[AttackConfig], seed: int, horizon_s: float) -> dict:
        d = {
            "topology": topology_digest(self.topo),
            "config": self.cfg.dump(),
            "seed": seed,
            "horizon_s": horizon_s,
        }
        if attack is None:
            d["run"] = "benign"
        else:
            d["run"] = "attack"
            d["attack"] = {
                "kind": attack.kind,
                "attacker": attack.attacker,
                "start_time_s": attack.start_time_s,
                "sf_drop_prob": attack.sf_drop_prob,
                "hf_interval_s": attack.hf_interval_s,
            }
        return d

    def key(self, attack: Optional[AttackConfig], seed: int, horizon_s: float) -> str:
        text = json.dumps(self.descriptor(attack, seed, horizon_s), sort_keys=True)
        return hashlib.blake2b(text.encode(), digest_size=10).hexdigest()

    def _entry_path(self, key: str) -> Path:
        return self.root / key

    def get(
        self, attack: Optional[AttackConfig], seed: int, horizon_s: float
    ) -> tuple[RunFeatures, dict]:
        key = self.key(attack, seed, horizon_s)
        path = self._entry_path(key)
        if path.exists():
            try:
                return self._load(path, attack, horizon_s)
            except Exception as exc:
                log.warning("cache entry %s unreadable (%s); resimulating", key, exc)
        feats, meta = self._simulate(attack, seed, horizon_s)
        self._store(key, feats, meta)
        return feats, meta

    def _simulate(
        self, attack: Optional[AttackConfig], seed: int, horizon_s: float
    ) -> tuple[RunFeatures, dict]:
        result = run_simulation(self.topo, self.cfg, attack=attack, seed=seed, horizon_s=horizon_s)
        kind = "benign" if attack is None else "attack"
        start = attack.start_time_s if attack is not None else self.cfg.attack_start_s
        feats = RunFeatures(
            kind=kind,
            window_s=result.window_s,
            n_windows=result.window_count,
            attack_start_s=start,
            vectors=result.features,
        )
        meta = {
            "descriptor": self.descriptor(attack, seed, horizon_s),
            "digest": result.digest,
            "kind": kind,
            "attack_start_s": start,
            "window_s": result.window_s,
            "n_windows": result.window_count,
            "warmup_s": self.cfg.warmup_s,
            "all_joined_s": result.all_joined_s,
            "root_routes": result.root_routes,
            "counters": result.counters,
        }
        return feats, meta

    def _store(self, key: str, feats: RunFeatures, meta: dict) -> None:
        tmp = Path(tempfile.mkdtemp(dir=self.root, prefix=f"tmp-{key}-"))
        try:
            (tmp / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1))
            (tmp / "feature_names.txt").write_text("\n".join(FEATURE_NAMES) + "\n")
            labels = dict(
                label_windows(
                    feats.kind, feats.n_windows, feats.window_s,
                    feats.attack_start_s, self.cfg.warmup_s,
                )
            )
            with open(tmp / "features.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["node", "window", "label"] + [f"f{i:02d}" for i in range(1, 36)])
                for node in sorted(feats.vectors):
                    for idx, vec in enumerate(feats.vectors[node]):
                        w.writerow([node, idx, labels.get(idx, "")] + [repr(v) for v in vec])
            os.replace(tmp, self._entry_path(key))
        except OSError:
            # another worker created the entry first; keep theirs
            import shutil  # noqa: PLC0415

            shutil.rmtree(tmp, ignore_errors=True)

    def _load(
        self, path: Path, attack: Optional[AttackConfig], horizon_s: float
    ) -> tuple[RunFeatures, dict]:
        meta = json.loads((path / "meta.json").read_text())
        vectors: dict[int, list[list[float]]] = {}
        with open(path / "features.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if len(header) != 3 + 35:
                raise ValueError("bad feature csv header")
            for row in reader:
                node, idx = int(row[0]), int(row[1])
                vectors.setdefault(node, []).append([float(v) for v in row[3:]])
        n_windows = meta["n_windows"]
        for node, vecs in vectors.items():
            if len(vecs) != n_windows:
                raise ValueError(f"node {node} has {len(vecs)} windows, expected {n_windows}")
        if len(vectors) != len(self.topo.positions):
            raise ValueError("feature csv does not cover every node")
        feats = RunFeatures(
            kind=meta["kind"],
            window_s=meta["window_s"],
            n_windows=n_windows,
            attack_start_s=meta["attack_start_s"],
            vectors=vectors,
        )
        return feats, meta


# --- scenario evaluation -------------------------------------------------------------


def evaluate_scenario(scn: Scenario, cache: RunCache, cfg: SimConfig, topo: GridTopology) -> dict:
    scn.validate(topo)
    benign, _ = cache.get(None, scn.seed, scn.horizon_s)
    attack_feats, _ = cache.get(attack_config_for(scn), scn.seed, scn.horizon_s)
    folds_seed = stable_seed(scn.scenario_id, "folds")
    kw = dict(
        k_folds=cfg.cv_folds, seed=folds_seed,
        n_trees=cfg.forest_trees, min_leaf=cfg.forest_min_leaf,
    )
    if scn.arch == "CIDwL":
        X, y = cidwl_dataset(scn.id_nodes[0], benign, attack_feats, cfg.warmup_s, scn.attacker)
        metrics = evaluate_pooled(X, y, **kw)
    elif scn.arch == "CIDwG":
        X, y = cidwg_dataset(scn.id_nodes, benign, attack_feats, cfg.warmup_s)
        metrics = evaluate_pooled(X, y, **kw)
    else:
        per_node = {}
        y = None
        for node in scn.id_nodes:
            Xn, y = build_dataset([node], benign, attack_feats, cfg.warmup_s)
            per_node[node] = Xn
        scheme = VotingScheme.parse(scn.scheme)
        metrics = dcid_evaluate(per_node, y, [scheme], **kw)[scheme.name]
    cost = communication_cost(
        scn.arch, scn.id_nodes, topo, scn.horizon_s, cfg.window_s,
        feature_value_bytes=cfg.feature_value_bytes,
        msg_header_bytes=cfg.msg_header_bytes,
        alarm_payload_bytes=cfg.alarm_payload_bytes,
    )
    return result_row(scn, metrics.accuracy, metrics.tpr, metrics.fpr, cost)


def result_row(scn: Scenario, accuracy: float, tpr: float, fpr: float, cost: CostReport) -> dict:
    return {
        "scenario_id": scn.scenario_id,
        "rq": scn.rq,
        "attack": scn.attack,
        "attacker": scn.attacker,
        "arch": scn.arch,
        "scheme": scn.scheme or "none",
        "id_nodes": "|".join(str(n) for n in scn.id_nodes),
        "accuracy": repr(float(accuracy)),
        "tpr": repr(float(tpr)),
        "fpr": repr(float(fpr)),
        "extra_msgs": cost.extra_messages,
        "extra_bytes": cost.extra_bytes,
        "seed": scn.seed,
        "horizon": f"{scn.horizon_s:g}",
    }


# module-level workers so a process pool can pickle them
def _warm_cache_worker(args) -> str:
    cfg_dict, cache_dir, attack_dict, seed, horizon_s = args
    cfg = SimConfig(**cfg_dict)
    topo = default_grid(cfg)
    cache = RunCache(cache_dir, cfg, topo)
    attack = AttackConfig(**attack_dict) if attack_dict else None
    _, meta = cache.get(attack, seed, horizon_s)
    return meta["digest"]


def _evaluate_worker(args) -> tuple[int, Optional[dict], Optional[str]]:
    idx, scn_dict, cfg_dict, cache_dir = args
    cfg = SimConfig(**cfg_dict)
    topo = default_grid(cfg)
    cache = RunCache(cache_dir, cfg, topo)
    scn = Scenario.from_dict(scn_dict)
    try:
        return idx, evaluate_scenario(scn, cache, cfg, topo), None
    except Exception as exc:  # noqa: BLE001 - a bad scenario must not kill the batch
        return idx, None, f"{scn.scenario_id}: {exc}"


def _cfg_dict(cfg: SimConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def run_plan(
    scenarios: Sequence[Scenario],
    output: str | Path,
    cache_dir: str | Path,
    cfg: SimConfig,
    topo: Optional[GridTopology] = None,
    jobs: int = 1,
    resume: bool = True,
    progress_cb: Optional[Callable[[int, int], None]] = None,
) -> dict:
    """Execute a plan into a results CSV; resumable, cache-backed, failure-tolerant."""
    topo = topo or default_grid(cfg)
    output = Path(output)
    for scn in scenarios:
        scn.validate(topo)
    done_ids: set[str] = set()
    if resume and output.exists():
        with open(output, newline="") as fh:
            for row in csv.DictReader(fh):
                done_ids.add(row["scenario_id"])
    todo = [(i, s) for i, s in enumerate(scenarios) if s.scenario_id not in done_ids]
    cache = RunCache(cache_dir, cfg, topo)

    # phase 1: make sure every needed simulation pair exists
    needed: dict[str, tuple] = {}
    for _, scn in todo:
        for attack in (None, attack_config_for(scn)):
            key = cache.key(attack, scn.seed, scn.horizon_s)
            if key not in needed:
                attack_dict = asdict(attack) if attack else None
                needed[key] = (_cfg_dict(cfg), str(cache_dir), attack_dict, scn.seed, scn.horizon_s)
    pending = {k: v for k, v in needed.items() if not (cache.root / k).exists()}
    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_warm_cache_worker, pending.values()))
    else:
        for args in pending.values():
            _warm_cache_worker(args)

    # phase 2: evaluate scenarios in plan order
    failures: list[str] = []
    rows: dict[int, dict] = {}
    work = [(i, json.loads(s.to_json()), _cfg_dict(cfg), str(cache_dir)) for i, s in todo]
    completed = 0

    def _note(idx, row, err):
        nonlocal completed
        completed += 1
        if err is not None:
            failures.append(err)
            log.error("scenario failed: %s", err)
        else:
            rows[idx] = row
        if progress_cb:
            progress_cb(completed, len(work))

    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for idx, row, err in pool.map(_evaluate_worker, work, chunksize=4):
                _note(idx, row, err)
    else:
        for args in work:
            idx, row, err = _evaluate_worker(args)
            _note(idx, row, err)

    new_file = not output.exists()
    with open(output, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(RESULT_COLUMNS))
        if new_file:
            writer.writeheader()
        for idx in sorted(rows):
            writer.writerow(rows[idx])
    _write_sidecars(output, cfg, topo)
    return {
        "total": len(scenarios),
        "skipped": len(scenarios) - len(todo),
        "computed": len(rows),
        "failed": len(failures),
        "failures": failures,
        "output": str(output),
    }


def _write_sidecars(output: Path, cfg: SimConfig, topo: GridTopology) -> None:
    """Topology and config dumps accompany every results file for auditability."""
    topo_path = output.with_name(output.stem + "_topology.csv")
    topo_path.write_text(topo.dump_text())
    cfg_path = output.with_name(output.stem + "_config.txt")
    cfg_path.write_text(cfg.dump())


# --- aggregation -----------------------------------------------------------------------


def load_results(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = dict(raw)
            row["rq"] = int(raw["rq"])
            row["attacker"] = int(raw["attacker"])
            row["accuracy"] = float(raw["accuracy"])
            row["tpr"] = float(raw["tpr"])
            row["fpr"] = float(raw["fpr"])
            row["id_nodes"] = tuple(int(n) for n in raw["id_nodes"].split("|"))
            row["seed"] = int(raw["seed"])
            rows.append(row)
    return rows


def _attack_sort_key(attack: str) -> int:
    return ATTACKS.index(attack)


def table_root_accuracy(rows: list[dict], topo: GridTopology) -> tuple[list[str], list[list]]:
    """Per-attack accuracy of the root ID node against each attacker position."""
    levels = topo.levels()
    rel = [r for r in rows if r["arch"] == "CIDwL" and r["id_nodes"] == (0,)]
    attackers = sorted({r["attacker"] for r in rel}, key=lambda a: (levels[a], a))
    header = ["attack"] + [f"attacker_{a}_L{levels[a]}" for a in attackers] + ["major_difference"]
    out = []
    for attack in sorted({r["attack"] for r in rel}, key=_attack_sort_key):
        accs = {}
        for a in attackers:
            vals = [r["accuracy"] for r in rel if r["attack"] == attack and r["attacker"] == a]
            if vals:
                accs[a] = sum(vals) / len(vals)
        line = [attack] + [f"{accs[a]:.3f}" if a in accs else "" for a in attackers]
        if len(accs) == len(attackers) and accs:
            line.append(f"{max(accs.values()) - min(accs.values()):.3f}")
        else:
            line.append("incomplete")
        out.append(line)
    return header, out


def table_by_count(rows: list[dict]) -> tuple[list[str], list[list]]:
    """Mean accuracy as a function of the number of participating ID nodes."""
    header = ["arch", "scheme", "attack", "id_count", "mean_accuracy", "std", "n"]
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        key = (r["arch"], r["scheme"], r["attack"], len(r["id_nodes"]))
        groups.setdefault(key, []).append(r["accuracy"])
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], _attack_sort_key(k[2]), k[3])):
        vals = groups[key]
        std = statistics.pstdev(vals) if len(vals) > 1 else 0.0
        out.append(list(key) + [f"{sum(vals) / len(vals):.3f}", f"{std:.3f}", len(vals)])
    return header, out


def table_best(rows: list[dict]) -> tuple[list[str], list[list]]:
    """Average of per-attacker best accuracies; CIDwG best-set sizes max/min/median.

    Ties between equally accurate node sets go to the smallest set.
    """
    header = [
        "attack", "cidwl_best_avg", "cidwg_best_avg",
        "nodes_max", "nodes_min", "nodes_median", "complete",
    ]
    cidwg = [r for r in rows if r["arch"] == "CIDwG"]
    cidwl = [
        r for r in rows
        if r["arch"] == "CIDwL" and r["id_nodes"][0] in RQ23_ID_POOL
    ]
    attacks = sorted({r["attack"] for r in cidwg} | {r["attack"] for r in cidwl}, key=_attack_sort_key)
    out = []
    for attack in attacks:
        wl_best, wg_best, sizes = [], [], []
        attackers = sorted({r["attacker"] for r in rows if r["attack"] == attack})
        for attacker in attackers:
            wl = [r["accuracy"] for r in cidwl if r["attack"] == attack and r["attacker"] == attacker]
            if wl:
                wl_best.append(max(wl))
            wg = [r for r in cidwg if r["attack"] == attack and r["attacker"] == attacker]
            if wg:
                best = max(wg, key=lambda r: (r["accuracy"], -len(r["id_nodes"])))
                wg_best.append(best["accuracy"])
                sizes.append(len(best["id_nodes"]))
        complete = "yes" if len(wg_best) == len(attackers) and attackers else "no"
        out.append([
            attack,
            f"{sum(wl_best) / len(wl_best):.3f}" if wl_best else "",
            f"{sum(wg_best) / len(wg_best):.3f}" if wg_best else "",
            max(sizes) if sizes else "",
            min(sizes) if sizes else "",
            int(statistics.median(sizes)) if sizes else "",
            complete,
        ])
    return header, out


def table_voting(rows: list[dict]) -> tuple[list[str], list[list]]:
    """Mean DCID accuracy per attack and voting scheme."""
    schemes = ["minority", "majority50", "majority60", "majority70", "majority80"]
    header = ["attack"] + schemes
    rel = [r for r in rows if r["arch"] == "DCID"]
    out = []
    for attack in sorted({r["attack"] for r in rel}, key=_attack_sort_key):
        line = [attack]
        for scheme in schemes:
            vals = [r["accuracy"] for r in rel if r["attack"] == attack and r["scheme"] == scheme]
            line.append(f"{sum(vals) / len(vals):.3f}" if vals else "")
        out.append(line)
    return header, out


def table_tpr_fpr(rows: list[dict]) -> tuple[list[str], list[list]]:
    """Mean TPR/FPR with two vs nine participating nodes, per architecture/scheme."""
    header = ["arch", "scheme", "attack", "tpr_2", "fpr_2", "tpr_9", "fpr_9"]
    rel = [r for r in rows if r["arch"] in ("CIDwG", "DCID")]
    combos = sorted({(r["arch"], r["scheme"]) for r in rel})
    out = []
    for arch, scheme in combos:
        sub = [r for r in rel if r["arch"] == arch and r["scheme"] == scheme]
        for attack in sorted({r["attack"] for r in sub}, key=_attack_sort_key):
            line = [arch, scheme, attack]
            for count in (2, 9):
                vals = [
                    (r["tpr"], r["fpr"]) for r in sub
                    if r["attack"] == attack and len(r["id_nodes"]) == count
                ]
                if vals:
                    line.append(f"{sum(v[0] for v in vals) / len(vals):.3f}")
                    line.append(f"{sum(v[1] for v in vals) / len(vals):.3f}")
                else:
                    line.extend(["", ""])
            out.append(line)
    return header, out


TABLES = {
    "root-accuracy": lambda rows, topo: table_root_accuracy(rows, topo),
    "best": lambda rows, topo: table_best(rows),
    "voting": lambda rows, topo: table_voting(rows),
    "tpr-fpr": lambda rows, topo: table_tpr_fpr(rows),
    "by-count": lambda rows, topo: table_by_count(rows),
}


# --- heatmaps -------------------------------------------------------------------------


def heatmap_matrices(
    rows: list[dict], topo: GridTopology
) -> dict[str, tuple[list[int], list[int], list[list[float]]]]:
    """Per-attack (ID node x attacker) accuracy grids from RQ1 results.

    Axes are ordered root-to-leaf (computed level, then id). The ID==attacker
    cell is the 0.0 sentinel; missing cells become -1 with a warning.
    """
    levels = topo.levels()
    rel = [r for r in rows if r["rq"] == 1 and r["arch"] == "CIDwL"]
    id_order = sorted(topo.positions, key=lambda n: (levels[n], n))
    attacker_order = sorted({r["attacker"] for r in rel}, key=lambda n: (levels[n], n))
    lookup: dict[tuple[str, int, int], float] = {}
    for r in rel:
        lookup[(r["attack"], r["id_nodes"][0], r["attacker"])] = r["accuracy"]
    out = {}
    for attack in sorted({r["attack"] for r in rel}, key=_attack_sort_key):
        matrix = []
        for ident in id_order:
            line = []
            for attacker in attacker_order:
                if ident == attacker:
                    line.append(0.0)
                elif (attack, ident, attacker) in lookup:
                    line.append(lookup[(attack, ident, attacker)])
                else:
                    log.warning("heatmap %s: missing cell id=%s attacker=%s", attack, ident, attacker)
                    line.append(-1.0)
            matrix.append(line)
        out[attack] = (id_order, attacker_order, matrix)
    return out


def write_heatmaps(rows: list[dict], topo: GridTopology, out_dir: str | Path) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    levels = topo.levels()
    for attack, (ids, attackers, matrix) in heatmap_matrices(rows, topo).items():
        path = out_dir / f"heatmap_{attack}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id_node"] + [f"attacker_{a}_L{levels[a]}" for a in attackers])
            for ident, line in zip(ids, matrix):
                w.writerow([ident] + [f"{v:.4f}" for v in line])
        written.append(str(path))
    return written


def render_heatmap(ids: list[int], attackers: list[int], matrix: list[list[float]]) -> str:
    """Terminal-friendly shaded rendering of one accuracy grid."""
    shades = " .:-=+*#%@"
    lines = ["id\\atk " + " ".join(f"{a:>3d}" for a in attackers)]
    for ident, line in zip(ids, matrix):
        cells = []
        for v in line:
            if v < 0:
                cells.append("  ? ")
            else:
                cells.append(f"  {shades[min(int(v * (len(shades) - 1)), len(shades) - 1)]} ")
        lines.append(f"{ident:>6d} " + "".join(cells))
    return "\n".join(lines)
