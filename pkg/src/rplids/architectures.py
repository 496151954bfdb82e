"""The three IDS placements: dataset assembly, voting, and the communication-cost model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .forest import Metrics, RandomForest, stable_seed, stratified_fold_indices
from .monitor import FEATURE_COUNT, label_windows
from .topology import GridTopology

ARCHITECTURES = ("CIDwL", "CIDwG", "DCID")
MAJORITY_RATIOS = (50, 60, 70, 80)


@dataclass(frozen=True)
class VotingScheme:
    kind: str  # "minority" | "majority"
    ratio: Optional[int] = None  # percent, majority only

    def __post_init__(self):
        if self.kind == "minority":
            if self.ratio is not None:
                raise ValueError("minority voting takes no ratio")
        elif self.kind == "majority":
            if self.ratio not in MAJORITY_RATIOS:
                raise ValueError(f"majority ratio must be one of {MAJORITY_RATIOS}")
        else:
            raise ValueError(f"unknown voting kind {self.kind!r}")

    @property
    def name(self) -> str:
        return "minority" if self.kind == "minority" else f"majority{self.ratio}"

    @classmethod
    def parse(cls, name: str) -> "VotingScheme":
        name = name.strip().lower()
        if name == "minority":
            return cls("minority")
        for prefix in ("majority", ""):
            if name.startswith(prefix):
                digits = name[len(prefix):].rstrip("%")
                if digits.isdigit():
                    return cls("majority", int(digits))
        raise ValueError(f"cannot parse voting scheme {name!r}")


ALL_SCHEMES = (
    VotingScheme("minority"),
    VotingScheme("majority", 50),
    VotingScheme("majority", 60),
    VotingScheme("majority", 70),
    VotingScheme("majority", 80),
)


def dcid_decide(local_alarms: Sequence[bool], scheme: VotingScheme) -> bool:
    """Combine local alarms into the global alarm.

    Minority fires on any local alarm; majority(R) fires when at least R% of
    the ID nodes alarm (non-strict threshold: 2 of 4 fires the 50% scheme).
    """
    k = len(local_alarms)
    if k < 2:
        raise ValueError("need at least 2 local alarm inputs")
    count = sum(1 for a in local_alarms if a)
    if scheme.kind == "minority":
        return count >= 1
    return count * 100 >= scheme.ratio * k


@dataclass
class RunFeatures:
    """Feature windows of one completed simulation, for every node."""

    kind: str  # "benign" | "attack"
    window_s: float
    n_windows: int
    attack_start_s: float
    vectors: dict[int, list[list[float]]]  # node -> per-window vectors


def _kept_windows(run: RunFeatures, warmup_s: float) -> list[tuple[int, int]]:
    """(window index, numeric label) pairs surviving the labeling rule."""
    pairs = label_windows(run.kind, run.n_windows, run.window_s, run.attack_start_s, warmup_s)
    return [(idx, 0 if lbl == "benign" else 1) for idx, lbl in pairs]


def build_dataset(
    id_nodes: Sequence[int],
    benign: RunFeatures,
    attack: RunFeatures,
    warmup_s: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate the id nodes' per-window features into labeled rows.

    Nodes are taken in ascending id order (canonical column order); each row is
    the 35*k vector for one (run, window). Benign rows precede attack rows.
    """
    nodes = sorted(set(id_nodes))
    if not nodes:
        raise ValueError("id_nodes must be nonempty")
    rows: list[list[float]] = []
    labels: list[int] = []
    for run in (benign, attack):
        kept = _kept_windows(run, warmup_s)
        for node in nodes:
            if node not in run.vectors:
                raise ValueError(f"run has no feature windows for node {node}")
            if len(run.vectors[node]) != run.n_windows:
                raise ValueError(
                    f"misaligned window count at node {node}: "
                    f"{len(run.vectors[node])} != {run.n_windows}"
                )
        for idx, label in kept:
            row: list[float] = []
            for node in nodes:
                row.extend(run.vectors[node][idx])
            rows.append(row)
            labels.append(label)
    X = np.array(rows, dtype=float)
    y = np.array(labels, dtype=np.int64)
    if X.shape[1] != FEATURE_COUNT * len(nodes):
        raise AssertionError("dataset width mismatch")
    return X, y


def cidwl_dataset(
    id_node: int,
    benign: RunFeatures,
    attack: RunFeatures,
    warmup_s: float,
    attacker: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    if attacker is not None and id_node == attacker:
        raise ValueError(f"ID node {id_node} equals the attacker; scenario excluded")
    return build_dataset([id_node], benign, attack, warmup_s)


def cidwg_dataset(
    id_nodes: Sequence[int],
    benign: RunFeatures,
    attack: RunFeatures,
    warmup_s: float,
) -> tuple[np.ndarray, np.ndarray]:
    nodes = sorted(set(id_nodes))
    if not 2 <= len(nodes) <= 9:
        raise ValueError("CIDwG needs 2..9 participating ID nodes")
    return build_dataset(nodes, benign, attack, warmup_s)


def evaluate_pooled(
    X: np.ndarray,
    y: np.ndarray,
    k_folds: int,
    seed: int,
    n_trees: int = 100,
    min_leaf: int = 1,
) -> Metrics:
    """CIDwL / CIDwG evaluation: one classifier over the (possibly concatenated) rows."""
    from .forest import kfold_cv  # noqa: PLC0415

    return kfold_cv(X, y, k=k_folds, seed=seed, n_trees=n_trees, min_leaf=min_leaf)


def dcid_evaluate(
    per_node: dict[int, np.ndarray],
    y: np.ndarray,
    schemes: Sequence[VotingScheme],
    k_folds: int,
    seed: int,
    n_trees: int = 100,
    min_leaf: int = 1,
) -> dict[str, Metrics]:
    """Distributed evaluation: per-fold local forests, local alarms, voted global alarm.

    The local classifiers do not depend on the voting scheme, so one pass
    scores every requested scheme from the same per-fold alarm matrix.
    """
    nodes = sorted(per_node)
    if not 2 <= len(nodes) <= 9:
        raise ValueError("DCID needs 2..9 participating ID nodes")
    y = np.asarray(y, dtype=np.int64)
    n_rows = len(y)
    for node in nodes:
        if len(per_node[node]) != n_rows:
            raise ValueError(f"node {node} rows misaligned with labels")
    folds = stratified_fold_indices(y, k_folds, seed)
    results = {s.name: Metrics() for s in schemes}
    for fold_no, test_idx in enumerate(folds):
        mask = np.ones(n_rows, dtype=bool)
        mask[test_idx] = False
        alarms = np.zeros((len(test_idx), len(nodes)), dtype=bool)
        for col, node in enumerate(nodes):
            X = per_node[node]
            model = RandomForest(
                n_trees=n_trees,
                min_leaf=min_leaf,
                seed=stable_seed(seed, "fold", fold_no, "node", node),
            )
            model.fit(X[mask], y[mask])
            alarms[:, col] = model.predict(X[test_idx]) == 1
        for scheme in schemes:
            pred = np.array(
                [dcid_decide(list(row), scheme) for row in alarms], dtype=np.int64
            )
            results[scheme.name].add(y[test_idx], pred)
    return results


@dataclass(frozen=True)
class CostReport:
    extra_messages: int
    extra_bytes: int


def communication_cost(
    arch: str,
    id_nodes: Sequence[int],
    topo: GridTopology,
    horizon_s: float,
    window_s: float,
    feature_value_bytes: int = 4,
    msg_header_bytes: int = 8,
    alarm_payload_bytes: int = 1,
    central: int = 0,
) -> CostReport:
    """Link-transmission cost of shipping windowed reports to the central analyzer.

    CIDwL is free (local decisions only). CIDwG ships the 35-value feature
    vector, DCID a 1-byte alarm, once per window per non-central ID node, each
    counted per radio hop toward the central (root-resident) analyzer.
    """
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}")
    if arch == "CIDwL":
        return CostReport(0, 0)
    n_windows = int(horizon_s // window_s)
    if arch == "CIDwG":
        payload = FEATURE_COUNT * feature_value_bytes + msg_header_bytes
    else:
        payload = alarm_payload_bytes + msg_header_bytes
    messages = 0
    for node in id_nodes:
        if node == central:
            continue
        messages += n_windows * topo.hop_distance(node, central)
    return CostReport(messages, messages * payload)
