"""Simulation and evaluation defaults, loadable from a line-oriented key = value file."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path


@dataclass
class SimConfig:
    """Every tunable default in one place.

    All durations are in seconds; the kernel converts to fixed-point
    milliseconds internally.
    """

    # deployment grid
    grid_cols: int = 6
    grid_rows: int = 5
    grid_spacing_m: float = 20.0
    tx_range_m: float = 25.0

    # radio
    link_latency_ms: int = 10
    loss_probability: float = 0.03

    # traffic and protocol timers
    data_interval_s: float = 15.0
    dao_interval_s: float = 60.0
    dis_retry_interval_s: float = 30.0
    trickle_imin_s: float = 4.0
    trickle_doublings: int = 8
    trickle_redundancy_k: int = 10
    parent_switch_threshold: int = 192
    rank_etx_quantum: float = 0.5  # ETX granularity as reported into rank computation
    etx_alpha: float = 0.1
    root_version: int = 1

    # attack defaults
    warmup_s: float = 600.0
    attack_start_s: float = 600.0
    sf_drop_probability: float = 0.5
    hf_interval_s: float = 2.0
    iv_refire_count: int = 10
    dr_advertised_rank: int = 257

    # detection pipeline
    window_s: float = 60.0
    horizon_s: float = 3600.0
    seed: int = 1
    forest_trees: int = 100
    forest_min_leaf: int = 1
    cv_folds: int = 10

    # communication-cost model
    feature_value_bytes: int = 4
    msg_header_bytes: int = 8
    alarm_payload_bytes: int = 1

    def to_lines(self) -> list[str]:
        return [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]

    def dump(self) -> str:
        return "\n".join(self.to_lines()) + "\n"

    @classmethod
    def from_file(cls, path: str | Path) -> "SimConfig":
        """Parse `key = value` lines; '#' starts a comment, blank lines ignored."""
        cfg = cls()
        known = {f.name: f.type for f in fields(cls)}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            current = getattr(cfg, key)
            try:
                if isinstance(current, bool):
                    parsed = value.lower() in ("1", "true", "yes", "on")
                elif isinstance(current, int):
                    parsed = int(value)
                else:
                    parsed = float(value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
            setattr(cfg, key, parsed)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.grid_cols < 1 or self.grid_rows < 1:
            raise ValueError("grid dimensions must be positive")
        if not 0.0 <= self.loss_probability < 1.0:
            raise ValueError("loss_probability must be in [0, 1)")
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")
        if self.horizon_s % self.window_s != 0:
            raise ValueError("horizon_s must be divisible by window_s for full window coverage")
        if not 0.0 < self.sf_drop_probability < 1.0:
            raise ValueError("sf_drop_probability must be in (0, 1)")
        if self.hf_interval_s <= 0:
            raise ValueError("hf_interval_s must be positive")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")


DEFAULT_CONFIG = SimConfig()
