"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class TopologyNode(BaseModel):
    id: int
    x: float
    y: float
    level: int


class TopologyResponse(BaseModel):
    cols: int
    rows: int
    spacing_m: float
    tx_range_m: float
    nodes: list[TopologyNode]
    table: str  # the id,x,y,level dump emitted with every run


class ConfigResponse(BaseModel):
    values: dict[str, float | int]
    text: str


class ScenarioModel(BaseModel):
    scenario_id: str = ""
    rq: int
    attack: str
    attacker: int
    arch: str
    id_nodes: list[int]
    scheme: Optional[str] = None
    seed: int
    horizon_s: float
    attack_start_s: float
    sf_drop_prob: float
    hf_interval_s: float


class PlanRequest(BaseModel):
    rq: int = Field(ge=1, le=3)
    scheme: Optional[str] = None
    horizon_s: Optional[float] = None
    seed: Optional[int] = None
    seeds: Optional[list[int]] = None
    output_path: Optional[str] = None  # server-side plan file to write


class PlanResponse(BaseModel):
    count: int
    path: Optional[str] = None
    scenarios: list[ScenarioModel]


class RunRequest(BaseModel):
    plan_path: Optional[str] = None
    scenarios: Optional[list[ScenarioModel]] = None
    output_path: str
    cache_dir: str
    jobs: int = 1
    resume: bool = True


class JobStatus(BaseModel):
    job_id: str
    state: str  # pending | running | done | failed
    completed: int = 0
    total: int = 0
    output_path: Optional[str] = None
    summary: Optional[dict] = None
    error: Optional[str] = None


class ReportRequest(BaseModel):
    results_path: str
    table: str
    output_path: Optional[str] = None


class ReportResponse(BaseModel):
    table: str
    columns: list[str]
    rows: list[list]
    path: Optional[str] = None


class HeatmapRequest(BaseModel):
    results_path: str
    out_dir: str
    render: bool = False


class HeatmapResponse(BaseModel):
    files: list[str]
    rendered: dict[str, str] = {}


class SimulateRequest(BaseModel):
    attack: Optional[str] = None
    attacker: Optional[int] = None
    start_time_s: Optional[float] = None
    seed: Optional[int] = None
    horizon_s: Optional[float] = None
    include_trace: bool = False
    trace_limit: int = 1000


class SimulateResponse(BaseModel):
    digest: str
    counters: dict[str, int]
    all_joined_s: Optional[float]
    root_routes: int
    final_ranks: dict[int, int]
    trace_head: list[str] = []
    event_count: int
