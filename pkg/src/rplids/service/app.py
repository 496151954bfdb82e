"""FastAPI application wrapping the simulation and evaluation core."""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException

from ..attacks import AttackConfig
from ..config import SimConfig
from ..experiments import (
    TABLES,
    Scenario,
    gen_rq1,
    gen_rq2,
    gen_rq3,
    load_plan,
    load_results,
    replicate_seeds,
    run_plan,
    save_plan,
    write_heatmaps,
    heatmap_matrices,
    render_heatmap,
)
from ..simulation import run_simulation
from ..topology import default_grid
from .jobs import JobRegistry
from .schemas import (
    ConfigResponse,
    HeatmapRequest,
    HeatmapResponse,
    JobStatus,
    PlanRequest,
    PlanResponse,
    ReportRequest,
    ReportResponse,
    RunRequest,
    ScenarioModel,
    SimulateRequest,
    SimulateResponse,
    TopologyNode,
    TopologyResponse,
)


def _scenario_to_model(s: Scenario) -> ScenarioModel:
    return ScenarioModel(
        scenario_id=s.scenario_id,
        rq=s.rq,
        attack=s.attack,
        attacker=s.attacker,
        arch=s.arch,
        id_nodes=list(s.id_nodes),
        scheme=s.scheme,
        seed=s.seed,
        horizon_s=s.horizon_s,
        attack_start_s=s.attack_start_s,
        sf_drop_prob=s.sf_drop_prob,
        hf_interval_s=s.hf_interval_s,
    )


def _model_to_scenario(m: ScenarioModel) -> Scenario:
    return Scenario(
        rq=m.rq,
        attack=m.attack,
        attacker=m.attacker,
        arch=m.arch,
        id_nodes=tuple(m.id_nodes),
        scheme=m.scheme,
        seed=m.seed,
        horizon_s=m.horizon_s,
        attack_start_s=m.attack_start_s,
        sf_drop_prob=m.sf_drop_prob,
        hf_interval_s=m.hf_interval_s,
    )


def create_app(config_path: Optional[str] = None) -> FastAPI:
    cfg = SimConfig.from_file(config_path) if config_path else SimConfig()
    app = FastAPI(
        title="rplids",
        description="Grid RPL network simulator with an IDS-placement evaluation harness",
    )
    app.state.cfg = cfg
    app.state.jobs = JobRegistry()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/config", response_model=ConfigResponse)
    def get_config():
        values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
        return ConfigResponse(values=values, text=cfg.dump())

    @app.get("/topology", response_model=TopologyResponse)
    def get_topology():
        topo = default_grid(cfg)
        nodes = [TopologyNode(id=n, x=x, y=y, level=lvl) for n, x, y, lvl in topo.dump_rows()]
        return TopologyResponse(
            cols=topo.cols,
            rows=topo.rows,
            spacing_m=topo.spacing,
            tx_range_m=topo.tx_range,
            nodes=nodes,
            table=topo.dump_text(),
        )

    @app.post("/plans", response_model=PlanResponse)
    def make_plan(req: PlanRequest):
        try:
            if req.rq == 1:
                scenarios = gen_rq1(cfg, horizon_s=req.horizon_s, seed=req.seed)
            elif req.rq == 2:
                scenarios = gen_rq2(cfg, horizon_s=req.horizon_s, seed=req.seed)
            else:
                if not req.scheme:
                    raise ValueError("rq 3 requires a voting scheme")
                scenarios = gen_rq3(cfg, req.scheme, horizon_s=req.horizon_s, seed=req.seed)
            if req.seeds:
                scenarios = replicate_seeds(scenarios, req.seeds)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        if req.output_path:
            save_plan(scenarios, req.output_path)
        return PlanResponse(
            count=len(scenarios),
            path=req.output_path,
            scenarios=[_scenario_to_model(s) for s in scenarios],
        )

    @app.post("/runs", response_model=JobStatus)
    def start_run(req: RunRequest):
        if bool(req.plan_path) == bool(req.scenarios):
            raise HTTPException(422, "provide exactly one of plan_path or scenarios")
        try:
            if req.plan_path:
                scenarios = load_plan(req.plan_path)
            else:
                scenarios = [_model_to_scenario(m) for m in req.scenarios]
            topo = default_grid(cfg)
            for s in scenarios:
                s.validate(topo)
        except (OSError, ValueError, KeyError) as exc:
            raise HTTPException(422, f"bad plan: {exc}") from exc

        def _execute(job):
            job.total = len(scenarios)

            def progress(done, total):
                job.completed, job.total = done, total

            return run_plan(
                scenarios,
                output=req.output_path,
                cache_dir=req.cache_dir,
                cfg=cfg,
                jobs=req.jobs,
                resume=req.resume,
                progress_cb=progress,
            )

        job = app.state.jobs.submit(_execute, output_path=req.output_path)
        return _job_status(job)

    @app.get("/runs", response_model=list[JobStatus])
    def list_runs():
        return [_job_status(j) for j in app.state.jobs.all()]

    @app.get("/runs/{job_id}", response_model=JobStatus)
    def run_status(job_id: str):
        job = app.state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"no such job {job_id}")
        return _job_status(job)

    @app.post("/reports", response_model=ReportResponse)
    def make_report(req: ReportRequest):
        if req.table not in TABLES:
            raise HTTPException(422, f"unknown table {req.table!r}; choose from {sorted(TABLES)}")
        if not Path(req.results_path).exists():
            raise HTTPException(404, f"results file {req.results_path} not found")
        rows = load_results(req.results_path)
        topo = default_grid(cfg)
        columns, data = TABLES[req.table](rows, topo)
        if req.output_path:
            import csv  # noqa: PLC0415

            with open(req.output_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(columns)
                w.writerows(data)
        return ReportResponse(table=req.table, columns=columns, rows=data, path=req.output_path)

    @app.post("/heatmaps", response_model=HeatmapResponse)
    def make_heatmaps(req: HeatmapRequest):
        if not Path(req.results_path).exists():
            raise HTTPException(404, f"results file {req.results_path} not found")
        rows = load_results(req.results_path)
        topo = default_grid(cfg)
        files = write_heatmaps(rows, topo, req.out_dir)
        rendered = {}
        if req.render:
            for attack, (ids, attackers, matrix) in heatmap_matrices(rows, topo).items():
                rendered[attack] = render_heatmap(ids, attackers, matrix)
        return HeatmapResponse(files=files, rendered=rendered)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        topo = default_grid(cfg)
        attack = None
        if req.attack is not None:
            if req.attacker is None:
                raise HTTPException(422, "attack requires an attacker node")
            try:
                attack = AttackConfig(
                    kind=req.attack,
                    attacker=req.attacker,
                    start_time_s=req.start_time_s if req.start_time_s is not None else cfg.attack_start_s,
                    sf_drop_prob=cfg.sf_drop_probability,
                    hf_interval_s=cfg.hf_interval_s,
                )
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from exc
            if req.attacker not in topo.positions:
                raise HTTPException(422, f"attacker {req.attacker} not in topology")
        try:
            result = run_simulation(
                topo,
                cfg,
                attack=attack,
                seed=req.seed if req.seed is not None else cfg.seed,
                horizon_s=req.horizon_s,
            )
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        head = []
        if req.include_trace:
            for i, line in enumerate(result.trace_lines()):
                if i >= req.trace_limit:
                    break
                head.append(line)
        return SimulateResponse(
            digest=result.digest,
            counters=result.counters,
            all_joined_s=result.all_joined_s,
            root_routes=result.root_routes,
            final_ranks=result.final_rank,
            trace_head=head,
            event_count=len(result.trace),
        )

    return app


def _job_status(job) -> JobStatus:
    return JobStatus(
        job_id=job.job_id,
        state=job.state,
        completed=job.completed,
        total=job.total,
        output_path=job.output_path,
        summary=job.summary,
        error=job.error,
    )
