"""HTTP facade for the decision engine plus a small in-memory job manager
for long-running simulations.

Decision endpoints are pure functions of the request body; simulations run
on a background thread with at most one engine run active at a time (jobs
queue behind a semaphore) and results retained for a configurable TTL. The
service performs every statistical computation itself so that a thin client
can display numbers without recomputing anything.
"""

from __future__ import annotations

import argparse
import json
import os
import threading
import time
import uuid
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .config import ConfigError, parse_config
from .core import InvalidDesign, TrialData, TrialState, decision_table
from .engine import collect_records, oc_metrics
from .insertion import (
    DuplicateDose,
    TriggerKind,
    boundary_dose,
    check_insertion,
    choose_interior_dose,
    insertion_posterior,
)
from .kernels import standardize_doses
from .numerics import beta_interval_prob
from .report import (
    decision_report,
    oc_rows,
    oc_to_csv,
    round10,
    table_to_rows,
)
from .scenarios import fixed_scenarios, scenario_from_dict, scenario_to_dict
from .tite import PatientRecord, effective_data, escalation_permitted

__all__ = ["app", "create_app", "main"]

JOB_TTL_SECONDS = 3600.0


class PatientBody(BaseModel):
    dose_index: int = Field(ge=0)
    followup: float = Field(ge=0)
    dlt: bool = False
    dlt_time: Optional[float] = None


class TrialDataBody(BaseModel):
    n: list[int]
    y: list[int]


class DecisionRequest(BaseModel):
    config: dict
    data: TrialDataBody
    current: int = Field(ge=1, description="dose level under study, 1-based")
    doses: Optional[list[float]] = None
    patients: Optional[list[PatientBody]] = None


class TableRequest(BaseModel):
    config: dict
    context: Optional[TrialDataBody] = None
    doses: int = Field(default=5, ge=2)
    current: int = Field(default=1, ge=1)
    n_range: tuple[int, int] = (1, 18)


class InsertionCheckRequest(BaseModel):
    config: dict
    data: TrialDataBody
    current: int = Field(ge=1)
    doses: list[float]
    inserted: Optional[list[bool]] = None


class SimulationRequest(BaseModel):
    config: dict
    scenario: Optional[dict] = None
    fixed_scenario: Optional[int] = Field(default=None, ge=1, le=20)
    replicates: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0)


def _error(status: int, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail=message)


def _parse_run_config(payload: dict):
    try:
        return parse_config(payload)
    except ConfigError as err:
        raise _error(400, str(err))
    except InvalidDesign as err:
        raise _error(400, str(err))


def _rank_grid(n_doses: int):
    return standardize_doses([float(j) for j in range(1, n_doses + 1)])


def _grid_for(doses: Optional[list[float]], n_doses: int, scale: str):
    if doses is None:
        return _rank_grid(n_doses)
    try:
        return standardize_doses(doses, scale)
    except ValueError as err:
        raise _error(400, f"doses: {err}")


class JobStore:
    """Synchronized in-memory store of simulation jobs with TTL expiry."""

    def __init__(self, ttl: float = JOB_TTL_SECONDS, engine_slots: int = 1):
        self._lock = threading.Lock()
        self._jobs: dict[str, dict[str, Any]] = {}
        self._ttl = ttl
        # One engine run at a time by default; queued jobs wait here.
        self.engine_slot = threading.Semaphore(max(1, engine_slots))

    def create(self) -> str:
        job_id = uuid.uuid4().hex
        with self._lock:
            self._jobs[job_id] = {
                "id": job_id,
                "status": "queued",
                "progress": 0.0,
                "result": None,
                "error": None,
                "touched": time.monotonic(),
            }
        return job_id

    def update(self, job_id: str, **fields: Any) -> None:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                return
            job.update(fields)
            job["touched"] = time.monotonic()

    def get(self, job_id: str) -> Optional[dict[str, Any]]:
        now = time.monotonic()
        with self._lock:
            expired = [
                key
                for key, job in self._jobs.items()
                if now - job["touched"] > self._ttl
                and job["status"] in ("done", "failed")
            ]
            for key in expired:
                del self._jobs[key]
            job = self._jobs.get(job_id)
            return dict(job) if job is not None else None


def create_app(job_ttl: float = JOB_TTL_SECONDS, engine_slots: int = 1) -> FastAPI:
    app = FastAPI(title="skbd", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    jobs = JobStore(ttl=job_ttl, engine_slots=engine_slots)
    app.state.jobs = jobs

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        fields = []
        for err in exc.errors():
            location = ".".join(str(part) for part in err.get("loc", []) if part != "body")
            fields.append({"field": location, "message": err.get("msg", "invalid")})
        return JSONResponse(status_code=400, content={"detail": fields})

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/v1/scenarios/fixed")
    def fixed_catalog() -> list[dict]:
        return [scenario_to_dict(s) for s in fixed_scenarios()]

    @app.post("/v1/decision")
    def post_decision(body: DecisionRequest) -> dict:
        run = _parse_run_config(body.config)
        name, kernel = run.designs[0]
        n_doses = len(body.data.n)
        if len(body.data.y) != n_doses:
            raise _error(400, "data: n and y must have equal length")
        grid = _grid_for(body.doses, n_doses, run.scale)
        if len(grid) != n_doses:
            raise _error(400, "doses: length must match the data vectors")
        current = body.current - 1
        if not 0 <= current < n_doses:
            raise _error(400, f"current: level {body.current} outside 1..{n_doses}")
        try:
            design = run.design.bind(grid, kernel)
            data = TrialData(n=tuple(body.data.n), y=tuple(body.data.y))
        except (InvalidDesign, ValueError) as err:
            raise _error(400, str(err))

        actual_n: Optional[tuple[int, ...]] = None
        suspended = None
        if body.patients is not None:
            if run.tite is None:
                raise _error(400, "patients supplied but the config has no tite section")
            tau = run.tite.tau
            try:
                records = [
                    PatientRecord(
                        dose_index=p.dose_index,
                        enroll_time=0.0,
                        dlt=p.dlt,
                        dlt_time=p.dlt_time if p.dlt_time is not None else float("inf"),
                        followup=p.followup,
                    )
                    for p in body.patients
                ]
                eff = effective_data(records, n_doses, tau)
            except (IndexError, ValueError) as err:
                raise _error(400, f"patients: {err}")
            actual = [0] * n_doses
            for p in records:
                if not 0 <= p.dose_index < n_doses:
                    raise _error(400, f"patients: dose_index {p.dose_index} outside the grid")
                actual[p.dose_index] += 1
            actual_n = tuple(actual)
            at_current = [p for p in records if p.dose_index == current]
            suspended = not escalation_permitted(at_current, tau)
            data = eff  # type: ignore[assignment]

        if data.n[current] <= 0:
            raise _error(422, "no data recorded at the current dose")
        state = TrialState(
            grid=grid, data=data, current=current, actual_n=actual_n
        )
        report = decision_report(design, state)
        if suspended is not None and report["action"] == "escalate" and suspended:
            report["action"] = "stay"
            report["suspended"] = True
        report["design"] = name
        return report

    @app.post("/v1/table")
    def post_table(body: TableRequest) -> dict:
        run = _parse_run_config(body.config)
        name, kernel = run.designs[0]
        lo, hi = body.n_range
        if lo < 1 or hi < lo:
            raise _error(400, f"n_range: invalid range ({lo}, {hi})")
        if body.context is not None:
            if len(body.context.n) != len(body.context.y):
                raise _error(400, "context: n and y must have equal length")
            context = TrialData(n=tuple(body.context.n), y=tuple(body.context.y))
        else:
            context = TrialData.empty(body.doses)
        current = body.current - 1
        if not 0 <= current < len(context.n):
            raise _error(400, f"current: level {body.current} outside 1..{len(context.n)}")
        grid = _rank_grid(len(context.n))
        try:
            design = run.design.bind(grid, kernel)
            table = decision_table(design, context, current, (lo, hi), grid=grid)
        except InvalidDesign as err:
            raise _error(400, str(err))
        except ValueError as err:
            raise _error(422, str(err))
        return {"design": name, "phi": design.phi, "rows": table_to_rows(table)}

    @app.post("/v1/insertion/check")
    def post_insertion_check(body: InsertionCheckRequest) -> dict:
        run = _parse_run_config(body.config)
        insertion = run.insertion
        if insertion is None:
            raise _error(400, "insertion: config has no enabled insertion section")
        name, kernel = run.designs[0]
        n_doses = len(body.data.n)
        if len(body.data.y) != n_doses:
            raise _error(400, "data: n and y must have equal length")
        if len(body.doses) != n_doses:
            raise _error(400, "doses: length must match the data vectors")
        grid = _grid_for(body.doses, n_doses, run.scale)
        if body.inserted is not None:
            if len(body.inserted) != n_doses:
                raise _error(400, "inserted: length must match the data vectors")
            # Rebuild the working grid with insertion flags: prespecified
            # anchors come from the non-inserted doses.
            prespecified = [d for d, flag in zip(body.doses, body.inserted) if not flag]
            if len(prespecified) < 2:
                raise _error(400, "inserted: at least two prespecified doses required")
            grid = standardize_doses(prespecified, run.scale)
            for d, flag in zip(body.doses, body.inserted):
                if flag:
                    grid = grid.with_dose(d)
        current = body.current - 1
        if not 0 <= current < n_doses:
            raise _error(400, f"current: level {body.current} outside 1..{n_doses}")
        try:
            design = run.design.bind(grid, kernel)
            data = TrialData(n=tuple(body.data.n), y=tuple(body.data.y))
        except (InvalidDesign, ValueError) as err:
            raise _error(400, str(err))
        if not any(data.n):
            raise _error(422, "no dose has observed outcomes")
        inserted_count = sum(grid.inserted)
        if not insertion.budget_left(inserted_count):
            return {"design": name, "trigger": "none", "reason": "budget"}
        state = TrialState(grid=grid, data=data, current=current)
        trigger = check_insertion(state, insertion, design.phi, design.eps1, design.eps2)
        payload: dict[str, Any] = {"design": name, "trigger": trigger.kind.value}
        if trigger.kind is TriggerKind.INTERIOR:
            payload["interval_index"] = trigger.interval_index
            std = choose_interior_dose(
                trigger.interval_index, grid, data, insertion,
                design.phi, design.eps1, design.eps2,
            )
            payload["proposed_dose"] = round10(grid.unstandardize(std))
            payload["proposed_std"] = round10(std)
            lo = grid.std_doses[trigger.interval_index]
            hi = grid.std_doses[trigger.interval_index + 1]
            count = insertion.candidate_points
            samples = []
            for i in range(count):
                d = lo + (hi - lo) * (i + 1) / (count + 1)
                q = beta_interval_prob(
                    insertion_posterior(d, grid, data, insertion),
                    design.phi - design.eps1,
                    design.phi + design.eps2,
                )
                samples.append(
                    {"dose": round10(grid.unstandardize(d)), "q": round10(q)}
                )
            payload["q_curve"] = samples
        elif trigger.fired():
            try:
                raw = boundary_dose(trigger.kind, grid)
            except DuplicateDose:
                return {"design": name, "trigger": "none", "reason": "duplicate"}
            payload["proposed_dose"] = round10(raw)
            payload["proposed_std"] = round10(grid.standardize(raw))
        return payload

    def _run_job(job_id: str, body: SimulationRequest) -> None:
        try:
            run = _parse_run_config(body.config)
            if body.scenario is not None:
                scenario = scenario_from_dict(body.scenario)
            elif body.fixed_scenario is not None:
                scenario = fixed_scenarios()[body.fixed_scenario - 1]
            else:
                raise ValueError("simulation needs a scenario or fixed_scenario")
            with jobs.engine_slot:
                jobs.update(job_id, status="running", progress=0.0)
                results = []
                total_work = body.replicates * len(run.designs)
                done_work = 0
                grid = standardize_doses(scenario.raw_doses, run.scale)
                for name, kernel in run.designs:
                    design = run.design.bind(grid, kernel)
                    base = done_work

                    def progress(done: int, total: int, base=base) -> None:
                        jobs.update(
                            job_id, progress=round((base + done) / total_work, 4)
                        )

                    records = collect_records(
                        design,
                        scenario,
                        body.replicates,
                        body.seed,
                        insertion=run.insertion,
                        tite=run.tite,
                        scale=run.scale,
                        progress=progress,
                    )
                    oc = oc_metrics(
                        records,
                        scenario,
                        replicates=body.replicates,
                        seed=body.seed,
                        insertion_enabled=run.insertion is not None,
                        rod_threshold=run.rod_threshold,
                        rod_inclusive=run.rod_inclusive,
                    )
                    results.append((scenario.name, name, oc))
                    done_work += body.replicates
                rows = oc_rows(results)
                manifest = {
                    "command": "simulate",
                    "version": __version__,
                    "seed": body.seed,
                    "replicates": body.replicates,
                }
                csv_text = oc_to_csv(rows, manifest_line=json.dumps(manifest, sort_keys=True))
                jobs.update(
                    job_id,
                    status="done",
                    progress=1.0,
                    result={"rows": rows, "csv": csv_text, "manifest": manifest},
                )
        except Exception as err:  # surfaced to the client via job status
            jobs.update(job_id, status="failed", error=str(err))

    @app.post("/v1/simulations", status_code=202)
    def post_simulation(body: SimulationRequest) -> dict:
        # Validate eagerly so obviously bad requests fail at submission.
        run = _parse_run_config(body.config)
        if body.scenario is None and body.fixed_scenario is None:
            raise _error(400, "scenario: give 'scenario' or 'fixed_scenario'")
        if body.scenario is not None:
            try:
                scenario_from_dict(body.scenario)
            except ValueError as err:
                raise _error(400, f"scenario: {err}")
        del run
        job_id = jobs.create()
        worker = threading.Thread(target=_run_job, args=(job_id, body), daemon=True)
        worker.start()
        return {"id": job_id, "status": "queued"}

    @app.get("/v1/simulations/{job_id}")
    def get_simulation(job_id: str) -> dict:
        job = jobs.get(job_id)
        if job is None:
            raise _error(404, f"unknown job {job_id}")
        payload = {
            "id": job["id"],
            "status": job["status"],
            "progress": job["progress"],
        }
        if job["status"] == "done":
            payload["result"] = job["result"]
        if job["status"] == "failed":
            payload["error"] = job["error"]
        return payload

    return app


app = create_app()


def main(argv: Optional[list[str]] = None) -> None:
    import uvicorn

    parser = argparse.ArgumentParser(prog="skbd-service")
    parser.add_argument(
        "--port",
        type=int,
        default=int(os.environ.get("SKBD_PORT", "8321")),
        help="listen port (falls back to SKBD_PORT, then 8321)",
    )
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
