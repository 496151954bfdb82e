"""Tiny thread-backed job registry for long-running plan executions."""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Callable, Optional


@dataclass
class Job:
    job_id: str
    state: str = "pending"  # pending | running | done | failed
    completed: int = 0
    total: int = 0
    output_path: Optional[str] = None
    summary: Optional[dict] = None
    error: Optional[str] = None
    thread: Optional[threading.Thread] = field(default=None, repr=False)


class JobRegistry:
    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(self, fn: Callable[[Job], dict], output_path: Optional[str] = None) -> Job:
        job = Job(job_id=uuid.uuid4().hex[:12], output_path=output_path)

        def _run():
            job.state = "running"
            try:
                job.summary = fn(job)
                job.state = "done"
            except Exception as exc:  # noqa: BLE001 - surfaced via the status endpoint
                job.error = str(exc)
                job.state = "failed"

        thread = threading.Thread(target=_run, name=f"rplids-job-{job.job_id}", daemon=True)
        job.thread = thread
        with self._lock:
            self._jobs[job.job_id] = job
        thread.start()
        return job

    def get(self, job_id: str) -> Optional[Job]:
        with self._lock:
            return self._jobs.get(job_id)

    def all(self) -> list[Job]:
        with self._lock:
            return list(self._jobs.values())
