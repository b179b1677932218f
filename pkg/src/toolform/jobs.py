"""Job lifecycle management.

Jobs move through a small explicit state machine; every transition is
checked against LEGAL_TRANSITIONS and persisted to the job directory's
status.json before anything else happens.  A bounded worker pool runs
queued jobs in submission order.
"""

from __future__ import annotations

import datetime
import enum
import json
import secrets
import threading
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from . import execution
from .pipeline import ExecutionPlan, Pipeline, PlannedStep, UploadBinding
from .command import sanitize_filename

PIPELINE_FILE = "pipeline.json"
STATUS_FILE = "status.json"
NOTIFY_LOG = "notifications.log"


class JobState(str, enum.Enum):
    QUEUED = "queued"
    RUNNING = "running"
    PAUSED = "paused"
    DONE = "done"
    FAILED = "failed"
    CANCELLED = "cancelled"


class StepState(str, enum.Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"
    CANCELLED = "cancelled"
    SKIPPED = "skipped"


TERMINAL_STATES = frozenset(
    {JobState.DONE, JobState.FAILED, JobState.CANCELLED})

LEGAL_TRANSITIONS = frozenset({
    (JobState.QUEUED, JobState.RUNNING),
    (JobState.QUEUED, JobState.CANCELLED),
    (JobState.RUNNING, JobState.PAUSED),
    (JobState.PAUSED, JobState.RUNNING),
    (JobState.RUNNING, JobState.DONE),
    (JobState.RUNNING, JobState.FAILED),
    (JobState.RUNNING, JobState.CANCELLED),
    (JobState.PAUSED, JobState.CANCELLED),
})


def can_transition(source: JobState, target: JobState) -> bool:
    return (source, target) in LEGAL_TRANSITIONS


class IllegalTransition(Exception):
    def __init__(self, source: JobState, target: JobState):
        super().__init__("illegal transition %s -> %s"
                         % (source.value, target.value))
        self.source = source
        self.target = target


class PauseUnsupported(Exception):
    pass


class UnknownJob(Exception):
    pass


def _now() -> str:
    return (datetime.datetime.now(datetime.timezone.utc)
            .strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z")


class StepStatus:
    def __init__(self, plugin_id: str):
        self.plugin_id = plugin_id
        self.state = StepState.QUEUED
        self.exit_code: Optional[int] = None
        self.started: Optional[str] = None
        self.ended: Optional[str] = None

    def to_document(self) -> dict:
        return {
            "plugin_id": self.plugin_id,
            "state": self.state.value,
            "exit_code": self.exit_code,
            "started": self.started,
            "ended": self.ended,
        }


class JobRecord:
    """One job: persisted status plus in-memory execution state."""

    def __init__(self, job_id: str, directory: Path,
                 steps: List[StepStatus], created: Optional[str] = None):
        self.id = job_id
        self.directory = directory
        self.state = JobState.QUEUED
        self.steps = steps
        self.created = created or _now()
        self.plan: Optional[ExecutionPlan] = None
        self.pipeline: Optional[Pipeline] = None
        self.live: List[execution.LiveStep] = []
        self.cancel_requested = False
        self.notified = False

    def to_document(self) -> dict:
        return {
            "id": self.id,
            "state": self.state.value,
            "steps": [s.to_document() for s in self.steps],
            "created": self.created,
        }


def _load_record(directory: Path) -> Optional[JobRecord]:
    status_path = directory / STATUS_FILE
    try:
        doc = json.loads(status_path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None
    if not isinstance(doc, dict):
        return None
    try:
        steps = []
        for entry in doc["steps"]:
            status = StepStatus(entry["plugin_id"])
            status.state = StepState(entry["state"])
            status.exit_code = entry.get("exit_code")
            status.started = entry.get("started")
            status.ended = entry.get("ended")
            steps.append(status)
        record = JobRecord(doc["id"], directory, steps,
                           created=doc.get("created"))
        record.state = JobState(doc["state"])
    except (KeyError, ValueError, TypeError):
        return None
    record.notified = record.state in TERMINAL_STATES
    return record


class JobManager:
    """Owns all jobs below one work directory."""

    def __init__(self, work_dir: Path, max_concurrent: int = 2,
                 notify: Optional[Callable[[JobRecord], None]] = None):
        self.work_dir = Path(work_dir)
        self.work_dir.mkdir(parents=True, exist_ok=True)
        self.max_concurrent = max(1, int(max_concurrent))
        self._notify = notify if notify is not None else self._log_notification
        self._lock = threading.RLock()
        self._jobs: Dict[str, JobRecord] = {}
        self._order: List[str] = []
        self._running = 0
        self._wakeup = threading.Condition(self._lock)
        self._closed = False

    # -- loading ---------------------------------------------------------

    def load_persisted(self):
        """Recover jobs left behind by an earlier process.

        Jobs that were mid-flight when that process died cannot be
        supervised any more, so anything non-terminal is marked failed.
        """
        with self._lock:
            entries = sorted(p for p in self.work_dir.iterdir()
                             if p.is_dir())
            for directory in entries:
                record = _load_record(directory)
                if record is None or record.id in self._jobs:
                    continue
                if record.state not in TERMINAL_STATES:
                    record.state = JobState.FAILED
                    record.notified = True
                    for status in record.steps:
                        if status.state == StepState.RUNNING:
                            status.state = StepState.FAILED
                            status.ended = status.ended or _now()
                        elif status.state == StepState.QUEUED:
                            status.state = StepState.SKIPPED
                    self._persist(record)
                self._jobs[record.id] = record
                self._order.append(record.id)

    # -- submission ------------------------------------------------------

    def create_job(self, pipeline: Pipeline, plan: ExecutionPlan,
                   pipeline_document: dict) -> JobRecord:
        """Register a planned pipeline as a queued job.

        The caller stores uploads into the returned record's uploads
        directory, then calls start_job to hand it to the scheduler.
        """
        job_id = secrets.token_urlsafe(8)
        directory = self.work_dir / job_id
        directory.mkdir(parents=True)
        (directory / execution.UPLOAD_DIR).mkdir()
        (directory / PIPELINE_FILE).write_text(
            json.dumps(pipeline_document, indent=2) + "\n", encoding="utf-8")
        steps = [StepStatus(step.plugin_id) for step in pipeline.steps]
        record = JobRecord(job_id, directory, steps)
        record.pipeline = pipeline
        record.plan = plan
        with self._lock:
            self._jobs[job_id] = record
            self._order.append(job_id)
            self._persist(record)
        return record

    def start_job(self, record: JobRecord,
                  spawn_vector: Callable[[PlannedStep], List[str]]):
        """Queue the job for execution on a worker thread."""
        worker = threading.Thread(
            target=self._run_job, args=(record, spawn_vector), daemon=True)
        worker.start()

    # -- queries ---------------------------------------------------------

    def list_jobs(self) -> List[JobRecord]:
        with self._lock:
            return [self._jobs[job_id] for job_id in self._order]

    def get(self, job_id: str) -> JobRecord:
        with self._lock:
            record = self._jobs.get(job_id)
        if record is None:
            raise UnknownJob(job_id)
        return record

    # -- control ---------------------------------------------------------

    def pause(self, record: JobRecord):
        if not execution.pause_supported():
            raise PauseUnsupported()
        with self._lock:
            self._transition(record, JobState.PAUSED)
            execution.suspend_group(record.live)

    def resume(self, record: JobRecord):
        if not execution.pause_supported():
            raise PauseUnsupported()
        with self._lock:
            # QUEUED -> RUNNING is the scheduler's edge, not resume's
            if record.state is not JobState.PAUSED:
                raise IllegalTransition(record.state, JobState.RUNNING)
            self._transition(record, JobState.RUNNING)
            execution.resume_group(record.live)

    def cancel(self, record: JobRecord):
        with self._lock:
            if record.state == JobState.QUEUED:
                record.cancel_requested = True
                self._transition(record, JobState.CANCELLED)
                for status in record.steps:
                    status.state = StepState.SKIPPED
                self._persist(record)
                self._fire_notification(record)
                self._wakeup.notify_all()
                return
            self._transition(record, JobState.CANCELLED)
            record.cancel_requested = True
            live = list(record.live)
        execution.terminate_group(live)

    # -- internals -------------------------------------------------------

    def _transition(self, record: JobRecord, target: JobState):
        if not can_transition(record.state, target):
            raise IllegalTransition(record.state, target)
        record.state = target
        self._persist(record)

    def _persist(self, record: JobRecord):
        path = record.directory / STATUS_FILE
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(record.to_document(), indent=2) + "\n",
                       encoding="utf-8")
        tmp.replace(path)

    def _log_notification(self, record: JobRecord):
        line = "%s job %s %s\n" % (_now(), record.id, record.state.value)
        with open(self.work_dir / NOTIFY_LOG, "a", encoding="utf-8") as log:
            log.write(line)

    def _fire_notification(self, record: JobRecord):
        if record.notified:
            return
        record.notified = True
        try:
            self._notify(record)
        except Exception as exc:  # a broken hook must not take the job down
            try:
                with open(self.work_dir / NOTIFY_LOG, "a",
                          encoding="utf-8") as log:
                    log.write("%s notification hook failed for %s: %s\n"
                              % (_now(), record.id, exc))
            except OSError:
                pass

    def _acquire_slot(self, record: JobRecord) -> bool:
        """Block until this job reaches the front of the queue.

        Returns False when the job was cancelled while waiting.
        """
        with self._wakeup:
            while True:
                if record.cancel_requested or self._closed:
                    return False
                ahead = False
                for job_id in self._order:
                    other = self._jobs[job_id]
                    if other is record:
                        break
                    if other.state == JobState.QUEUED and not other.cancel_requested:
                        ahead = True
                        break
                if not ahead and self._running < self.max_concurrent:
                    self._running += 1
                    return True
                self._wakeup.wait(timeout=0.05)

    def _release_slot(self):
        with self._wakeup:
            self._running -= 1
            self._wakeup.notify_all()

    def _uploads_for(self, record: JobRecord,
                     planned: PlannedStep) -> Dict[str, str]:
        """Map of destination name -> stored upload name for one step."""
        assert record.pipeline is not None
        step = record.pipeline.steps[planned.index]
        handoff_targets = set()
        assert record.plan is not None
        for handoff in record.plan.handoffs:
            if handoff.consumer_step == planned.index:
                handoff_targets.add(handoff.destination)
        out: Dict[str, str] = {}
        for file in planned.plan.input_files:
            if file.destination in handoff_targets:
                continue
            binding = step.bindings.get(file.input_id)
            if binding is None or isinstance(binding, UploadBinding):
                out[file.destination] = sanitize_filename(file.token)
        return out

    def _run_job(self, record: JobRecord,
                 spawn_vector: Callable[[PlannedStep], List[str]]):
        if not self._acquire_slot(record):
            return
        try:
            with self._lock:
                if record.cancel_requested:
                    return
                self._transition(record, JobState.RUNNING)
            assert record.plan is not None
            failed = False
            for group in record.plan.groups:
                if record.cancel_requested or failed:
                    break
                if not self._run_group(record, group, spawn_vector):
                    failed = True
            with self._lock:
                for status in record.steps:
                    if status.state == StepState.QUEUED:
                        status.state = StepState.SKIPPED
                if record.state in TERMINAL_STATES:
                    self._persist(record)
                elif record.cancel_requested:
                    # cancel() already moved the state; nothing to do
                    self._persist(record)
                else:
                    self._transition(
                        record,
                        JobState.FAILED if failed else JobState.DONE)
                self._fire_notification(record)
        finally:
            self._release_slot()

    def _run_group(self, record: JobRecord, group: Tuple[PlannedStep, ...],
                   spawn_vector: Callable[[PlannedStep], List[str]]) -> bool:
        """Run one piped group to completion.  True when all exit 0."""
        assert record.plan is not None
        started_at = _now()
        try:
            live = execution.launch_group(
                record.directory, group, spawn_vector,
                record.plan.handoffs,
                lambda planned: self._uploads_for(record, planned))
        except execution.SpawnFailure as exc:
            with self._lock:
                for planned in group:
                    status = record.steps[planned.index]
                    if planned.index == exc.step_index:
                        status.state = StepState.FAILED
                        status.started = started_at
                        status.ended = _now()
                        self._write_spawn_error(record, planned, exc)
                    else:
                        status.state = StepState.SKIPPED
                self._persist(record)
            return False
        with self._lock:
            record.live = live
            for planned in group:
                status = record.steps[planned.index]
                status.state = StepState.RUNNING
                status.started = started_at
            self._persist(record)
            if record.state == JobState.PAUSED:
                # paused while this group was being prepared
                execution.suspend_group(live)

        def poll():
            pass

        codes = execution.wait_group(live, poll)
        ended_at = _now()
        cancelled = record.cancel_requested
        all_zero = True
        with self._lock:
            record.live = []
            for planned in group:
                status = record.steps[planned.index]
                code = codes.get(planned.index)
                status.exit_code = code
                status.ended = ended_at
                if cancelled:
                    status.state = StepState.CANCELLED
                elif code == 0:
                    status.state = StepState.DONE
                else:
                    status.state = StepState.FAILED
                    all_zero = False
            self._persist(record)
        return all_zero and not cancelled

    def _write_spawn_error(self, record: JobRecord, planned: PlannedStep,
                           exc: execution.SpawnFailure):
        directory = execution.step_dir(record.directory, planned.index)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            with open(directory / execution.STDERR_LOG, "ab") as log:
                log.write(("spawn failure: %s\n" % exc.reason)
                          .encode("utf-8"))
        except OSError:
            pass

    def shutdown(self):
        with self._wakeup:
            self._closed = True
            self._wakeup.notify_all()
