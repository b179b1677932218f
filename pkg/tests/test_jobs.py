"""Job manager tests: state machine, control, persistence, scheduling."""

import json
import re
import time

import pytest

from toolform import execution
from toolform.jobs import (
    LEGAL_TRANSITIONS,
    TERMINAL_STATES,
    IllegalTransition,
    JobManager,
    JobState,
    StepState,
    UnknownJob,
    can_transition,
)
from toolform.pipeline import (
    PipeBinding,
    Pipeline,
    PipelineStep,
    StepOutputBinding,
    export_pipeline,
    plan,
)
from toolform.resolver import SessionState, apply_input
from toolform.values import FileToken

TIMESTAMP = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$")

ALIGNMENT = b">s1\nAC-GT\n>s2\nA--GT\n>s3\nAC-G-\n"


def spawn_with(registry):
    def spawn_vector(planned):
        loaded = registry.by_id[planned.plugin_id]
        return execution.resolve_program(loaded.spec.program,
                                         loaded.directory)
    return spawn_vector


def submit(manager, specs, pipeline, uploads=None):
    execution_plan = plan(pipeline, specs)
    document = export_pipeline(pipeline, specs)
    record = manager.create_job(pipeline, execution_plan, document)
    for name, data in (uploads or {}).items():
        (record.directory / execution.UPLOAD_DIR / name).write_bytes(data)
    return record


def wait_terminal(record, timeout=15.0):
    deadline = time.monotonic() + timeout
    while record.state not in TERMINAL_STATES:
        if time.monotonic() > deadline:
            raise AssertionError("job stuck in %s" % record.state.value)
        time.sleep(0.02)
    return record.state


def wait_state(record, state, timeout=15.0):
    deadline = time.monotonic() + timeout
    while record.state != state:
        if time.monotonic() > deadline:
            raise AssertionError(
                "job never reached %s (now %s)"
                % (state.value, record.state.value))
        time.sleep(0.01)


def wait_steps_settled(record, timeout=5.0):
    terminal = {StepState.DONE, StepState.FAILED, StepState.CANCELLED,
                StepState.SKIPPED}
    deadline = time.monotonic() + timeout
    while (any(s.state not in terminal for s in record.steps)
           or record.live):
        if time.monotonic() > deadline:
            raise AssertionError(
                "steps stuck: %s" % [s.state.value for s in record.steps])
        time.sleep(0.01)


def gaps_pipeline(specs):
    session = apply_input(specs["remove_gaps"], SessionState(), "file",
                          FileToken("aln.fa"))
    return Pipeline(name="gaps", steps=(
        PipelineStep("remove_gaps", session=session),))


def ticker_pipeline(specs, seconds):
    session = apply_input(specs["slow_tick"], SessionState(), "seconds",
                          seconds)
    return Pipeline(steps=(PipelineStep("slow_tick", session=session),))


class TestTransitionTable:
    def test_exact_legal_set(self):
        Q, R, P = JobState.QUEUED, JobState.RUNNING, JobState.PAUSED
        D, F, C = JobState.DONE, JobState.FAILED, JobState.CANCELLED
        expected = {
            (Q, R), (Q, C),
            (R, P), (R, D), (R, F), (R, C),
            (P, R), (P, C),
        }
        assert LEGAL_TRANSITIONS == frozenset(expected)
        for source in JobState:
            for target in JobState:
                assert can_transition(source, target) == \
                    ((source, target) in expected)

    def test_terminal_states_are_sinks(self):
        for source in TERMINAL_STATES:
            for target in JobState:
                assert not can_transition(source, target)

    def test_illegal_transition_message(self):
        exc = IllegalTransition(JobState.DONE, JobState.RUNNING)
        assert "done -> running" in str(exc)


class TestCompletion:
    def test_single_step_done(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, gaps_pipeline(specs),
                        uploads={"aln.fa": ALIGNMENT})
        manager.start_job(record, spawn_with(registry))
        assert wait_terminal(record) == JobState.DONE
        step = record.steps[0]
        assert step.state == StepState.DONE
        assert step.exit_code == 0
        assert step.started is not None and step.ended is not None
        produced = record.directory / "step_0" / "output.fa"
        assert produced.read_text() == ">s1\nACGT\n>s2\nA-GT\n>s3\nACG-\n"
        manager.shutdown()

    def test_piped_group_done(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        count_session = apply_input(specs["produce_lines"], SessionState(),
                                    "count", 5)
        pipeline = Pipeline(steps=(
            PipelineStep("produce_lines", session=count_session),
            PipelineStep("mark_lines", bindings={"source": PipeBinding()}),
        ))
        record = submit(manager, specs, pipeline)
        manager.start_job(record, spawn_with(registry))
        assert wait_terminal(record) == JobState.DONE
        assert [s.state for s in record.steps] == [StepState.DONE] * 2
        marked = record.directory / "step_1" / "marked.txt"
        assert marked.read_text().splitlines()[0] == "0:line 0"
        manager.shutdown()

    def test_failing_step_fails_job(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        pipeline = Pipeline(steps=(
            PipelineStep("fail_step"),
            PipelineStep("produce_lines"),
        ))
        record = submit(manager, specs, pipeline)
        manager.start_job(record, spawn_with(registry))
        assert wait_terminal(record) == JobState.FAILED
        assert record.steps[0].state == StepState.FAILED
        assert record.steps[0].exit_code == 3
        assert record.steps[1].state == StepState.SKIPPED
        assert record.steps[1].exit_code is None
        manager.shutdown()

    def test_file_handoff_chain(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        pipeline = Pipeline(steps=(
            PipelineStep("produce_lines"),
            PipelineStep("mark_lines",
                         bindings={"source": StepOutputBinding(0, "lines")}),
        ))
        record = submit(manager, specs, pipeline)
        manager.start_job(record, spawn_with(registry))
        assert wait_terminal(record) == JobState.DONE
        staged = record.directory / "step_1" / "lines.txt"
        assert staged.is_file()
        manager.shutdown()

    def test_missing_upload_is_spawn_failure(self, registry, specs,
                                             work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, gaps_pipeline(specs))
        manager.start_job(record, spawn_with(registry))
        assert wait_terminal(record) == JobState.FAILED
        assert record.steps[0].state == StepState.FAILED
        stderr = (record.directory / "step_0" /
                  execution.STDERR_LOG).read_text()
        assert "spawn failure" in stderr
        assert "missing upload" in stderr
        manager.shutdown()


class TestCancel:
    def test_cancel_queued_spawns_nothing(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, ticker_pipeline(specs, 5))
        manager.cancel(record)
        assert record.state == JobState.CANCELLED
        assert [s.state for s in record.steps] == [StepState.SKIPPED]
        assert not (record.directory / "step_0").exists()
        # a later start must not resurrect it
        manager.start_job(record, spawn_with(registry))
        time.sleep(0.3)
        assert record.state == JobState.CANCELLED
        assert not (record.directory / "step_0").exists()
        manager.shutdown()

    def test_cancel_running_kills_process(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, ticker_pipeline(specs, 30))
        manager.start_job(record, spawn_with(registry))
        wait_state(record, JobState.RUNNING)
        deadline = time.monotonic() + 5
        while not record.live and time.monotonic() < deadline:
            time.sleep(0.01)
        manager.cancel(record)
        assert wait_terminal(record, timeout=5.0) == JobState.CANCELLED
        wait_steps_settled(record)
        assert record.steps[0].state == StepState.CANCELLED
        assert record.live == []
        manager.shutdown()

    def test_cancel_done_job_rejected(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, ticker_pipeline(specs, 0.05))
        manager.start_job(record, spawn_with(registry))
        assert wait_terminal(record) == JobState.DONE
        with pytest.raises(IllegalTransition):
            manager.cancel(record)
        manager.shutdown()


class TestPauseResume:
    def test_pause_then_resume_completes(self, registry, specs, work_dir):
        if not execution.pause_supported():
            pytest.skip("no SIGSTOP on this platform")
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, ticker_pipeline(specs, 0.4))
        manager.start_job(record, spawn_with(registry))
        wait_state(record, JobState.RUNNING)
        manager.pause(record)
        assert record.state == JobState.PAUSED
        time.sleep(0.1)
        manager.resume(record)
        assert record.state == JobState.RUNNING
        assert wait_terminal(record) == JobState.DONE
        manager.shutdown()

    def test_paused_job_can_cancel(self, registry, specs, work_dir):
        if not execution.pause_supported():
            pytest.skip("no SIGSTOP on this platform")
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, ticker_pipeline(specs, 30))
        manager.start_job(record, spawn_with(registry))
        wait_state(record, JobState.RUNNING)
        deadline = time.monotonic() + 5
        while not record.live and time.monotonic() < deadline:
            time.sleep(0.01)
        manager.pause(record)
        manager.cancel(record)
        assert wait_terminal(record, timeout=5.0) == JobState.CANCELLED
        manager.shutdown()

    def test_pause_queued_rejected(self, specs, work_dir):
        if not execution.pause_supported():
            pytest.skip("no SIGSTOP on this platform")
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, ticker_pipeline(specs, 1))
        with pytest.raises(IllegalTransition):
            manager.pause(record)
        manager.shutdown()

    def test_resume_queued_rejected(self, specs, work_dir):
        # resume must not borrow the scheduler's queued -> running edge
        if not execution.pause_supported():
            pytest.skip("no SIGSTOP on this platform")
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, ticker_pipeline(specs, 1))
        with pytest.raises(IllegalTransition):
            manager.resume(record)
        assert record.state == JobState.QUEUED
        manager.shutdown()


class TestPersistence:
    def test_status_document_schema(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, gaps_pipeline(specs),
                        uploads={"aln.fa": ALIGNMENT})
        manager.start_job(record, spawn_with(registry))
        wait_terminal(record)
        doc = json.loads(
            (record.directory / "status.json").read_text(encoding="utf-8"))
        assert list(doc) == ["id", "state", "steps", "created"]
        assert doc["id"] == record.id
        assert doc["state"] == "done"
        assert TIMESTAMP.match(doc["created"])
        step, = doc["steps"]
        assert list(step) == ["plugin_id", "state", "exit_code", "started",
                              "ended"]
        assert step["plugin_id"] == "remove_gaps"
        assert step["exit_code"] == 0
        assert TIMESTAMP.match(step["started"])
        assert TIMESTAMP.match(step["ended"])
        assert not list(record.directory.glob("*.tmp"))
        manager.shutdown()

    def test_pipeline_document_stored(self, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, gaps_pipeline(specs))
        stored = json.loads(
            (record.directory / "pipeline.json").read_text(encoding="utf-8"))
        assert stored["steps"][0]["plugin_id"] == "remove_gaps"
        manager.shutdown()

    def test_restart_marks_orphans_failed(self, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, Pipeline(steps=(
            PipelineStep("produce_lines"), PipelineStep("produce_lines"))))
        record.state = JobState.RUNNING
        record.steps[0].state = StepState.RUNNING
        record.steps[0].started = "2026-08-17T00:00:00.000Z"
        manager._persist(record)
        manager.shutdown()

        revived = JobManager(work_dir, max_concurrent=1)
        revived.load_persisted()
        loaded = revived.get(record.id)
        assert loaded.state == JobState.FAILED
        assert loaded.steps[0].state == StepState.FAILED
        assert loaded.steps[0].ended is not None
        assert loaded.steps[1].state == StepState.SKIPPED
        on_disk = json.loads(
            (record.directory / "status.json").read_text(encoding="utf-8"))
        assert on_disk["state"] == "failed"
        revived.shutdown()

    def test_restart_keeps_terminal_jobs(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, gaps_pipeline(specs),
                        uploads={"aln.fa": ALIGNMENT})
        manager.start_job(record, spawn_with(registry))
        wait_terminal(record)
        manager.shutdown()

        revived = JobManager(work_dir, max_concurrent=1)
        revived.load_persisted()
        loaded = revived.get(record.id)
        assert loaded.state == JobState.DONE
        assert loaded.created == record.created
        assert loaded.steps[0].exit_code == 0
        revived.shutdown()

    def test_restart_does_not_renotify(self, specs, work_dir):
        calls = []
        manager = JobManager(work_dir, max_concurrent=1,
                             notify=calls.append)
        record = submit(manager, specs, ticker_pipeline(specs, 1))
        manager.cancel(record)
        assert len(calls) == 1
        manager.shutdown()

        revived = JobManager(work_dir, max_concurrent=1,
                             notify=calls.append)
        revived.load_persisted()
        assert len(calls) == 1
        assert revived.get(record.id).notified is True
        revived.shutdown()

    def test_garbage_directories_ignored(self, work_dir):
        (work_dir / "not-a-job").mkdir()
        (work_dir / "bad-json").mkdir()
        (work_dir / "bad-json" / "status.json").write_text("{oops",
                                                           encoding="utf-8")
        manager = JobManager(work_dir, max_concurrent=1)
        manager.load_persisted()
        assert manager.list_jobs() == []
        manager.shutdown()

    def test_unknown_job_lookup(self, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        with pytest.raises(UnknownJob):
            manager.get("nope")
        manager.shutdown()


class TestNotifications:
    def test_fired_once_on_done(self, registry, specs, work_dir):
        calls = []
        manager = JobManager(work_dir, max_concurrent=1,
                             notify=calls.append)
        record = submit(manager, specs, ticker_pipeline(specs, 0.05))
        manager.start_job(record, spawn_with(registry))
        wait_terminal(record)
        time.sleep(0.1)
        assert [r.id for r in calls] == [record.id]
        assert calls[0].state == JobState.DONE
        manager.shutdown()

    def test_default_hook_appends_log_line(self, registry, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        record = submit(manager, specs, ticker_pipeline(specs, 0.05))
        manager.start_job(record, spawn_with(registry))
        wait_terminal(record)
        time.sleep(0.1)
        log = (work_dir / "notifications.log").read_text(encoding="utf-8")
        assert "job %s done" % record.id in log
        manager.shutdown()

    def test_broken_hook_does_not_fail_job(self, registry, specs, work_dir):
        def explode(record):
            raise RuntimeError("hook crashed")

        manager = JobManager(work_dir, max_concurrent=1, notify=explode)
        record = submit(manager, specs, ticker_pipeline(specs, 0.05))
        manager.start_job(record, spawn_with(registry))
        assert wait_terminal(record) == JobState.DONE
        time.sleep(0.1)
        log = (work_dir / "notifications.log").read_text(encoding="utf-8")
        assert "notification hook failed" in log
        assert record.id in log
        manager.shutdown()


class TestScheduling:
    def test_concurrency_cap_holds_second_job(self, registry, specs,
                                              work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        first = submit(manager, specs, ticker_pipeline(specs, 0.6))
        second = submit(manager, specs, ticker_pipeline(specs, 0.05))
        spawn = spawn_with(registry)
        manager.start_job(first, spawn)
        manager.start_job(second, spawn)
        wait_state(first, JobState.RUNNING)
        time.sleep(0.1)
        assert second.state == JobState.QUEUED
        assert wait_terminal(second) == JobState.DONE
        assert first.state == JobState.DONE
        manager.shutdown()

    def test_fifo_order(self, registry, specs, work_dir):
        finished = []
        manager = JobManager(work_dir, max_concurrent=1,
                             notify=lambda r: finished.append(r.id))
        spawn = spawn_with(registry)
        records = [submit(manager, specs, ticker_pipeline(specs, 0.05))
                   for _ in range(3)]
        for record in records:
            manager.start_job(record, spawn)
        for record in records:
            wait_terminal(record)
        time.sleep(0.1)
        assert finished == [r.id for r in records]
        manager.shutdown()

    def test_cancelled_queued_job_does_not_block(self, registry, specs,
                                                 work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        spawn = spawn_with(registry)
        first = submit(manager, specs, ticker_pipeline(specs, 0.5))
        blocker = submit(manager, specs, ticker_pipeline(specs, 30))
        last = submit(manager, specs, ticker_pipeline(specs, 0.05))
        manager.start_job(first, spawn)
        manager.start_job(blocker, spawn)
        manager.start_job(last, spawn)
        wait_state(first, JobState.RUNNING)
        manager.cancel(blocker)
        assert wait_terminal(last) == JobState.DONE
        assert blocker.state == JobState.CANCELLED
        manager.shutdown()

    def test_list_jobs_in_submission_order(self, specs, work_dir):
        manager = JobManager(work_dir, max_concurrent=1)
        records = [submit(manager, specs, ticker_pipeline(specs, 1))
                   for _ in range(3)]
        assert [r.id for r in manager.list_jobs()] == \
            [r.id for r in records]
        manager.shutdown()
