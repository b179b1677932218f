"""Process-level execution of planned pipelines.

Each job owns a directory; each step runs in its own step_{n} child
directory with its input files copied in beforehand.  Steps joined by
pipes start simultaneously with their stdout/stdin wired together;
everything else is captured to per-step log files.  Argument vectors
are passed to the OS verbatim; nothing here touches a shell.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .command import sanitize_filename
from .pipeline import ExecutionPlan, FileHandoff, PlannedStep

UPLOAD_DIR = "uploads"
STDOUT_LOG = "stdout.log"
STDERR_LOG = "stderr.log"


class SpawnFailure(Exception):
    """A step's program could not be started."""

    def __init__(self, step_index: int, program: str, reason: str):
        super().__init__("step %d: cannot start %r: %s"
                         % (step_index, program, reason))
        self.step_index = step_index
        self.program = program
        self.reason = reason


def step_dir(job_dir: Path, index: int) -> Path:
    return job_dir / ("step_%d" % index)


def resolve_program(program: str, plugin_dir: Optional[Path]) -> List[str]:
    """Spawn vector for a program name.

    Programs bundled in the plugin's own directory win over PATH;
    Python scripts run under the current interpreter so they need no
    execute bit.
    """
    if plugin_dir is not None:
        bundled = (plugin_dir / program).resolve()
        if bundled.is_file():
            if bundled.suffix == ".py":
                return [sys.executable, str(bundled)]
            if os.access(bundled, os.X_OK):
                return [str(bundled)]
    found = shutil.which(program)
    if found:
        return [found]
    raise FileNotFoundError(program)


def prepare_step(job_dir: Path, planned: PlannedStep,
                 handoffs: Tuple[FileHandoff, ...],
                 upload_bound: Dict[str, str]) -> Path:
    """Create the step directory and stage its input files.

    ``upload_bound`` maps the step's upload-sourced destinations to
    their stored upload file names.
    """
    directory = step_dir(job_dir, planned.index)
    directory.mkdir(parents=True, exist_ok=True)
    if planned.plan.config is not None:
        config_path = directory / sanitize_filename(planned.plan.config.filename)
        config_path.write_text(planned.plan.config.content, encoding="utf-8")
    for destination, stored in upload_bound.items():
        source = job_dir / UPLOAD_DIR / stored
        if not source.is_file():
            raise SpawnFailure(planned.index, planned.plugin_id,
                               "missing upload %r" % stored)
        shutil.copyfile(source, directory / sanitize_filename(destination))
    for handoff in handoffs:
        if handoff.consumer_step != planned.index:
            continue
        source = step_dir(job_dir, handoff.producer_step) / handoff.source
        if not source.is_file():
            raise SpawnFailure(
                planned.index, planned.plugin_id,
                "step %d produced no %r" % (handoff.producer_step,
                                            handoff.source))
        shutil.copyfile(source, directory / sanitize_filename(
            handoff.destination))
    return directory


class LiveStep:
    """One spawned process plus the files it is writing."""

    def __init__(self, planned: PlannedStep, process: subprocess.Popen,
                 open_files: List):
        self.planned = planned
        self.process = process
        self.open_files = open_files

    def close_files(self):
        for handle in self.open_files:
            try:
                handle.close()
            except OSError:
                pass


def launch_group(job_dir: Path, group: Tuple[PlannedStep, ...],
                 spawn_vector: Callable[[PlannedStep], List[str]],
                 handoffs: Tuple[FileHandoff, ...],
                 uploads_for: Callable[[PlannedStep], Dict[str, str]],
                 ) -> List[LiveStep]:
    """Start every process of one piped group, stdout feeding stdin.

    On any spawn failure the already-started processes are killed and
    SpawnFailure propagates.
    """
    live: List[LiveStep] = []
    upstream = None  # stdout of the previous process in the pipe chain
    try:
        for planned in group:
            directory = prepare_step(job_dir, planned, handoffs,
                                     uploads_for(planned))
            plan = planned.plan
            open_files: List = []
            if plan.stdin_piped and upstream is not None:
                stdin = upstream
            else:
                stdin = subprocess.DEVNULL
            if plan.stdout_piped:
                stdout = subprocess.PIPE
            else:
                target = plan.stdout_file or STDOUT_LOG
                handle = open(directory / sanitize_filename(target), "wb")
                open_files.append(handle)
                stdout = handle
            stderr = open(directory / STDERR_LOG, "wb")
            open_files.append(stderr)
            try:
                vector = spawn_vector(planned) + list(plan.argv)
            except FileNotFoundError as exc:
                raise SpawnFailure(planned.index, planned.plugin_id,
                                   "program %r not found" % str(exc))
            try:
                process = subprocess.Popen(
                    vector, cwd=directory, stdin=stdin, stdout=stdout,
                    stderr=stderr)
            except OSError as exc:
                for handle in open_files:
                    handle.close()
                raise SpawnFailure(planned.index, planned.plugin_id,
                                   str(exc))
            if upstream is not None:
                upstream.close()  # the child owns it now
                upstream = None
            if plan.stdout_piped:
                upstream = process.stdout
            live.append(LiveStep(planned, process, open_files))
        return live
    except SpawnFailure:
        if upstream is not None:
            upstream.close()
        for started in live:
            try:
                started.process.kill()
                started.process.wait()
            except OSError:
                pass
            started.close_files()
        raise


def wait_group(live: List[LiveStep], poll: Callable[[], None],
               interval: float = 0.02) -> Dict[int, int]:
    """Wait for every process, calling ``poll`` between checks.

    ``poll`` may raise to abort the wait (the caller then cancels).
    Returns step index -> exit code.
    """
    codes: Dict[int, int] = {}
    pending = list(live)
    while pending:
        poll()
        still = []
        for item in pending:
            code = item.process.poll()
            if code is None:
                still.append(item)
            else:
                item.close_files()
                codes[item.planned.index] = code
        if still:
            time.sleep(interval)
        pending = still
    return codes


def suspend_group(live: List[LiveStep]):
    for item in live:
        if item.process.poll() is None:
            os.kill(item.process.pid, signal_stop())


def resume_group(live: List[LiveStep]):
    for item in live:
        if item.process.poll() is None:
            os.kill(item.process.pid, signal_cont())


def terminate_group(live: List[LiveStep], grace: float = 0.5):
    """Stop every process: polite first, then certain."""
    import signal

    for item in live:
        if item.process.poll() is None:
            try:
                item.process.terminate()
                # a stopped process only honors SIGTERM once continued
                os.kill(item.process.pid, signal.SIGCONT)
            except OSError:
                pass
    deadline = time.monotonic() + grace
    for item in live:
        while item.process.poll() is None and time.monotonic() < deadline:
            time.sleep(0.01)
        if item.process.poll() is None:
            try:
                item.process.kill()
            except OSError:
                pass
        item.process.wait()
        item.close_files()


def pause_supported() -> bool:
    import signal

    return hasattr(signal, "SIGSTOP") and hasattr(signal, "SIGCONT")


def signal_stop():
    import signal

    return signal.SIGSTOP


def signal_cont():
    import signal

    return signal.SIGCONT
