"""HTTP face of the tool runner.

The server owns the only trusted path from a pipeline document to a
running process: clients post documents and uploads, never command
lines.  Planning and argument synthesis always happen here, server
side, regardless of what a client computed for preview purposes.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import execution, pipeline as pipeline_mod
from ..command import NotReady, render_preview, sanitize_filename, synthesize
from ..config import ServerConfig
from ..descriptor import spec_to_document
from ..jobs import (IllegalTransition, JobManager, JobRecord, PauseUnsupported,
                    UnknownJob)
from ..registry import PluginRegistry, load_plugins
from ..resolver import (ResolverError, apply_input, apply_preset,
                        export_session, import_session, resolve)
from ..values import UNSET, encode_value, decode_value
from . import schemas

TAIL_BYTES = 2048


def _error(status: int, code: str, message: str,
           problems: Optional[List[str]] = None):
    detail = {"code": code, "message": message}
    if problems is not None:
        detail["problems"] = problems
    return HTTPException(status_code=status, detail=detail)


def _tail(path: Path) -> Optional[str]:
    try:
        with open(path, "rb") as handle:
            handle.seek(0, os.SEEK_END)
            size = handle.tell()
            handle.seek(max(0, size - TAIL_BYTES))
            return handle.read().decode("utf-8", errors="replace")
    except OSError:
        return None


def _job_summary(record: JobRecord) -> dict:
    return record.to_document()


def _job_detail(record: JobRecord) -> dict:
    doc = record.to_document()
    for index, step in enumerate(doc["steps"]):
        directory = execution.step_dir(record.directory, index)
        step["stdout_tail"] = _tail(directory / execution.STDOUT_LOG)
        step["stderr_tail"] = _tail(directory / execution.STDERR_LOG)
    return doc


def create_app(config: ServerConfig,
               registry: Optional[PluginRegistry] = None) -> FastAPI:
    if registry is None:
        registry = load_plugins(Path(config.plugin_dir))
    manager = JobManager(Path(config.work_dir),
                         max_concurrent=config.max_concurrent_jobs)
    manager.load_persisted()
    specs = registry.specs()

    app = FastAPI(title="toolform", docs_url=None, redoc_url=None)
    app.state.registry = registry
    app.state.manager = manager
    app.state.config = config

    def spawn_vector(planned):
        loaded = registry.get(planned.plugin_id)
        if loaded is None:
            raise FileNotFoundError(planned.plugin_id)
        return execution.resolve_program(loaded.spec.program,
                                         loaded.directory)

    def require_plugin(plugin_id: str):
        loaded = registry.get(plugin_id)
        if loaded is None:
            raise _error(404, "UNKNOWN_PLUGIN",
                         "no plugin %r" % plugin_id)
        return loaded

    def require_job(job_id: str) -> JobRecord:
        try:
            return manager.get(job_id)
        except UnknownJob:
            raise _error(404, "UNKNOWN_JOB", "no job %r" % job_id)

    @app.get("/api/plugins", response_model=List[schemas.PluginSummary])
    def list_plugins():
        out = []
        for loaded in registry.plugins:
            spec = loaded.spec
            out.append(schemas.PluginSummary(
                id=spec.id, name=spec.name, desc=spec.desc,
                version=spec.version, icon=spec.presentation.icon,
                doc_url=spec.presentation.doc_url))
        return out

    @app.get("/api/plugins/{plugin_id}")
    def get_plugin(plugin_id: str):
        loaded = require_plugin(plugin_id)
        return JSONResponse(spec_to_document(loaded.spec))

    @app.post("/api/plugins/{plugin_id}/resolve",
              response_model=schemas.ResolveResponse)
    def resolve_plugin(plugin_id: str, body: schemas.ResolveRequest):
        loaded = require_plugin(plugin_id)
        spec = loaded.spec
        try:
            state = import_session(spec, body.session)
        except ResolverError as exc:
            status = 409 if exc.code == "SPEC_MISMATCH" else 400
            raise _error(status, exc.code, exc.message)
        if body.preset is not None:
            try:
                state = apply_preset(spec, state, body.preset)
            except ResolverError as exc:
                raise _error(400, exc.code, exc.message)
        if body.set is not None:
            raw = body.set.value
            if raw is None:
                value = UNSET
            else:
                try:
                    value = decode_value(raw)
                except ValueError as exc:
                    raise _error(400, "BAD_VALUE", str(exc))
            try:
                state = apply_input(spec, state, body.set.input, value)
            except ResolverError as exc:
                raise _error(400, exc.code, exc.message)
        resolved = resolve(spec, state)
        preview = None
        if resolved.ready:
            try:
                preview = render_preview(synthesize(spec, resolved))
            except NotReady:
                preview = None
        views = {}
        for input_id, view in resolved.inputs.items():
            encoded = None if view.value is UNSET \
                else encode_value(view.value)
            views[input_id] = schemas.InputViewModel(
                visible=view.visible, enabled=view.enabled, value=encoded,
                provenance=view.provenance, error=view.error)
        return schemas.ResolveResponse(
            session=export_session(spec, state),
            resolved=schemas.ResolvedModel(
                inputs=views, ready=resolved.ready,
                errors=list(resolved.errors),
                output_names=dict(resolved.output_names),
                active_preset=resolved.active_preset),
            preview=preview)

    @app.post("/api/jobs", status_code=202,
              response_model=schemas.JobCreated)
    async def submit_job(pipeline: str = Form(...),
                         files: List[UploadFile] = File(default=[])):
        try:
            document = json.loads(pipeline)
        except ValueError as exc:
            raise _error(400, "SYNTAX", "pipeline is not valid JSON: %s"
                         % exc)
        try:
            parsed = pipeline_mod.import_pipeline(document, specs)
        except pipeline_mod.PipelineError as exc:
            status = 404 if exc.code == "UNKNOWN_PLUGIN" else 400
            raise _error(status, exc.code, exc.message)
        try:
            plan = pipeline_mod.plan(parsed, specs)
        except pipeline_mod.PlanError as exc:
            raise _error(400, "PLAN", "pipeline cannot run",
                         problems=[str(p) for p in exc.problems])
        needed = pipeline_mod.required_uploads(parsed, plan)
        provided = {}
        for upload in files:
            name = sanitize_filename(upload.filename or "")
            provided[name] = upload
        missing = sorted(needed - set(provided))
        if missing:
            raise _error(400, "MISSING_UPLOAD",
                         "no file provided for %s" % ", ".join(missing))
        record = manager.create_job(parsed, plan,
                                    pipeline_document=document)
        budget = config.max_upload_bytes
        uploads_dir = record.directory / execution.UPLOAD_DIR
        for name, upload in provided.items():
            target = uploads_dir / name
            with open(target, "wb") as out:
                while True:
                    chunk = await upload.read(64 * 1024)
                    if not chunk:
                        break
                    budget -= len(chunk)
                    if budget < 0:
                        out.close()
                        raise _error(
                            413, "TOO_LARGE",
                            "uploads exceed %d bytes"
                            % config.max_upload_bytes)
                    out.write(chunk)
        manager.start_job(record, spawn_vector)
        return schemas.JobCreated(id=record.id)

    @app.get("/api/jobs", response_model=List[schemas.JobSummary])
    def list_jobs():
        return [_job_summary(record) for record in manager.list_jobs()]

    @app.get("/api/jobs/{job_id}", response_model=schemas.JobDetail)
    def job_detail(job_id: str):
        return _job_detail(require_job(job_id))

    def _control(record: JobRecord, action: str):
        try:
            if action == "pause":
                manager.pause(record)
            elif action == "resume":
                manager.resume(record)
            else:
                manager.cancel(record)
        except IllegalTransition as exc:
            raise _error(409, "ILLEGAL_TRANSITION", str(exc))
        except PauseUnsupported:
            raise _error(501, "PAUSE_UNSUPPORTED",
                         "this platform cannot stop processes")
        return _job_summary(record)

    @app.post("/api/jobs/{job_id}/pause",
              response_model=schemas.JobSummary)
    def pause_job(job_id: str):
        return _control(require_job(job_id), "pause")

    @app.post("/api/jobs/{job_id}/resume",
              response_model=schemas.JobSummary)
    def resume_job(job_id: str):
        return _control(require_job(job_id), "resume")

    @app.post("/api/jobs/{job_id}/cancel",
              response_model=schemas.JobSummary)
    def cancel_job(job_id: str):
        return _control(require_job(job_id), "cancel")

    @app.get("/api/jobs/{job_id}/files",
             response_model=schemas.FileListing)
    def job_files(job_id: str):
        record = require_job(job_id)
        base = record.directory.resolve()
        entries = []
        for path in sorted(base.rglob("*")):
            if not path.is_file():
                continue
            entries.append(schemas.FileEntry(
                path=path.relative_to(base).as_posix(),
                size=path.stat().st_size))
        return schemas.FileListing(files=entries)

    @app.get("/api/jobs/{job_id}/files/{file_path:path}")
    def job_file(job_id: str, file_path: str):
        record = require_job(job_id)
        base = record.directory.resolve()
        candidate = (base / file_path).resolve()
        # refuse anything that escapes the job directory
        if not str(candidate).startswith(str(base) + os.sep):
            raise _error(404, "NO_FILE", "no such file")
        if not candidate.is_file():
            raise _error(404, "NO_FILE", "no such file")
        return FileResponse(candidate)

    if config.static_dir:
        static = Path(config.static_dir)
        if static.is_dir():
            app.mount("/", StaticFiles(directory=str(static), html=True),
                      name="static")

    @app.on_event("shutdown")
    def _shutdown():
        manager.shutdown()

    return app
