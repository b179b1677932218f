"""Request and response bodies for the HTTP API."""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class PluginSummary(BaseModel):
    id: str
    name: str
    desc: str
    version: Optional[str] = None
    icon: Optional[str] = None
    doc_url: Optional[str] = None


class SetValue(BaseModel):
    input: str
    value: Any = None


class ResolveRequest(BaseModel):
    session: Dict[str, Any]
    set: Optional[SetValue] = None
    preset: Optional[str] = None


class InputViewModel(BaseModel):
    visible: bool
    enabled: bool
    value: Any = None
    provenance: Optional[str] = None
    error: Optional[str] = None


class ResolvedModel(BaseModel):
    inputs: Dict[str, InputViewModel]
    ready: bool
    errors: List[str]
    output_names: Dict[str, str]
    active_preset: Optional[str] = None


class ResolveResponse(BaseModel):
    session: Dict[str, Any]
    resolved: ResolvedModel
    preview: Optional[str] = None


class JobCreated(BaseModel):
    id: str


class StepModel(BaseModel):
    plugin_id: str
    state: str
    exit_code: Optional[int] = None
    started: Optional[str] = None
    ended: Optional[str] = None


class JobSummary(BaseModel):
    id: str
    state: str
    created: str
    steps: List[StepModel]


class StepDetail(StepModel):
    stdout_tail: Optional[str] = None
    stderr_tail: Optional[str] = None


class JobDetail(BaseModel):
    id: str
    state: str
    created: str
    steps: List[StepDetail]


class FileEntry(BaseModel):
    path: str
    size: int


class FileListing(BaseModel):
    files: List[FileEntry] = Field(default_factory=list)


class ApiError(BaseModel):
    code: str
    message: str
    problems: Optional[List[str]] = None
