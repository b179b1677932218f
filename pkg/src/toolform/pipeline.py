"""Chain several programs into one runnable pipeline.

Pipelines are linear: each step's file inputs are either uploaded,
taken from an earlier step's declared output, or piped straight from
the previous step's stdout.  Planning resolves and synthesizes every
step server-side and partitions the chain into groups of commands that
run simultaneously connected by OS pipes; file-based handoffs separate
the groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

from .command import CommandPlan, NotReady, pipe_stdout, sanitize_filename, synthesize
from .descriptor import InputKind, PluginSpec
from .resolver import (
    SessionState,
    export_session,
    import_session,
    resolve,
    ResolverError,
)
from .values import FileToken, PipedInput


@dataclass(frozen=True)
class UploadBinding:
    """The input's file arrives with the job submission."""


@dataclass(frozen=True)
class StepOutputBinding:
    """The input reads a declared output file of an earlier step."""

    step: int
    output: str


@dataclass(frozen=True)
class PipeBinding:
    """The input reads the previous step's stdout directly."""


Binding = Union[UploadBinding, StepOutputBinding, PipeBinding]


@dataclass(frozen=True)
class PipelineStep:
    plugin_id: str
    session: SessionState = SessionState()
    bindings: Dict[str, Binding] = field(default_factory=dict)


@dataclass(frozen=True)
class Pipeline:
    name: str = ""
    steps: Tuple[PipelineStep, ...] = ()


@dataclass(frozen=True)
class PlanProblem:
    code: str
    step: Optional[int]
    message: str

    def __str__(self):
        if self.step is None:
            return "%s: %s" % (self.code, self.message)
        return "%s (step %d): %s" % (self.code, self.step, self.message)


class PlanError(Exception):
    """Planning failed; ``problems`` lists every finding."""

    def __init__(self, problems):
        super().__init__("; ".join(str(p) for p in problems))
        self.problems = tuple(problems)


class PipelineError(Exception):
    """A pipeline document could not be imported."""

    def __init__(self, code: str, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.step = step

    def __str__(self):
        if self.step is None:
            return "%s: %s" % (self.code, self.message)
        return "%s (step %d): %s" % (self.code, self.step, self.message)


@dataclass(frozen=True)
class PlannedStep:
    index: int
    plugin_id: str
    plan: CommandPlan


@dataclass(frozen=True)
class FileHandoff:
    """Copy one produced file into a later step's directory."""

    producer_step: int
    output_id: str
    source: str
    consumer_step: int
    destination: str


@dataclass(frozen=True)
class ExecutionPlan:
    groups: Tuple[Tuple[PlannedStep, ...], ...]
    handoffs: Tuple[FileHandoff, ...]

    def steps(self):
        for group in self.groups:
            yield from group


def add_step(pipeline: Pipeline, plugin_id: str,
             specs: Dict[str, PluginSpec]) -> Pipeline:
    if plugin_id not in specs:
        raise PipelineError("UNKNOWN_PLUGIN", "no plugin %r" % plugin_id)
    step = PipelineStep(plugin_id=plugin_id)
    return replace(pipeline, steps=pipeline.steps + (step,))


def required_uploads(pipeline: Pipeline, plan: ExecutionPlan) -> set:
    """Stored upload names the plan needs from the client.

    Covers every file argument not satisfied by a handoff or a pipe.
    """
    from .command import sanitize_filename

    needed = set()
    for planned in plan.steps():
        step = pipeline.steps[planned.index]
        handed = {h.destination for h in plan.handoffs
                  if h.consumer_step == planned.index}
        for file in planned.plan.input_files:
            if file.destination in handed:
                continue
            binding = step.bindings.get(file.input_id)
            if binding is None or isinstance(binding, UploadBinding):
                needed.add(sanitize_filename(file.token))
    return needed


def plan(pipeline: Pipeline, specs: Dict[str, PluginSpec]) -> ExecutionPlan:
    """Resolve, validate, and synthesize every step.

    Raises PlanError listing all problems.  The returned group shapes
    depend only on the binding table, never on input values.
    """
    problems: List[PlanProblem] = []
    plans: List[Optional[CommandPlan]] = []
    output_names: List[Dict[str, str]] = []
    piped: List[bool] = []

    for idx, step in enumerate(pipeline.steps):
        spec = specs.get(step.plugin_id)
        if spec is None:
            problems.append(PlanProblem(
                "UNKNOWN_PLUGIN", idx, "no plugin %r" % step.plugin_id))
            plans.append(None)
            output_names.append({})
            piped.append(False)
            continue
        input_map = spec.input_map()
        has_pipe = False
        substitutions = {}
        for input_id, binding in sorted(step.bindings.items()):
            inp = input_map.get(input_id)
            if inp is None:
                problems.append(PlanProblem(
                    "DANGLING_REF", idx,
                    "binding names unknown input %r" % input_id))
                continue
            if inp.kind is not InputKind.FILE:
                problems.append(PlanProblem(
                    "KIND_MISMATCH", idx,
                    "binding target %r is not a file input" % input_id))
                continue
            if isinstance(binding, PipeBinding):
                if has_pipe:
                    problems.append(PlanProblem(
                        "DOUBLE_PIPE", idx,
                        "a step can read at most one pipe"))
                    continue
                if idx == 0:
                    problems.append(PlanProblem(
                        "FORWARD_REF", idx,
                        "the first step has nothing to pipe from"))
                    continue
                producer = specs.get(pipeline.steps[idx - 1].plugin_id)
                if producer is not None and producer.stdout_output() is None:
                    problems.append(PlanProblem(
                        "NOT_PIPEABLE", idx,
                        "plugin %r does not write its output to stdout"
                        % pipeline.steps[idx - 1].plugin_id))
                    continue
                has_pipe = True
                substitutions[input_id] = PipedInput()
            elif isinstance(binding, StepOutputBinding):
                if binding.step >= idx or binding.step < 0:
                    problems.append(PlanProblem(
                        "FORWARD_REF", idx,
                        "binding for %r must reference an earlier step"
                        % input_id))
                    continue
                name = output_names[binding.step].get(binding.output)
                if name is None:
                    problems.append(PlanProblem(
                        "DANGLING_REF", idx,
                        "step %d has no output %r"
                        % (binding.step, binding.output)))
                    continue
                substitutions[input_id] = FileToken(name)
            # UploadBinding: the session's own token stands

        session = step.session
        if substitutions:
            session = replace(
                session, values={**session.values, **substitutions})
        resolved = resolve(spec, session)
        if not resolved.ready:
            for message in resolved.errors:
                problems.append(PlanProblem("NOT_READY", idx, message))
            plans.append(None)
            output_names.append(
                {k: sanitize_filename(v)
                 for k, v in resolved.output_names.items()})
            piped.append(has_pipe)
            continue
        try:
            command = synthesize(spec, resolved)
        except NotReady as exc:
            for message in exc.errors:
                problems.append(PlanProblem("NOT_READY", idx, message))
            command = None
        plans.append(command)
        output_names.append(
            {k: sanitize_filename(v)
             for k, v in resolved.output_names.items()})
        piped.append(has_pipe)

    if problems:
        raise PlanError(problems)

    # partition into piped groups; a pipe joins a step to its predecessor
    groups: List[List[PlannedStep]] = []
    for idx, step in enumerate(pipeline.steps):
        command = plans[idx]
        if idx > 0 and piped[idx]:
            previous = groups[-1][-1]
            groups[-1][-1] = replace(previous, plan=pipe_stdout(previous.plan))
            groups[-1].append(PlannedStep(idx, step.plugin_id, command))
        else:
            groups.append([PlannedStep(idx, step.plugin_id, command)])

    handoffs: List[FileHandoff] = []
    for idx, step in enumerate(pipeline.steps):
        for input_id, binding in sorted(step.bindings.items()):
            if not isinstance(binding, StepOutputBinding):
                continue
            source = output_names[binding.step][binding.output]
            destination = next(
                (f.destination for f in plans[idx].input_files
                 if f.input_id == input_id), source)
            handoffs.append(FileHandoff(
                producer_step=binding.step, output_id=binding.output,
                source=source, consumer_step=idx, destination=destination))

    return ExecutionPlan(
        groups=tuple(tuple(group) for group in groups),
        handoffs=tuple(handoffs))


# --- pipeline documents ----------------------------------------------------


def _encode_binding(binding: Binding) -> dict:
    if isinstance(binding, UploadBinding):
        return {"source": "upload"}
    if isinstance(binding, PipeBinding):
        return {"source": "pipe"}
    return {"source": "step_output", "step": binding.step,
            "output": binding.output}


def _decode_binding(raw, step: int) -> Binding:
    if not isinstance(raw, dict) or "source" not in raw:
        raise PipelineError("SYNTAX", "binding must name a source", step)
    source = raw["source"]
    if source == "upload":
        if set(raw) != {"source"}:
            raise PipelineError("SYNTAX", "bad upload binding", step)
        return UploadBinding()
    if source == "pipe":
        if set(raw) != {"source"}:
            raise PipelineError("SYNTAX", "bad pipe binding", step)
        return PipeBinding()
    if source == "step_output":
        if set(raw) != {"source", "step", "output"}:
            raise PipelineError("SYNTAX", "bad step_output binding", step)
        if not isinstance(raw["step"], int) or isinstance(raw["step"], bool):
            raise PipelineError("SYNTAX", "binding step must be a number",
                                step)
        if not isinstance(raw["output"], str):
            raise PipelineError("SYNTAX", "binding output must be a string",
                                step)
        return StepOutputBinding(raw["step"], raw["output"])
    raise PipelineError("SYNTAX", "unknown binding source %r" % source, step)


def export_pipeline(pipeline: Pipeline,
                    specs: Dict[str, PluginSpec]) -> dict:
    """JSON-ready pipeline document embedding full session documents."""
    steps = []
    for step in pipeline.steps:
        spec = specs[step.plugin_id]
        steps.append({
            "plugin_id": step.plugin_id,
            "plugin_version": spec.version,
            "session": export_session(spec, step.session),
            "bindings": {
                input_id: _encode_binding(binding)
                for input_id, binding in sorted(step.bindings.items())},
        })
    return {"name": pipeline.name, "steps": steps}


def import_pipeline(document, specs: Dict[str, PluginSpec],
                    lax: bool = False) -> Pipeline:
    """Rebuild a pipeline from a document against the local plugin set.

    Plugin versions are pinned: a mismatch is an error unless ``lax``.
    """
    if not isinstance(document, dict):
        raise PipelineError("SYNTAX", "pipeline document must be an object")
    unknown = set(document) - {"name", "steps"}
    if unknown:
        raise PipelineError(
            "SYNTAX",
            "unknown pipeline fields: %s" % ", ".join(sorted(unknown)))
    name = document.get("name", "")
    if not isinstance(name, str):
        raise PipelineError("SYNTAX", "pipeline name must be a string")
    raw_steps = document.get("steps", [])
    if not isinstance(raw_steps, list):
        raise PipelineError("SYNTAX", "steps must be a list")
    steps = []
    for idx, raw in enumerate(raw_steps):
        if not isinstance(raw, dict):
            raise PipelineError("SYNTAX", "step must be an object", idx)
        unknown = set(raw) - {"plugin_id", "plugin_version", "session",
                              "bindings"}
        if unknown:
            raise PipelineError(
                "SYNTAX",
                "unknown step fields: %s" % ", ".join(sorted(unknown)), idx)
        if "plugin_id" not in raw:
            raise PipelineError("SYNTAX", "step needs plugin_id", idx)
        plugin_id = raw["plugin_id"]
        spec = specs.get(plugin_id)
        if spec is None:
            raise PipelineError(
                "UNKNOWN_PLUGIN", "no plugin %r" % plugin_id, idx)
        wanted = raw.get("plugin_version")
        if wanted != spec.version and not lax:
            raise PipelineError(
                "VERSION_MISMATCH",
                "step pins %r version %r but %r is installed"
                % (plugin_id, wanted, spec.version), idx)
        session_doc = raw.get("session")
        if session_doc is None:
            session = SessionState()
        else:
            if lax and isinstance(session_doc, dict):
                session_doc = {**session_doc, "plugin_version": spec.version}
            try:
                session = import_session(spec, session_doc)
            except ResolverError as exc:
                raise PipelineError(exc.code, exc.message, idx) from None
        raw_bindings = raw.get("bindings", {})
        if not isinstance(raw_bindings, dict):
            raise PipelineError("SYNTAX", "bindings must be an object", idx)
        bindings = {
            input_id: _decode_binding(raw_binding, idx)
            for input_id, raw_binding in raw_bindings.items()}
        steps.append(PipelineStep(plugin_id=plugin_id, session=session,
                                  bindings=bindings))
    return Pipeline(name=name, steps=tuple(steps))
