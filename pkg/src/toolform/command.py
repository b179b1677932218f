"""Build the exact command for one resolved form.

The output is a CommandPlan: program name plus a literal argument
vector.  Plans are executed with the argv passed verbatim to the OS;
no shell is ever involved, so input values can never smuggle in extra
arguments or operators.  render_preview produces a quoted string for
humans to read, and only for humans to read.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

from .descriptor import InputKind, LaunchMode, PluginSpec, ValueSeparator
from .resolver import ResolvedInterface, merge_capture_ids
from .values import FileToken, PipedInput, value_to_text


class NotReady(Exception):
    """The form is not complete enough to produce a command."""

    def __init__(self, errors):
        super().__init__("; ".join(errors) or "form is not ready")
        self.errors = tuple(errors)


@dataclass(frozen=True)
class ConfigFile:
    filename: str
    content: str


@dataclass(frozen=True)
class InputFile:
    """A file the program reads: which input wants it, the session's
    token for it, and the file name the argument vector points at."""

    input_id: str
    token: str
    destination: str


@dataclass(frozen=True)
class CommandPlan:
    program: str
    argv: Tuple[str, ...]
    config: Optional[ConfigFile] = None
    stdin_piped: bool = False
    stdout_piped: bool = False
    stdout_file: Optional[str] = None
    expected_outputs: Tuple[str, ...] = ()
    input_files: Tuple[InputFile, ...] = ()


_CONTROL = re.compile(r"[\x00-\x1f\x7f]")


def sanitize_filename(name: str) -> str:
    """Reduce a client-supplied file name to a safe basename."""
    base = re.split(r"[/\\]", name)[-1]
    base = _CONTROL.sub("", base).strip()
    if base in ("", ".", ".."):
        base = "upload"
    return base


def _unique_destination(name: str, taken) -> str:
    candidate = sanitize_filename(name)
    if candidate not in taken:
        taken.add(candidate)
        return candidate
    stem, dot, ext = candidate.partition(".")
    n = 1
    while True:
        n += 1
        candidate = "%s_%d%s%s" % (stem, n, dot and ".", ext)
        if candidate not in taken:
            taken.add(candidate)
            return candidate


def synthesize(spec: PluginSpec, resolved: ResolvedInterface) -> CommandPlan:
    """Turn a ready resolved interface into a command plan.

    Raises NotReady (carrying the blocking errors) when the form has
    validation errors or unmet required inputs.
    """
    if not resolved.ready:
        raise NotReady(resolved.errors)

    captured = merge_capture_ids(spec)
    destinations: set = set()
    input_files = []
    stdin_piped = False

    def file_argument(inp, token) -> str:
        destination = _unique_destination(token.name, destinations)
        input_files.append(InputFile(inp.id, token.name, destination))
        return destination

    contributing = []  # (input, value-as-text or True for bare flags)
    for inp in spec.iter_inputs():
        if inp.kind is InputKind.GROUP or inp.id in captured:
            continue
        if not resolved.contributes(inp.id):
            continue
        value = resolved.inputs[inp.id].value
        if isinstance(value, PipedInput):
            stdin_piped = True
            continue
        if inp.kind is InputKind.BOOL:
            if value is True:
                contributing.append((inp, True))
            continue
        if isinstance(value, FileToken):
            contributing.append((inp, file_argument(inp, value)))
        else:
            contributing.append((inp, value_to_text(value)))

    if spec.launch_mode is LaunchMode.CONFIG_FILE:
        sep = spec.config_value_sep or " "
        lines = []
        for inp, text in contributing:
            name = inp.flag or inp.id
            if text is True:
                text = "1"
            line = "%s%s%s" % (name, sep, text)
            if "\n" in line or "\r" in line:
                raise NotReady([
                    "input %r: line breaks cannot be written to the"
                    " configuration file" % inp.id])
            lines.append(line)
        config = ConfigFile(spec.id + ".cfg",
                            "".join(line + "\n" for line in lines))
        argv: Tuple[str, ...] = (config.filename,)
    else:
        config = None
        parts = []
        for inp, text in contributing:
            if text is True:  # tick box: the flag alone
                if inp.flag:
                    parts.append(inp.flag)
                continue
            if not inp.flag:
                parts.append(text)
            elif inp.value_separator is ValueSeparator.SPACE:
                parts.extend((inp.flag, text))
            elif inp.value_separator is ValueSeparator.EQUALS:
                parts.append("%s=%s" % (inp.flag, text))
            else:
                parts.append("%s%s" % (inp.flag, text))
        argv = tuple(parts)

    expected = []
    stdout_file = None
    for out in spec.outputs:
        name = resolved.output_names.get(out.id)
        if name is None:
            continue
        safe = sanitize_filename(name)
        expected.append(safe)
        if out.is_stdout:
            stdout_file = safe

    return CommandPlan(
        program=spec.program, argv=argv, config=config,
        stdin_piped=stdin_piped, stdout_file=stdout_file,
        expected_outputs=tuple(expected), input_files=tuple(input_files))


def pipe_stdout(plan: CommandPlan) -> CommandPlan:
    """Variant of a plan whose stdout feeds the next command."""
    return replace(plan, stdout_piped=True, stdout_file=None)


def render_preview(plan: CommandPlan) -> str:
    """Shell-style display string.  Never executed; the argv is what runs."""
    return shlex.join((plan.program,) + plan.argv)
