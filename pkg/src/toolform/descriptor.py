"""Plugin descriptor model: what a command-line program looks like.

A descriptor is a UTF-8 JSON document, one program per file.  Input
records are keyed by widget kind, with the flag as the value::

    {
      "program": "remove_gaps.py",
      "name": "Gaps remover",
      "outfile": "output.fa",
      "options": [
        {"file": "", "required": "Input file missing!"},
        {"checkbox": "--count", "title": "Count sequences"}
      ]
    }

Parsing is strict by default: unknown fields are errors (lax mode turns
them into warnings).  parse_plugin never crashes on bad input; every
malformed document produces a DescriptorError with a location.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from . import rules
from .rules import Rule, RuleError
from .values import FileToken, PipedInput, UNSET, decode_value, encode_value, is_scalar


class InputKind(str, Enum):
    TEXT = "text"
    NUMBER = "number"
    BOOL = "checkbox"
    SELECT = "select"
    FILE = "file"
    HIDDEN = "hidden"
    GROUP = "group"


class LaunchMode(str, Enum):
    ARGS = "args"
    CONFIG_FILE = "configfile"


class ValueSeparator(str, Enum):
    SPACE = "space"
    EQUALS = "equals"
    NONE = "none"


KIND_KEYS = {kind.value: kind for kind in InputKind}

# canonical key order inside an input record, after the kind key
INPUT_KEYS_COMMON = ("id", "title", "desc", "default", "required",
                     "visible", "enabled", "fix", "sep")
INPUT_KEYS_BY_KIND = {
    InputKind.TEXT: ("merge",),
    InputKind.NUMBER: ("min", "max", "integer", "merge"),
    InputKind.BOOL: ("merge",),
    InputKind.SELECT: ("options", "merge"),
    InputKind.FILE: ("filter", "merge"),
    InputKind.HIDDEN: ("merge",),
    InputKind.GROUP: ("items",),
}
GROUP_FORBIDDEN = ("title", "default", "required", "fix", "sep")

ALL_INPUT_KEYS = (frozenset(KIND_KEYS) | frozenset(INPUT_KEYS_COMMON)
                  | frozenset(k for keys in INPUT_KEYS_BY_KIND.values()
                              for k in keys))

TOP_LEVEL_KEYS = ("id", "program", "name", "desc", "version", "configfile",
                  "valuesep", "outfile", "options", "outputs", "presets",
                  "icon", "doc_url", "markup", "style")


class DescriptorError(Exception):
    """A problem in a descriptor document."""

    def __init__(self, code: str, message: str, location: str = "",
                 line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.location = location
        self.line = line
        self.column = column

    def __str__(self):
        where = self.location
        if self.line is not None:
            where = "line %d column %d" % (self.line, self.column)
        if where:
            return "%s at %s: %s" % (self.code, where, self.message)
        return "%s: %s" % (self.code, self.message)


@dataclass(frozen=True)
class Diagnostic:
    """Non-fatal descriptor finding."""

    code: str
    message: str
    location: str = ""

    def __str__(self):
        if self.location:
            return "%s at %s: %s" % (self.code, self.location, self.message)
        return "%s: %s" % (self.code, self.message)


@dataclass(frozen=True)
class SelectOption:
    label: str
    value: Union[str, int, float, bool]


@dataclass(frozen=True)
class NumberBounds:
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    integer: bool = False


@dataclass(frozen=True)
class MergeSpec:
    """Combine several source inputs into one emitted argument."""

    sources: Tuple[str, ...]
    mode: str = "join"  # "join" (values) or "indices" (true ticks, 0-based)
    separator: str = " "


@dataclass(frozen=True)
class InputDescriptor:
    id: str
    kind: InputKind
    flag: str = ""
    title: str = ""
    desc: str = ""
    default: object = None  # scalar, Rule, or None
    required: Optional[str] = None
    visible_when: Optional[Rule] = None
    enabled_when: Optional[Rule] = None
    fix_value: Optional[Rule] = None
    value_separator: ValueSeparator = ValueSeparator.SPACE
    select_options: Tuple[SelectOption, ...] = ()
    number_bounds: Optional[NumberBounds] = None
    file_filter: Tuple[str, ...] = ()
    merge: Optional[MergeSpec] = None
    children: Tuple["InputDescriptor", ...] = ()

    def own_rules(self):
        out = []
        if isinstance(self.default, Rule):
            out.append(self.default)
        for rule in (self.visible_when, self.enabled_when, self.fix_value):
            if rule is not None:
                out.append(rule)
        return out

    def value_dependencies(self):
        """Ids whose values feed this input's own value."""
        deps = set()
        if isinstance(self.default, Rule):
            deps |= rules.references(self.default)
        if self.fix_value is not None:
            deps |= rules.references(self.fix_value)
        if self.merge is not None:
            deps |= set(self.merge.sources)
        return deps

    def all_rule_references(self):
        deps = set()
        for rule in self.own_rules():
            deps |= rules.references(rule)
        if self.merge is not None:
            deps |= set(self.merge.sources)
        return deps


@dataclass(frozen=True)
class OutputDecl:
    id: str
    filename: object  # str or Rule
    is_stdout: bool = False


@dataclass(frozen=True)
class Preset:
    id: str
    title: str
    values: Dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class PresentationHints:
    icon: Optional[str] = None
    doc_url: Optional[str] = None
    markup: Optional[str] = None
    style: Optional[str] = None


@dataclass(frozen=True)
class PluginSpec:
    id: str
    program: str
    name: str = ""
    desc: str = ""
    version: Optional[str] = None
    inputs: Tuple[InputDescriptor, ...] = ()
    outputs: Tuple[OutputDecl, ...] = ()
    launch_mode: LaunchMode = LaunchMode.ARGS
    config_value_sep: Optional[str] = None
    presets: Tuple[Preset, ...] = ()
    presentation: PresentationHints = PresentationHints()

    def iter_inputs(self):
        """All inputs in declaration order, groups flattened depth-first."""
        def walk(items):
            for inp in items:
                yield inp
                if inp.children:
                    yield from walk(inp.children)
        yield from walk(self.inputs)

    def input_map(self) -> Dict[str, InputDescriptor]:
        return {inp.id: inp for inp in self.iter_inputs()}

    def parent_map(self) -> Dict[str, str]:
        parents = {}

        def walk(items, parent):
            for inp in items:
                if parent is not None:
                    parents[inp.id] = parent
                if inp.children:
                    walk(inp.children, inp.id)

        walk(self.inputs, None)
        return parents

    def preset_map(self) -> Dict[str, Preset]:
        return {p.id: p for p in self.presets}

    def stdout_output(self) -> Optional[OutputDecl]:
        for out in self.outputs:
            if out.is_stdout:
                return out
        return None


# --- local value validation ---------------------------------------------


def _scalar_equal(a, b) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def local_value_error(inp: InputDescriptor, value) -> Optional[str]:
    """Kind check for one candidate value; None when acceptable."""
    if inp.kind is InputKind.GROUP:
        return "groups hold no value"
    if inp.kind is InputKind.FILE:
        if isinstance(value, PipedInput):
            return None
        if not isinstance(value, FileToken):
            return "expected a file"
        if inp.file_filter:
            name = value.name.lower()
            if not any(name.endswith(ext.lower()) for ext in inp.file_filter):
                return "file type not accepted (expected %s)" % ", ".join(
                    inp.file_filter
                )
        return None
    if inp.kind is InputKind.BOOL:
        if not isinstance(value, bool):
            return "expected true or false"
        return None
    if inp.kind is InputKind.NUMBER:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return "expected a number"
        bounds = inp.number_bounds or NumberBounds()
        if bounds.integer and not float(value).is_integer():
            return "expected a whole number"
        if bounds.minimum is not None and value < bounds.minimum:
            return "below minimum %s" % bounds.minimum
        if bounds.maximum is not None and value > bounds.maximum:
            return "above maximum %s" % bounds.maximum
        return None
    if inp.kind is InputKind.SELECT:
        if not is_scalar(value):
            return "expected one of the listed choices"
        if not any(_scalar_equal(opt.value, value) for opt in inp.select_options):
            return "not one of the listed choices"
        return None
    if inp.kind is InputKind.TEXT:
        if not isinstance(value, str):
            return "expected text"
        return None
    # HIDDEN carries any scalar
    if not is_scalar(value):
        return "expected a plain value"
    return None


# --- parsing -------------------------------------------------------------

_IDENT_OK = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _no_duplicate_keys(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise ValueError("duplicate key %r" % key)
        seen.add(key)
    return dict(pairs)


def _err(code, message, location=""):
    raise DescriptorError(code, message, location)


def _want_string(value, what, location):
    if not isinstance(value, str):
        _err("KIND_MISMATCH", "%s must be a string" % what, location)
    return value


def _parse_attached_rule(text, location):
    try:
        return rules.parse_rule(text)
    except RuleError as exc:
        raise DescriptorError(
            exc.code, "bad rule: %s\n%s" % (exc.message, exc.caret(text)), location
        ) from None


def _rule_or_scalar(raw, location):
    """default / output filename: scalar passthrough, {"rule": ...} parsed."""
    if isinstance(raw, dict):
        if set(raw) == {"rule"} and isinstance(raw["rule"], str):
            return _parse_attached_rule(raw["rule"], location)
        _err("KIND_MISMATCH", 'expected a value or {"rule": ...}', location)
    if raw is None or isinstance(raw, list):
        _err("KIND_MISMATCH", "expected a plain value", location)
    return raw


def _check_boolean_rule(rule: Rule, kind_of, location):
    """visible/enabled rules must produce booleans."""
    if rule.bare:
        return
    if rule.else_value is None:
        _err("KIND_MISMATCH",
             "a visibility rule written with 'if' needs an 'else'", location)
    for operand in (rule.then_value, rule.else_value):
        if isinstance(operand, rules.Lit):
            if not isinstance(operand.value, bool):
                _err("KIND_MISMATCH",
                     "visibility rules must yield true or false", location)
        else:
            if kind_of.get(operand.name) is not InputKind.BOOL:
                _err("KIND_MISMATCH",
                     "visibility rules must yield true or false", location)


class _SpecParser:
    def __init__(self, lax: bool, warnings: Optional[List[Diagnostic]]):
        self.lax = lax
        self.warnings = warnings if warnings is not None else []
        self.taken_ids: set = set()

    def unknown_field(self, key, location):
        if self.lax:
            self.warnings.append(
                Diagnostic("UNKNOWN_FIELD", "ignored unknown field %r" % key,
                           location))
        else:
            _err("UNKNOWN_FIELD", "unknown field %r" % key, location)

    def check_keys(self, record, allowed, location):
        for key in record:
            if key not in allowed:
                self.unknown_field(key, "%s.%s" % (location, key) if location
                                   else key)

    # -- inputs --

    def claim_explicit_id(self, raw_id, location):
        if not isinstance(raw_id, str) or not _IDENT_RE_OK(raw_id):
            _err("INVALID_ID",
                 "id must be a word (letters, digits, underscores) and not a"
                 " rule keyword: %r" % (raw_id,), location)
        if raw_id in self.taken_ids:
            _err("DUPLICATE_ID", "input id %r used twice" % raw_id, location)
        self.taken_ids.add(raw_id)
        return raw_id

    def derive_id(self, seed: str, fallback: str) -> str:
        base = re.sub(r"[^A-Za-z0-9_]", "_", seed.lstrip("-")).strip("_")
        if not base:
            base = fallback
        if base[0].isdigit():
            base = "_" + base
        if base in rules.KEYWORDS:
            base = base + "_"
        candidate = base
        n = 1
        while candidate in self.taken_ids:
            n += 1
            candidate = "%s_%d" % (base, n)
        self.taken_ids.add(candidate)
        return candidate

    def scan_explicit_ids(self, records, location):
        """First pass so derived ids never shadow explicit ones."""
        for idx, record in enumerate(records):
            here = "%s[%d]" % (location, idx)
            if not isinstance(record, dict):
                _err("KIND_MISMATCH", "input record must be an object", here)
            if "id" in record:
                self.claim_explicit_id(record["id"], here + ".id")
            if isinstance(record.get("items"), list):
                self.scan_explicit_ids(record["items"], here + ".items")

    def parse_input(self, record, location) -> InputDescriptor:
        kinds_present = [k for k in record if k in KIND_KEYS]
        if not kinds_present:
            _err("MISSING_FIELD",
                 "input record needs one kind key (%s)" % ", ".join(KIND_KEYS),
                 location)
        if len(kinds_present) > 1:
            _err("KIND_MISMATCH",
                 "input record has several kind keys: %s" % ", ".join(
                     sorted(kinds_present)), location)
        kind_key = kinds_present[0]
        kind = KIND_KEYS[kind_key]
        allowed = (kind_key,) + INPUT_KEYS_COMMON + INPUT_KEYS_BY_KIND[kind]
        if kind is InputKind.GROUP:
            allowed = tuple(k for k in allowed if k not in GROUP_FORBIDDEN)

        head = record[kind_key]
        flag = ""
        title = record.get("title", "")
        if kind is InputKind.GROUP:
            title = _want_string(head, "group title", location)
        else:
            flag = _want_string(head, "flag", location)
            if re.search(r"\s", flag):
                _err("INVALID_VALUE", "flag must not contain whitespace",
                     "%s.%s" % (location, kind_key))
            title = _want_string(title, "title", location + ".title")

        if "id" in record:
            input_id = record["id"]  # claimed during scan pass
        elif kind is InputKind.GROUP:
            input_id = self.derive_id(title, "group")
        else:
            input_id = self.derive_id(flag, kind_key)

        for key in record:
            if key in allowed:
                continue
            if key in ALL_INPUT_KEYS:
                # a real descriptor field, just not for this widget kind
                _err("KIND_MISMATCH",
                     "field %r does not apply to %s input %r"
                     % (key, kind_key, input_id),
                     "%s.%s" % (location, key))
            self.unknown_field(key, "%s.%s" % (location, key))

        desc = _want_string(record.get("desc", ""), "desc", location + ".desc")

        required = record.get("required")
        if required is not None:
            required = _want_string(required, "required message",
                                    location + ".required")

        default = None
        if "default" in record:
            default = _rule_or_scalar(record["default"], location + ".default")

        visible = enabled = fix = None
        if "visible" in record:
            visible = _parse_attached_rule(
                _want_string(record["visible"], "visible rule",
                             location + ".visible"), location + ".visible")
        if "enabled" in record:
            enabled = _parse_attached_rule(
                _want_string(record["enabled"], "enabled rule",
                             location + ".enabled"), location + ".enabled")
        if "fix" in record:
            fix = _parse_attached_rule(
                _want_string(record["fix"], "fix rule", location + ".fix"),
                location + ".fix")

        sep = ValueSeparator.SPACE
        if "sep" in record:
            raw = _want_string(record["sep"], "sep", location + ".sep")
            try:
                sep = ValueSeparator(raw)
            except ValueError:
                _err("INVALID_VALUE",
                     "sep must be one of space, equals, none",
                     location + ".sep")

        select_options: Tuple[SelectOption, ...] = ()
        if kind is InputKind.SELECT:
            raw_opts = record.get("options", [])
            if not isinstance(raw_opts, list):
                _err("KIND_MISMATCH", "options must be a list",
                     location + ".options")
            opts = []
            for oidx, opt in enumerate(raw_opts):
                where = "%s.options[%d]" % (location, oidx)
                if not isinstance(opt, dict) or not set(opt) <= {"label",
                                                                 "value"}:
                    _err("KIND_MISMATCH",
                         "option must be {label, value}", where)
                if "value" not in opt:
                    _err("MISSING_FIELD", "option needs a value", where)
                value = opt["value"]
                if not is_scalar(value):
                    _err("KIND_MISMATCH", "option value must be a scalar",
                         where)
                label = opt.get("label", "")
                if not isinstance(label, str):
                    _err("KIND_MISMATCH", "option label must be a string",
                         where)
                opts.append(SelectOption(label, value))
            select_options = tuple(opts)

        number_bounds = None
        if kind is InputKind.NUMBER and (
                "min" in record or "max" in record or "integer" in record):
            minimum = record.get("min")
            maximum = record.get("max")
            integer = record.get("integer", False)
            for bound, key in ((minimum, "min"), (maximum, "max")):
                if bound is not None and (
                        isinstance(bound, bool)
                        or not isinstance(bound, (int, float))):
                    _err("KIND_MISMATCH", "%s must be a number" % key,
                         "%s.%s" % (location, key))
            if not isinstance(integer, bool):
                _err("KIND_MISMATCH", "integer must be true or false",
                     location + ".integer")
            number_bounds = NumberBounds(minimum, maximum, integer)
            if number_bounds == NumberBounds():
                number_bounds = None  # all-default bounds mean no bounds

        file_filter: Tuple[str, ...] = ()
        if kind is InputKind.FILE and "filter" in record:
            raw_filter = record["filter"]
            if not isinstance(raw_filter, list) or not all(
                    isinstance(ext, str) and ext for ext in raw_filter):
                _err("KIND_MISMATCH",
                     "filter must be a list of extensions",
                     location + ".filter")
            file_filter = tuple(raw_filter)

        merge = None
        if "merge" in record:
            raw_merge = record["merge"]
            where = location + ".merge"
            if not isinstance(raw_merge, dict) or not set(raw_merge) <= {
                    "sources", "mode", "sep"}:
                _err("KIND_MISMATCH",
                     'merge must be {"sources": [...], "mode": ..., "sep": ...}',
                     where)
            sources = raw_merge.get("sources")
            if not isinstance(sources, list) or not sources or not all(
                    isinstance(s, str) for s in sources):
                _err("KIND_MISMATCH", "merge.sources must name inputs", where)
            mode = raw_merge.get("mode", "join")
            if mode not in ("join", "indices"):
                _err("INVALID_VALUE", "merge.mode must be join or indices",
                     where)
            msep = raw_merge.get("sep", " ")
            if not isinstance(msep, str):
                _err("KIND_MISMATCH", "merge.sep must be a string", where)
            merge = MergeSpec(tuple(sources), mode, msep)

        children: Tuple[InputDescriptor, ...] = ()
        if kind is InputKind.GROUP:
            raw_items = record.get("items", [])
            if not isinstance(raw_items, list):
                _err("KIND_MISMATCH", "items must be a list",
                     location + ".items")
            children = tuple(
                self.parse_input(item, "%s.items[%d]" % (location, idx))
                for idx, item in enumerate(raw_items))

        if kind is InputKind.BOOL and default is None:
            default = False  # an untouched tick box reads as false
        if kind is InputKind.FILE and not isinstance(default, (Rule,
                                                               type(None))):
            _err("KIND_MISMATCH", "file inputs take no default",
                 location + ".default")

        inp = InputDescriptor(
            id=input_id, kind=kind, flag=flag, title=title, desc=desc,
            default=default, required=required, visible_when=visible,
            enabled_when=enabled, fix_value=fix, value_separator=sep,
            select_options=select_options, number_bounds=number_bounds,
            file_filter=file_filter, merge=merge, children=children)

        if default is not None and not isinstance(default, Rule):
            problem = local_value_error(inp, default)
            if problem:
                _err("KIND_MISMATCH", "bad default: %s" % problem,
                     location + ".default")
        return inp

    # -- outputs --

    def parse_output(self, record, location, taken) -> OutputDecl:
        if not isinstance(record, dict):
            _err("KIND_MISMATCH", "output must be an object", location)
        self.check_keys(record, ("id", "file", "stdout"), location)
        if "file" not in record:
            _err("MISSING_FIELD", "output needs a file name", location)
        filename = _rule_or_scalar(record["file"], location + ".file")
        if not isinstance(filename, (str, Rule)):
            _err("KIND_MISMATCH", "output file must be a string or rule",
                 location + ".file")
        out_id = record.get("id")
        if out_id is None:
            base = "out"
            out_id = base
            n = 1
            while out_id in taken:
                n += 1
                out_id = "%s%d" % (base, n)
        elif not isinstance(out_id, str) or not out_id:
            _err("INVALID_ID", "output id must be a non-empty string",
                 location + ".id")
        if out_id in taken:
            _err("DUPLICATE_ID", "output id %r used twice" % out_id,
                 location + ".id")
        taken.add(out_id)
        stdout_flag = record.get("stdout", False)
        if not isinstance(stdout_flag, bool):
            _err("KIND_MISMATCH", "stdout must be true or false",
                 location + ".stdout")
        return OutputDecl(out_id, filename, stdout_flag)


def _IDENT_RE_OK(word: str) -> bool:
    return bool(_IDENT_OK.match(word)) and word not in rules.KEYWORDS


def parse_plugin(text: str, lax: bool = False,
                 warnings: Optional[List[Diagnostic]] = None) -> PluginSpec:
    """Parse one descriptor document into a PluginSpec.

    Raises DescriptorError with a code and location on any problem; in
    lax mode unknown fields become Diagnostics appended to ``warnings``.
    """
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise DescriptorError("SYNTAX", exc.msg, line=exc.lineno,
                              column=exc.colno) from None
    except ValueError as exc:
        raise DescriptorError("SYNTAX", str(exc)) from None
    if not isinstance(doc, dict):
        _err("SYNTAX", "descriptor must be a JSON object")

    parser = _SpecParser(lax, warnings)
    parser.check_keys(doc, TOP_LEVEL_KEYS, "")

    if "program" not in doc:
        _err("MISSING_FIELD", "program is required", "program")
    program = _want_string(doc["program"], "program", "program")
    if not program:
        _err("INVALID_VALUE", "program must not be empty", "program")
    if re.search(r"[\s/\\]", program):
        _err("INVALID_VALUE",
             "program must be a bare executable name (no paths, no spaces)",
             "program")

    plugin_id = doc.get("id")
    if plugin_id is None:
        plugin_id = re.sub(r"[^A-Za-z0-9_-]", "_",
                           program.rsplit(".", 1)[0]) or "plugin"
    else:
        plugin_id = _want_string(plugin_id, "id", "id")
        if not re.match(r"^[A-Za-z0-9_-]+$", plugin_id):
            _err("INVALID_VALUE",
                 "id may use letters, digits, '-' and '_'", "id")

    name = _want_string(doc.get("name", ""), "name", "name")
    desc = _want_string(doc.get("desc", ""), "desc", "desc")
    version = doc.get("version")
    if version is not None:
        version = _want_string(version, "version", "version")

    launch_mode = LaunchMode.ARGS
    config_value_sep = None
    configfile = doc.get("configfile", False)
    if not isinstance(configfile, bool):
        _err("KIND_MISMATCH", "configfile must be true or false", "configfile")
    if configfile:
        launch_mode = LaunchMode.CONFIG_FILE
        if "valuesep" not in doc:
            _err("MISSING_FIELD",
                 "configfile programs need valuesep", "valuesep")
        config_value_sep = _want_string(doc["valuesep"], "valuesep",
                                        "valuesep")
    elif "valuesep" in doc:
        _err("KIND_MISMATCH", "valuesep only applies with configfile",
             "valuesep")

    raw_options = doc.get("options", [])
    if not isinstance(raw_options, list):
        _err("KIND_MISMATCH", "options must be a list", "options")
    parser.scan_explicit_ids(raw_options, "options")
    inputs = tuple(
        parser.parse_input(record, "options[%d]" % idx)
        for idx, record in enumerate(raw_options))

    outputs: List[OutputDecl] = []
    taken_outputs: set = set()
    if "outfile" in doc:
        filename = _rule_or_scalar(doc["outfile"], "outfile")
        if not isinstance(filename, (str, Rule)):
            _err("KIND_MISMATCH", "outfile must be a string or rule",
                 "outfile")
        taken_outputs.add("outfile")
        outputs.append(OutputDecl("outfile", filename, False))
    raw_outputs = doc.get("outputs", [])
    if not isinstance(raw_outputs, list):
        _err("KIND_MISMATCH", "outputs must be a list", "outputs")
    for idx, record in enumerate(raw_outputs):
        outputs.append(
            parser.parse_output(record, "outputs[%d]" % idx, taken_outputs))
    if sum(1 for out in outputs if out.is_stdout) > 1:
        _err("INVALID_VALUE", "at most one output may come from stdout",
             "outputs")

    presets: List[Preset] = []
    raw_presets = doc.get("presets", [])
    if not isinstance(raw_presets, list):
        _err("KIND_MISMATCH", "presets must be a list", "presets")
    seen_presets: set = set()
    for idx, record in enumerate(raw_presets):
        where = "presets[%d]" % idx
        if not isinstance(record, dict):
            _err("KIND_MISMATCH", "preset must be an object", where)
        parser.check_keys(record, ("id", "title", "values"), where)
        if "id" not in record:
            _err("MISSING_FIELD", "preset needs an id", where)
        pid = _want_string(record["id"], "preset id", where + ".id")
        if not pid:
            _err("INVALID_ID", "preset id must not be empty", where + ".id")
        if pid in seen_presets:
            _err("DUPLICATE_ID", "preset id %r used twice" % pid,
                 where + ".id")
        seen_presets.add(pid)
        title = _want_string(record.get("title", ""), "preset title",
                             where + ".title")
        raw_values = record.get("values", {})
        if not isinstance(raw_values, dict):
            _err("KIND_MISMATCH", "preset values must be an object",
                 where + ".values")
        values = {}
        for key, raw in raw_values.items():
            try:
                values[key] = decode_value(raw)
            except ValueError:
                _err("KIND_MISMATCH", "bad preset value for %r" % key,
                     "%s.values.%s" % (where, key))
        presets.append(Preset(pid, title, values))

    presentation = PresentationHints(
        icon=_opt_string(doc, "icon"),
        doc_url=_opt_string(doc, "doc_url"),
        markup=_opt_string(doc, "markup"),
        style=_opt_string(doc, "style"))

    spec = PluginSpec(
        id=plugin_id, program=program, name=name, desc=desc, version=version,
        inputs=inputs, outputs=tuple(outputs), launch_mode=launch_mode,
        config_value_sep=config_value_sep, presets=tuple(presets),
        presentation=presentation)
    _cross_validate(spec)
    return spec


def _opt_string(doc, key):
    value = doc.get(key)
    if value is None:
        return None
    return _want_string(value, key, key)


def _cross_validate(spec: PluginSpec):
    inputs = spec.input_map()
    kind_of = {iid: inp.kind for iid, inp in inputs.items()}

    def check_refs(refs, location):
        for ref in sorted(refs):
            if ref not in inputs:
                _err("DANGLING_REF",
                     "rule references unknown input %r" % ref, location)
            if kind_of[ref] is InputKind.GROUP:
                _err("KIND_MISMATCH",
                     "rules may not reference the group %r" % ref, location)

    for inp in spec.iter_inputs():
        where = "input %r" % inp.id
        for rule in inp.own_rules():
            check_refs(rules.references(rule), where)
        if inp.merge is not None:
            for src in inp.merge.sources:
                if src not in inputs:
                    _err("DANGLING_REF",
                         "merge references unknown input %r" % src, where)
                if kind_of[src] is InputKind.GROUP:
                    _err("KIND_MISMATCH",
                         "merge sources may not be groups", where)
        for rule in (inp.visible_when, inp.enabled_when):
            if rule is not None:
                _check_boolean_rule(rule, kind_of, where)
    for out in spec.outputs:
        if isinstance(out.filename, Rule):
            check_refs(rules.references(out.filename), "output %r" % out.id)
    for preset in spec.presets:
        for key, value in preset.values.items():
            where = "preset %r value %r" % (preset.id, key)
            if key not in inputs:
                _err("DANGLING_REF",
                     "preset sets unknown input %r" % key, where)
            problem = local_value_error(inputs[key], value)
            if problem:
                _err("KIND_MISMATCH", problem, where)

    cycle = find_reference_cycle(spec)
    if cycle:
        _err("CYCLE",
             "rule references form a cycle: %s" % " -> ".join(cycle),
             "options")


def find_reference_cycle(spec: PluginSpec) -> Optional[List[str]]:
    """First cycle in the rule/merge reference graph, or None.

    Edges point from an input to every input any of its rules read.
    """
    graph = {inp.id: sorted(inp.all_rule_references())
             for inp in spec.iter_inputs()}
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {node: WHITE for node in graph}
    stack: List[str] = []

    def visit(node):
        color[node] = GRAY
        stack.append(node)
        for nxt in graph.get(node, ()):
            if color.get(nxt, BLACK) is GRAY:
                cycle = stack[stack.index(nxt):] + [nxt]
                return cycle
            if color.get(nxt, BLACK) is WHITE:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        color[node] = BLACK
        return None

    for node in graph:
        if color[node] is WHITE:
            found = visit(node)
            if found:
                return found
    return None


# --- structural warnings -------------------------------------------------


def _statically_false(rule: Optional[Rule]) -> bool:
    """True when a rule is a constant that evaluates to false."""
    if rule is None or rules.references(rule):
        return False
    try:
        return rules.evaluate(rule, lambda _: UNSET) is False
    except RuleError:
        return False


def validate_plugin(spec: PluginSpec) -> List[Diagnostic]:
    """Structural findings that do not block parsing."""
    findings: List[Diagnostic] = []
    input_map = spec.input_map()
    invisible = set()
    for inp in spec.iter_inputs():
        if inp.kind is InputKind.SELECT and not inp.select_options:
            findings.append(Diagnostic(
                "EMPTY_SELECT", "select %r has no choices" % inp.id,
                "input %r" % inp.id))
        if _statically_false(inp.visible_when):
            invisible.add(inp.id)
            findings.append(Diagnostic(
                "UNREACHABLE_INPUT",
                "input %r can never become visible" % inp.id,
                "input %r" % inp.id))
    for preset in spec.presets:
        for key in preset.values:
            inp = input_map.get(key)
            if inp is None:
                continue
            if key in invisible or inp.kind is InputKind.HIDDEN:
                findings.append(Diagnostic(
                    "PRESET_HIDDEN_INPUT",
                    "preset %r sets %r, which the user never sees"
                    % (preset.id, key), "preset %r" % preset.id))
    return findings


# --- canonical form ------------------------------------------------------


def _encode_rule_or_scalar(value):
    if isinstance(value, Rule):
        return {"rule": rules.print_rule(value)}
    return value


def _input_to_record(inp: InputDescriptor) -> dict:
    record: dict = {}
    if inp.kind is InputKind.GROUP:
        record["group"] = inp.title
    else:
        record[inp.kind.value] = inp.flag
    record["id"] = inp.id
    if inp.title and inp.kind is not InputKind.GROUP:
        record["title"] = inp.title
    if inp.desc:
        record["desc"] = inp.desc
    if inp.default is not None and not (
            inp.kind is InputKind.BOOL and inp.default is False):
        record["default"] = _encode_rule_or_scalar(inp.default)
    if inp.required is not None:
        record["required"] = inp.required
    if inp.visible_when is not None:
        record["visible"] = rules.print_rule(inp.visible_when)
    if inp.enabled_when is not None:
        record["enabled"] = rules.print_rule(inp.enabled_when)
    if inp.fix_value is not None:
        record["fix"] = rules.print_rule(inp.fix_value)
    if inp.value_separator is not ValueSeparator.SPACE:
        record["sep"] = inp.value_separator.value
    if inp.kind is InputKind.NUMBER and inp.number_bounds is not None:
        bounds = inp.number_bounds
        if bounds.minimum is not None:
            record["min"] = bounds.minimum
        if bounds.maximum is not None:
            record["max"] = bounds.maximum
        if bounds.integer:
            record["integer"] = True
    if inp.kind is InputKind.SELECT:
        record["options"] = [
            {"label": opt.label, "value": opt.value}
            for opt in inp.select_options]
    if inp.kind is InputKind.FILE and inp.file_filter:
        record["filter"] = list(inp.file_filter)
    if inp.merge is not None:
        merge: dict = {"sources": list(inp.merge.sources)}
        if inp.merge.mode != "join":
            merge["mode"] = inp.merge.mode
        if inp.merge.separator != " ":
            merge["sep"] = inp.merge.separator
        record["merge"] = merge
    if inp.kind is InputKind.GROUP:
        record["items"] = [_input_to_record(child) for child in inp.children]
    return record


def spec_to_document(spec: PluginSpec) -> dict:
    """Canonical JSON object for a spec (fixed key order, no defaults)."""
    doc: dict = {"id": spec.id, "program": spec.program}
    if spec.name:
        doc["name"] = spec.name
    if spec.desc:
        doc["desc"] = spec.desc
    if spec.version is not None:
        doc["version"] = spec.version
    if spec.launch_mode is LaunchMode.CONFIG_FILE:
        doc["configfile"] = True
        doc["valuesep"] = spec.config_value_sep
    if spec.inputs:
        doc["options"] = [_input_to_record(inp) for inp in spec.inputs]
    if spec.outputs:
        doc["outputs"] = []
        for out in spec.outputs:
            record = {"id": out.id,
                      "file": _encode_rule_or_scalar(out.filename)}
            if out.is_stdout:
                record["stdout"] = True
            doc["outputs"].append(record)
    if spec.presets:
        order = [inp.id for inp in spec.iter_inputs()]
        doc["presets"] = []
        for preset in spec.presets:
            record = {"id": preset.id}
            if preset.title:
                record["title"] = preset.title
            record["values"] = {
                key: encode_value(preset.values[key])
                for key in sorted(
                    preset.values,
                    key=lambda k: (order.index(k) if k in order
                                   else len(order), k))}
            doc["presets"].append(record)
    hints = spec.presentation
    for key, value in (("icon", hints.icon), ("doc_url", hints.doc_url),
                       ("markup", hints.markup), ("style", hints.style)):
        if value is not None:
            doc[key] = value
    return doc


def canonicalize(spec: PluginSpec) -> str:
    """Canonical descriptor text: two-space indent, LF endings."""
    return json.dumps(spec_to_document(spec), indent=2, ensure_ascii=False) + "\n"
