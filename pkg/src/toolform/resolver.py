"""Turn a plugin descriptor plus user choices into a concrete form state.

resolve() is a pure function: given the descriptor and a session, it computes
every input's effective value, visibility, enablement, and validation
error, plus the resolved output file names.  Nothing here mutates; the
apply_* helpers return new sessions.

Effective value precedence per input, strongest first: merged/fixed
values, user edits, the active preset, the declared default, nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

from . import rules
from .descriptor import (
    InputDescriptor,
    InputKind,
    PluginSpec,
    Preset,
    Rule,
    local_value_error,
)
from .rules import RuleError
from .values import UNSET, decode_value, encode_value, value_to_text

PROV_FIXED = "fixed"
PROV_USER = "user"
PROV_PRESET = "preset"
PROV_DEFAULT = "default_rule"


class ResolverError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def __str__(self):
        return "%s: %s" % (self.code, self.message)


@dataclass(frozen=True)
class SessionState:
    """What the user has told us so far.  ``values`` is the user layer
    only; preset values live in the descriptor and apply underneath it."""

    values: Dict[str, object] = field(default_factory=dict)
    active_preset: Optional[str] = None
    session_name: str = ""


@dataclass(frozen=True)
class InputView:
    visible: bool
    enabled: bool
    value: object  # effective value, or UNSET
    provenance: Optional[str]
    error: Optional[str] = None


@dataclass(frozen=True)
class ResolvedInterface:
    inputs: Dict[str, InputView]
    ready: bool
    errors: Tuple[str, ...]
    output_names: Dict[str, str]
    active_preset: Optional[str] = None

    def effective(self, input_id: str):
        return self.inputs[input_id].value

    def contributes(self, input_id: str) -> bool:
        """Whether the input takes part in command synthesis."""
        view = self.inputs[input_id]
        return view.visible and view.enabled and view.value is not UNSET


def _value_order(spec: PluginSpec):
    """Inputs in an order where value dependencies come first.

    The parser guarantees the reference graph is acyclic; ties keep
    declaration order so results are deterministic.
    """
    declared = [inp.id for inp in spec.iter_inputs()]
    deps = {inp.id: {d for d in inp.value_dependencies() if d != inp.id}
            for inp in spec.iter_inputs()}
    done: set = set()
    order = []
    remaining = list(declared)
    while remaining:
        progressed = False
        for iid in list(remaining):
            if deps[iid] <= done:
                order.append(iid)
                done.add(iid)
                remaining.remove(iid)
                progressed = True
        if not progressed:  # unreachable on validated specs
            order.extend(remaining)
            break
    return order


def _eval_rule(rule: Rule, lookup, errors, owner: str):
    try:
        return rules.evaluate(rule, lookup)
    except RuleError as exc:
        errors.setdefault(owner, "rule failed: %s" % exc.message)
        return UNSET


def resolve(spec: PluginSpec, state: SessionState) -> ResolvedInterface:
    input_map = spec.input_map()
    preset = spec.preset_map().get(state.active_preset) if state.active_preset else None

    values: Dict[str, object] = {}
    provenance: Dict[str, Optional[str]] = {}
    rule_errors: Dict[str, str] = {}

    def lookup(name):
        return values.get(name, UNSET)

    # pass 1: effective values, dependencies first
    for iid in _value_order(spec):
        inp = input_map[iid]
        if inp.kind is InputKind.GROUP:
            values[iid] = UNSET
            provenance[iid] = None
            continue
        value = UNSET
        prov = None
        if inp.merge is not None:
            value = _merged_value(inp, values)
            prov = PROV_FIXED if value is not UNSET else None
        else:
            if inp.fix_value is not None:
                fixed = _eval_rule(inp.fix_value, lookup, rule_errors, iid)
                if fixed is not UNSET:
                    value = fixed
                    prov = PROV_FIXED
            if value is UNSET:
                if iid in state.values:
                    value = state.values[iid]
                    prov = PROV_USER
                elif preset is not None and iid in preset.values:
                    value = preset.values[iid]
                    prov = PROV_PRESET
                elif inp.default is not None:
                    if isinstance(inp.default, Rule):
                        value = _eval_rule(inp.default, lookup,
                                           rule_errors, iid)
                    else:
                        value = inp.default
                    prov = PROV_DEFAULT if value is not UNSET else None
        values[iid] = value
        provenance[iid] = prov

    # pass 2: visibility and enablement, own rule AND the group chain
    own_visible: Dict[str, bool] = {}
    own_enabled: Dict[str, bool] = {}
    for iid, inp in input_map.items():
        visible = True
        if inp.visible_when is not None:
            result = _eval_rule(inp.visible_when, lookup, rule_errors, iid)
            visible = bool(result) if result is not UNSET else True
        enabled = True
        if inp.enabled_when is not None:
            result = _eval_rule(inp.enabled_when, lookup, rule_errors, iid)
            enabled = bool(result) if result is not UNSET else True
        own_visible[iid] = visible
        own_enabled[iid] = enabled
    parents = spec.parent_map()

    def chain(flags, iid):
        result = flags[iid]
        node = iid
        while node in parents:
            node = parents[node]
            result = result and flags[node]
        return result

    # pass 3: errors and readiness
    views: Dict[str, InputView] = {}
    messages = []
    for inp in spec.iter_inputs():
        iid = inp.id
        visible = chain(own_visible, iid)
        enabled = chain(own_enabled, iid)
        error = None
        if visible and enabled and inp.kind is not InputKind.GROUP:
            error = rule_errors.get(iid)
            value = values[iid]
            if error is None and value is not UNSET:
                error = local_value_error(inp, value)
            if error is None and value is UNSET and inp.required is not None:
                error = inp.required
        if error:
            messages.append(error)
        views[iid] = InputView(
            visible=visible, enabled=enabled, value=values[iid],
            provenance=provenance[iid] if values[iid] is not UNSET else None,
            error=error)

    output_names: Dict[str, str] = {}
    for out in spec.outputs:
        if isinstance(out.filename, Rule):
            name = _eval_rule(out.filename, lookup, {}, out.id)
            if name is UNSET:
                continue
            output_names[out.id] = value_to_text(name)
        else:
            output_names[out.id] = out.filename

    return ResolvedInterface(
        inputs=views, ready=not messages, errors=tuple(messages),
        output_names=output_names, active_preset=state.active_preset)


def _merged_value(inp: InputDescriptor, values):
    merge = inp.merge
    if merge.mode == "indices":
        picked = [str(idx) for idx, src in enumerate(merge.sources)
                  if values.get(src) is True]
        if not picked:
            return UNSET
        return merge.separator.join(picked)
    parts = [value_to_text(values[src]) for src in merge.sources
             if values.get(src, UNSET) is not UNSET]
    if not parts:
        return UNSET
    return merge.separator.join(parts)


def merge_capture_ids(spec: PluginSpec) -> frozenset:
    """Inputs consumed by a merge proxy; they never emit their own argument."""
    captured = set()
    for inp in spec.iter_inputs():
        if inp.merge is not None:
            captured.update(inp.merge.sources)
    return frozenset(captured)


# --- session editing ------------------------------------------------------


def apply_input(spec: PluginSpec, state: SessionState, input_id: str,
                value) -> SessionState:
    """Set (or with UNSET, clear) one input's user value.

    Editing a value covered by the active preset away from the preset's
    choice detaches the preset; nothing ever re-attaches it.
    """
    input_map = spec.input_map()
    if input_id not in input_map:
        raise ResolverError("UNKNOWN_INPUT", "no input %r" % input_id)
    inp = input_map[input_id]
    view = resolve(spec, state).inputs[input_id]
    if view.provenance == PROV_FIXED:
        raise ResolverError(
            "FIXED_INPUT", "input %r is fixed by a rule" % input_id)
    if inp.merge is not None:
        raise ResolverError(
            "FIXED_INPUT", "input %r is computed from %s" % (
                input_id, ", ".join(inp.merge.sources)))
    new_values = dict(state.values)
    if value is UNSET:
        new_values.pop(input_id, None)
    else:
        problem = local_value_error(inp, value)
        if problem:
            raise ResolverError(
                "KIND_MISMATCH", "input %r: %s" % (input_id, problem))
        new_values[input_id] = value

    active = state.active_preset
    if active is not None:
        preset = spec.preset_map().get(active)
        if preset is not None and _diverges(preset, new_values):
            active = None
    return replace(state, values=new_values, active_preset=active)


def _diverges(preset: Preset, user_values: Dict[str, object]) -> bool:
    for key, expected in preset.values.items():
        if key in user_values and user_values[key] != expected:
            return True
    return False


def apply_preset(spec: PluginSpec, state: SessionState,
                 preset_id: str) -> SessionState:
    """Activate a stored set of pre-filled values.

    User edits of preset-covered inputs are dropped so the preset shows
    through; other edits survive.  Applying twice is a no-op.
    """
    preset = spec.preset_map().get(preset_id)
    if preset is None:
        raise ResolverError("UNKNOWN_PRESET", "no preset %r" % preset_id)
    new_values = {k: v for k, v in state.values.items()
                  if k not in preset.values}
    return replace(state, values=new_values, active_preset=preset_id)


# --- session documents ----------------------------------------------------

SESSION_KEYS = ("plugin_id", "plugin_version", "session_name",
                "active_preset", "values")


def export_session(spec: PluginSpec, state: SessionState) -> dict:
    """JSON-ready session document.  File values become name-only
    placeholders; payloads are re-attached at submission time."""
    order = [inp.id for inp in spec.iter_inputs()]
    return {
        "plugin_id": spec.id,
        "plugin_version": spec.version,
        "session_name": state.session_name,
        "active_preset": state.active_preset,
        "values": {
            key: encode_value(state.values[key])
            for key in sorted(state.values,
                              key=lambda k: (order.index(k) if k in order
                                             else len(order), k))},
    }


def import_session(spec: PluginSpec, document) -> SessionState:
    """Validate a session document against a spec and rebuild the state."""
    if not isinstance(document, dict):
        raise ResolverError("SYNTAX", "session document must be an object")
    unknown = set(document) - set(SESSION_KEYS)
    if unknown:
        raise ResolverError(
            "SYNTAX", "unknown session fields: %s" % ", ".join(sorted(unknown)))
    if "plugin_id" not in document:
        raise ResolverError("SYNTAX", "session document needs plugin_id")
    if document["plugin_id"] != spec.id:
        raise ResolverError(
            "SPEC_MISMATCH", "session is for %r, not %r" % (
                document["plugin_id"], spec.id))
    if document.get("plugin_version") != spec.version:
        raise ResolverError(
            "SPEC_MISMATCH", "session is for version %r, not %r" % (
                document.get("plugin_version"), spec.version))
    session_name = document.get("session_name", "")
    if not isinstance(session_name, str):
        raise ResolverError("SYNTAX", "session_name must be a string")
    active_preset = document.get("active_preset")
    if active_preset is not None:
        if not isinstance(active_preset, str):
            raise ResolverError("SYNTAX", "active_preset must be a string")
        if active_preset not in spec.preset_map():
            raise ResolverError(
                "UNKNOWN_PRESET", "no preset %r" % active_preset)
    raw_values = document.get("values", {})
    if not isinstance(raw_values, dict):
        raise ResolverError("SYNTAX", "values must be an object")
    input_map = spec.input_map()
    values = {}
    for key, raw in raw_values.items():
        if key not in input_map:
            raise ResolverError("UNKNOWN_INPUT", "no input %r" % key)
        try:
            value = decode_value(raw)
        except ValueError:
            raise ResolverError(
                "SYNTAX", "bad value for %r" % key) from None
        problem = local_value_error(input_map[key], value)
        if problem:
            raise ResolverError(
                "KIND_MISMATCH", "input %r: %s" % (key, problem))
        values[key] = value
    return SessionState(values=values, active_preset=active_preset,
                        session_name=session_name)
