import json
import random

import pytest

from toolform.descriptor import parse_plugin
from toolform.resolver import (ResolverError, SessionState, apply_input,
                               apply_preset, export_session, import_session,
                               resolve)
from toolform.values import UNSET, FileToken

from . import genlib


def mk(doc):
    return parse_plugin(json.dumps(doc))


def err(callable_, *args) -> ResolverError:
    with pytest.raises(ResolverError) as info:
        callable_(*args)
    return info.value


class TestExampleResolution:
    def test_empty_state_reports_missing_file(self, gaps_spec):
        resolved = resolve(gaps_spec, SessionState())
        assert resolved.ready is False
        assert resolved.errors == ("Input file missing!",)
        view = resolved.inputs["file"]
        assert view.value is UNSET
        assert view.error == "Input file missing!"

    def test_filled_state_is_ready(self, gaps_spec):
        state = apply_input(gaps_spec, SessionState(), "file",
                            FileToken("aln.fa"))
        state = apply_input(gaps_spec, state, "count", True)
        resolved = resolve(gaps_spec, state)
        assert resolved.ready is True
        assert resolved.errors == ()
        assert resolved.output_names == {"outfile": "output.fa"}

    def test_checkbox_defaults_to_false(self, gaps_spec):
        resolved = resolve(gaps_spec, SessionState())
        view = resolved.inputs["count"]
        assert view.value is False
        assert view.provenance == "default_rule"


class TestPrecedence:
    SPEC = {"program": "x.py", "options": [
        {"checkbox": "", "id": "hard"},
        {"number": "", "id": "n", "default": 1,
         "fix": "if hard == true then 99"},
    ], "presets": [{"id": "p", "values": {"n": 5}}]}

    def test_default_layer(self):
        spec = mk(self.SPEC)
        view = resolve(spec, SessionState()).inputs["n"]
        assert (view.value, view.provenance) == (1, "default_rule")

    def test_preset_beats_default(self):
        spec = mk(self.SPEC)
        state = apply_preset(spec, SessionState(), "p")
        view = resolve(spec, state).inputs["n"]
        assert (view.value, view.provenance) == (5, "preset")

    def test_user_beats_preset(self):
        spec = mk(self.SPEC)
        state = apply_preset(spec, SessionState(), "p")
        state = apply_input(spec, state, "n", 7)
        view = resolve(spec, state).inputs["n"]
        assert (view.value, view.provenance) == (7, "user")

    def test_fix_beats_user(self):
        spec = mk(self.SPEC)
        state = apply_input(spec, SessionState(), "n", 7)
        state = apply_input(spec, state, "hard", True)
        view = resolve(spec, state).inputs["n"]
        assert (view.value, view.provenance) == (99, "fixed")

    def test_inactive_fix_lets_user_through(self):
        spec = mk(self.SPEC)
        state = apply_input(spec, SessionState(), "n", 3)
        view = resolve(spec, state).inputs["n"]
        assert (view.value, view.provenance) == (3, "user")


class TestApplyInput:
    def test_unknown_input(self, gaps_spec):
        exc = err(apply_input, gaps_spec, SessionState(), "zz", 1)
        assert exc.code == "UNKNOWN_INPUT"

    def test_kind_mismatch(self, gaps_spec):
        exc = err(apply_input, gaps_spec, SessionState(), "count", "yes")
        assert exc.code == "KIND_MISMATCH"

    def test_fixed_input_refused(self):
        spec = mk(TestPrecedence.SPEC)
        state = apply_input(spec, SessionState(), "hard", True)
        exc = err(apply_input, spec, state, "n", 3)
        assert exc.code == "FIXED_INPUT"

    def test_unset_clears(self, gaps_spec):
        state = apply_input(gaps_spec, SessionState(), "count", True)
        state = apply_input(gaps_spec, state, "count", UNSET)
        assert "count" not in state.values
        view = resolve(gaps_spec, state).inputs["count"]
        assert (view.value, view.provenance) == (False, "default_rule")

    def test_number_bounds_checked(self, models_spec):
        exc = err(apply_input, models_spec, SessionState(), "omega", 50)
        assert exc.code == "KIND_MISMATCH"
        exc = err(apply_input, models_spec, SessionState(), "ncatg", 2.5)
        assert exc.code == "KIND_MISMATCH"

    def test_select_membership_checked(self, models_spec):
        exc = err(apply_input, models_spec, SessionState(), "seqtype", 9)
        assert exc.code == "KIND_MISMATCH"

    def test_file_filter_checked(self):
        spec = mk({"program": "x.py", "options": [
            {"file": "", "id": "f", "filter": [".fa", ".txt"]}]})
        exc = err(apply_input, spec, SessionState(), "f",
                  FileToken("data.bin"))
        assert exc.code == "KIND_MISMATCH"
        state = apply_input(spec, SessionState(), "f", FileToken("A.FA"))
        assert resolve(spec, state).inputs["f"].value == FileToken("A.FA")


class TestGating:
    def test_group_chain_gates_children(self, models_spec):
        resolved = resolve(models_spec, SessionState())
        for input_id in ("models", "m0", "m1", "m2", "NSsites"):
            assert resolved.inputs[input_id].visible is False
        state = apply_input(models_spec, SessionState(), "advanced", True)
        resolved = resolve(models_spec, state)
        for input_id in ("models", "m0", "m1", "m2"):
            assert resolved.inputs[input_id].visible is True

    def test_child_rule_ands_with_ancestors(self):
        spec = mk({"program": "x.py", "options": [
            {"checkbox": "", "id": "outer"},
            {"checkbox": "", "id": "inner"},
            {"group": "G", "id": "g", "visible": "outer == true",
             "items": [{"text": "", "id": "t",
                        "visible": "inner == true"}]}]})
        both = apply_input(spec, SessionState(), "outer", True)
        both = apply_input(spec, both, "inner", True)
        assert resolve(spec, both).inputs["t"].visible is True
        only_inner = apply_input(spec, SessionState(), "inner", True)
        assert resolve(spec, only_inner).inputs["t"].visible is False

    def test_disabled_inputs_keep_values_but_not_errors(self):
        spec = mk({"program": "x.py", "options": [
            {"checkbox": "", "id": "on"},
            {"number": "", "id": "n", "required": "need n!",
             "enabled": "on == true", "default": 2}]})
        resolved = resolve(spec, SessionState())
        assert resolved.inputs["n"].enabled is False
        assert resolved.inputs["n"].value == 2
        assert resolved.errors == ()

    def test_hidden_inputs_contribute_no_errors(self):
        spec = mk({"program": "x.py", "options": [
            {"checkbox": "", "id": "on"},
            {"number": "", "id": "n", "required": "need n!",
             "visible": "on == true"}]})
        assert resolve(spec, SessionState()).ready is True
        on = apply_input(spec, SessionState(), "on", True)
        assert resolve(spec, on).errors == ("need n!",)

    def test_values_flow_through_hidden_inputs(self):
        spec = mk({"program": "x.py", "options": [
            {"checkbox": "", "id": "on"},
            {"number": "", "id": "n", "default": 4,
             "visible": "on == true"},
            {"number": "", "id": "m",
             "default": {"rule": "if n == 4 then 1 else 0"}}]})
        assert resolve(spec, SessionState()).inputs["m"].value == 1

    def test_rule_failure_marks_owner_and_blocks_ready(self):
        spec = mk({"program": "x.py", "options": [
            {"text": "", "id": "t"},
            {"text": "", "id": "u", "visible": "t > 5"}]})
        state = apply_input(spec, SessionState(), "t", "abc")
        resolved = resolve(spec, state)
        assert resolved.ready is False
        assert "rule failed" in resolved.inputs["u"].error
        assert resolved.inputs["u"].visible is True


class TestMerges:
    def test_indices_mode(self, models_spec):
        state = SessionState()
        for box, value in (("advanced", True), ("m0", True), ("m2", True)):
            state = apply_input(models_spec, state, box, value)
        view = resolve(models_spec, state).inputs["NSsites"]
        assert (view.value, view.provenance) == ("0 2", "fixed")

    def test_indices_empty_is_unset(self, models_spec):
        view = resolve(models_spec, SessionState()).inputs["NSsites"]
        assert view.value is UNSET

    def test_join_mode(self):
        spec = mk({"program": "x.py", "options": [
            {"text": "", "id": "a"},
            {"text": "", "id": "b"},
            {"hidden": "--ab", "id": "ab",
             "merge": {"sources": ["a", "b"], "mode": "join",
                       "sep": ","}}]})
        state = apply_input(spec, SessionState(), "a", "x")
        state = apply_input(spec, state, "b", "y")
        assert resolve(spec, state).inputs["ab"].value == "x,y"
        partial = apply_input(spec, SessionState(), "b", "y")
        assert resolve(spec, partial).inputs["ab"].value == "y"
        assert resolve(spec, SessionState()).inputs["ab"].value is UNSET

    def test_captured_sources_refuse_direct_proxy_writes(self, models_spec):
        exc = err(apply_input, models_spec, SessionState(), "NSsites", "1")
        assert exc.code == "FIXED_INPUT"


class TestPresets:
    def test_apply_sets_values_and_preset(self, models_spec):
        state = apply_preset(models_spec, SessionState(), "selection")
        resolved = resolve(models_spec, state)
        assert resolved.active_preset == "selection"
        assert resolved.inputs["m2"].value is True
        assert resolved.inputs["omega"].value == 1.5
        assert resolved.inputs["omega"].provenance == "preset"

    def test_apply_is_idempotent(self, models_spec):
        once = apply_preset(models_spec, SessionState(), "neutral")
        twice = apply_preset(models_spec, once, "neutral")
        assert once == twice

    def test_apply_overwrites_user_values_on_preset_keys(self, models_spec):
        state = apply_input(models_spec, SessionState(), "omega", 3.0)
        state = apply_input(models_spec, state, "advanced", True)
        state = apply_input(models_spec, state, "m2", True)
        state = apply_preset(models_spec, state, "selection")
        assert resolve(models_spec, state).inputs["omega"].value == 1.5

    def test_unknown_preset(self, models_spec):
        exc = err(apply_preset, models_spec, SessionState(), "zz")
        assert exc.code == "UNKNOWN_PRESET"

    def test_divergence_detaches(self, models_spec):
        state = apply_preset(models_spec, SessionState(), "selection")
        state = apply_input(models_spec, state, "omega", 2.0)
        assert resolve(models_spec, state).active_preset is None

    def test_matching_edit_keeps_preset(self, models_spec):
        state = apply_preset(models_spec, SessionState(), "selection")
        state = apply_input(models_spec, state, "omega", 1.5)
        assert resolve(models_spec, state).active_preset == "selection"

    def test_unrelated_edit_keeps_preset(self, models_spec):
        state = apply_preset(models_spec, SessionState(), "selection")
        state = apply_input(models_spec, state, "seqfile",
                            FileToken("x.fa"))
        assert resolve(models_spec, state).active_preset == "selection"

    def test_no_reactivation(self, models_spec):
        state = apply_preset(models_spec, SessionState(), "selection")
        state = apply_input(models_spec, state, "omega", 2.0)
        state = apply_input(models_spec, state, "omega", 1.5)
        assert state.active_preset is None


class TestSessions:
    def test_document_shape(self, models_spec):
        state = apply_input(models_spec, SessionState(), "seqfile",
                            FileToken("c.fa"))
        state = apply_preset(models_spec, state, "neutral")
        doc = export_session(models_spec, state)
        assert list(doc) == ["plugin_id", "plugin_version", "session_name",
                             "active_preset", "values"]
        assert doc["plugin_id"] == "sitemodels"
        assert doc["plugin_version"] == "1.2.0"
        assert doc["values"] == {"seqfile": {"file": "c.fa"}}
        assert doc["active_preset"] == "neutral"

    def test_round_trip(self, models_spec):
        state = SessionState(
            values={"seqfile": FileToken("c.fa"), "omega": 0.7,
                    "advanced": True},
            active_preset=None, session_name="my run")
        doc = export_session(models_spec, state)
        assert import_session(models_spec, doc) == state

    def test_import_rejects_unknown_keys(self, models_spec):
        doc = export_session(models_spec, SessionState())
        doc["extra"] = 1
        assert err(import_session, models_spec, doc).code == "SYNTAX"

    def test_import_rejects_wrong_plugin(self, models_spec):
        doc = export_session(models_spec, SessionState())
        doc["plugin_id"] = "other"
        assert err(import_session, models_spec, doc).code == \
            "SPEC_MISMATCH"

    def test_import_rejects_wrong_version(self, models_spec):
        doc = export_session(models_spec, SessionState())
        doc["plugin_version"] = "9.9"
        assert err(import_session, models_spec, doc).code == \
            "SPEC_MISMATCH"

    def test_import_rejects_unknown_input(self, models_spec):
        doc = export_session(models_spec, SessionState())
        doc["values"] = {"nope": 1}
        assert err(import_session, models_spec, doc).code == \
            "UNKNOWN_INPUT"

    def test_import_rejects_bad_value(self, models_spec):
        doc = export_session(models_spec, SessionState())
        doc["values"] = {"omega": "high"}
        assert err(import_session, models_spec, doc).code == \
            "KIND_MISMATCH"

    def test_import_rejects_unknown_preset(self, models_spec):
        doc = export_session(models_spec, SessionState())
        doc["active_preset"] = "zz"
        assert err(import_session, models_spec, doc).code == \
            "UNKNOWN_PRESET"


class TestDynamicOutputs:
    def test_output_name_rule(self):
        spec = mk({"program": "x.py",
                   "outfile": {"rule": "if count == true then 'counted.fa'"
                                       " else 'plain.fa'"},
                   "options": [{"checkbox": "--count", "id": "count"}]})
        assert resolve(spec, SessionState()).output_names == \
            {"outfile": "plain.fa"}
        state = apply_input(spec, SessionState(), "count", True)
        assert resolve(spec, state).output_names == \
            {"outfile": "counted.fa"}

    def test_unset_output_name_is_omitted(self):
        spec = mk({"program": "x.py",
                   "outfile": {"rule": "if count == true then 'c.fa'"},
                   "options": [{"checkbox": "--count", "id": "count"}]})
        assert resolve(spec, SessionState()).output_names == {}


class TestPurity:
    def test_resolve_is_deterministic(self, models_spec):
        state = apply_preset(models_spec, SessionState(), "selection")
        assert resolve(models_spec, state) == resolve(models_spec, state)

    def test_resolve_does_not_touch_state(self, models_spec):
        state = apply_input(models_spec, SessionState(), "advanced", True)
        before = dict(state.values)
        resolve(models_spec, state)
        assert state.values == before

    def test_generated_specs_idempotent_and_order_independent(self):
        checked = 0
        for seed in range(60):
            rng = random.Random(20_000 + seed)
            spec = mk(genlib.gen_spec_document(rng))
            pairs = genlib.gen_user_values(rng, spec)
            state_a = SessionState()
            applied = []
            for input_id, value in pairs:
                try:
                    state_a = apply_input(spec, state_a, input_id, value)
                except ResolverError:
                    continue
                applied.append((input_id, value))
            state_b = SessionState()
            for input_id, value in reversed(applied):
                state_b = apply_input(spec, state_b, input_id, value)
            first = resolve(spec, state_a)
            assert resolve(spec, state_a) == first
            assert resolve(spec, state_b) == first
            checked += 1
        assert checked == 60
