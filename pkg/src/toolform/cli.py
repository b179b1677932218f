"""Command line entry points.

validate  check descriptors and report problems
dryrun    resolve one form and print the command it would run
run       execute a pipeline document locally
serve     start the HTTP server
bundle    pack a pipeline with its plugins into a portable directory
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import threading
import time
import webbrowser
from pathlib import Path
from typing import List, Optional

from . import execution, pipeline as pipeline_mod
from .command import NotReady, render_preview, sanitize_filename, synthesize
from .config import ConfigError, load_config
from .descriptor import (DescriptorError, InputKind, parse_plugin,
                         validate_plugin)
from .jobs import JobManager, JobState, TERMINAL_STATES
from .registry import RegistryError, load_plugins
from .resolver import (ResolverError, SessionState, apply_input, resolve)
from .values import FileToken, value_to_text


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolform",
        description="Declarative forms for command line tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check plugin descriptors")
    p_validate.add_argument("descriptor", nargs="+")
    p_validate.add_argument("--lax", action="store_true",
                            help="downgrade unknown fields to warnings")

    p_dryrun = sub.add_parser("dryrun",
                              help="print the command a form would run")
    p_dryrun.add_argument("descriptor")
    p_dryrun.add_argument("--set", action="append", default=[],
                          metavar="INPUT=VALUE", dest="assignments")
    p_dryrun.add_argument("--lax", action="store_true")

    p_run = sub.add_parser("run", help="execute a pipeline document")
    p_run.add_argument("pipeline")
    p_run.add_argument("--plugins", default="plugins",
                       help="plugin directory (default: plugins)")
    p_run.add_argument("--work", default=None,
                       help="work directory (default: temporary)")
    p_run.add_argument("--input", action="append", default=[],
                       metavar="NAME=PATH", dest="inputs",
                       help="supply a file for an upload slot")
    p_run.add_argument("--lax", action="store_true",
                       help="ignore plugin version pins")

    p_serve = sub.add_parser("serve", help="start the HTTP server")
    p_serve.add_argument("--config", default=None)
    p_serve.add_argument("--listen", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--plugins", dest="plugin_dir", default=None)
    p_serve.add_argument("--work", dest="work_dir", default=None)
    p_serve.add_argument("--static", dest="static_dir", default=None)
    p_serve.add_argument("--open-browser", action="store_true",
                         default=None)

    p_bundle = sub.add_parser(
        "bundle", help="pack a pipeline and its plugins for another host")
    p_bundle.add_argument("pipeline")
    p_bundle.add_argument("--out", required=True)
    p_bundle.add_argument("--plugins", default="plugins")
    p_bundle.add_argument("--static", default=None)

    return parser


def _coerce_assignment(inp, raw: str):
    """Turn command line text into a value of the input's kind."""
    if inp.kind == InputKind.BOOL:
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError("%s expects true or false, not %r"
                         % (inp.id, raw))
    if inp.kind == InputKind.NUMBER:
        try:
            return int(raw)
        except ValueError:
            pass
        try:
            return float(raw)
        except ValueError:
            raise ValueError("%s expects a number, not %r" % (inp.id, raw))
    if inp.kind == InputKind.FILE:
        return FileToken(raw)
    if inp.kind == InputKind.SELECT:
        for option in inp.select_options:
            if raw == value_to_text(option.value):
                return option.value
        choices = ", ".join(value_to_text(o.value)
                            for o in inp.select_options)
        raise ValueError("%s must be one of %s, not %r"
                         % (inp.id, choices, raw))
    return raw


def _cmd_validate(args) -> int:
    failed = False
    for path in args.descriptor:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            print("%s: %s" % (path, exc))
            failed = True
            continue
        warnings: List = []
        try:
            spec = parse_plugin(text, lax=args.lax, warnings=warnings)
        except DescriptorError as exc:
            print("%s: error %s: %s" % (path, exc.code, exc.message))
            failed = True
            continue
        for diag in warnings + validate_plugin(spec):
            print("%s: warning %s: %s" % (path, diag.code, diag.message))
        print("%s: ok (%s)" % (path, spec.id))
    return 1 if failed else 0


def _cmd_dryrun(args) -> int:
    try:
        text = Path(args.descriptor).read_text(encoding="utf-8")
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    try:
        spec = parse_plugin(text, lax=args.lax)
    except DescriptorError as exc:
        print("error %s: %s" % (exc.code, exc.message), file=sys.stderr)
        return 1
    state = SessionState()
    for assignment in args.assignments:
        if "=" not in assignment:
            print("--set needs INPUT=VALUE, got %r" % assignment,
                  file=sys.stderr)
            return 2
        input_id, _, raw = assignment.partition("=")
        inp = spec.input_map().get(input_id)
        if inp is None:
            print("no input %r" % input_id, file=sys.stderr)
            return 1
        try:
            value = _coerce_assignment(inp, raw)
            state = apply_input(spec, state, input_id, value)
        except (ValueError, ResolverError) as exc:
            message = getattr(exc, "message", None) or str(exc)
            print(message, file=sys.stderr)
            return 1
    resolved = resolve(spec, state)
    if not resolved.ready:
        for message in resolved.errors:
            print(message)
        return 1
    plan = synthesize(spec, resolved)
    print(render_preview(plan))
    if plan.config is not None:
        sys.stdout.write(plan.config.content)
    return 0


def _load_pipeline_file(path: str, specs, lax: bool):
    text = Path(path).read_text(encoding="utf-8")
    document = json.loads(text)
    return pipeline_mod.import_pipeline(document, specs, lax=lax), document


def _cmd_run(args) -> int:
    try:
        registry = load_plugins(Path(args.plugins))
    except RegistryError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    for diag in registry.diagnostics:
        print("warning: %s" % diag, file=sys.stderr)
    specs = registry.specs()
    try:
        parsed, document = _load_pipeline_file(args.pipeline, specs,
                                               args.lax)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ValueError as exc:
        print("pipeline is not valid JSON: %s" % exc, file=sys.stderr)
        return 1
    except pipeline_mod.PipelineError as exc:
        print("error %s: %s" % (exc.code, exc.message), file=sys.stderr)
        return 1
    try:
        plan = pipeline_mod.plan(parsed, specs)
    except pipeline_mod.PlanError as exc:
        for problem in exc.problems:
            print(str(problem), file=sys.stderr)
        return 1

    supplied = {}
    for item in args.inputs:
        if "=" not in item:
            print("--input needs NAME=PATH, got %r" % item, file=sys.stderr)
            return 2
        name, _, path = item.partition("=")
        supplied[sanitize_filename(name)] = Path(path)
    needed = pipeline_mod.required_uploads(parsed, plan)
    missing = sorted(needed - set(supplied))
    if missing:
        print("missing input files: %s (use --input NAME=PATH)"
              % ", ".join(missing), file=sys.stderr)
        return 1

    if args.work:
        work_dir = Path(args.work)
    else:
        import tempfile
        work_dir = Path(tempfile.mkdtemp(prefix="toolform-run-"))
    manager = JobManager(work_dir, max_concurrent=1)
    record = manager.create_job(parsed, plan, pipeline_document=document)
    for name, source in supplied.items():
        if name not in needed:
            continue
        try:
            shutil.copyfile(source,
                            record.directory / execution.UPLOAD_DIR / name)
        except OSError as exc:
            print(str(exc), file=sys.stderr)
            return 1

    def spawn_vector(planned):
        loaded = registry.get(planned.plugin_id)
        if loaded is None:
            raise FileNotFoundError(planned.plugin_id)
        return execution.resolve_program(loaded.spec.program,
                                         loaded.directory)

    manager.start_job(record, spawn_vector)
    while record.state not in TERMINAL_STATES:
        time.sleep(0.05)
    for index, status in enumerate(record.steps):
        code = "" if status.exit_code is None \
            else " (exit %d)" % status.exit_code
        print("step %d %s: %s%s" % (index, status.plugin_id,
                                    status.state.value, code))
    print("job %s: %s" % (record.id, record.state.value))
    print("files under %s" % record.directory)
    return 0 if record.state == JobState.DONE else 1


def _cmd_serve(args) -> int:
    import uvicorn

    from .server.app import create_app

    try:
        config = load_config(
            args.config, listen=args.listen, port=args.port,
            plugin_dir=args.plugin_dir, work_dir=args.work_dir,
            static_dir=args.static_dir, open_browser=args.open_browser)
        app = create_app(config)
    except (ConfigError, RegistryError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    for diag in app.state.registry.diagnostics:
        print("warning: %s" % diag, file=sys.stderr)
    if config.open_browser:
        url = "http://%s:%d/" % (config.listen, config.port)

        def browse():
            time.sleep(0.5)
            webbrowser.open(url)

        threading.Thread(target=browse, daemon=True).start()
    uvicorn.run(app, host=config.listen, port=config.port,
                log_level="warning")
    return 0


def _cmd_bundle(args) -> int:
    plugin_root = Path(args.plugins)
    try:
        registry = load_plugins(plugin_root)
    except RegistryError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    specs = registry.specs()
    try:
        parsed, document = _load_pipeline_file(args.pipeline, specs,
                                               lax=False)
        pipeline_mod.plan(parsed, specs)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ValueError as exc:
        print("pipeline is not valid JSON: %s" % exc, file=sys.stderr)
        return 1
    except pipeline_mod.PipelineError as exc:
        print("error %s: %s" % (exc.code, exc.message), file=sys.stderr)
        return 1
    except pipeline_mod.PlanError as exc:
        for problem in exc.problems:
            print(str(problem), file=sys.stderr)
        return 1

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "plugins").mkdir(exist_ok=True)
    used = {step.plugin_id for step in parsed.steps}
    for plugin_id in sorted(used):
        loaded = registry.get(plugin_id)
        target = out / "plugins" / loaded.directory.name
        if target.exists():
            shutil.rmtree(target)
        shutil.copytree(loaded.directory, target)
    shutil.copyfile(args.pipeline, out / "pipeline.json")
    config = {
        "plugin_dir": "plugins",
        "work_dir": "work",
    }
    if args.static:
        static_target = out / "static"
        if static_target.exists():
            shutil.rmtree(static_target)
        shutil.copytree(args.static, static_target)
        config["static_dir"] = "static"
    (out / "config.json").write_text(
        json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print("bundle written to %s" % out)
    print("run it with: toolform run pipeline.json --plugins plugins")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "validate": _cmd_validate,
        "dryrun": _cmd_dryrun,
        "run": _cmd_run,
        "serve": _cmd_serve,
        "bundle": _cmd_bundle,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
