"""Server configuration.

Settings come from an optional JSON file, overridden by TOOLFORM_*
environment variables, overridden by explicit keyword arguments.
Relative paths in the file are resolved against the file's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping, Optional

ENV_PREFIX = "TOOLFORM_"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ServerConfig:
    listen: str = "127.0.0.1"
    port: int = 8080
    plugin_dir: str = "plugins"
    work_dir: str = "work"
    static_dir: Optional[str] = None
    max_concurrent_jobs: int = 2
    max_upload_bytes: int = 64 * 1024 * 1024
    open_browser: bool = False


_BOOL_FIELDS = {"open_browser"}
_INT_FIELDS = {"port", "max_concurrent_jobs", "max_upload_bytes"}
_PATH_FIELDS = {"plugin_dir", "work_dir", "static_dir"}


def _coerce(name: str, value, source: str):
    if name in _BOOL_FIELDS:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("1", "true", "yes"):
            return True
        if isinstance(value, str) and value.lower() in ("0", "false", "no"):
            return False
        raise ConfigError("%s: %s must be a boolean" % (source, name))
    if name in _INT_FIELDS:
        if isinstance(value, bool):
            raise ConfigError("%s: %s must be an integer" % (source, name))
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
        raise ConfigError("%s: %s must be an integer" % (source, name))
    if not isinstance(value, str):
        raise ConfigError("%s: %s must be a string" % (source, name))
    return value


def load_config(path: Optional[str] = None,
                env: Optional[Mapping[str, str]] = None,
                **overrides) -> ServerConfig:
    env = os.environ if env is None else env
    names = {f.name for f in fields(ServerConfig)}
    config = ServerConfig()

    if path is not None:
        file_path = Path(path)
        try:
            doc = json.loads(file_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError("cannot read %s: %s" % (path, exc))
        except ValueError as exc:
            raise ConfigError("%s is not valid JSON: %s" % (path, exc))
        if not isinstance(doc, dict):
            raise ConfigError("%s must hold a JSON object" % path)
        base = file_path.resolve().parent
        values = {}
        for key, value in doc.items():
            if key not in names:
                raise ConfigError("%s: unknown setting %r" % (path, key))
            value = _coerce(key, value, str(path))
            if key in _PATH_FIELDS and value is not None:
                value = str((base / value).resolve()) \
                    if not os.path.isabs(value) else value
            values[key] = value
        config = replace(config, **values)

    env_values = {}
    for name in names:
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is None:
            continue
        env_values[name] = _coerce(name, raw, ENV_PREFIX + name.upper())
    if env_values:
        config = replace(config, **env_values)

    if overrides:
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(clean) - names
        if unknown:
            raise ConfigError("unknown settings: %s" % sorted(unknown))
        config = replace(config, **clean)

    if config.port < 1 or config.port > 65535:
        raise ConfigError("port must be between 1 and 65535")
    if config.max_concurrent_jobs < 1:
        raise ConfigError("max_concurrent_jobs must be at least 1")
    if config.max_upload_bytes < 1:
        raise ConfigError("max_upload_bytes must be positive")
    return config
