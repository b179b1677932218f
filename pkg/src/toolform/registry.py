"""Plugin discovery.

A plugin directory holds one subdirectory per plugin.  Each
subdirectory contains the plugin's descriptor (a single *.json file,
or one named after the directory when several are present) next to
whatever program files the plugin ships.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .descriptor import DescriptorError, PluginSpec, parse_plugin


class RegistryError(Exception):
    pass


class LoadedPlugin:
    def __init__(self, spec: PluginSpec, directory: Path,
                 descriptor_path: Path):
        self.spec = spec
        self.directory = directory
        self.descriptor_path = descriptor_path


class RegistryDiagnostic:
    """A plugin that could not be loaded, and why."""

    def __init__(self, path: Path, message: str):
        self.path = path
        self.message = message

    def __str__(self):
        return "%s: %s" % (self.path, self.message)


class PluginRegistry:
    def __init__(self, plugins: List[LoadedPlugin],
                 diagnostics: List[RegistryDiagnostic]):
        self.plugins = plugins
        self.diagnostics = diagnostics
        self.by_id: Dict[str, LoadedPlugin] = {
            plugin.spec.id: plugin for plugin in plugins}

    def specs(self) -> Dict[str, PluginSpec]:
        return {plugin.spec.id: plugin.spec for plugin in self.plugins}

    def get(self, plugin_id: str) -> Optional[LoadedPlugin]:
        return self.by_id.get(plugin_id)


def _descriptor_file(directory: Path) -> Optional[Path]:
    candidates = sorted(directory.glob("*.json"))
    if not candidates:
        return None
    named = directory / (directory.name + ".json")
    if named in candidates:
        return named
    if len(candidates) == 1:
        return candidates[0]
    return None


def load_plugins(directory: Path, lax: bool = False) -> PluginRegistry:
    """Scan a plugin directory.

    Broken descriptors become diagnostics and their plugins are
    skipped; two plugins claiming the same id is a hard error because
    silently dropping one would change which tool a pipeline runs.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise RegistryError("plugin directory %s does not exist" % directory)
    plugins: List[LoadedPlugin] = []
    diagnostics: List[RegistryDiagnostic] = []
    seen: Dict[str, Path] = {}
    for sub in sorted(p for p in directory.iterdir() if p.is_dir()):
        descriptor_path = _descriptor_file(sub)
        if descriptor_path is None:
            jsons = sorted(sub.glob("*.json"))
            if jsons:
                diagnostics.append(RegistryDiagnostic(
                    sub, "several descriptors and none named %s.json"
                    % sub.name))
            continue
        try:
            text = descriptor_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            diagnostics.append(RegistryDiagnostic(descriptor_path, str(exc)))
            continue
        warnings: List = []
        try:
            spec = parse_plugin(text, lax=lax, warnings=warnings)
        except DescriptorError as exc:
            diagnostics.append(RegistryDiagnostic(
                descriptor_path, "%s: %s" % (exc.code, exc.message)))
            continue
        for warning in warnings:
            diagnostics.append(RegistryDiagnostic(
                descriptor_path, "%s: %s" % (warning.code, warning.message)))
        if spec.id in seen:
            raise RegistryError(
                "duplicate plugin id %r in %s and %s"
                % (spec.id, seen[spec.id], descriptor_path))
        seen[spec.id] = descriptor_path
        plugins.append(LoadedPlugin(spec, sub, descriptor_path))
    return PluginRegistry(plugins, diagnostics)
