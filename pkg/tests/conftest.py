import json
from pathlib import Path

import pytest

from toolform.descriptor import parse_plugin
from toolform.registry import load_plugins

FIXTURES = Path(__file__).parent / "fixtures"
PLUGIN_DIR = FIXTURES / "plugins"


def read_fixture(name: str) -> str:
    return (PLUGIN_DIR / name / (name + ".json")).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def registry():
    return load_plugins(PLUGIN_DIR)


@pytest.fixture(scope="session")
def specs(registry):
    return registry.specs()


@pytest.fixture(scope="session")
def gaps_spec():
    return parse_plugin(read_fixture("gapsremover"))


@pytest.fixture(scope="session")
def models_spec():
    return parse_plugin(read_fixture("sitemodels"))


@pytest.fixture()
def work_dir(tmp_path):
    path = tmp_path / "work"
    path.mkdir()
    return path


def write_alignment(path: Path) -> Path:
    path.write_text(">s1\nAC-GT\n>s2\nA--GT\n>s3\nAC-G-\n",
                    encoding="utf-8")
    return path


@pytest.fixture()
def alignment(tmp_path):
    return write_alignment(tmp_path / "aln.fa")
