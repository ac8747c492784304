"""Bundled data files: catalogs, profiles, workloads, and test-run samples."""

from pathlib import Path

_ROOT = Path(__file__).parent


def fixture_path(name: str) -> Path:
    """Absolute path of a bundled fixture file, e.g. ``catalog_experiment.json``."""
    path = _ROOT / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture named '{name}'")
    return path


def available() -> list[str]:
    """Names of all bundled fixture files, relative to the fixtures directory."""
    return sorted(
        str(p.relative_to(_ROOT)) for p in _ROOT.rglob("*.json")
    )
