"""Paths to the bundled data files (models, scenes, traces)."""

from pathlib import Path

DATA_DIR = Path(__file__).parent / "data"

_MODEL_ALIASES = {"h1": "h1-like.model", "gr1": "gr1-like.model"}


def model_path(name: str) -> Path:
    """Resolve 'h1' / 'gr1', a bundled file name, or a filesystem path."""
    if name in _MODEL_ALIASES:
        return DATA_DIR / "models" / _MODEL_ALIASES[name]
    p = Path(name)
    if p.exists():
        return p
    for candidate in (name, f"{name}.model"):
        bundled = DATA_DIR / "models" / candidate
        if bundled.exists():
            return bundled
    return p


def scene_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    bundled = DATA_DIR / "scenes" / name
    if bundled.exists():
        return bundled
    if not name.endswith(".json"):
        alt = DATA_DIR / "scenes" / f"{name}.json"
        if alt.exists():
            return alt
    return p


def trace_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    bundled = DATA_DIR / "traces" / name
    if bundled.exists():
        return bundled
    return p
