"""Bundled example models, loadable by name."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..model import Fcm, loads_model


def names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir() if p.name.endswith(".json"))


def path(name: str) -> Path:
    name = name[:-5] if name.endswith(".json") else name
    p = resources.files(__name__) / f"{name}.json"
    if not p.is_file():
        raise KeyError(f"no bundled model {name!r}; choose from {names()}")
    return Path(str(p))


def load_example(name: str) -> Fcm:
    return loads_model(path(name).read_bytes())
