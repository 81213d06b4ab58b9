"""Bundled image corpora shipped as package data."""

from importlib.resources import files
from pathlib import Path

CORPORA = ("natural", "attack")


def corpus_dir(name: str) -> Path:
    """Directory of the bundled corpus `name` ("natural" or "attack")."""
    if name not in CORPORA:
        raise ValueError(f"unknown corpus {name!r}; choose from {CORPORA}")
    return Path(str(files("visualmixer") / "data" / name))
