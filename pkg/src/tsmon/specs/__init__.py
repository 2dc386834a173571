"""Bundled example protocol specs, installed as package data."""

from __future__ import annotations

import functools
from importlib import resources
from pathlib import Path

from ..dsl import parse_protocol
from ..model import ProtocolSpec

__all__ = ["BUNDLED", "load", "source", "spec_path"]

BUNDLED = ("sender", "receiver", "leader", "peer", "auth", "counting")


def source(name: str) -> str:
    """Raw ``.tsp`` text of a bundled spec."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled spec named {name!r}")
    return resources.files(__package__).joinpath(f"{name}.tsp").read_text(encoding="utf-8")


@functools.lru_cache(maxsize=None)
def load(name: str) -> ProtocolSpec:
    """Parsed form of a bundled spec."""
    return parse_protocol(source(name))


def spec_path(name: str) -> Path:
    """Filesystem path of a bundled spec (for handing to the CLI)."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled spec named {name!r}")
    return Path(str(resources.files(__package__).joinpath(f"{name}.tsp")))
