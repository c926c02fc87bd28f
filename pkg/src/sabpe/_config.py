from __future__ import annotations

import json
import os
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def load_mapping_file(path: str | os.PathLike) -> dict:
    """Read a ``.toml`` or ``.json`` file into a dict (decided by suffix, JSON otherwise)."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config not found: {p}")
    if p.suffix.lower() == ".toml":
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    else:
        with open(p, encoding="utf-8") as fh:
            data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{p}: top level must be a table/object")
    return data
