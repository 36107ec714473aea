"""Flat TOML config files.

Top-level keys apply to every subcommand that has an option of that name;
a ``[<subcommand>]`` table overrides them for one subcommand. Keys use the
option's long name with dashes or underscores (``min-overlap`` or
``min_overlap``).
"""

from __future__ import annotations

import hashlib
import json
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import DataIOError, UsageError


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise DataIOError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: invalid config: {exc}") from None


def _norm(key: str) -> str:
    return key.replace("-", "_")


def defaults_for(config: dict, command: str, known: set[str]) -> dict:
    """Option defaults for ``command`` drawn from a loaded config."""
    out = {}
    for key, value in config.items():
        if isinstance(value, dict):
            continue
        if _norm(key) in known:
            out[_norm(key)] = value
    table = config.get(command, {})
    if not isinstance(table, dict):
        raise UsageError(f"config key {command!r} must be a table")
    for key, value in table.items():
        if _norm(key) not in known:
            raise UsageError(f"config [{command}] has unknown option {key!r}")
        out[_norm(key)] = value
    return out


def config_hash(options: dict) -> str:
    """sha256 of the effective options, canonically serialised."""
    blob = json.dumps(options, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
