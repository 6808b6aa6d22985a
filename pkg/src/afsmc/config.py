"""Flat ``key = value`` file reading.

Files may carry ``[section]`` headers for readability; keys are global, so
sections are merged and a key repeated across sections is an error.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import ConfigError

_ROOT = "__root__"


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
    )
    cp.optionxform = str  # keys are case sensitive (d vs D)
    return cp


def parse_flat(text: str, source: str = "<string>") -> dict[str, str]:
    cp = _parser()
    try:
        cp.read_string(f"[{_ROOT}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    out: dict[str, str] = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            if key in out:
                raise ConfigError(f"{source}: key {key!r} given more than once")
            out[key] = value
    return out


def parse_sections(text: str, source: str = "<string>") -> dict[str, dict[str, str]]:
    """Parse keeping the section structure; top-level keys land under ``""``."""
    cp = _parser()
    try:
        cp.read_string(f"[{_ROOT}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return {("" if s == _ROOT else s): dict(cp.items(s)) for s in cp.sections()}


def read_flat_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_flat(text, source=str(path))


def format_flat(values: dict[str, object], section: str | None = None) -> str:
    lines = [f"[{section}]"] if section else []
    lines += [f"{key} = {_fmt(value)}" for key, value in values.items()]
    return "\n".join(lines) + "\n"


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)
