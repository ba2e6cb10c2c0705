"""INI overrides for frozen settings dataclasses, with line diagnostics."""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration; carries the offending file and line if known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


def line_of(text: str, section: str, key: str | None = None) -> int | None:
    """1-based line of ``[section]`` or of ``key`` inside it."""
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return no
        elif current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return no
    return None


def convert(default, raw: str):
    """Parse ``raw`` into the type of ``default`` (tuples are comma lists)."""
    if isinstance(default, tuple):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if default and isinstance(default[0], str):
            return tuple(items)
        if default and isinstance(default[0], int) and not isinstance(default[0], bool):
            return tuple(int(s) for s in items)
        return tuple(float(s) for s in items)
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def read_ini(text: str, path=None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path or "<config>"))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header", path, exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("syntax error", path, line) from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], path, getattr(exc, "lineno", None)) from exc
    return parser


def apply_section(obj, parser: configparser.ConfigParser, section: str, text: str, path=None):
    """Return ``obj`` with the keys of ``[section]`` replaced."""
    if not parser.has_section(section):
        return obj
    names = {f.name for f in dataclasses.fields(obj) if f.init}
    changes = {}
    for key, raw in parser.items(section):
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in [{section}]", path, line_of(text, section, key))
        try:
            changes[key] = convert(getattr(obj, key), raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", path, line_of(text, section, key)) from exc
    try:
        return dataclasses.replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}]: {exc}", path, line_of(text, section)) from exc


def check_sections(parser, allowed, text: str, path=None) -> None:
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"unknown section [{section}]", path, line_of(text, section))


def read_text(path) -> str:
    path = Path(path)
    try:
        return path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", path) from exc


def to_ini(sections: dict) -> str:
    """Render ``{section: dataclass}`` back to INI text."""
    lines = []
    for name, obj in sections.items():
        lines.append(f"[{name}]")
        for f in dataclasses.fields(obj):
            if not f.init:
                continue
            value = getattr(obj, f.name)
            if isinstance(value, tuple):
                value = ", ".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        lines.append("")
    return "\n".join(lines)
