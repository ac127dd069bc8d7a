"""Dataset-level parameter file and the typed, digestible parameter set.

The file is line oriented::

    # comment
    [loudness]
    window_length = 2048

Every section belongs to one feature module and every key is checked
against that module's schema, so typos fail loudly instead of silently
falling back to a default.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .alignment import AlignmentParams
from .beats import BeatParams
from .errors import (
    ConfigSyntaxError,
    DuplicateKey,
    InvalidParams,
    InvalidValue,
    TypeMismatch,
    UnknownKey,
    UnknownSection,
)
from .loudness import LoudnessParams
from .tension import TensionParams

DEFAULT_CONFIG_NAME = "features.cfg"

# section -> key -> default; the default's type is the key's type
SCHEMA: Mapping[str, Mapping[str, object]] = {
    "loudness": {"method": "bark-sone", "window_length": 4096, "hop_length": 1024, "db_max": 96.0},
    "alignment": {"method": "chord-dtw", "chord_epsilon": 0.03, "gap_cost": 0.75},
    "beats": {"method": "anchor-linear", "subdivision": 1},
    "dynamics": {"method": "raw", "pedal_threshold": 64},
    "tension": {"method": "spiral-array", "window_s": 1.0, "hop_s": 0.5, "weight": "duration"},
}

DESCRIPTIONS = {
    ("loudness", "window_length"): "analysis window in samples",
    ("loudness", "hop_length"): "hop between frames in samples",
    ("loudness", "db_max"): "dB SPL assigned to a full-scale sine",
    ("alignment", "chord_epsilon"): "seconds; performance onsets closer than this to a chord's first onset join it",
    ("alignment", "gap_cost"): "cost of leaving a chord unaligned (Jaccard distances lie in [0, 1])",
    ("beats", "subdivision"): "grid points per quarter note",
    ("dynamics", "pedal_threshold"): "sustain values at or above this count as engaged",
    ("tension", "window_s"): "window length in seconds",
    ("tension", "hop_s"): "hop between windows in seconds",
    ("tension", "weight"): "duration or count",
}

_BUILDERS = {
    "loudness": LoudnessParams,
    "alignment": AlignmentParams,
    "beats": BeatParams,
    "tension": TensionParams,
}

_INT_RE = re.compile(r"[+-]?\d+\Z")
_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class ConfigFile:
    sections: Mapping[str, Mapping[str, str]]
    values: Mapping[str, Mapping[str, object]]
    source: Path | None = None


@dataclass(frozen=True)
class ParamSet:
    sections: Mapping[str, Mapping[str, object]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> Mapping[str, object]:
        return self.sections[section]

    def __eq__(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        return {s: dict(v) for s, v in self.sections.items()} == {s: dict(v) for s, v in other.sections.items()}

    def __hash__(self):
        return hash(tuple((s, tuple(sorted(v.items()))) for s, v in sorted(self.sections.items())))

    def __reduce__(self):
        # mapping proxies do not pickle; worker processes need ParamSets
        return (_rebuild, ({s: dict(v) for s, v in self.sections.items()},))

    def options(self, section: str) -> dict:
        """Section values without the reserved ``method`` key, ready for a params dataclass."""
        return {k: v for k, v in self.sections[section].items() if k != "method"}


def _rebuild(sections):
    return _freeze(sections)


def _freeze(sections) -> ParamSet:
    return ParamSet(MappingProxyType({s: MappingProxyType(dict(v)) for s, v in sections.items()}))


DEFAULTS = _freeze(SCHEMA)


def _convert(section: str, key: str, raw: str):
    default = SCHEMA[section][key]
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if raw not in ("true", "false"):
            raise TypeMismatch(f"{where}: expected true or false, got {raw!r}")
        return raw == "true"
    if isinstance(default, int):
        if not _INT_RE.match(raw):
            raise TypeMismatch(f"{where}: expected an integer, got {raw!r}")
        return int(raw)
    if isinstance(default, float):
        try:
            value = float(raw)
        except ValueError:
            raise TypeMismatch(f"{where}: expected a real number, got {raw!r}") from None
        if not math.isfinite(value):
            raise TypeMismatch(f"{where}: expected a finite real number, got {raw!r}")
        return value
    return raw


def parse_config(text: str, source: Path | None = None) -> ConfigFile:
    raw_sections: dict[str, dict[str, str]] = {}
    typed: dict[str, dict[str, object]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source or '<config>'}:{lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigSyntaxError(f"{where}: unterminated section header")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise UnknownSection(f"{where}: unknown section [{section}]; known: {', '.join(SCHEMA)}")
            raw_sections.setdefault(section, {})
            typed.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigSyntaxError(f"{where}: expected 'key = value'")
        if section is None:
            raise ConfigSyntaxError(f"{where}: key outside of any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigSyntaxError(f"{where}: invalid key {key!r}")
        if key not in SCHEMA[section]:
            raise UnknownKey(f"{where}: unknown key {key!r} in section [{section}] ({section}/{key})")
        if key in raw_sections[section]:
            raise DuplicateKey(f"{where}: {section}.{key} set twice")
        raw_sections[section][key] = value
        typed[section][key] = _convert(section, key, value)
    return ConfigFile(raw_sections, typed, source)


def validate(params: ParamSet) -> None:
    for section in SCHEMA:
        method = params[section]["method"]
        if method != SCHEMA[section]["method"]:
            raise InvalidValue(f"{section}.method: only {SCHEMA[section]['method']!r} ships, got {method!r}")
        try:
            if section in _BUILDERS:
                _BUILDERS[section](**params.options(section))
            elif not 1 <= params["dynamics"]["pedal_threshold"] <= 127:
                raise InvalidParams("pedal_threshold must be in 1..127")
        except InvalidParams as exc:
            raise InvalidValue(f"[{section}] {exc}") from None


def effective_params(config: ConfigFile | None, defaults: ParamSet = DEFAULTS) -> ParamSet:
    merged = {s: dict(v) for s, v in defaults.sections.items()}
    if config is not None:
        for section, values in config.values.items():
            merged[section].update(values)
    params = _freeze(merged)
    validate(params)
    return params


def load_params(path: Path | None) -> ParamSet:
    """Defaults overlaid with ``path``; a missing file means all defaults."""
    if path is None or not Path(path).exists():
        return effective_params(None)
    text = Path(path).read_text(encoding="utf-8")
    return effective_params(parse_config(text, Path(path)))


def render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def param_digest(params: ParamSet, section: str, keys=None) -> str:
    """SHA-256 over the section's sorted ``key=value`` lines, defaults included.

    ``keys`` limits the digest to the keys a feature actually reads.
    """
    values = params[section]
    chosen = sorted(values if keys is None else keys)
    text = "".join(f"{k}={render_value(values[k])}\n" for k in chosen)
    return hashlib.sha256(f"[{section}]\n{text}".encode("utf-8")).hexdigest()


def render_config(params: ParamSet, commented: bool = False) -> str:
    prefix = "# " if commented else ""
    lines = []
    for section, values in params.sections.items():
        if lines:
            lines.append("")
        lines.append(f"{prefix}[{section}]")
        for key, value in values.items():
            note = DESCRIPTIONS.get((section, key))
            if commented and note:
                lines.append(f"## {note}")
            lines.append(f"{prefix}{key} = {render_value(value)}")
    return "\n".join(lines) + "\n"


def render_template() -> str:
    header = (
        "# perfforge parameter file\n"
        "#\n"
        "# Copy to features.cfg in the dataset root and remove the leading \"# \" from\n"
        "# the lines you want to change (\"## \" lines are descriptions).\n"
        "# Values shown are the built-in defaults. Changing a value makes\n"
        "# the next run recompute the affected features and their dependents.\n"
        "\n"
    )
    return header + render_config(DEFAULTS, commented=True)
