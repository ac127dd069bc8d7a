"""Raw note-velocity and sustain-pedal series from a performance MIDI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidParams
from .midi import MidiNote, PedalEvent


@dataclass(frozen=True)
class VelocityRecord:
    time_s: float
    pitch: int
    velocity: int


@dataclass(frozen=True)
class PedalRecord:
    time_s: float
    value: int
    engaged: bool


def velocity_series(notes: Sequence[MidiNote]) -> list[VelocityRecord]:
    records = [VelocityRecord(n.onset_s, n.pitch, n.velocity) for n in notes]
    records.sort(key=lambda r: (r.time_s, r.pitch))
    return records


def pedal_series(events: Sequence[PedalEvent], threshold: int = 64) -> list[PedalRecord]:
    """One record per event; half-pedal values and repeats are kept as they are."""
    if not 1 <= threshold <= 127:
        raise InvalidParams(f"pedal threshold {threshold} outside 1..127")
    records = [PedalRecord(e.time_s, e.value, e.value >= threshold) for e in events]
    records.sort(key=lambda r: r.time_s)
    return records
