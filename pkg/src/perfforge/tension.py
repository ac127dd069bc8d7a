"""Spiral-array tonal tension: cloud diameter, cloud momentum, tensile strain.

Pitch classes sit on a helix along the line of fifths (C at k = 0, G at
k = 1, ..., F at k = 11). Each window of the performance yields a pitch
cloud whose center of effect (CE) is the weighted mean of its points.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .errors import EmptyCloud, InvalidParams
from .midi import MidiNote

RADIUS = 1.0
RISE = math.sqrt(2.0 / 15.0)

# exact quarter-turn table for (sin(k pi / 2), cos(k pi / 2))
_QUARTER_TURNS = ((0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0))


@dataclass(frozen=True)
class SpiralPoint:
    x: float
    y: float
    z: float

    def distance(self, other: "SpiralPoint") -> float:
        return math.sqrt((self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2)


@dataclass(frozen=True)
class TensionParams:
    window_s: float = 1.0
    hop_s: float = 0.5
    weight: str = "duration"

    def __post_init__(self):
        if not self.hop_s > 0:
            raise InvalidParams("hop_s must be positive")
        if self.window_s < self.hop_s:
            raise InvalidParams("window_s must be >= hop_s")
        if self.weight not in ("duration", "count"):
            raise InvalidParams(f"weight must be 'duration' or 'count', not {self.weight!r}")


@dataclass(frozen=True)
class TensionFrame:
    time_s: float
    diameter: float
    momentum: float
    strain: float


def fifths_index(pitch_class: int) -> int:
    # 7 is its own inverse mod 12
    return (7 * pitch_class) % 12


def spiral_position(pitch_class: int, r: float = RADIUS, h: float = RISE) -> SpiralPoint:
    if not 0 <= pitch_class <= 11:
        raise ValueError(f"pitch class {pitch_class} outside 0..11")
    k = fifths_index(pitch_class)
    s, c = _QUARTER_TURNS[k % 4]
    return SpiralPoint(r * s, r * c, k * h)


def center_of_effect(points: Sequence[SpiralPoint], weights: Sequence[float]) -> SpiralPoint:
    total = math.fsum(weights)
    if total <= 0:
        raise EmptyCloud("cloud has no weight")
    return SpiralPoint(
        math.fsum(w * p.x for p, w in zip(points, weights)) / total,
        math.fsum(w * p.y for p, w in zip(points, weights)) / total,
        math.fsum(w * p.z for p, w in zip(points, weights)) / total,
    )


def cloud_diameter(points: Iterable[SpiralPoint]) -> float:
    distinct = set(points)
    return max((a.distance(b) for a, b in combinations(distinct, 2)), default=0.0)


def _ce_of(weights_by_pc: Mapping[int, float]) -> SpiralPoint:
    pcs = sorted(weights_by_pc)
    return center_of_effect([spiral_position(pc) for pc in pcs], [weights_by_pc[pc] for pc in pcs])


def _pc_weights(contributions: Iterable[tuple[int, float]]) -> dict[int, float]:
    # fsum keeps per-class totals independent of note order
    parts: dict[int, list[float]] = defaultdict(list)
    for pitch, w in contributions:
        parts[pitch % 12].append(w)
    return {pc: math.fsum(ws) for pc, ws in parts.items()}


def global_center(notes: Sequence[MidiNote]) -> SpiralPoint | None:
    """Duration-weighted CE of the whole piece (count-weighted if all durations are 0)."""
    if not notes:
        return None
    if any(n.duration_s > 0 for n in notes):
        return _ce_of(_pc_weights((n.pitch, n.duration_s) for n in notes))
    return _ce_of(_pc_weights((n.pitch, 1.0) for n in notes))


def tension_series(notes: Sequence[MidiNote], params: TensionParams | None = None) -> list[TensionFrame]:
    params = params or TensionParams()
    if not notes:
        return []
    end = max(n.offset_s for n in notes)
    key_center = global_center(notes)
    ordered = sorted(notes, key=lambda n: n.onset_s)

    frames: list[TensionFrame] = []
    previous = None
    k = 0
    while k == 0 or k * params.hop_s < end:
        start = k * params.hop_s
        stop = start + params.window_s
        contributions = []
        for n in ordered:
            if n.onset_s >= stop:
                break
            if n.offset_s > start or (n.duration_s == 0 and n.onset_s >= start):
                if params.weight == "duration":
                    contributions.append((n.pitch, min(n.offset_s, stop) - max(n.onset_s, start)))
                else:
                    contributions.append((n.pitch, 1.0))
        weights = _pc_weights(contributions)

        diameter = cloud_diameter(spiral_position(pc) for pc in weights)
        try:
            ce = _ce_of(weights)
        except EmptyCloud:
            ce = None
        if ce is None:
            frames.append(TensionFrame(start + params.window_s / 2, diameter, 0.0, 0.0))
        else:
            momentum = ce.distance(previous) if previous is not None else 0.0
            frames.append(TensionFrame(start + params.window_s / 2, diameter, momentum, ce.distance(key_center)))
        previous = ce
        k += 1
    return frames
