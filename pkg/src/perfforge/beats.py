"""Performed beat times and local tempo from an alignment.

Matched notes give (score beat, performance time) anchors; a quarter-note
grid is mapped through the piecewise-linear anchor curve, extrapolating
with the end segments' slopes.
"""

from __future__ import annotations

import bisect
import statistics
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

from .alignment import MATCHED, AlignedNote
from .errors import InsufficientAnchors, InvalidParams
from .midi import MidiFile, extract_score_notes


@dataclass(frozen=True)
class BeatParams:
    subdivision: int = 1

    def __post_init__(self):
        if self.subdivision < 1:
            raise InvalidParams("subdivision must be >= 1")


@dataclass(frozen=True)
class BeatRecord:
    index: int
    score_beats: float
    perf_time_s: float
    local_bpm: Optional[float]
    interpolated: bool


def score_beat_grid(score: MidiFile, subdivision: int = 1) -> list[float]:
    """Every 1/subdivision quarter note from 0 through the beat covering the last onset."""
    if subdivision < 1:
        raise InvalidParams("subdivision must be >= 1")
    notes = extract_score_notes(score)
    if not notes:
        return []
    last_tick = max(round(n.onset_beats * score.ppq) for n in notes)
    steps = -(-last_tick * subdivision // score.ppq)
    return [k / subdivision for k in range(steps + 1)]


def anchor_points(aligned: Sequence[AlignedNote]) -> list[tuple[float, float]]:
    groups: dict[float, list[float]] = defaultdict(list)
    for note in aligned:
        if note.status == MATCHED:
            groups[note.score_beats].append(note.perf_time_s)
    if len(groups) < 2:
        raise InsufficientAnchors(f"{len(groups)} distinct matched score position(s); need 2")

    anchors: list[tuple[float, float]] = []
    for beat in sorted(groups):
        t = statistics.median(groups[beat])
        if anchors and t <= anchors[-1][1]:
            continue
        anchors.append((beat, t))
    if len(anchors) < 2:
        raise InsufficientAnchors("fewer than 2 anchors survive the monotonicity filter")
    return anchors


def _warp(beat: float, xs: list[float], ys: list[float]) -> float:
    # segment k spans anchors k and k + 1; clamp to the end segments to extrapolate
    k = bisect.bisect_right(xs, beat) - 1
    k = min(max(k, 0), len(xs) - 2)
    x0, x1, y0, y1 = xs[k], xs[k + 1], ys[k], ys[k + 1]
    return y0 + (beat - x0) * (y1 - y0) / (x1 - x0)


def interpolate_beats(grid: Sequence[float], anchors: Sequence[tuple[float, float]], subdivision: int = 1) -> list[BeatRecord]:
    if len(anchors) < 2:
        raise InsufficientAnchors("need at least 2 anchors")
    xs = [a[0] for a in anchors]
    ys = [a[1] for a in anchors]
    times = [_warp(b, xs, ys) for b in grid]
    radius = 0.5 / subdivision

    records = []
    for k, (beat, t) in enumerate(zip(grid, times)):
        if k + 1 < len(grid):
            bpm = 60.0 * (grid[k + 1] - beat) / (times[k + 1] - t)
        else:
            bpm = None
        pos = bisect.bisect_left(xs, beat)
        near = min((abs(xs[i] - beat) for i in (pos - 1, pos) if 0 <= i < len(xs)))
        records.append(BeatRecord(k, beat, t, bpm, near >= radius))
    return records


def find_beats(score: MidiFile, aligned: Sequence[AlignedNote], params: BeatParams | None = None) -> list[BeatRecord]:
    params = params or BeatParams()
    grid = score_beat_grid(score, params.subdivision)
    return interpolate_beats(grid, anchor_points(aligned), params.subdivision)
