"""Note-level score-to-performance alignment via chord-level DTW.

Both note lists are grouped into chords, the chord sequences are aligned
with a match / skip-score / skip-perf dynamic program over Jaccard pitch-set
distances, and notes are then paired pitch by pitch inside matched chords.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import EmptySequence, InvalidParams
from .midi import MidiNote, ScoreNote

MATCHED = "matched"
DELETION = "deletion"
INSERTION = "insertion"

PERF_EPSILON_S = 0.03
DEFAULT_GAP_COST = 0.75


@dataclass(frozen=True)
class AlignmentParams:
    chord_epsilon: float = PERF_EPSILON_S
    gap_cost: float = DEFAULT_GAP_COST

    def __post_init__(self):
        if self.chord_epsilon < 0:
            raise InvalidParams("chord_epsilon must be >= 0")
        if self.gap_cost < 0:
            raise InvalidParams("gap_cost must be >= 0")


@dataclass(frozen=True)
class Chord:
    onset: float
    pitches: frozenset
    note_ids: tuple[int, ...]


@dataclass(frozen=True)
class AlignedNote:
    score_note_id: int
    pitch: int
    score_beats: Optional[float]
    perf_time_s: Optional[float]
    velocity: Optional[int]
    status: str


def chordify(notes: Sequence, epsilon: float) -> list[Chord]:
    """Group onset-sorted notes; a chord is anchored at its first onset.

    ``notes`` may hold any objects with ``onset`` and ``pitch``; note ids are
    positions in this list.
    """
    chords: list[Chord] = []
    start = None
    pitches: set = set()
    ids: list[int] = []
    for idx, note in enumerate(notes):
        if start is not None and note.onset - start <= epsilon:
            pitches.add(note.pitch)
            ids.append(idx)
            continue
        if start is not None:
            chords.append(Chord(start, frozenset(pitches), tuple(ids)))
        start, pitches, ids = note.onset, {note.pitch}, [idx]
    if start is not None:
        chords.append(Chord(start, frozenset(pitches), tuple(ids)))
    return chords


def chord_distance(a: Chord, b: Chord) -> float:
    return 1.0 - len(a.pitches & b.pitches) / len(a.pitches | b.pitches)


def _masks(chords: Sequence[Chord]) -> np.ndarray:
    out = np.zeros((len(chords), 2), dtype=np.uint64)
    for row, chord in enumerate(chords):
        mask = 0
        for p in chord.pitches:
            mask |= 1 << p
        out[row, 0] = mask & 0xFFFFFFFFFFFFFFFF
        out[row, 1] = mask >> 64
    return out


def distance_matrix(score_chords: Sequence[Chord], perf_chords: Sequence[Chord]) -> np.ndarray:
    return kernels.jaccard_matrix(_masks(score_chords), _masks(perf_chords))


def dtw_table(score_chords, perf_chords, gap_cost: float = DEFAULT_GAP_COST):
    """Cumulative cost and step-choice tables, shape (n + 1, m + 1)."""
    if not score_chords or not perf_chords:
        raise EmptySequence("both chord sequences must be non-empty")
    return kernels.dtw_fill(distance_matrix(score_chords, perf_chords), float(gap_cost))


def dtw_align(score_chords, perf_chords, gap_cost: float = DEFAULT_GAP_COST):
    """Minimum-cost monotone path as ``(i, j)`` pairs; a gap side is ``None``.

    Ties prefer match, then skip-score, then skip-perf.
    """
    _, steps = dtw_table(score_chords, perf_chords, gap_cost)
    i, j = len(score_chords), len(perf_chords)
    path = []
    while i or j:
        step = steps[i, j]
        if step == kernels.MATCH:
            i, j = i - 1, j - 1
            path.append((i, j))
        elif step == kernels.SKIP_SCORE:
            i -= 1
            path.append((i, None))
        else:
            j -= 1
            path.append((None, j))
    path.reverse()
    return path


def dtw_cost(score_chords, perf_chords, gap_cost: float = DEFAULT_GAP_COST) -> float:
    cost, _ = dtw_table(score_chords, perf_chords, gap_cost)
    return float(cost[-1, -1])


def path_cost(path, score_chords, perf_chords, gap_cost: float = DEFAULT_GAP_COST) -> float:
    total = 0.0
    for i, j in path:
        if i is None or j is None:
            total += gap_cost
        else:
            total += chord_distance(score_chords[i], perf_chords[j])
    return total


def _by_pitch(chord: Chord, notes: Sequence) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = defaultdict(list)
    for nid in sorted(chord.note_ids):
        groups[notes[nid].pitch].append(nid)
    return groups


def note_matches(
    path,
    score_chords: Sequence[Chord],
    perf_chords: Sequence[Chord],
    score_notes: Sequence[ScoreNote],
    perf_notes: Sequence[MidiNote],
) -> list[AlignedNote]:
    """Resolve a chord path to notes, sorted for the alignment CSV."""
    scored: list[AlignedNote] = []
    inserted: list[AlignedNote] = []

    def deletion(nid):
        s = score_notes[nid]
        scored.append(AlignedNote(nid, s.pitch, s.onset_beats, None, None, DELETION))

    def insertion(pid):
        p = perf_notes[pid]
        inserted.append(AlignedNote(-1, p.pitch, None, p.onset_s, None, INSERTION))

    for i, j in path:
        if j is None:
            for nid in score_chords[i].note_ids:
                deletion(nid)
            continue
        if i is None:
            for pid in perf_chords[j].note_ids:
                insertion(pid)
            continue
        s_groups = _by_pitch(score_chords[i], score_notes)
        p_groups = _by_pitch(perf_chords[j], perf_notes)
        for pitch, s_ids in s_groups.items():
            p_ids = p_groups.get(pitch, [])
            for nid, pid in zip(s_ids, p_ids):
                s, p = score_notes[nid], perf_notes[pid]
                scored.append(AlignedNote(nid, pitch, s.onset_beats, p.onset_s, p.velocity, MATCHED))
            for nid in s_ids[len(p_ids):]:
                deletion(nid)
        for pitch, p_ids in p_groups.items():
            for pid in p_ids[len(s_groups.get(pitch, [])):]:
                insertion(pid)

    scored.sort(key=lambda a: (a.score_beats, a.pitch, a.score_note_id))
    inserted.sort(key=lambda a: (a.perf_time_s, a.pitch))
    return scored + inserted


def align(score_notes: Sequence[ScoreNote], perf_notes: Sequence[MidiNote], params: AlignmentParams | None = None):
    """Full pipeline: chordify both sides (score by exact onset), DTW, note matching."""
    params = params or AlignmentParams()
    score_chords = chordify(score_notes, 0.0)
    perf_chords = chordify(perf_notes, params.chord_epsilon)
    if not score_chords and not perf_chords:
        return []
    if not score_chords or not perf_chords:
        # one side empty: everything is a gap, no DP needed
        path = [(i, None) for i in range(len(score_chords))] + [(None, j) for j in range(len(perf_chords))]
    else:
        path = dtw_align(score_chords, perf_chords, params.gap_cost)
    return note_matches(path, score_chords, perf_chords, score_notes, perf_notes)
