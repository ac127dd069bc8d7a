import random

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from perfforge import kernels
from perfforge.alignment import (
    DELETION,
    INSERTION,
    MATCHED,
    AlignmentParams,
    Chord,
    align,
    chord_distance,
    chordify,
    dtw_align,
    dtw_cost,
    note_matches,
    path_cost,
)
from perfforge.errors import EmptySequence
from perfforge.midi import MidiNote, ScoreNote
from dtw_oracle import brute_force_cost, delannoy


def perf(onset, pitch, vel=64):
    return MidiNote(onset, 0.1, pitch, vel)


def score(beat, pitch):
    return ScoreNote(beat, 1.0, pitch, 80)


def chord(*pitches, onset=0.0):
    return Chord(onset, frozenset(pitches), tuple(range(len(pitches))))


def test_oracle_enumeration_counts():
    # Delannoy numbers
    assert [delannoy(k, k) for k in range(1, 5)] == [3, 13, 63, 321]


def test_chordify_threshold():
    chords = chordify([perf(0, 60), perf(0.01, 64), perf(0.5, 67)], 0.03)
    assert [c.note_ids for c in chords] == [(0, 1), (2,)]
    assert chords[0].onset == 0


def test_chordify_epsilon_zero():
    chords = chordify([score(0, 60), score(0, 64), score(0.5, 62), score(1, 60)], 0.0)
    assert [c.note_ids for c in chords] == [(0, 1), (2,), (3,)]


def test_chordify_anchored_at_chord_start():
    chords = chordify([perf(0, 60), perf(0.02, 62), perf(0.04, 64)], 0.03)
    assert [c.note_ids for c in chords] == [(0, 1), (2,)]


def test_chordify_duplicate_pitch_collapses():
    (c,) = chordify([perf(0, 60), perf(0.01, 60)], 0.03)
    assert c.pitches == {60} and c.note_ids == (0, 1)


def test_chord_distance_examples():
    assert chord_distance(chord(60, 64), chord(60, 64)) == 0
    assert chord_distance(chord(60), chord(61)) == 1
    assert chord_distance(chord(60, 64, 67), chord(60, 64)) == pytest.approx(1 / 3)


def test_identical_sequences_diagonal(backend):
    seq = [chord(60), chord(62, 65), chord(67)]
    assert dtw_align(seq, seq) == [(0, 0), (1, 1), (2, 2)]
    assert dtw_cost(seq, seq) == 0.0


def test_inserted_disjoint_chord_is_skipped(backend):
    s = [chord(60), chord(64), chord(67)]
    p = [chord(60), chord(64), chord(90), chord(67)]
    assert dtw_align(s, p) == [(0, 0), (1, 1), (None, 2), (2, 3)]


def test_tie_prefers_match():
    # match costs 1 + ... vs two gaps of 0.5: 1.0 == 0.5 + 0.5
    s, p = [chord(60)], [chord(61)]
    assert dtw_align(s, p, gap_cost=0.5) == [(0, 0)]
    # two gap orders tie; the final step prefers skipping the score chord
    assert dtw_align(s, p, gap_cost=0.49) == [(None, 0), (0, None)]


def test_empty_sequence():
    with pytest.raises(EmptySequence):
        dtw_align([], [chord(60)])


def random_sets(rng, n):
    return [frozenset(rng.sample(range(60, 68), rng.randint(1, 3))) for _ in range(n)]


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 2 ** 32), st.integers(1, 6), st.integers(1, 6), st.sampled_from([0.25, 0.5, 0.75, 1.2]))
def test_dp_equals_brute_force(backend, seed, n, m, gap):
    rng = random.Random(seed)
    a, b = random_sets(rng, n), random_sets(rng, m)
    s = [Chord(i, x, (i,)) for i, x in enumerate(a)]
    p = [Chord(i, x, (i,)) for i, x in enumerate(b)]
    cost = dtw_cost(s, p, gap)
    assert cost == brute_force_cost(a, b, gap)
    path = dtw_align(s, p, gap)
    assert path_cost(path, s, p, gap) == cost
    # monotone, every index exactly once
    assert [i for i, _ in path if i is not None] == list(range(n))
    assert [j for _, j in path if j is not None] == list(range(m))
    # swapping roles gives the same cost
    assert dtw_cost(p, s, gap) == cost


def test_backends_agree_exactly():
    backends = kernels.available_backends()
    rng = np.random.default_rng(5)
    a = rng.integers(0, 2 ** 63, size=(40, 2), dtype=np.uint64)
    b = rng.integers(0, 2 ** 63, size=(55, 2), dtype=np.uint64)
    a[3] = [1, 0]
    results = {name: impl.jaccard_matrix(a, b) for name, impl in backends.items()}
    tables = {name: impl.dtw_fill(results["python"], 0.75) for name, impl in backends.items()}
    for name in backends:
        np.testing.assert_array_equal(results[name], results["python"])
        np.testing.assert_array_equal(tables[name][0], tables["python"][0])
        np.testing.assert_array_equal(tables[name][1], tables["python"][1])


def test_note_matches_perfect_performance():
    s_notes = [score(0, 60), score(0, 64), score(1, 62)]
    p_notes = [perf(1.0, 60, 50), perf(1.01, 64, 51), perf(1.5, 62, 52)]
    out = align(s_notes, p_notes)
    assert [a.status for a in out] == [MATCHED] * 3
    assert [(a.score_note_id, a.perf_time_s, a.velocity) for a in out] == [(0, 1.0, 50), (1, 1.01, 51), (2, 1.5, 52)]


def test_note_matches_deletion_and_insertion():
    s_notes = [score(0, 60), score(0, 64)]
    p_notes = [perf(0.0, 60), perf(0.01, 61)]
    s_ch, p_ch = chordify(s_notes, 0), chordify(p_notes, 0.03)
    out = note_matches([(0, 0)], s_ch, p_ch, s_notes, p_notes)
    by_status = {a.status: a for a in out}
    assert by_status[DELETION].pitch == 64 and by_status[DELETION].perf_time_s is None
    ins = by_status[INSERTION]
    assert (ins.score_note_id, ins.pitch, ins.score_beats, ins.velocity) == (-1, 61, None, None)
    assert out[-1].status == INSERTION


def test_duplicate_pitches_match_lowest_id_first():
    s_notes = [score(0, 60), score(0, 60)]
    p_notes = [perf(0.0, 60, 10)]
    out = align(s_notes, p_notes)
    assert [(a.score_note_id, a.status) for a in out] == [(0, MATCHED), (1, DELETION)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_conservation(seed):
    rng = random.Random(seed)
    s_notes = sorted((score(rng.randint(0, 10) / 2, rng.randint(55, 70)) for _ in range(rng.randint(0, 15))),
                     key=lambda n: (n.onset_beats, n.pitch))
    p_notes = sorted((perf(rng.uniform(0, 6), rng.randint(55, 70)) for _ in range(rng.randint(0, 15))),
                     key=lambda n: (n.onset_s, n.pitch))
    out = align(s_notes, p_notes, AlignmentParams())
    counts = {k: sum(a.status == k for a in out) for k in (MATCHED, DELETION, INSERTION)}
    assert counts[MATCHED] + counts[DELETION] == len(s_notes)
    assert counts[MATCHED] + counts[INSERTION] == len(p_notes)
    assert sorted(a.score_note_id for a in out if a.status != INSERTION) == list(range(len(s_notes)))


def test_warped_identity_is_monotone():
    rng = random.Random(2)
    s_notes, p_notes = [], []
    for k in range(30):
        pitches = rng.sample(range(50, 80), rng.randint(1, 3))
        for p in sorted(pitches):
            s_notes.append(score(k / 2, p))
            p_notes.append(perf(0.3 * k + 0.02 * k * k ** 0.5, p))
    out = align(s_notes, p_notes)
    assert all(a.status == MATCHED for a in out)
    times = [a.perf_time_s for a in out]
    assert times == sorted(times)
