import math
import random

import pytest

from perfforge.errors import EmptyCloud, InvalidParams
from perfforge.midi import MidiNote
from perfforge.tension import (
    TensionParams,
    center_of_effect,
    cloud_diameter,
    fifths_index,
    spiral_position,
    tension_series,
)
import tension_oracle


def notes(*triples):
    return [MidiNote(o, d, p, 64) for o, d, p in triples]


def test_fifths_index_order():
    assert [fifths_index(pc) for pc in (0, 7, 2, 9, 4, 11, 6, 1, 8, 3, 10, 5)] == list(range(12))


def test_c_g_distance():
    d = spiral_position(0).distance(spiral_position(7))
    assert d == pytest.approx(math.sqrt(32 / 15), abs=1e-12)


def test_positions_match_trig():
    for pc in range(12):
        p = spiral_position(pc)
        ref = tension_oracle.position(pc)
        assert (p.x, p.y, p.z) == pytest.approx(tuple(ref), abs=1e-12)


def test_bad_pitch_class():
    with pytest.raises(ValueError):
        spiral_position(12)


def test_empty_cloud():
    with pytest.raises(EmptyCloud):
        center_of_effect([spiral_position(0)], [0.0])


def test_triad_tighter_than_cluster():
    triad = cloud_diameter(spiral_position(pc) for pc in (0, 4, 7))
    cluster = cloud_diameter(spiral_position(pc) for pc in (0, 1, 2))
    assert triad < cluster


def test_single_pitch_class_diameter_zero():
    assert cloud_diameter([spiral_position(5), spiral_position(5)]) == 0.0


def run(ns, **kw):
    return [(f.time_s, f.diameter, f.momentum, f.strain) for f in tension_series(notes(*ns), TensionParams(**kw))]


def test_repeated_notes_constant():
    frames = run([(t * 0.25, 0.25, 60) for t in range(16)])
    assert all(f[1] == 0 and f[2] == 0 and f[3] == pytest.approx(0, abs=1e-15) for f in frames)


def test_alternating_windows_momentum():
    # C major for one second, F# major for the next
    ns = [(0, 1, 60), (0, 1, 64), (0, 1, 67), (1, 1, 66), (1, 1, 70), (1, 1, 61)]
    frames = run(ns, window_s=1.0, hop_s=1.0)
    assert len(frames) == 2
    assert frames[0][2] == 0 and frames[1][2] > 1.0


def test_octave_invariance_exact():
    rng = random.Random(4)
    base = [(round(rng.uniform(0, 4), 3), round(rng.uniform(0.1, 1), 3), rng.randint(48, 72)) for _ in range(25)]
    shifted = [(o, d, p + 12 * rng.choice((-1, 0, 1, 2))) for o, d, p in base]
    assert run(base) == run(shifted)


def test_transposition_by_fifth_keeps_diameter():
    # C E G then D A: no class sits at the top of the helix, so +7 shifts every point by one step
    base = [(0, 1, 60), (0, 1, 64), (0, 1, 67), (1, 1, 62), (1, 1, 69)]
    up = [(o, d, p + 7) for o, d, p in base]
    a, b = run(base), run(up)
    assert [f[1] for f in a] == pytest.approx([f[1] for f in b], abs=1e-12)


def test_matches_oracle():
    rng = random.Random(9)
    for _ in range(20):
        ns = [(rng.uniform(0, 5), rng.choice([0.0, rng.uniform(0.05, 1.5)]), rng.randint(40, 80)) for _ in range(30)]
        ours = run(ns)
        ref = tension_oracle.series(ns)
        assert len(ours) == len(ref)
        for a, b in zip(ours, ref):
            assert a == pytest.approx(b, abs=1e-12)


def test_frame_times_and_count():
    frames = run([(0, 2.2, 60)])
    assert [f[0] for f in frames] == [0.5, 1.0, 1.5, 2.0, 2.5]


def test_count_weighting():
    frames = tension_series(notes((0, 0.9, 60), (0, 0.1, 67)), TensionParams(weight="count"))
    frames_d = tension_series(notes((0, 0.9, 60), (0, 0.1, 67)))
    assert frames[0].strain != frames_d[0].strain


def test_empty_input():
    assert tension_series([]) == []


@pytest.mark.parametrize("kw", [dict(hop_s=0), dict(window_s=0.1, hop_s=0.5), dict(weight="loud")])
def test_bad_params(kw):
    with pytest.raises(InvalidParams):
        TensionParams(**kw)
