import io
from collections import defaultdict, deque

import mido
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perfforge.errors import MalformedHeader, MidiError, TruncatedTrack, UnsupportedFormat
from perfforge.midi import (
    MidiNote,
    TempoMap,
    build_tempo_map,
    extract_notes,
    extract_notes_with_diagnostics,
    extract_pedal,
    extract_score_notes,
    parse_smf,
    tick_to_seconds,
)
from synth import cc, note_off, note_on, smf, tempo, time_sig


def mido_notes(data: bytes):
    """Independent reader: mido's merged, tempo-resolved stream, FIFO-paired here."""
    mf = mido.MidiFile(file=io.BytesIO(data))
    now = 0.0
    sounding = defaultdict(deque)
    out = []
    for msg in mf:
        now += msg.time
        if msg.type == "note_on" and msg.velocity > 0:
            sounding[msg.channel, msg.note].append((now, msg.velocity))
        elif msg.type in ("note_on", "note_off"):
            q = sounding[msg.channel, msg.note]
            if q:
                on, vel = q.popleft()
                out.append((on, now - on, msg.note, vel, msg.channel))
    return sorted(out, key=lambda n: (n[0], n[2], n[4]))


def test_header_only_file():
    f = parse_smf(smf([], fmt=0))
    assert f.format == 0 and f.ppq == 480 and f.tracks == []
    assert extract_notes(f) == []


def test_single_note_half_second():
    data = smf([[(0, note_on(0, 60, 64)), (480, note_on(0, 60, 0))]])
    notes = extract_notes(parse_smf(data))
    assert notes == [MidiNote(0.0, 0.5, 60, 64, 0, 0)]
    ref = mido_notes(data)
    assert ref[0][:4] == pytest.approx((0.0, 0.5, 60, 64))


@pytest.mark.parametrize("fmt", [2, 3])
def test_format_2_rejected(fmt):
    with pytest.raises(UnsupportedFormat):
        parse_smf(smf([[]], fmt=fmt))


def test_smpte_division_rejected():
    data = bytearray(smf([[]]))
    data[12:14] = (0xE7, 0x28)  # -25 fps, 40 ticks per frame
    with pytest.raises(UnsupportedFormat):
        parse_smf(bytes(data))


@pytest.mark.parametrize("data", [b"", b"RIFF" + b"\0" * 20, b"MThd\x00\x00\x00\x02\x00\x00"])
def test_bad_header(data):
    with pytest.raises(MalformedHeader):
        parse_smf(data)


def test_truncated_track():
    data = smf([[(0, note_on(0, 60, 64)), (480, note_off(0, 60))]])
    with pytest.raises(TruncatedTrack):
        parse_smf(data[:-3])


def test_running_status_and_skipped_events():
    events = [
        (0, bytes([0xC0, 5])),  # program change, skipped
        (0, b"\xff\x01\x03abc"),  # text meta, skipped
        (0, b"\xf0\x03\x01\x02\xf7"),  # sysex, skipped
        (0, note_on(0, 60, 90)),
        (10, note_on(0, 64, 80)),
        (480, note_on(0, 60, 0)),
        (480, note_on(0, 64, 0)),
        (480, bytes([0xE0, 0, 64])),  # pitch bend, skipped
    ]
    plain = smf([events])
    packed = smf([events], running_status=True)
    assert len(packed) < len(plain)
    ours = extract_notes(parse_smf(packed))
    assert [(n.pitch, n.velocity) for n in ours] == [(60, 90), (64, 80)]
    assert ours == extract_notes(parse_smf(plain))
    ref = mido_notes(packed)
    assert [(n.pitch, n.velocity) for n in ours] == [r[2:4] for r in ref]
    assert [n.onset_s for n in ours] == pytest.approx([r[0] for r in ref])
    assert [n.duration_s for n in ours] == pytest.approx([r[1] for r in ref])


def test_unknown_chunk_skipped():
    data = smf([[(0, note_on(0, 60, 64)), (480, note_off(0, 60))]])
    alien = b"XFIH" + (4).to_bytes(4, "big") + b"abcd"
    notes = extract_notes(parse_smf(data[:14] + alien + data[14:]))
    assert len(notes) == 1


def test_tempo_map_default():
    f = parse_smf(smf([[(0, note_on(0, 60, 1))]]))
    assert build_tempo_map(f).entries == ((0, 500000),)


def test_tempo_map_sorted_across_tracks():
    f = parse_smf(smf([[(960, tempo(300000))], [(0, tempo(600000))]]))
    assert build_tempo_map(f).entries == ((0, 600000), (960, 300000))


def test_tempo_map_same_tick_later_wins():
    f = parse_smf(smf([[(0, tempo(600000)), (0, tempo(400000))]]))
    assert build_tempo_map(f).entries == ((0, 400000),)


def test_tick_to_seconds_examples():
    tm = TempoMap(((0, 500000),), 480)
    assert tick_to_seconds(tm, 0) == 0.0
    assert tick_to_seconds(tm, 960) == 1.0
    two = TempoMap(((0, 500000), (480, 250000)), 480)
    assert tick_to_seconds(two, 960) == 0.75


@given(
    st.lists(st.tuples(st.integers(1, 5000), st.integers(1, 2_000_000)), max_size=6),
    st.integers(1, 960),
    st.integers(0, 40000),
    st.integers(0, 40000),
)
def test_tick_to_seconds_monotone_and_piecewise_linear(changes, ppq, a, b):
    entries = {0: 500000}
    tick = 0
    for gap, t in changes:
        tick += gap
        entries[tick] = t
    tm = TempoMap(tuple(sorted(entries.items())), ppq)
    lo, hi = sorted((a, b))
    assert tm.seconds(lo) <= tm.seconds(hi)
    # linear inside the segment containing lo
    ticks = sorted(entries)
    seg = max(t for t in ticks if t <= lo)
    nxt = min((t for t in ticks if t > lo), default=lo + 100)
    mid = (lo + nxt) // 2
    if seg <= lo < mid < nxt:
        rate = entries[seg] / (ppq * 1e6)
        assert tm.seconds(mid) - tm.seconds(lo) == pytest.approx((mid - lo) * rate, rel=1e-9, abs=1e-12)


def test_fifo_pairing_overlapping_same_pitch():
    f = parse_smf(smf([[(0, note_on(0, 60, 10)), (100, note_on(0, 60, 20)), (200, note_off(0, 60)), (300, note_off(0, 60))]]))
    notes = extract_notes(f)
    assert [n.velocity for n in notes] == [10, 20]
    assert [n.onset_s for n in notes] == pytest.approx([0.0, 100 / 960])
    assert [n.duration_s for n in notes] == pytest.approx([200 / 960, 200 / 960])


def test_unterminated_note_closed_at_end_of_track():
    f = parse_smf(smf([[(0, note_on(0, 60, 10)), (960, cc(0, 64, 0))]]))
    notes, diag = extract_notes_with_diagnostics(f)
    assert diag.unterminated == 1
    assert notes[0].duration_s == 1.0


def test_orphan_note_off_counted():
    f = parse_smf(smf([[(0, note_off(0, 60)), (10, note_on(0, 62, 5)), (20, note_off(0, 62))]]))
    notes, diag = extract_notes_with_diagnostics(f)
    assert len(notes) == 1 and diag.orphan_note_offs == 1


def test_channels_paired_independently():
    events = [
        (0, note_on(0, 60, 10)),
        (0, note_on(1, 60, 20)),
        (100, note_off(1, 60)),
        (300, note_off(0, 60)),
    ]
    data = smf([events])
    ours = extract_notes(parse_smf(data))
    assert {(n.channel, n.duration_s) for n in ours} == {(0, 300 / 960), (1, 100 / 960)}
    ref = mido_notes(data)
    assert {(r[4], round(r[1], 9)) for r in ref} == {(n.channel, round(n.duration_s, 9)) for n in ours}


def test_matches_mido_on_synthetic_performance():
    import numpy as np

    from synth import make_score, perf_midi, perform

    rng = np.random.default_rng(3)
    data = perf_midi(perform(rng, make_score(rng, 24), 0.45))
    ours = extract_notes(parse_smf(data))
    ref = mido_notes(data)
    assert len(ours) == len(ref)
    for n, r in zip(ours, ref):
        assert (n.onset_s, n.duration_s) == pytest.approx(r[:2], abs=1e-9)
        assert (n.pitch, n.velocity, n.channel) == (r[2], r[3], r[4])


def test_multitrack_tempo_applies_to_all_tracks():
    data = smf([[(0, tempo(1_000_000)), (0, time_sig(3, 2))], [(0, note_on(0, 60, 50)), (480, note_off(0, 60))]])
    f = parse_smf(data)
    assert f.time_signatures == [(0, 3, 4)]
    (n,) = extract_notes(f)
    assert n.duration_s == 1.0 and n.track == 1
    assert mido_notes(data)[0][1] == pytest.approx(1.0)


def test_score_notes_in_beats():
    f = parse_smf(smf([[(0, tempo(1_000_000)), (240, note_on(0, 62, 50)), (960, note_off(0, 62))]]))
    (n,) = extract_score_notes(f)
    assert (n.onset_beats, n.duration_beats) == (0.5, 1.5)


def test_pedal_extraction():
    events = [(0, cc(0, 64, 127)), (240, cc(0, 67, 100)), (480, cc(0, 64, 0))]
    f = parse_smf(smf([events]))
    assert [(e.time_s, e.value) for e in extract_pedal(f)] == [(0.0, 127), (0.5, 0)]
    assert [e.value for e in extract_pedal(f, controller=67)] == [100]
    assert extract_pedal(parse_smf(smf([[(0, note_on(0, 1, 1))]]))) == []


@settings(max_examples=300)
@given(st.binary(max_size=200))
def test_arbitrary_track_bytes_parse_or_typed_error(body):
    data = smf([])[:14] + b"MTrk" + len(body).to_bytes(4, "big") + body
    data = data[:10] + (1).to_bytes(2, "big") + data[12:]
    try:
        f = parse_smf(data)
    except MidiError:
        return
    notes = extract_notes(f)
    assert notes == sorted(notes, key=lambda n: (n.onset_s, n.pitch, n.channel, n.track))
    assert all(n.duration_s >= 0 and n.velocity >= 1 for n in notes)
