"""Standard MIDI File reading: events, tempo map, notes and pedal events.

Only what the feature modules need is decoded. Note on/off, control change,
set-tempo, time signature and end-of-track are kept; every other event is
skipped while still advancing the running-status state correctly.
"""

from __future__ import annotations

import bisect
import logging
import struct
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import MalformedHeader, MalformedTrack, TruncatedTrack, UnsupportedFormat

log = logging.getLogger(__name__)

DEFAULT_TEMPO = 500_000  # µs per quarter note
SUSTAIN = 64

NOTE_OFF = "note_off"
NOTE_ON = "note_on"
CONTROL_CHANGE = "control_change"
SET_TEMPO = "set_tempo"
TIME_SIGNATURE = "time_signature"
END_OF_TRACK = "end_of_track"


class MidiEvent(NamedTuple):
    """One decoded event at an absolute tick.

    ``data1``/``data2`` hold the two data bytes of channel messages (pitch and
    velocity, controller and value). For set-tempo ``data1`` is the tempo in
    µs per quarter; for time signatures ``data1``/``data2`` are numerator and
    denominator.
    """

    tick: int
    kind: str
    channel: int = 0
    data1: int = 0
    data2: int = 0


@dataclass(frozen=True)
class MidiFile:
    format: int
    ppq: int
    tracks: list[list[MidiEvent]] = field(default_factory=list)
    time_signatures: list[tuple[int, int, int]] = field(default_factory=list)


@dataclass(frozen=True)
class MidiNote:
    onset_s: float
    duration_s: float
    pitch: int
    velocity: int
    channel: int = 0
    track: int = 0

    @property
    def onset(self) -> float:
        return self.onset_s

    @property
    def offset_s(self) -> float:
        return self.onset_s + self.duration_s


@dataclass(frozen=True)
class ScoreNote:
    """A note positioned in quarter-note beats (ticks / ppq)."""

    onset_beats: float
    duration_beats: float
    pitch: int
    velocity: int
    channel: int = 0
    track: int = 0

    @property
    def onset(self) -> float:
        return self.onset_beats


@dataclass(frozen=True)
class PedalEvent:
    time_s: float
    value: int
    controller: int = SUSTAIN


@dataclass
class NoteDiagnostics:
    unterminated: int = 0
    orphan_note_offs: int = 0


# parsing


def _read_vlq(data: bytes, pos: int, end: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= end:
            raise TruncatedTrack("track ends inside a variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MalformedTrack("variable-length quantity longer than 4 bytes")


def _parse_track(data: bytes, pos: int, end: int) -> list[MidiEvent]:
    events: list[MidiEvent] = []
    append = events.append
    tick = 0
    running = None
    while pos < end:
        delta, pos = _read_vlq(data, pos, end)
        tick += delta
        if pos >= end:
            raise TruncatedTrack("track ends after a delta time")
        status = data[pos]
        if status < 0x80:
            if running is None:
                raise MalformedTrack(f"data byte 0x{status:02x} without running status")
            status = running
        else:
            pos += 1

        if status == 0xFF:
            running = None
            if pos >= end:
                raise TruncatedTrack("track ends inside a meta event")
            meta_type = data[pos]
            length, pos = _read_vlq(data, pos + 1, end)
            if pos + length > end:
                raise TruncatedTrack("meta event payload runs past the track end")
            payload = data[pos : pos + length]
            pos += length
            if meta_type == 0x2F:
                break
            if meta_type == 0x51 and length == 3:
                tempo = (payload[0] << 16) | (payload[1] << 8) | payload[2]
                if tempo > 0:
                    append(MidiEvent(tick, SET_TEMPO, 0, tempo))
            elif meta_type == 0x58 and length >= 2 and payload[0] > 0 and payload[1] < 16:
                append(MidiEvent(tick, TIME_SIGNATURE, 0, payload[0], 1 << payload[1]))
        elif status == 0xF0 or status == 0xF7:
            running = None
            length, pos = _read_vlq(data, pos, end)
            if pos + length > end:
                raise TruncatedTrack("sysex payload runs past the track end")
            pos += length
        elif status > 0xF0:
            raise MalformedTrack(f"status 0x{status:02x} is not allowed in a MIDI file")
        else:
            kind = status & 0xF0
            nbytes = 1 if kind == 0xC0 or kind == 0xD0 else 2
            if pos + nbytes > end:
                raise TruncatedTrack("track ends inside a channel message")
            d1 = data[pos]
            d2 = data[pos + 1] if nbytes == 2 else 0
            if d1 & 0x80 or d2 & 0x80:
                raise MalformedTrack("channel message data byte has the high bit set")
            pos += nbytes
            running = status
            if kind == 0x90:
                append(MidiEvent(tick, NOTE_ON, status & 0x0F, d1, d2))
            elif kind == 0x80:
                append(MidiEvent(tick, NOTE_OFF, status & 0x0F, d1, d2))
            elif kind == 0xB0:
                append(MidiEvent(tick, CONTROL_CHANGE, status & 0x0F, d1, d2))
    append(MidiEvent(tick, END_OF_TRACK))
    return events


def parse_smf(data: bytes) -> MidiFile:
    """Decode a format 0 or 1 SMF with PPQ time division.

    Raises a :class:`~perfforge.errors.MidiError` subclass for anything that
    is not a readable file; never any other exception type.
    """
    data = bytes(data)
    if len(data) < 14 or data[:4] != b"MThd":
        raise MalformedHeader("missing MThd chunk")
    header_len = int.from_bytes(data[4:8], "big")
    if header_len < 6 or 8 + header_len > len(data):
        raise MalformedHeader(f"bad header length {header_len}")
    fmt, _ntracks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise UnsupportedFormat(f"SMF format {fmt} is not supported")
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if division == 0:
        raise MalformedHeader("ticks per quarter note is zero")

    tracks = []
    pos = 8 + header_len
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        length = int.from_bytes(data[pos + 4 : pos + 8], "big")
        start, stop = pos + 8, pos + 8 + length
        if chunk_id == b"MTrk":
            if stop > len(data):
                raise TruncatedTrack(f"track {len(tracks)} is cut short")
            tracks.append(_parse_track(data, start, stop))
        elif stop > len(data):
            break
        pos = stop

    signatures = sorted(
        ((ev.tick, ev.data1, ev.data2) for track in tracks for ev in track if ev.kind == TIME_SIGNATURE),
        key=lambda s: s[0],
    )
    return MidiFile(format=fmt, ppq=division, tracks=tracks, time_signatures=signatures)


def read_midi(path) -> MidiFile:
    with open(path, "rb") as fh:
        return parse_smf(fh.read())


# tempo


@dataclass(frozen=True)
class TempoMap:
    entries: tuple[tuple[int, int], ...]
    ppq: int
    _ticks: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _offsets: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.entries or self.entries[0][0] != 0:
            raise ValueError("tempo map must start at tick 0")
        ticks = tuple(t for t, _ in self.entries)
        offsets = [0.0]
        for (t0, tempo), t1 in zip(self.entries, ticks[1:]):
            offsets.append(offsets[-1] + (t1 - t0) * tempo / (self.ppq * 1_000_000))
        object.__setattr__(self, "_ticks", ticks)
        object.__setattr__(self, "_offsets", tuple(offsets))

    def seconds(self, tick: int) -> float:
        i = bisect.bisect_right(self._ticks, tick) - 1
        t0, tempo = self.entries[i]
        return self._offsets[i] + (tick - t0) * tempo / (self.ppq * 1_000_000)


def build_tempo_map(file: MidiFile) -> TempoMap:
    by_tick: dict[int, int] = {}
    # file order is track order then byte order; later assignments win ties
    changes = [ev for track in file.tracks for ev in track if ev.kind == SET_TEMPO]
    for ev in sorted(changes, key=lambda e: e.tick):
        by_tick[ev.tick] = ev.data1
    by_tick.setdefault(0, DEFAULT_TEMPO)
    return TempoMap(tuple(sorted(by_tick.items())), file.ppq)


def tick_to_seconds(tempo_map: TempoMap, tick: int) -> float:
    if tick < 0:
        raise ValueError("tick must be non-negative")
    return tempo_map.seconds(tick)


# notes


class _RawNote(NamedTuple):
    on_tick: int
    off_tick: int
    pitch: int
    velocity: int
    channel: int
    track: int


def _pair_notes(file: MidiFile) -> tuple[list[_RawNote], NoteDiagnostics]:
    diag = NoteDiagnostics()
    notes: list[_RawNote] = []
    for track_no, track in enumerate(file.tracks):
        sounding: dict[tuple[int, int], deque] = defaultdict(deque)
        for ev in track:
            if ev.kind == NOTE_ON and ev.data2 > 0:
                sounding[ev.channel, ev.data1].append((ev.tick, ev.data2))
            elif ev.kind == NOTE_OFF or ev.kind == NOTE_ON:
                queue = sounding.get((ev.channel, ev.data1))
                if queue:
                    on_tick, velocity = queue.popleft()
                    notes.append(_RawNote(on_tick, ev.tick, ev.data1, velocity, ev.channel, track_no))
                else:
                    diag.orphan_note_offs += 1
        end_tick = track[-1].tick if track else 0
        for (channel, pitch), queue in sounding.items():
            for on_tick, velocity in queue:
                diag.unterminated += 1
                notes.append(_RawNote(on_tick, end_tick, pitch, velocity, channel, track_no))
    return notes, diag


def extract_notes_with_diagnostics(file: MidiFile) -> tuple[list[MidiNote], NoteDiagnostics]:
    raw, diag = _pair_notes(file)
    tempo = build_tempo_map(file)
    notes = []
    for n in raw:
        onset = tempo.seconds(n.on_tick)
        notes.append(MidiNote(onset, tempo.seconds(n.off_tick) - onset, n.pitch, n.velocity, n.channel, n.track))
    notes.sort(key=lambda n: (n.onset_s, n.pitch, n.channel, n.track))
    return notes, diag


def extract_notes(file: MidiFile) -> list[MidiNote]:
    notes, diag = extract_notes_with_diagnostics(file)
    if diag.unterminated:
        log.warning("%d note(s) never released; closed at end of track", diag.unterminated)
    if diag.orphan_note_offs:
        log.info("%d note-off event(s) without a sounding note ignored", diag.orphan_note_offs)
    return notes


def extract_score_notes(file: MidiFile) -> list[ScoreNote]:
    """Notes in quarter-note beats, ignoring the file's tempo events."""
    raw, _ = _pair_notes(file)
    raw.sort(key=lambda n: (n.on_tick, n.pitch, n.channel, n.track))
    ppq = file.ppq
    return [
        ScoreNote(n.on_tick / ppq, (n.off_tick - n.on_tick) / ppq, n.pitch, n.velocity, n.channel, n.track)
        for n in raw
    ]


def extract_pedal(file: MidiFile, controller: int = SUSTAIN) -> list[PedalEvent]:
    tempo = build_tempo_map(file)
    ticked = [
        (ev.tick, ev.data2)
        for track in file.tracks
        for ev in track
        if ev.kind == CONTROL_CHANGE and ev.data1 == controller
    ]
    ticked.sort(key=lambda e: e[0])
    return [PedalEvent(tempo.seconds(tick), value, controller) for tick, value in ticked]
