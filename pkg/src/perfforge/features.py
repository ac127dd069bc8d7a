"""Feature registry: what each feature needs and how it renders its CSV.

A feature reads named inputs (raw files of the piece and upstream feature
outputs) and returns the full text of its output CSV. Runners are pure
functions of their inputs and parameters; the engine does all file writing.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional

from .alignment import DELETION, INSERTION, MATCHED, AlignedNote, AlignmentParams, align
from .audio import load_wav
from .beats import BeatParams, find_beats
from .config import ParamSet
from .dynamics import pedal_series, velocity_series
from .loudness import LoudnessParams, loudness_series
from .midi import extract_notes, extract_pedal, extract_score_notes, read_midi
from .tension import TensionParams, tension_series

PERFORMANCE, SCORE, AUDIO = "performance", "score", "audio"


@dataclass(frozen=True)
class Feature:
    name: str
    requires: tuple[str, ...]
    upstream: tuple[str, ...]
    param_section: str
    param_keys: Optional[tuple[str, ...]]
    compute: Callable[[Mapping[str, Path], ParamSet], str]

    @property
    def input_roles(self) -> tuple[str, ...]:
        return self.requires + self.upstream


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def alignment_csv(aligned) -> str:
    def blank(v, fmt=str):
        return "" if v is None else fmt(v)

    rows = (
        (a.score_note_id, a.pitch, blank(a.score_beats, _fmt), blank(a.perf_time_s, _fmt), blank(a.velocity), a.status)
        for a in aligned
    )
    return _csv(("score_id", "pitch", "score_beats", "perf_time", "velocity", "status"), rows)


def read_alignment_csv(text: str) -> list[AlignedNote]:
    def opt(v, cast):
        return None if v == "" else cast(v)

    out = []
    for row in csv.DictReader(io.StringIO(text)):
        status = row["status"]
        if status not in (MATCHED, DELETION, INSERTION):
            raise ValueError(f"unknown alignment status {status!r}")
        out.append(
            AlignedNote(
                int(row["score_id"]),
                int(row["pitch"]),
                opt(row["score_beats"], float),
                opt(row["perf_time"], float),
                opt(row["velocity"], int),
                status,
            )
        )
    return out


def _velocity(inputs, params):
    notes = extract_notes(read_midi(inputs[PERFORMANCE]))
    return _csv(("time", "pitch", "velocity"), ((_fmt(r.time_s), r.pitch, r.velocity) for r in velocity_series(notes)))


def _pedal(inputs, params):
    events = extract_pedal(read_midi(inputs[PERFORMANCE]))
    records = pedal_series(events, params["dynamics"]["pedal_threshold"])
    return _csv(("time", "value", "engaged"), ((_fmt(r.time_s), r.value, int(r.engaged)) for r in records))


def _tension(inputs, params):
    notes = extract_notes(read_midi(inputs[PERFORMANCE]))
    frames = tension_series(notes, TensionParams(**params.options("tension")))
    rows = ((_fmt(f.time_s), _fmt(f.diameter), _fmt(f.momentum), _fmt(f.strain)) for f in frames)
    return _csv(("time", "diameter", "momentum", "strain"), rows)


def _loudness(inputs, params):
    frames = loudness_series(load_wav(inputs[AUDIO]), LoudnessParams(**params.options("loudness")))
    return _csv(("time", "loudness"), ((_fmt(f.time_s), _fmt(f.total_sone)) for f in frames))


def _alignment(inputs, params):
    score = extract_score_notes(read_midi(inputs[SCORE]))
    perf = extract_notes(read_midi(inputs[PERFORMANCE]))
    return alignment_csv(align(score, perf, AlignmentParams(**params.options("alignment"))))


def _beats(inputs, params):
    aligned = read_alignment_csv(Path(inputs["alignment"]).read_text(encoding="utf-8"))
    beats = find_beats(read_midi(inputs[SCORE]), aligned, BeatParams(**params.options("beats")))
    rows = (
        (b.index, _fmt(b.score_beats), _fmt(b.perf_time_s), "" if b.local_bpm is None else _fmt(b.local_bpm), int(b.interpolated))
        for b in beats
    )
    return _csv(("index", "score_beats", "perf_time", "local_bpm", "interpolated"), rows)


FEATURES: dict[str, Feature] = {
    f.name: f
    for f in (
        Feature("velocity", (PERFORMANCE,), (), "dynamics", ("method",), _velocity),
        Feature("pedal", (PERFORMANCE,), (), "dynamics", ("method", "pedal_threshold"), _pedal),
        Feature("tension", (PERFORMANCE,), (), "tension", None, _tension),
        Feature("loudness", (AUDIO,), (), "loudness", None, _loudness),
        Feature("alignment", (PERFORMANCE, SCORE), (), "alignment", None, _alignment),
        Feature("beats", (SCORE,), ("alignment",), "beats", None, _beats),
    )
}
