"""Incremental task engine.

Pieces are discovered from a flat dataset directory, turned into one task
per feature whose inputs exist, and executed when stale. Staleness is judged
against a JSON manifest of SHA-256 digests of each task's inputs, parameters
and outputs, recorded only after the task succeeded.
"""

from __future__ import annotations

import enum
import graphlib
import hashlib
import json
import logging
import os
import tempfile
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .config import ParamSet, param_digest
from .errors import CycleDetected, DatasetNotFound, UnknownTarget
from .features import AUDIO, FEATURES, PERFORMANCE, SCORE, Feature

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
STATE_DIR = ".perfforge"
STATE_FILE = "state.json"
SCORE_SUFFIX = "_score"

class Reason(str, enum.Enum):
    UP_TO_DATE = "up-to-date"
    NO_STATE = "no-state"
    INPUT_MISSING = "input-missing"
    INPUT_CHANGED = "input-changed"
    PARAMS_CHANGED = "params-changed"
    OUTPUT_MISSING = "output-missing"
    OUTPUT_CHANGED = "output-changed"
    DEPENDENCY_STALE = "dependency-stale"


class Outcome(str, enum.Enum):
    RAN = "ran"
    UP_TO_DATE = "up-to-date"
    SKIPPED_FAILED_DEP = "skipped-failed-dep"
    FAILED = "failed"
    WOULD_RUN = "would-run"


# discovery


@dataclass(frozen=True)
class PieceBundle:
    piece_id: str
    performance_midi: Path
    score_midi: Optional[Path] = None
    audio_wav: Optional[Path] = None

    def source(self, kind: str) -> Optional[Path]:
        return {PERFORMANCE: self.performance_midi, SCORE: self.score_midi, AUDIO: self.audio_wav}[kind]


def discover_pieces(dataset_root) -> list[PieceBundle]:
    root = Path(dataset_root)
    if not root.is_dir():
        raise DatasetNotFound(f"dataset directory {root} does not exist")
    perf, score, audio = {}, {}, {}
    for entry in root.iterdir():
        if not entry.is_file():
            continue
        stem, suffix = entry.stem, entry.suffix
        if suffix == ".mid":
            if stem.endswith(SCORE_SUFFIX):
                score[stem[: -len(SCORE_SUFFIX)]] = entry
            else:
                perf[stem] = entry
        elif suffix == ".wav":
            audio[stem] = entry
    return [PieceBundle(pid, perf[pid], score.get(pid), audio.get(pid)) for pid in sorted(perf)]


# planning


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    feature: str
    piece_id: str
    inputs: tuple[Path, ...]
    input_roles: tuple[str, ...]
    outputs: tuple[Path, ...]
    depends_on: tuple[str, ...]
    param_section: str
    param_digest: str

    @property
    def sort_key(self):
        return (self.piece_id, self.feature)


def task_id(feature: str, piece_id: str) -> str:
    return f"{feature}:{piece_id}"


def output_path(bundle: PieceBundle, feature: str) -> Path:
    return bundle.performance_midi.parent / f"{bundle.piece_id}_{feature}.csv"


@dataclass
class TaskGraph:
    root: Path
    tasks: dict[str, TaskSpec]
    params: ParamSet
    pieces: tuple[str, ...] = ()

    def __iter__(self):
        return iter(self.tasks.values())

    def __len__(self):
        return len(self.tasks)

    def order(self) -> list[str]:
        """Topological order, ties broken by (piece, feature)."""
        sorter = graphlib.TopologicalSorter({tid: t.depends_on for tid, t in self.tasks.items()})
        try:
            sorter.prepare()
        except graphlib.CycleError as exc:
            raise CycleDetected(f"dependency cycle: {exc.args[1]}") from None
        out = []
        while sorter.is_active():
            ready = sorted(sorter.get_ready(), key=lambda tid: self.tasks[tid].sort_key)
            out.extend(ready)
            sorter.done(*ready)
        return out

    def select(self, targets: Optional[Iterable[str]]) -> set[str]:
        """Resolve ``feature``, ``piece`` or ``feature:piece`` names; ``None`` selects all."""
        if targets is None:
            return set(self.tasks)
        chosen: set[str] = set()
        for target in targets:
            if ":" in target:
                if target not in self.tasks:
                    raise UnknownTarget(f"no planned task {target!r}")
                chosen.add(target)
            elif target in FEATURES:
                chosen.update(tid for tid, t in self.tasks.items() if t.feature == target)
            elif target in self.pieces:
                chosen.update(tid for tid, t in self.tasks.items() if t.piece_id == target)
            else:
                raise UnknownTarget(f"{target!r} is neither a feature nor a piece in this dataset")
        return chosen

    def closure(self, selected: Iterable[str]) -> set[str]:
        seen: set[str] = set()
        stack = list(selected)
        while stack:
            tid = stack.pop()
            if tid in seen:
                continue
            seen.add(tid)
            stack.extend(self.tasks[tid].depends_on)
        return seen

    def dependents(self, tid: str) -> set[str]:
        reverse: dict[str, list[str]] = {}
        for t in self.tasks.values():
            for dep in t.depends_on:
                reverse.setdefault(dep, []).append(t.task_id)
        seen: set[str] = set()
        stack = list(reverse.get(tid, ()))
        while stack:
            cur = stack.pop()
            if cur not in seen:
                seen.add(cur)
                stack.extend(reverse.get(cur, ()))
        return seen


def plan(
    bundles: Sequence[PieceBundle],
    params: ParamSet,
    registry: Mapping[str, Feature] = FEATURES,
    root: Optional[Path] = None,
) -> TaskGraph:
    """One task per (piece, feature) whose raw inputs exist and upstream features are planned."""
    digests = {
        name: param_digest(params, feat.param_section, feat.param_keys) for name, feat in registry.items()
    }
    try:
        feature_order = list(graphlib.TopologicalSorter({n: f.upstream for n, f in registry.items()}).static_order())
    except graphlib.CycleError as exc:
        raise CycleDetected(f"feature dependency cycle: {exc.args[1]}") from None
    tasks: dict[str, TaskSpec] = {}
    for bundle in bundles:
        planned: dict[str, TaskSpec] = {}
        for name in feature_order:
            feat = registry.get(name)
            if feat is None or not all(up in planned for up in feat.upstream):
                continue
            sources = [bundle.source(kind) for kind in feat.requires]
            if any(s is None for s in sources):
                continue
            planned[name] = TaskSpec(
                task_id=task_id(name, bundle.piece_id),
                feature=name,
                piece_id=bundle.piece_id,
                inputs=tuple(sources) + tuple(planned[up].outputs[0] for up in feat.upstream),
                input_roles=feat.input_roles,
                outputs=(output_path(bundle, name),),
                depends_on=tuple(planned[up].task_id for up in feat.upstream),
                param_section=feat.param_section,
                param_digest=digests[name],
            )
        for name in registry:
            if name in planned:
                tasks[planned[name].task_id] = planned[name]
    if root is None:
        root = bundles[0].performance_midi.parent if bundles else Path(".")
    graph = TaskGraph(Path(root), tasks, params, tuple(b.piece_id for b in bundles))
    graph.order()
    return graph


# manifest


@dataclass
class TaskState:
    input_digests: dict[str, str]
    param_digest: str
    output_digests: dict[str, str]
    last_success: str

    def to_json(self) -> dict:
        return {
            "inputs": dict(sorted(self.input_digests.items())),
            "params": self.param_digest,
            "outputs": dict(sorted(self.output_digests.items())),
            "last_success": self.last_success,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TaskState":
        return cls(dict(obj["inputs"]), str(obj["params"]), dict(obj["outputs"]), str(obj["last_success"]))


@dataclass
class Manifest:
    version: int = MANIFEST_VERSION
    states: dict[str, TaskState] = field(default_factory=dict)

    def to_json(self) -> str:
        body = {"version": self.version, "states": {tid: s.to_json() for tid, s in sorted(self.states.items())}}
        return json.dumps(body, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        obj = json.loads(text)
        if obj.get("version") != MANIFEST_VERSION:
            raise ValueError(f"manifest version {obj.get('version')!r} is not {MANIFEST_VERSION}")
        return cls(MANIFEST_VERSION, {tid: TaskState.from_json(s) for tid, s in obj["states"].items()})


def manifest_path(dataset_root) -> Path:
    return Path(dataset_root) / STATE_DIR / STATE_FILE


def load_manifest(path) -> Manifest:
    """Read a manifest; a missing or unreadable one is empty (everything re-runs)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        return Manifest()
    try:
        return Manifest.from_json(text)
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        log.warning("ignoring unreadable manifest %s: %s", path, exc)
        return Manifest()


def write_atomic(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def save_manifest(manifest: Manifest, path, keep: Optional[Iterable[str]] = None) -> None:
    """Persist atomically; states for task ids outside ``keep`` are pruned."""
    if keep is not None:
        keep = set(keep)
        manifest.states = {tid: s for tid, s in manifest.states.items() if tid in keep}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_atomic(path, manifest.to_json().encode("utf-8"))


# staleness


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class DigestCache:
    """Per-run memo of file digests; the engine invalidates paths it rewrites."""

    def __init__(self):
        self._cache: dict[Path, Optional[str]] = {}

    def get(self, path) -> Optional[str]:
        path = Path(path)
        if path not in self._cache:
            try:
                self._cache[path] = file_digest(path)
            except FileNotFoundError:
                self._cache[path] = None
        return self._cache[path]

    def invalidate(self, path) -> None:
        self._cache.pop(Path(path), None)


def _rel(root: Path, path: Path) -> str:
    try:
        return path.relative_to(root).as_posix()
    except ValueError:
        return path.as_posix()


def _own_staleness(task: TaskSpec, state: Optional[TaskState], root: Path, digests: DigestCache) -> Reason:
    if state is None:
        return Reason.NO_STATE
    if any(digests.get(p) is None for p in task.inputs):
        return Reason.INPUT_MISSING
    current = {_rel(root, p): digests.get(p) for p in task.inputs}
    if current != state.input_digests:
        return Reason.INPUT_CHANGED
    if task.param_digest != state.param_digest:
        return Reason.PARAMS_CHANGED
    if any(digests.get(p) is None for p in task.outputs):
        return Reason.OUTPUT_MISSING
    if {_rel(root, p): digests.get(p) for p in task.outputs} != state.output_digests:
        return Reason.OUTPUT_CHANGED
    return Reason.UP_TO_DATE


def is_stale(
    task: TaskSpec,
    manifest: Manifest,
    graph: TaskGraph,
    digests: Optional[DigestCache] = None,
    _memo: Optional[dict] = None,
) -> tuple[bool, Reason]:
    """Whether a task must run, with the first trigger found.

    Triggers are checked in order: no recorded state, input missing or
    changed, parameters changed, output missing or changed, then any
    (transitively) stale dependency.
    """
    digests = digests or DigestCache()
    memo = {} if _memo is None else _memo
    if task.task_id in memo:
        return memo[task.task_id]
    reason = _own_staleness(task, manifest.states.get(task.task_id), graph.root, digests)
    if reason is Reason.UP_TO_DATE:
        for dep in task.depends_on:
            if is_stale(graph.tasks[dep], manifest, graph, digests, memo)[0]:
                reason = Reason.DEPENDENCY_STALE
                break
    memo[task.task_id] = result = (reason is not Reason.UP_TO_DATE, reason)
    return result


def staleness(graph: TaskGraph, manifest: Manifest, task_ids=None, digests=None) -> dict[str, tuple[bool, Reason]]:
    digests = digests or DigestCache()
    memo: dict = {}
    ids = graph.tasks if task_ids is None else task_ids
    return {tid: is_stale(graph.tasks[tid], manifest, graph, digests, memo) for tid in ids}


# execution


@dataclass
class TaskOutcome:
    task_id: str
    piece_id: str
    feature: str
    outcome: Outcome
    reason: Reason
    error: Optional[str] = None
    seconds: float = 0.0


@dataclass
class RunReport:
    outcomes: list[TaskOutcome] = field(default_factory=list)
    dry_run: bool = False

    def sort(self) -> None:
        self.outcomes.sort(key=lambda o: (o.piece_id, o.feature))

    def count(self, outcome: Outcome) -> int:
        return sum(1 for o in self.outcomes if o.outcome is outcome)

    @property
    def counts(self) -> dict[str, int]:
        return {o.value: self.count(o) for o in Outcome}

    @property
    def ran(self) -> list[str]:
        return [o.task_id for o in self.outcomes if o.outcome is Outcome.RAN]

    @property
    def failed(self) -> list[str]:
        return [o.task_id for o in self.outcomes if o.outcome is Outcome.FAILED]

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0

    def by_id(self) -> dict[str, TaskOutcome]:
        return {o.task_id: o for o in self.outcomes}


def run_task(feature: str, inputs: Mapping[str, str], outputs: Sequence[str], params: ParamSet) -> None:
    """Compute one feature and commit its output; runs in worker processes too."""
    text = FEATURES[feature].compute({role: Path(p) for role, p in inputs.items()}, params)
    for out in outputs:
        write_atomic(out, text.encode("utf-8"))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def execute(
    graph: TaskGraph,
    manifest: Manifest,
    targets: Optional[Iterable[str]] = None,
    jobs: int = 1,
    dry_run: bool = False,
    state_path: Optional[Path] = None,
    on_event: Optional[Callable[[str, str], None]] = None,
) -> RunReport:
    """Run the stale part of the target closure in dependency order.

    ``on_event(kind, task_id)`` is called with ``"committed"`` once a task's
    outputs are on disk and with ``"recorded"`` once its state is persisted.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    state_path = Path(state_path) if state_path else manifest_path(graph.root)
    graph.order()
    wanted = graph.closure(graph.select(targets))
    digests = DigestCache()
    stale = staleness(graph, manifest, sorted(wanted), digests)

    report = RunReport(dry_run=dry_run)
    to_run = {tid for tid in wanted if stale[tid][0]}
    for tid in wanted - to_run:
        t = graph.tasks[tid]
        report.outcomes.append(TaskOutcome(tid, t.piece_id, t.feature, Outcome.UP_TO_DATE, Reason.UP_TO_DATE))
    if dry_run:
        for tid in to_run:
            t = graph.tasks[tid]
            report.outcomes.append(TaskOutcome(tid, t.piece_id, t.feature, Outcome.WOULD_RUN, stale[tid][1]))
        report.sort()
        return report

    sorter = graphlib.TopologicalSorter({tid: [d for d in graph.tasks[tid].depends_on if d in to_run] for tid in to_run})
    sorter.prepare()
    broken: set[str] = set()
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 and len(to_run) > 1 else None
    running: dict = {}

    def emit(kind: str, tid: str) -> None:
        if on_event is not None:
            on_event(kind, tid)

    def start(tid: str):
        t = graph.tasks[tid]
        input_digests = {_rel(graph.root, p): digests.get(p) for p in t.inputs}
        if any(d is None for d in input_digests.values()):
            missing = [p for p, d in input_digests.items() if d is None]
            raise FileNotFoundError(f"missing input(s): {', '.join(missing)}")
        args = (t.feature, {r: str(p) for r, p in zip(t.input_roles, t.inputs)}, [str(p) for p in t.outputs], graph.params)
        return input_digests, args

    def finish(tid: str, input_digests, began: float, error: Optional[BaseException]) -> None:
        t = graph.tasks[tid]
        elapsed = time.perf_counter() - began
        for p in t.outputs:
            digests.invalidate(p)
        if error is not None:
            log.error("%s failed: %s", tid, error)
            log.debug("%s failure details", tid, exc_info=error)
            broken.add(tid)
            report.outcomes.append(
                TaskOutcome(tid, t.piece_id, t.feature, Outcome.FAILED, stale[tid][1], f"{type(error).__name__}: {error}", elapsed)
            )
            return
        emit("committed", tid)
        manifest.states[tid] = TaskState(
            input_digests,
            t.param_digest,
            {_rel(graph.root, p): digests.get(p) for p in t.outputs},
            _now(),
        )
        save_manifest(manifest, state_path, keep=graph.tasks)
        emit("recorded", tid)
        log.info("%s ran (%s) in %.2fs", tid, stale[tid][1].value, elapsed)
        report.outcomes.append(TaskOutcome(tid, t.piece_id, t.feature, Outcome.RAN, stale[tid][1], None, elapsed))

    try:
        while sorter.is_active():
            for tid in sorted(sorter.get_ready(), key=lambda i: graph.tasks[i].sort_key):
                t = graph.tasks[tid]
                if any(dep in broken for dep in t.depends_on):
                    broken.add(tid)
                    report.outcomes.append(
                        TaskOutcome(tid, t.piece_id, t.feature, Outcome.SKIPPED_FAILED_DEP, stale[tid][1])
                    )
                    sorter.done(tid)
                    continue
                began = time.perf_counter()
                try:
                    input_digests, args = start(tid)
                except OSError as exc:
                    finish(tid, None, began, exc)
                    sorter.done(tid)
                    continue
                if pool is None:
                    try:
                        run_task(*args)
                    except Exception as exc:
                        finish(tid, input_digests, began, exc)
                    else:
                        finish(tid, input_digests, began, None)
                    sorter.done(tid)
                else:
                    running[pool.submit(run_task, *args)] = (tid, input_digests, began)
            if running:
                done, _ = wait(running, return_when=FIRST_COMPLETED)
                for fut in sorted(done, key=lambda f: graph.tasks[running[f][0]].sort_key):
                    tid, input_digests, began = running.pop(fut)
                    finish(tid, input_digests, began, fut.exception())
                    sorter.done(tid)
    finally:
        if pool is not None:
            pool.shutdown(wait=True, cancel_futures=True)

    report.sort()
    return report


# hygiene


def clean(graph: TaskGraph, selection: Iterable[str]) -> list[Path]:
    removed = []
    for tid in sorted(selection, key=lambda i: graph.tasks[i].sort_key):
        for path in graph.tasks[tid].outputs:
            try:
                path.unlink()
            except FileNotFoundError:
                continue
            removed.append(path)
    return removed


def forget(selection: Iterable[str], manifest: Manifest) -> Manifest:
    drop = set(selection)
    return Manifest(manifest.version, {tid: s for tid, s in manifest.states.items() if tid not in drop})
