"""Step-indexed run datastore with barrier sealing and CSV export.

The store is the shared record of one co-simulation run.  Producers upsert
samples into the currently open step; the orchestrator seals steps in strict
order once every producer has reported.  Sealed frames are immutable, which is
what makes downstream delay analysis trustworthy: a sealed step can never be
rewritten by a late arrival.

Export is a long-format CSV (one row per sample) using 17-significant-digit
decimals so that export -> import -> export is byte-identical.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping


class DatastoreError(Exception):
    """Base class for store failures."""


class DataIntegrityError(DatastoreError):
    """Rejected sample or inconsistent key/metadata."""


class OutOfOrderError(DatastoreError):
    """Write or seal that violates the monotone step ordering."""


class UnknownKeyError(DatastoreError):
    """Query for a key that was never registered."""


class NotSealedError(DatastoreError):
    """Read that touches steps beyond the sealed range."""


class ExportError(DatastoreError):
    """Export or import failure (I/O, malformed file)."""


class Source(str, Enum):
    EMULATED = "emulated"
    SIMULATED = "simulated"
    SETPOINT = "setpoint"


_FORBIDDEN = set(", \t\n\r")


@dataclass(frozen=True)
class VariableKey:
    """Identity of one logged variable: name, data source, engineering unit."""

    name: str
    source: Source
    unit: str

    def __post_init__(self):
        if not self.name or any(c in _FORBIDDEN for c in self.name):
            raise DataIntegrityError(f"invalid variable name {self.name!r}")
        if not isinstance(self.source, Source):
            object.__setattr__(self, "source", Source(self.source))
        if not self.unit or any(c in ",\n\r" for c in self.unit):
            raise DataIntegrityError(f"invalid unit {self.unit!r} for {self.name}")


@dataclass(frozen=True)
class Sample:
    """One recorded value at one step.

    sim_time_s is always step_index * step_size_s of the owning store;
    wall_time_ms is the exchange-timeline stamp (None for hand-built logs).
    """

    step_index: int
    sim_time_s: float
    value: float
    wall_time_ms: int | None = None


@dataclass(frozen=True)
class Frame:
    """All samples of one sealed step."""

    step_index: int
    entries: Mapping[VariableKey, Sample]


@dataclass(frozen=True)
class RunMeta:
    scenario_id: str
    seed: int
    step_size_s: float
    start_wall_ms: int
    steps: int


@dataclass(frozen=True)
class RunLog:
    """Finalized record of a run: metadata plus contiguous sealed frames."""

    meta: RunMeta
    frames: tuple[Frame, ...]

    def key(self, name: str, source: Source | str) -> VariableKey:
        source = Source(source)
        for fr in self.frames:
            for k in fr.entries:
                if k.name == name and k.source == source:
                    return k
        raise UnknownKeyError(f"{name}:{Source(source).value}")

    @property
    def keys(self) -> tuple[VariableKey, ...]:
        """Every variable that appears anywhere in the run, in row order."""
        seen: dict[VariableKey, None] = {}
        for fr in self.frames:
            for k in fr.entries:
                seen.setdefault(k)
        return tuple(sorted(seen, key=lambda k: (k.name, k.source.value)))


@dataclass(frozen=True)
class SeriesResult:
    """Ordered samples over a step range plus the steps that had no sample."""

    samples: tuple[Sample, ...]
    gaps: tuple[int, ...]

    def values(self) -> list[float]:
        return [s.value for s in self.samples]


@dataclass(frozen=True)
class ExportSummary:
    rows_written: int
    files: tuple[str, ...]


class StepStore:
    """Mutable store for one run.  Thread-safe for writers within the open step."""

    def __init__(self, step_size_s: float, scenario_id: str = "run", seed: int = 0,
                 start_wall_ms: int = 0):
        if not (step_size_s > 0):
            raise DataIntegrityError("step_size_s must be positive")
        self.step_size_s = float(step_size_s)
        self.scenario_id = scenario_id
        self.seed = int(seed)
        self.start_wall_ms = int(start_wall_ms)
        self._lock = threading.Lock()
        self._keys: dict[tuple[str, Source], VariableKey] = {}
        self._producers: set[str] = set()
        self._done: dict[int, set[str]] = {}
        self._open: dict[int, dict[VariableKey, Sample]] = {}
        self._sealed: list[dict[VariableKey, Sample]] = []

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @property
    def last_sealed(self) -> int:
        return len(self._sealed) - 1

    def register(self, key: VariableKey) -> VariableKey:
        with self._lock:
            return self._register(key)

    def _register(self, key: VariableKey) -> VariableKey:
        known = self._keys.get((key.name, key.source))
        if known is None:
            self._keys[(key.name, key.source)] = key
            return key
        if known.unit != key.unit:
            raise DataIntegrityError(
                f"{key.name}:{key.source.value} already registered with unit "
                f"{known.unit!r}, got {key.unit!r}")
        return known

    def register_producer(self, name: str) -> None:
        with self._lock:
            self._producers.add(name)

    def producer_done(self, name: str, step_index: int) -> None:
        with self._lock:
            if name not in self._producers:
                raise DataIntegrityError(f"unregistered producer {name!r}")
            self._done.setdefault(step_index, set()).add(name)

    def upsert(self, key: VariableKey, step_index: int, value: float,
               wall_time_ms: int | None = None) -> Sample:
        """Insert or update one sample in an unsealed step.

        Update semantics: a second upsert for the same (key, step) replaces the
        first.  Non-finite values and writes at or below the sealed frontier
        are rejected.
        """
        if not isinstance(step_index, int) or step_index < 0:
            raise DataIntegrityError(f"bad step_index {step_index!r}")
        if not math.isfinite(value):
            raise DataIntegrityError(
                f"non-finite value for {key.name}:{key.source.value} at step {step_index}")
        with self._lock:
            key = self._register(key)
            if step_index <= self.last_sealed:
                raise OutOfOrderError(
                    f"step {step_index} already sealed (frontier {self.last_sealed})")
            sample = Sample(step_index, step_index * self.step_size_s, float(value),
                            None if wall_time_ms is None else int(wall_time_ms))
            self._open.setdefault(step_index, {})[key] = sample
            return sample

    def seal(self, step_index: int) -> Frame:
        """Seal the next step.  Requires strict order and all producers reported."""
        with self._lock:
            if step_index != self.last_sealed + 1:
                raise OutOfOrderError(
                    f"seal({step_index}) out of order, frontier {self.last_sealed}")
            missing = self._producers - self._done.get(step_index, set())
            if missing:
                raise OutOfOrderError(
                    f"seal({step_index}) before producers reported: {sorted(missing)}")
            entries = self._open.pop(step_index, {})
            self._sealed.append(entries)
            self._done.pop(step_index, None)
            return Frame(step_index, MappingProxyType(entries))

    def fetch_frame(self, step_index: int) -> Frame | None:
        """Immutable view of a sealed step, or None while it is still open."""
        with self._lock:
            if 0 <= step_index <= self.last_sealed:
                return Frame(step_index, MappingProxyType(self._sealed[step_index]))
            return None

    def query_series(self, key: VariableKey, start: int, end: int) -> SeriesResult:
        """Samples of one key over sealed steps [start, end], with gap report.

        A reversed or empty range yields an empty result; a range reaching past
        the sealed frontier is an error.
        """
        with self._lock:
            known = self._keys.get((key.name, key.source))
            if known is None:
                raise UnknownKeyError(f"{key.name}:{key.source.value}")
            if start > end:
                return SeriesResult((), ())
            if end > self.last_sealed:
                raise NotSealedError(
                    f"query [{start}, {end}] beyond sealed frontier {self.last_sealed}")
            start = max(0, start)
            samples, gaps = [], []
            for step in range(start, end + 1):
                s = self._sealed[step].get(known)
                if s is None:
                    gaps.append(step)
                else:
                    samples.append(s)
            return SeriesResult(tuple(samples), tuple(gaps))

    def to_runlog(self) -> RunLog:
        """Snapshot of all sealed frames as an immutable RunLog."""
        with self._lock:
            frames = tuple(Frame(i, dict(entries))
                           for i, entries in enumerate(self._sealed))
            meta = RunMeta(self.scenario_id, self.seed, self.step_size_s,
                           self.start_wall_ms, len(frames))
            return RunLog(meta, frames)


CSV_HEADER = "step_index,sim_time_s,variable,source,unit,value,wall_time_ms"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def iter_rows(log: RunLog) -> Iterable[str]:
    """CSV data rows in canonical order: by step, then variable name, then source."""
    for frame in log.frames:
        items = sorted(frame.entries.items(),
                       key=lambda kv: (kv[0].name, kv[0].source.value))
        for key, s in items:
            wall = "" if s.wall_time_ms is None else str(s.wall_time_ms)
            yield (f"{s.step_index},{_fmt(s.sim_time_s)},{key.name},"
                   f"{key.source.value},{key.unit},{_fmt(s.value)},{wall}")


def write_csv(log: RunLog, path: str) -> int:
    """Write the export CSV atomically.  Returns the number of data rows."""
    tmp = path + ".tmp"
    rows = 0
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            f.write(CSV_HEADER + "\n")
            for row in iter_rows(log):
                f.write(row + "\n")
                rows += 1
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return rows


def meta_dict(meta: RunMeta) -> dict:
    return {
        "scenario_id": meta.scenario_id,
        "seed": meta.seed,
        "step_size_s": meta.step_size_s,
        "start_wall_ms": meta.start_wall_ms,
        "steps": meta.steps,
    }


def write_meta(meta: RunMeta, path: str) -> None:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            json.dump(meta_dict(meta), f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def export_run(log: RunLog, dest: str) -> ExportSummary:
    """Export a RunLog to CSV plus a metadata sidecar.

    dest may be a directory (writes run.csv and run.meta.json inside) or a
    .csv path (sidecar gets the .meta.json suffix).  A failed write leaves no
    partial file behind.
    """
    if dest.endswith(".csv"):
        csv_path = dest
    else:
        os.makedirs(dest, exist_ok=True)
        csv_path = os.path.join(dest, "run.csv")
    meta_path = _sidecar_path(csv_path)
    try:
        rows = write_csv(log, csv_path)
        write_meta(log.meta, meta_path)
    except OSError as e:
        raise ExportError(f"export to {dest} failed: {e}") from e
    return ExportSummary(rows, (csv_path, meta_path))


def _sidecar_path(csv_path: str) -> str:
    base, ext = os.path.splitext(csv_path)
    return base + ".meta.json" if ext == ".csv" else csv_path + ".meta.json"


def _resolve_meta(csv_path: str, meta) -> dict | None:
    if isinstance(meta, RunMeta):
        return meta_dict(meta)
    if isinstance(meta, dict):
        return meta.get("log", meta)
    if isinstance(meta, str):
        with open(meta, encoding="utf-8") as f:
            d = json.load(f)
        return d.get("log", d)
    for cand in (_sidecar_path(csv_path),
                 os.path.join(os.path.dirname(csv_path) or ".", "summary.json")):
        if os.path.exists(cand):
            with open(cand, encoding="utf-8") as f:
                d = json.load(f)
            if "step_size_s" in d or "log" in d:
                return d.get("log", d)
    return None


def import_run(csv_path: str, meta=None) -> RunLog:
    """Rebuild a RunLog from an export CSV.

    Metadata comes from (in order): an explicit RunMeta/dict/path, the
    .meta.json sidecar, a summary.json next to the CSV, or is inferred from
    row contents as a last resort.  Malformed rows fail with the row number.
    """
    try:
        with open(csv_path, encoding="utf-8", newline="") as f:
            lines = f.read().split("\n")
    except OSError as e:
        raise ExportError(f"cannot read {csv_path}: {e}") from e
    if not lines or lines[0] != CSV_HEADER:
        raise ExportError(f"{csv_path}: missing or wrong header row")
    if lines[-1] == "":
        lines.pop()

    md = _resolve_meta(csv_path, meta)
    rows: list[tuple[int, VariableKey, Sample]] = []
    keys: dict[tuple[str, Source], VariableKey] = {}
    seen: set[tuple[int, str, Source]] = set()
    for n, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 7:
            raise ExportError(f"{csv_path}: row {n}: expected 7 fields, got {len(parts)}")
        try:
            step = int(parts[0])
            sim_time = float(parts[1])
            source = Source(parts[3])
            value = float(parts[5])
            wall = None if parts[6] == "" else int(parts[6])
            key = VariableKey(parts[2], source, parts[4])
        except (ValueError, DataIntegrityError) as e:
            raise ExportError(f"{csv_path}: row {n}: {e}") from e
        if not math.isfinite(value) or step < 0:
            raise ExportError(f"{csv_path}: row {n}: invalid value or step")
        known = keys.setdefault((key.name, source), key)
        if known.unit != key.unit:
            raise ExportError(f"{csv_path}: row {n}: unit mismatch for {key.name}")
        if (step, key.name, source) in seen:
            raise ExportError(f"{csv_path}: row {n}: duplicate sample")
        seen.add((step, key.name, source))
        rows.append((step, known, Sample(step, sim_time, value, wall)))

    if md is None:
        step_size = 1.0
        for step, _, s in rows:
            if step > 0:
                step_size = s.sim_time_s / step
                break
        n_steps = max((step for step, _, _ in rows), default=-1) + 1
        md = {"scenario_id": "imported", "seed": 0, "step_size_s": step_size,
              "start_wall_ms": 0, "steps": n_steps}
    meta_obj = RunMeta(str(md["scenario_id"]), int(md["seed"]),
                       float(md["step_size_s"]), int(md["start_wall_ms"]),
                       int(md["steps"]))

    frames: list[dict[VariableKey, Sample]] = [dict() for _ in range(meta_obj.steps)]
    for step, key, s in rows:
        if step >= meta_obj.steps:
            raise ExportError(f"{csv_path}: step {step} beyond metadata steps {meta_obj.steps}")
        expected = step * meta_obj.step_size_s
        if s.sim_time_s != expected:
            raise ExportError(
                f"{csv_path}: sim_time_s {s.sim_time_s} at step {step} "
                f"inconsistent with step size {meta_obj.step_size_s}")
        frames[step][key] = s
    return RunLog(meta_obj, tuple(Frame(i, d) for i, d in enumerate(frames)))
