"""Running a black-box simulator over a sample design.

A simulator is described by a command line, an input-file template with
``{variable}`` placeholders, and rules that pull output channels from stdout
or from files the run leaves in its work directory. Each run gets a fresh
directory. Simulator failures are recorded in the returned ``RunRecord``
instead of raised; only harness problems raise.

Store layout (``EnsembleStore``)::

    <root>/records/<key>.json      one RunRecord per distinct rendered input
    <root>/raw/<key>/input.txt     rendered input
    <root>/raw/<key>/stdout.txt    captured stdout
    <root>/raw/<key>/stderr.txt    captured stderr
    <root>/work/                   transient per-run work directories

``key`` is the SHA-256 of the simulator's canonical JSON and the rendered
input text.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import re
import shutil
import subprocess
import sys
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (AlignmentError, EnsembleFailedError, ExclusionError, HarnessError, TemplateError,
                     UnknownChannelError)
from .sampling import SampleDesign

log = logging.getLogger(__name__)

_TOKEN = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")
COMMAND_PLACEHOLDERS = ("python", "input_file", "workdir", "config_dir")

OK, FAILED, TIMEOUT, PARSE_ERROR = "ok", "failed", "timeout", "parse_error"


def placeholders(template: str) -> list[str]:
    """Placeholder names in order of appearance (``{{`` and ``}}`` are literal braces)."""
    return [m.group(1) for m in _TOKEN.finditer(template) if m.group(1)]


def format_value(x) -> str:
    """Shortest decimal that parses back to the same double."""
    return repr(float(x))


def _substitute(template, values, fmt):
    def sub(m):
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        name = m.group(1)
        if name not in values:
            raise TemplateError(f"no value for placeholder {{{name}}}")
        return fmt(values[name])

    return _TOKEN.sub(sub, template)


def render_input(template: str, row: Mapping[str, float], allowed: Sequence[str] | None = None) -> str:
    """Substitute every ``{name}`` in ``template`` with the row's value.

    ``allowed`` restricts placeholders to declared input names; by default the
    keys of ``row`` are the declared names.
    """
    allowed = set(row if allowed is None else allowed)
    for name in placeholders(template):
        if name not in allowed:
            raise TemplateError(f"template placeholder {{{name}}} is not a declared input")

    return _substitute(template, row, format_value)


@dataclass(frozen=True)
class OutputRule:
    """How to obtain one output channel.

    ``source`` is ``"stdout"`` or a file name relative to the work directory.
    ``parser`` is ``csv`` (``column``, optional ``time_column``), ``regex``
    (``pattern`` with one capture group) or ``json`` (RFC 6901 ``pointer``).
    """

    channel: str
    parser: str
    source: str = "stdout"
    column: str | None = None
    time_column: str | None = None
    pattern: str | None = None
    pointer: str | None = None

    def __post_init__(self):
        need = {"csv": "column", "regex": "pattern", "json": "pointer"}.get(self.parser)
        if need is None:
            raise TemplateError(f"output {self.channel!r}: unknown parser {self.parser!r}")
        if getattr(self, need) is None:
            raise TemplateError(f"output {self.channel!r}: parser {self.parser!r} needs {need!r}")
        if self.parser == "regex" and re.compile(self.pattern).groups != 1:
            raise TemplateError(f"output {self.channel!r}: regex must have exactly one capture group")

    def to_dict(self):
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, doc):
        fields_ = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in fields_})


@dataclass(frozen=True)
class SimulatorSpec:
    command: tuple
    input_template: str
    outputs: tuple
    input_filename: str = "input.txt"
    timeout: float = 600.0
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        names = [r.channel for r in self.outputs]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise TemplateError(f"duplicate output channel names {sorted(dup)}")
        for arg in self.command:
            for name in placeholders(arg):
                if name not in COMMAND_PLACEHOLDERS:
                    raise TemplateError(f"command placeholder {{{name}}} unknown; allowed {COMMAND_PLACEHOLDERS}")

    def validate(self, input_names: Sequence[str]):
        """Check the template against the declared inputs, both directions."""
        used = set(placeholders(self.input_template))
        unknown = sorted(used - set(input_names))
        if unknown:
            raise TemplateError(f"template placeholders not among inputs: {unknown}")
        unused = [n for n in input_names if n not in used]
        if unused:
            raise TemplateError(f"inputs never used in the template: {unused}")

    def to_dict(self):
        return {
            "command": list(self.command),
            "input_template": self.input_template,
            "input_filename": self.input_filename,
            "outputs": [r.to_dict() for r in self.outputs],
            "timeout": self.timeout,
        }

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        base = Path(base_dir)
        if "input_template" in doc:
            template = doc["input_template"]
        elif "input_template_file" in doc:
            template = (base / doc["input_template_file"]).read_text()
        else:
            raise TemplateError("simulator needs input_template or input_template_file")
        return cls(
            command=tuple(doc["command"]),
            input_template=template,
            outputs=tuple(OutputRule.from_dict(r) for r in doc["outputs"]),
            input_filename=doc.get("input_filename", "input.txt"),
            timeout=float(doc.get("timeout", 600.0)),
            base_dir=str(base_dir),
        )


@dataclass(frozen=True)
class Series:
    time: tuple
    value: tuple


@dataclass(frozen=True)
class RunRecord:
    index: int
    inputs: Mapping[str, float]
    status: str
    detail: str | int | None
    channels: Mapping
    wall_time: float
    input_hash: str

    @property
    def ok(self) -> bool:
        return self.status == OK

    def to_dict(self):
        chans = {k: ({"time": list(v.time), "value": list(v.value)} if isinstance(v, Series) else v)
                 for k, v in self.channels.items()}
        return {"index": self.index, "inputs": dict(self.inputs), "status": self.status, "detail": self.detail,
                "channels": chans, "wall_time": self.wall_time, "input_hash": self.input_hash}

    @classmethod
    def from_dict(cls, doc):
        chans = {k: (Series(tuple(v["time"]), tuple(v["value"])) if isinstance(v, dict) else float(v))
                 for k, v in doc["channels"].items()}
        return cls(doc["index"], doc["inputs"], doc["status"], doc["detail"], chans,
                   doc["wall_time"], doc["input_hash"])


class ParseError(Exception):
    pass


def _to_float(text, what):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{what}: {text!r} is not a number") from None
    if not math.isfinite(v):
        raise ParseError(f"{what}: non-finite value {text!r}")
    return v


def resolve_pointer(doc, pointer: str):
    """Resolve an RFC 6901 JSON pointer."""
    if pointer == "":
        return doc
    if not pointer.startswith("/"):
        raise ParseError(f"invalid JSON pointer {pointer!r}")
    for raw in pointer[1:].split("/"):
        tok = raw.replace("~1", "/").replace("~0", "~")
        try:
            doc = doc[int(tok)] if isinstance(doc, list) else doc[tok]
        except (KeyError, IndexError, ValueError, TypeError):
            raise ParseError(f"JSON pointer {pointer!r} does not resolve") from None
    return doc


def apply_rule(rule: OutputRule, text: str):
    """Extract one channel from ``text``: a float, or a Series for time-indexed CSV."""
    what = f"channel {rule.channel!r}"
    if rule.parser == "regex":
        m = re.search(rule.pattern, text, re.MULTILINE)
        if m is None:
            raise ParseError(f"{what}: pattern {rule.pattern!r} not found")
        return _to_float(m.group(1), what)
    if rule.parser == "json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{what}: invalid JSON ({exc})") from None
        value = resolve_pointer(doc, rule.pointer)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{what}: pointer {rule.pointer!r} is not a number")
        return _to_float(value, what)
    reader = csv.DictReader(io.StringIO(text))
    fieldnames = [f.strip() for f in (reader.fieldnames or [])]
    reader.fieldnames = fieldnames
    for col in (rule.column, rule.time_column):
        if col is not None and col not in fieldnames:
            raise ParseError(f"{what}: column {col!r} not in header {fieldnames}")
    rows = list(reader)
    if not rows:
        raise ParseError(f"{what}: no data rows")
    if rule.time_column is None:
        if len(rows) != 1:
            raise ParseError(f"{what}: {len(rows)} rows but no time_column")
        return _to_float(rows[0][rule.column], what)
    times = tuple(_to_float(r[rule.time_column], what) for r in rows)
    values = tuple(_to_float(r[rule.column], what) for r in rows)
    return Series(times, values)


def _command(spec: SimulatorSpec, workdir: Path):
    ctx = {"python": sys.executable, "input_file": str(workdir / spec.input_filename),
           "workdir": str(workdir), "config_dir": str(Path(spec.base_dir).resolve())}
    return [_substitute(arg, ctx, str) for arg in spec.command]


def input_hash(spec: SimulatorSpec, rendered: str) -> str:
    h = hashlib.sha256()
    h.update(spec.canonical().encode())
    h.update(b"\0")
    h.update(rendered.encode())
    return h.hexdigest()


@dataclass
class RunOutput:
    record: RunRecord
    rendered: str
    stdout: str
    stderr: str


def _execute(spec: SimulatorSpec, row: Mapping[str, float], index: int, workroot) -> RunOutput:
    rendered = render_input(spec.input_template, row)
    key = input_hash(spec, rendered)
    try:
        workdir = Path(tempfile.mkdtemp(prefix=f"run{index:05d}-", dir=workroot))
        (workdir / spec.input_filename).write_text(rendered)
    except OSError as exc:
        raise HarnessError(f"cannot prepare work directory: {exc}") from exc

    inputs = {k: float(v) for k, v in row.items()}
    start = time.perf_counter()
    stdout = stderr = ""
    channels = {}
    try:
        proc = subprocess.run(_command(spec, workdir), cwd=workdir, capture_output=True, text=True,
                              timeout=spec.timeout)
    except subprocess.TimeoutExpired as exc:
        stdout = _text(exc.stdout)
        stderr = _text(exc.stderr)
        status, detail = TIMEOUT, f"exceeded {spec.timeout} s"
    except OSError as exc:
        shutil.rmtree(workdir, ignore_errors=True)
        raise HarnessError(f"cannot spawn simulator: {exc}") from exc
    else:
        stdout, stderr = proc.stdout, proc.stderr
        if proc.returncode != 0:
            status, detail = FAILED, proc.returncode
        else:
            status, detail = OK, None
            try:
                for rule in spec.outputs:
                    text = stdout if rule.source == "stdout" else _read(workdir / rule.source, rule)
                    channels[rule.channel] = apply_rule(rule, text)
            except ParseError as exc:
                status, detail, channels = PARSE_ERROR, str(exc), {}
    wall = time.perf_counter() - start
    shutil.rmtree(workdir, ignore_errors=True)
    rec = RunRecord(index, inputs, status, detail, channels, wall, key)
    return RunOutput(rec, rendered, stdout, stderr)


def _text(b):
    if b is None:
        return ""
    return b.decode(errors="replace") if isinstance(b, bytes) else b


def _read(path: Path, rule):
    try:
        return path.read_text()
    except OSError:
        raise ParseError(f"channel {rule.channel!r}: output file {path.name!r} missing") from None


def run_one(spec: SimulatorSpec, row: Mapping[str, float], index: int = 0, workroot=None) -> RunRecord:
    """Render, execute and parse a single run in a fresh work directory."""
    return _execute(spec, row, index, workroot).record


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


class EnsembleStore:
    """Directory-backed cache of run records keyed by input hash."""

    def __init__(self, root):
        self.root = Path(root)
        self.work = self.root / "work"
        self.work.mkdir(parents=True, exist_ok=True)
        self.launched = 0
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}

    def _record_path(self, key):
        return self.root / "records" / f"{key}.json"

    def lock(self, key) -> threading.Lock:
        with self._lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def get(self, key) -> RunRecord | None:
        path = self._record_path(key)
        if not path.exists():
            return None
        try:
            return RunRecord.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, KeyError, TypeError):
            log.warning("ignoring unreadable cache record %s", path)
            return None

    def put(self, out: RunOutput):
        key = out.record.input_hash
        with self.lock(key):
            raw = self.root / "raw" / key
            _atomic_write(raw / "input.txt", out.rendered)
            _atomic_write(raw / "stdout.txt", out.stdout)
            _atomic_write(raw / "stderr.txt", out.stderr)
            _atomic_write(self._record_path(key), json.dumps(out.record.to_dict(), indent=1) + "\n")

    def discard(self, key):
        self._record_path(key).unlink(missing_ok=True)

    def count_launch(self):
        with self._lock:
            self.launched += 1


def run_ensemble(spec: SimulatorSpec, design: SampleDesign, parallelism: int = 1,
                 store: EnsembleStore | None = None, force: bool = False) -> list[RunRecord]:
    """Run every design row, serving cached ``ok`` records from ``store``.

    Rows whose rendered inputs coincide run once. Records come back in design
    row order. Raises EnsembleFailedError only if no row succeeds.
    """
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    spec.validate(design.names)
    rows = [dict(zip(design.names, map(float, r))) for r in design.physical]
    keys = [input_hash(spec, render_input(spec.input_template, row)) for row in rows]

    results: dict[str, RunRecord] = {}
    todo: dict[str, int] = {}
    for r, key in enumerate(keys):
        if key in results or key in todo:
            continue
        cached = None if (store is None or force) else store.get(key)
        if cached is not None and cached.ok:
            results[key] = cached
        else:
            todo[key] = r

    workroot = store.work if store is not None else None

    def job(key, r):
        out = _execute(spec, rows[r], r, workroot)
        if store is not None:
            store.count_launch()
            store.put(out)
        return key, out.record

    if todo:
        log.info("running %d of %d rows (parallelism %d)", len(todo), len(rows), parallelism)
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for key, rec in pool.map(lambda kv: job(*kv), todo.items()):
                results[key] = rec

    records = [dataclasses.replace(results[k], index=r) for r, k in enumerate(keys)]
    failed = [rec.index for rec in records if not rec.ok]
    if records and len(failed) == len(records):
        raise EnsembleFailedError(f"all {len(records)} runs failed; first: {records[0].status} {records[0].detail}")
    if failed:
        log.warning("%d of %d runs did not complete: rows %s", len(failed), len(records), failed)
    return records


@dataclass(frozen=True)
class ChannelResponses:
    """Responses of one channel: ``values[step]`` is the m-vector for that timestep."""

    channel: str
    times: np.ndarray | None
    values: np.ndarray

    @property
    def steps(self) -> int:
        return self.values.shape[0]


def extract_channels(records: Sequence[RunRecord], channel: str, rtol: float = 1e-9) -> ChannelResponses:
    """Align one channel across records into per-timestep response vectors."""
    bad = [r.index for r in records if not r.ok]
    if bad:
        raise ExclusionError(bad)
    if not records:
        raise ValueError("no records")
    if any(channel not in r.channels for r in records):
        raise UnknownChannelError(channel)
    first = records[0].channels[channel]
    if not isinstance(first, Series):
        mism = [r.index for r in records if isinstance(r.channels[channel], Series)]
        if mism:
            raise AlignmentError(channel, mism)
        return ChannelResponses(channel, None, np.array([[r.channels[channel] for r in records]], dtype=float))
    ref = np.array(first.time, dtype=float)
    mism = []
    for r in records:
        v = r.channels[channel]
        if not isinstance(v, Series) or len(v.time) != len(ref) or \
                np.any(np.abs(np.array(v.time) - ref) > rtol * np.abs(ref)):
            mism.append(r.index)
    if mism:
        raise AlignmentError(channel, mism)
    values = np.array([r.channels[channel].value for r in records], dtype=float).T
    return ChannelResponses(channel, ref, values)
