"""Reading and writing label matrices, truth files, run configurations and reports.

Matrix CSV layout::

    file_id,<detector 1>,...,<detector n>
    <id>,0,1,...,0

Truth CSV layout: ``file_id,truth`` then one ``<id>,0|1`` row per file.

Files written here use ``\\n`` line endings and no quoting beyond what the
``csv`` module needs, so a matrix read from a file written by
:func:`write_matrix` serializes back to the same bytes.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError, SchemaError, TruthMismatch
from .model import GroundTruth, LabelMatrix, ProfileSet, VoteResult

log = logging.getLogger(__name__)

ID_COLUMN = "file_id"
TRUTH_COLUMN = "truth"
_WRITE_BLOCK = 8192


@dataclass(frozen=True)
class RejectedRow:
    line: int
    file_id: str | None
    reason: str


@dataclass(frozen=True, eq=False)
class Ingested:
    matrix: LabelMatrix
    truth: GroundTruth | None = None
    rejected: tuple[RejectedRow, ...] = ()

    def summary(self) -> dict:
        return {"rows_accepted": self.matrix.m, "rows_rejected": len(self.rejected)}


def _check_header(header, what):
    if not header:
        raise SchemaError(f"{what}: missing header row")
    names = [h.strip() for h in header]
    if any(not h for h in names):
        raise SchemaError(f"{what}: empty column name in header")
    if len(set(names)) != len(names):
        raise SchemaError(f"{what}: duplicate column names in header")
    return names


def read_matrix(path, lenient: bool = False) -> tuple[LabelMatrix, tuple[RejectedRow, ...]]:
    """Stream a matrix CSV into a :class:`LabelMatrix`.

    Labels are accumulated in a byte buffer (one byte per cell) and handed to
    the matrix without a further copy. In strict mode the first bad row raises
    (:class:`SchemaError` for a wrong field count, :class:`ParseError` for a
    bad value or duplicate id); with ``lenient`` such rows are dropped and
    returned as :class:`RejectedRow` records.
    """
    path = Path(path)
    buf = bytearray()
    ids: list[str] = []
    seen: set[str] = set()
    rejected: list[RejectedRow] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = _check_header(next(reader, None), str(path))
        if len(header) < 2:
            raise SchemaError(f"{path}: header needs a file id column and at least one detector")
        names = tuple(header[1:])
        n = len(names)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            fid = row[0]
            reason = None
            width_error = False
            if len(row) != n + 1:
                reason = f"expected {n + 1} fields, found {len(row)}"
                width_error = True
            else:
                values = "".join(row[1:])
                if len(values) != n or values.strip("01") or "" in row[1:]:
                    bad = next(v for v in row[1:] if v not in ("0", "1"))
                    reason = f"label {bad!r} is not 0 or 1"
                elif not fid:
                    reason = "empty file id"
                elif fid in seen:
                    reason = f"duplicate file id {fid!r}"
            if reason is not None:
                if not lenient:
                    if width_error:
                        raise SchemaError(f"{path} line {line}: {reason}")
                    raise ParseError(line, reason)
                log.warning("dropping line %d: %s", line, reason)
                rejected.append(RejectedRow(line, fid or None, reason))
                continue
            seen.add(fid)
            ids.append(fid)
            buf += values.encode("ascii")
    if not ids:
        raise SchemaError(f"{path}: no usable data rows")
    labels = np.frombuffer(buf, dtype=np.uint8).reshape(len(ids), n)
    labels -= ord("0")
    labels.setflags(write=False)
    if rejected:
        log.warning("%d of %d rows dropped", len(rejected), len(rejected) + len(ids))
    return LabelMatrix(labels, names, tuple(ids)), tuple(rejected)


def read_truth(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read a truth CSV; returns the ids in file order and their 0/1 labels."""
    path = Path(path)
    ids: list[str] = []
    values: list[int] = []
    seen: set[str] = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = _check_header(next(reader, None), str(path))
        if len(header) != 2:
            raise SchemaError(f"{path}: truth header must have exactly two columns")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise SchemaError(f"{path} line {line}: expected 2 fields, found {len(row)}")
            fid, v = row
            if v not in ("0", "1"):
                raise ParseError(line, f"truth label {v!r} is not 0 or 1")
            if fid in seen:
                raise ParseError(line, f"duplicate file id {fid!r}")
            seen.add(fid)
            ids.append(fid)
            values.append(int(v))
    return tuple(ids), np.array(values, dtype=np.uint8)


def align_truth(matrix: LabelMatrix, truth_ids, truth_values, rejected: Sequence[RejectedRow] = ()) -> GroundTruth:
    """Order the truth labels like the matrix rows.

    The truth file must cover exactly the matrix ids; ids of rows dropped
    during lenient ingestion may also appear and are ignored.
    """
    lookup = dict(zip(truth_ids, truth_values.tolist()))
    missing = [fid for fid in matrix.file_ids if fid not in lookup]
    known = set(matrix.file_ids) | {r.file_id for r in rejected if r.file_id}
    extra = [fid for fid in lookup if fid not in known]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"{len(missing)} matrix ids absent from truth (e.g. {missing[0]!r})")
        if extra:
            parts.append(f"{len(extra)} truth ids absent from matrix (e.g. {extra[0]!r})")
        raise TruthMismatch("; ".join(parts))
    return GroundTruth(np.array([lookup[fid] for fid in matrix.file_ids], dtype=np.uint8))


def ingest(path, truth_path=None, lenient: bool = False) -> Ingested:
    """Read a matrix CSV and, optionally, its truth file."""
    matrix, rejected = read_matrix(path, lenient=lenient)
    truth = None
    if truth_path is not None:
        ids, values = read_truth(truth_path)
        truth = align_truth(matrix, ids, values, rejected)
    return Ingested(matrix, truth, rejected)


# ---------------------------------------------------------------- writers


def _check_cell(text: str):
    if any(c in text for c in ',"\n\r'):
        raise SchemaError(f"identifier {text!r} cannot be written unquoted")


def write_matrix(matrix: LabelMatrix, path) -> None:
    for name in (*matrix.detector_names, *matrix.file_ids):
        _check_cell(name)
    n = matrix.n
    with open(path, "wb") as fh:
        fh.write((",".join((ID_COLUMN, *matrix.detector_names)) + "\n").encode())
        for start in range(0, matrix.m, _WRITE_BLOCK):
            block = matrix.labels[start : start + _WRITE_BLOCK]
            chars = np.full((block.shape[0], 2 * n), ord(","), dtype=np.uint8)
            chars[:, 0::2] = block + ord("0")
            chars[:, -1] = ord("\n")
            ids = matrix.file_ids[start : start + block.shape[0]]
            fh.write(b"".join(fid.encode() + b"," + row.tobytes() for fid, row in zip(ids, chars)))


def write_truth(ids: Sequence[str], truth: GroundTruth, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"{ID_COLUMN},{TRUTH_COLUMN}\n")
        fh.writelines(f"{fid},{int(v)}\n" for fid, v in zip(ids, truth.truth))


def write_votes(ids: Sequence[str], votes: VoteResult, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"{ID_COLUMN},vote,vote_count\n")
        fh.writelines(f"{fid},{int(y)},{int(c)}\n" for fid, y, c in zip(ids, votes.votes, votes.vote_counts))


def write_profiles(profiles: ProfileSet, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("detector,fp,fn\n")
        fh.writelines(f"{name},{fp!r},{fn!r}\n" for name, fp, fn in zip(profiles.names, profiles.fp.tolist(), profiles.fn.tolist()))


def read_profiles(path) -> ProfileSet:
    """Explicit detector profiles: CSV with columns ``detector,fp,fn``."""
    names, fps, fns = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = _check_header(next(reader, None), str(path))
        if header != ["detector", "fp", "fn"]:
            raise SchemaError(f"{path}: profile header must be detector,fp,fn")
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise SchemaError(f"{path} line {reader.line_num}: expected 3 fields")
            try:
                fps.append(float(row[1]))
                fns.append(float(row[2]))
            except ValueError:
                raise ParseError(reader.line_num, "fp/fn must be numbers") from None
            names.append(row[0])
    return ProfileSet(np.array(fps), np.array(fns), tuple(names))


def to_jsonable(obj):
    """Plain-Python copy of ``obj`` with NaN/inf mapped to ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_report(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps_report(obj))


def write_rows(rows: Sequence[dict], path, columns: Sequence[str] | None = None) -> None:
    """Series CSV; ``None`` values become empty fields."""
    columns = list(columns or (rows[0].keys() if rows else ()))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: "" if row.get(k) is None else _fmt(row.get(k)) for k in columns})


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return v


class OutputSet:
    """Tracks files written by one command and deletes them if it fails.

    Use as a context manager; call :meth:`path` for every output file.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self._created_dir = not self.out_dir.exists()
        self._paths: list[Path] = []

    def __enter__(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self._paths.append(p)
        return p

    @property
    def written(self) -> list[Path]:
        return [p for p in self._paths if p.exists()]

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self._paths:
                try:
                    p.unlink()
                except FileNotFoundError:
                    pass
            if self._created_dir:
                try:
                    self.out_dir.rmdir()
                except OSError:
                    pass
        return False


# ---------------------------------------------------------------- run config

_LIST_KEYS = {"m": int, "pi1": float, "n": int, "epsilon": float, "delta": float, "kappa": int}
_SCALAR_KEYS = {
    "mode": str,
    "mc_samples": int,
    "master_seed": int,
    "subset_plan": str,
    "profiles": str,
    "fixture": bool,
    "replicates": int,
    "out_dir": str,
    "workers": int,
    "width": float,
}
_MODES = {"exact": "exact", "mc": "mc", "monte-carlo": "mc", "montecarlo": "mc"}


@dataclass(frozen=True)
class RunConfig:
    """Resolved run settings.

    Simulation keys ``m``, ``pi1``, ``n``, ``epsilon``, ``delta`` and
    ``kappa`` accept comma-separated lists; ``evaluate`` runs their full
    cross product. ``workers`` only affects scheduling and is left out of
    :meth:`echo`, so reports do not depend on it.
    """

    mode: str = "exact"
    mc_samples: int = 10_000
    master_seed: int = 0
    subset_plan: str | None = None
    m: tuple[int, ...] = (50_000,)
    pi1: tuple[float, ...] = (0.2,)
    n: tuple[int, ...] = (5,)
    epsilon: tuple[float, ...] = (0.1,)
    width: float = 0.1
    delta: tuple[float, ...] = (0.0,)
    profiles: str | None = None
    fixture: bool = False
    kappa: tuple[int, ...] = ()
    replicates: int = 1000
    out_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ConfigError(f"mode must be exact or mc, got {self.mode!r}")
        if self.mc_samples < 1 or self.replicates < 1 or self.workers < 1:
            raise ConfigError("mc_samples, replicates and workers must be >= 1")
        if self.fixture and self.profiles:
            raise ConfigError("fixture and profiles are mutually exclusive")

    def echo(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("workers", "out_dir")}
        return to_jsonable(d)

    def replace(self, **changes) -> "RunConfig":
        from dataclasses import replace

        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _parse_value(key, raw):
    raw = raw.strip()
    try:
        if key in _LIST_KEYS:
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if not items:
                raise ValueError("empty list")
            return tuple(_LIST_KEYS[key](x) for x in items)
        kind = _SCALAR_KEYS[key]
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(f"not a boolean: {raw!r}")
            return low in ("true", "yes", "1", "on")
        if key == "mode":
            if raw.lower() not in _MODES:
                raise ValueError(f"unknown mode {raw!r}")
            return _MODES[raw.lower()]
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_run_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` comments allowed); unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if parser.sections() != ["run"]:
        raise ConfigError("config sections are not supported")
    values = {}
    for key, raw in parser.items("run"):
        if key not in _LIST_KEYS and key not in _SCALAR_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, raw)
    base = base or RunConfig()
    return base.replace(**values)


def load_run_config(path, base: RunConfig | None = None) -> RunConfig:
    return parse_run_config(Path(path).read_text(), base)


@dataclass(frozen=True)
class PlanSpec:
    """Subset plan as read from JSON: explicit ``sets`` or ``initial`` + ``sizes``."""

    seed: int = 0
    sets: tuple[tuple[int, ...], ...] = ()
    initial: tuple[int, ...] = ()
    sizes: tuple[int, ...] = ()


def load_subset_plan(path) -> PlanSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"subset plan is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("subset plan must be a JSON object")
    unknown = set(raw) - {"seed", "sets", "initial", "sizes"}
    if unknown:
        raise ConfigError(f"unknown subset plan keys: {sorted(unknown)}")
    if "sets" in raw and ("initial" in raw or "sizes" in raw):
        raise ConfigError("give either sets or initial/sizes, not both")
    try:
        return PlanSpec(
            seed=int(raw.get("seed", 0)),
            sets=tuple(tuple(int(i) for i in s) for s in raw.get("sets", ())),
            initial=tuple(int(i) for i in raw.get("initial", ())),
            sizes=tuple(int(i) for i in raw.get("sizes", ())),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad subset plan: {exc}") from None
