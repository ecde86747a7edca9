"""Dataset representation, ingestion, validation, and grid alignment.

A :class:`Sequence` holds one subject's ordered observations ``(x, y, w)``;
a :class:`Dataset` holds several subjects on a shared grid, with missing
observations encoded as ``w = 0`` rows whose ``y`` placeholder never enters
any block statistic. All containers are immutable after construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

FAMILIES = ("gaussian", "poisson", "binomial", "betaobs")


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def validate_family_values(family: str, y: np.ndarray, w: np.ndarray) -> None:
    """Family-specific checks on (y, w); rows with w == 0 are placeholders."""
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if np.any(w < 0):
        raise InputError("weights must be nonnegative")
    obs = w > 0
    if family == "poisson":
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise InputError("poisson observations must be nonnegative integers")
        if np.any((y > 0) & ~obs):
            raise InputError("poisson rows with positive counts require positive exposure")
    elif family == "binomial":
        if np.any(y != np.round(y)) or np.any(w != np.round(w)):
            raise InputError("binomial successes and trials must be integers")
        if np.any(y < 0) or np.any(y > w):
            bad = y[(y < 0) | (y > w)][0]
            raise InputError(f"binomial successes out of range: y={bad!r} exceeds trials")
    elif family == "betaobs":
        if np.any(obs & ((y <= 0) | (y >= 1))):
            raise InputError("betaobs observations must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class Sequence:
    """One subject's ordered observations.

    ``x`` is strictly increasing; ``w`` holds weights, exposures, or trial
    counts depending on ``family`` (default 1). ``x0`` anchors the left edge
    of the design domain used by physical-length segment priors; if omitted
    it defaults to ``x[0]`` minus the median grid gap (minus 1 when n == 1).
    """

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    family: str = "gaussian"
    x0: float | None = None

    def __post_init__(self):
        x = _as_float_array(self.x, "x")
        y = _as_float_array(self.y, "y")
        w = _as_float_array(self.w, "w") if self.w is not None else np.ones_like(x)
        if not (len(x) == len(y) == len(w)):
            raise InputError(
                f"length mismatch: len(x)={len(x)}, len(y)={len(y)}, len(w)={len(w)}"
            )
        if len(x) == 0:
            raise InputError("sequence must contain at least one row")
        dx = np.diff(x)
        if np.any(dx <= 0):
            bad = x[1:][dx <= 0][0]
            raise InputError(f"x not strictly increasing (offending value {bad!r})")
        validate_family_values(self.family, y, w)
        for name, arr in (("x", x), ("y", y), ("w", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.x0 is not None and self.x0 >= x[0]:
            raise InputError("x0 anchor must lie strictly left of the first design point")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def anchor(self) -> float:
        if self.x0 is not None:
            return float(self.x0)
        if self.n >= 2:
            return float(self.x[0] - np.median(np.diff(self.x)))
        return float(self.x[0] - 1.0)

    @property
    def grid(self) -> np.ndarray:
        """Augmented grid (anchor, x_1, ..., x_n); block (i, j] spans grid[j] - grid[i]."""
        return np.concatenate(([self.anchor], self.x))

    def replace(self, **kw) -> "Sequence":
        fields = dict(x=self.x, y=self.y, w=self.w, family=self.family, x0=self.x0)
        fields.update(kw)
        return Sequence(**fields)


@dataclass(frozen=True)
class Dataset:
    """Subjects sharing a common grid, with optional group labels in {1..G}."""

    subjects: tuple[Sequence, ...]
    group_labels: tuple[int, ...] | None = None
    subject_ids: tuple[int, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.subjects:
            raise InputError("dataset must contain at least one subject")
        subjects = tuple(self.subjects)
        n = subjects[0].n
        grid = subjects[0].x
        for s in subjects[1:]:
            if s.n != n or not np.array_equal(s.x, grid):
                raise InputError("all subjects must share an identical grid")
        object.__setattr__(self, "subjects", subjects)
        if self.subject_ids is None:
            object.__setattr__(self, "subject_ids", tuple(range(len(subjects))))
        else:
            object.__setattr__(self, "subject_ids", tuple(int(i) for i in self.subject_ids))
        if self.group_labels is not None:
            labels = tuple(int(g) for g in self.group_labels)
            if len(labels) != len(subjects):
                raise InputError("group_labels must assign one group per subject")
            G = max(labels)
            if min(labels) < 1:
                raise InputError("group labels must lie in {1..G}")
            if set(labels) != set(range(1, G + 1)):
                raise InputError("group labels must cover {1..G} without gaps")
            object.__setattr__(self, "group_labels", labels)

    @property
    def n(self) -> int:
        return self.subjects[0].n

    @property
    def grid(self) -> np.ndarray:
        return self.subjects[0].x

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    def groups(self) -> dict[int, list[int]]:
        """Map group label -> subject positions (requires labels)."""
        if self.group_labels is None:
            raise InputError("dataset carries no group labels")
        out: dict[int, list[int]] = {}
        for idx, g in enumerate(self.group_labels):
            out.setdefault(g, []).append(idx)
        return out


@dataclass(frozen=True)
class PredictionUnit:
    """A set-valued observation: interval support with internal points."""

    support: tuple[float, float]
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        a, b = map(float, self.support)
        if not a < b:
            raise InputError("unit support must satisfy a < b")
        x = _as_float_array(self.x, "unit x")
        y = _as_float_array(self.y, "unit y")
        w = _as_float_array(self.w, "unit w") if self.w is not None else np.ones_like(x)
        if not (len(x) == len(y) == len(w)):
            raise InputError("unit arrays must share a length")
        if np.any(np.diff(x) <= 0):
            raise InputError("unit x must be strictly increasing")
        if np.any((x <= a) | (x > b)):
            raise InputError("unit points must lie inside (a, b]")
        object.__setattr__(self, "support", (a, b))
        for name, arr in (("x", x), ("y", y), ("w", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


# ---------------------------------------------------------------------------
# alignment
# ---------------------------------------------------------------------------


def align_grids(sequences: list[Sequence]) -> Dataset:
    """Expand subjects onto the sorted union of their grids.

    Missing indices receive ``w = 0`` and a ``y = 0`` placeholder, which
    every family's block statistics ignore.
    """
    if not sequences:
        raise InputError("align_grids requires at least one sequence")
    union = np.unique(np.concatenate([s.x for s in sequences]))
    aligned = []
    for s in sequences:
        pos = np.searchsorted(union, s.x)
        y = np.zeros(len(union))
        w = np.zeros(len(union))
        y[pos] = s.y
        w[pos] = s.w
        aligned.append(Sequence(union.copy(), y, w, family=s.family, x0=s.x0))
    return Dataset(tuple(aligned))


# ---------------------------------------------------------------------------
# ingestion / serialization
# ---------------------------------------------------------------------------


def _rows_to_dataset(rows, family: str, source: str) -> Dataset:
    by_subject: dict[int, list[tuple[float, float, float, int]]] = {}
    for lineno, subject, x, y, w in rows:
        by_subject.setdefault(subject, []).append((x, y, w, lineno))
    sequences = []
    for subject in sorted(by_subject):
        recs = by_subject[subject]
        xs = [r[0] for r in recs]
        for prev, cur in zip(recs, recs[1:]):
            if cur[0] == prev[0]:
                raise InputError(
                    f"{source}: duplicate x value {cur[0]!r} for subject {subject} "
                    f"(line {cur[3]})"
                )
            if cur[0] < prev[0]:
                raise InputError(
                    f"{source}: x not strictly increasing for subject {subject} "
                    f"(value {cur[0]!r} at line {cur[3]})"
                )
        sequences.append(
            Sequence(
                np.array(xs),
                np.array([r[1] for r in recs]),
                np.array([r[2] for r in recs]),
                family=family,
            )
        )
    ds = align_grids(sequences)
    return Dataset(ds.subjects, subject_ids=tuple(sorted(by_subject)))


def _parse_number(text: str, column: str, lineno: int, source: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputError(
            f"{source}: line {lineno}: cannot parse {column}={text!r} as a number"
        ) from None


def load_sequences(path, format: str = "csv", family: str = "gaussian") -> Dataset:
    """Load a dataset from CSV (columns subject?, x, y, w?) or JSON records."""
    path = str(path)
    rows = []
    if format == "csv":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "x" not in reader.fieldnames or "y" not in reader.fieldnames:
                raise InputError(f"{path}: header row with x and y columns required")
            for lineno, rec in enumerate(reader, start=2):
                subject = int(rec["subject"]) if rec.get("subject") not in (None, "") else 0
                x = _parse_number(rec["x"], "x", lineno, path)
                y = _parse_number(rec["y"], "y", lineno, path)
                w = (
                    _parse_number(rec["w"], "w", lineno, path)
                    if rec.get("w") not in (None, "")
                    else 1.0
                )
                rows.append((lineno, subject, x, y, w))
    elif format == "json":
        with open(path) as fh:
            try:
                records = json.load(fh)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}: invalid JSON ({e})") from None
        if not isinstance(records, list):
            raise InputError(f"{path}: expected a JSON array of records")
        for idx, rec in enumerate(records):
            rows.append(
                (
                    idx,
                    int(rec.get("subject", 0)),
                    float(rec["x"]),
                    float(rec["y"]),
                    float(rec.get("w", 1.0)),
                )
            )
    else:
        raise InputError(f"unknown format {format!r}; expected csv or json")
    if not rows:
        raise InputError(f"{path}: no data rows")
    return _rows_to_dataset(rows, family, path)


def save_sequences(dataset: Dataset, path, format: str = "csv") -> None:
    """Write a dataset so that :func:`load_sequences` round-trips it."""
    path = str(path)
    records = []
    for sid, seq in zip(dataset.subject_ids, dataset.subjects):
        for x, y, w in zip(seq.x, seq.y, seq.w):
            records.append({"subject": int(sid), "x": float(x), "y": float(y), "w": float(w)})
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject", "x", "y", "w"])
            for rec in records:
                writer.writerow([rec["subject"], repr(rec["x"]), repr(rec["y"]), repr(rec["w"])])
    elif format == "json":
        with open(path, "w") as fh:
            json.dump(records, fh, indent=1)
    else:
        raise InputError(f"unknown format {format!r}; expected csv or json")


def load_group_labels(path, dataset: Dataset) -> Dataset:
    """Attach group labels from a two-column CSV (subject, group)."""
    mapping: dict[int, int] = {}
    with open(str(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"subject", "group"} <= set(reader.fieldnames):
            raise InputError(f"{path}: expected columns subject, group")
        for lineno, rec in enumerate(reader, start=2):
            try:
                mapping[int(rec["subject"])] = int(rec["group"])
            except (TypeError, ValueError):
                raise InputError(f"{path}: line {lineno}: malformed subject/group") from None
    try:
        labels = tuple(mapping[sid] for sid in dataset.subject_ids)
    except KeyError as e:
        raise InputError(f"{path}: missing group label for subject {e.args[0]}") from None
    return Dataset(dataset.subjects, group_labels=labels, subject_ids=dataset.subject_ids)
