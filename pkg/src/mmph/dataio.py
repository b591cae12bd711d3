"""Dataset ingestion, standardization and the JSON model document."""

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestionError
from .jointmodel import JointModel
from .phasetype import DphRep, PhRep
from .samples import JointData

__all__ = ["Dataset", "ModelDocument", "ingest", "write_atomic", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Dataset:
    """Raw ``(y, n)`` records plus the shift that maps them to ``y - shift >= 1``."""

    y_raw: np.ndarray
    n: np.ndarray
    shift: float
    label: str = ""
    y_name: str = "y"
    n_name: str = "n"

    @classmethod
    def from_raw(cls, y_raw, n, label="", shift=None, **names):
        y_raw = np.asarray(y_raw, dtype=float)
        n = np.asarray(n, dtype=np.int64)
        if y_raw.size and shift is None:
            shift = float(y_raw.min()) - 1.0
        return cls(y_raw, n, 0.0 if shift is None else float(shift), label, **names)

    @property
    def y(self):
        return self.y_raw - self.shift

    def standardized(self):
        return JointData(self.y, self.n)

    def __len__(self):
        return self.y_raw.size


def _fail(msg, line=None, column=None):
    where = []
    if line is not None:
        where.append(f"line {line}")
    if column is not None:
        where.append(f"column {column!r}")
    prefix = ", ".join(where)
    raise IngestionError(f"{prefix}: {msg}" if prefix else msg)


def ingest(path, y_column="y", n_column="n", delimiter=",", label=None):
    """Read a delimited file with a header row; reject rows with ``n < 1``."""
    ys, ns = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            _fail("file is empty (header row required)", 1)
        header = [h.strip() for h in header]
        for col in (y_column, n_column):
            if col not in header:
                _fail(f"missing column (header has {header})", 1, col)
        iy, i_n = header.index(y_column), header.index(n_column)
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= max(iy, i_n):
                _fail("row has too few fields", line_no)
            y_txt, n_txt = row[iy].strip(), row[i_n].strip()
            if not y_txt:
                _fail("missing value", line_no, y_column)
            if not n_txt:
                _fail("missing value", line_no, n_column)
            try:
                y = float(y_txt)
            except ValueError:
                _fail(f"not a number: {y_txt!r}", line_no, y_column)
            try:
                n_val = float(n_txt)
            except ValueError:
                _fail(f"not a number: {n_txt!r}", line_no, n_column)
            if not math.isfinite(y):
                _fail(f"non-finite value {y_txt!r}", line_no, y_column)
            if not math.isfinite(n_val) or n_val != int(n_val):
                _fail(f"count must be an integer, got {n_txt!r}", line_no, n_column)
            if n_val < 1:
                _fail(f"count must be >= 1, got {n_txt!r}", line_no, n_column)
            ys.append(y)
            ns.append(int(n_val))
    if not ys:
        _fail("no data rows")
    name = label if label is not None else os.path.basename(str(path))
    return Dataset.from_raw(ys, ns, name, y_name=y_column, n_name=n_column)


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _matrix(rows):
    return [[float(v) for v in row] for row in np.asarray(rows)]


@dataclass
class ModelDocument:
    """Serializable joint model plus optional independent baseline and fit metadata."""

    p: int
    eplus_size: int
    alpha: list
    t_mat: list
    shift: float | None = None
    metadata: dict = field(default_factory=dict)
    independent: dict | None = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_model(cls, model, shift=None, metadata=None, independent=None):
        indep = None
        if independent is not None:
            ph, dph = independent
            indep = {
                "ph_alpha": [float(v) for v in ph.alpha],
                "ph_t_mat": _matrix(ph.t_mat),
                "dph_alpha": [float(v) for v in dph.alpha],
                "dph_q_mat": _matrix(dph.q_mat),
            }
        return cls(
            p=model.p,
            eplus_size=model.eplus_size,
            alpha=[float(v) for v in model.alpha],
            t_mat=_matrix(model.t_mat),
            shift=None if shift is None else float(shift),
            metadata=dict(metadata or {}),
            independent=indep,
        )

    def model(self):
        m = JointModel(PhRep(self.alpha, self.t_mat), self.eplus_size)
        if m.p != self.p:
            raise IngestionError(f"model document declares p={self.p} but has {m.p} states")
        return m

    def independent_model(self):
        if not self.independent:
            return None
        d = self.independent
        return PhRep(d["ph_alpha"], d["ph_t_mat"]), DphRep(d["dph_alpha"], d["dph_q_mat"])

    def to_dict(self):
        out = {
            "schema_version": self.schema_version,
            "p": self.p,
            "eplus_size": self.eplus_size,
            "alpha": self.alpha,
            "t_mat": self.t_mat,
            "shift": self.shift,
            "metadata": self.metadata,
        }
        if self.independent is not None:
            out["independent"] = self.independent
        return out

    def to_json(self):
        # json writes floats with repr, which round-trips exactly.
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise IngestionError(f"model document is not valid JSON: {exc}") from exc
        version = raw.get("schema_version")
        if version != SCHEMA_VERSION:
            raise IngestionError(f"unsupported model schema version {version!r}")
        try:
            return cls(
                p=int(raw["p"]),
                eplus_size=int(raw["eplus_size"]),
                alpha=[float(v) for v in raw["alpha"]],
                t_mat=[[float(v) for v in row] for row in raw["t_mat"]],
                shift=None if raw.get("shift") is None else float(raw["shift"]),
                metadata=dict(raw.get("metadata", {})),
                independent=raw.get("independent"),
                schema_version=version,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestionError(f"malformed model document: {exc}") from exc

    def save(self, path):
        write_atomic(path, self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())
