"""Oracles and dataset ingestion."""

from __future__ import annotations

import csv
import json
import math
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

SQRT3 = math.sqrt(3.0)


class OracleProtocolError(RuntimeError):
    """The external oracle misbehaved: bad payload, timeout or exit."""


class DatasetError(ValueError):
    pass


# ---------------------------------------------------------------- synthetic


def quartic_sine(x: float, noise_std: float = 0.0, rng=None) -> float:
    y = x ** 4 * math.sin(x ** 2 / 3.0) ** 2
    if noise_std > 0.0:
        y += noise_std * rng.standard_normal()
    return y


def circle_infeasible(x) -> bool:
    return 3.0 * x[1] > SQRT3 * abs(x[0])


def circle_indicator(x, constrained: bool = False) -> Optional[np.ndarray]:
    """Unit-disc membership as a single 0/1 target; None in the excluded wedge."""
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError("circle indicator needs a 2-vector")
    if constrained and circle_infeasible(x):
        return None
    return np.array([1.0 if x[0] ** 2 + x[1] ** 2 <= 1.0 else 0.0])


@dataclass
class SyntheticOracle:
    kind: str                       # quartic-sine | circle | circle-constrained
    noise_std: float = 0.0
    rng: Optional[np.random.Generator] = None

    KINDS = ("quartic-sine", "circle", "circle-constrained")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown synthetic problem {self.kind!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.noise_std > 0 and self.rng is None:
            self.rng = np.random.default_rng()

    def __call__(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if self.kind == "quartic-sine":
            return np.array([quartic_sine(float(x[0]), self.noise_std, self.rng)])
        return circle_indicator(x, constrained=self.kind == "circle-constrained")

    def truth(self, X) -> np.ndarray:
        """Noise-free targets at the rows of ``X`` (NaN where undefined)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "quartic-sine":
            x = X[:, 0]
            return (x ** 4 * np.sin(x ** 2 / 3.0) ** 2)[:, None]
        inside = (X ** 2).sum(axis=1) <= 1.0
        y = inside.astype(float)[:, None]
        if self.kind == "circle-constrained":
            y[3.0 * X[:, 1] > SQRT3 * np.abs(X[:, 0])] = np.nan
        return y


class DatasetOracle:
    """Answers queries with stored labels, matched by exact feature vector."""

    def __init__(self, pool, labels):
        self.pool = np.atleast_2d(np.asarray(pool, dtype=float))
        self.labels = np.asarray(labels, dtype=float).reshape(self.pool.shape[0], -1)
        self._index = {}
        for j, row in enumerate(self.pool):
            self._index.setdefault(row.tobytes(), j)

    def index_of(self, x) -> int:
        key = np.asarray(x, dtype=float).ravel().tobytes()
        try:
            return self._index[key]
        except KeyError:
            raise KeyError("query is not a pool point") from None

    def __call__(self, x):
        return self.labels[self.index_of(x)].copy()


# ----------------------------------------------------------------- external


class ExternalOracle:
    """Child process answering one JSON line per query on stdin/stdout.

    Request ``{"x": [...]}``; response ``{"y": [...]}`` or
    ``{"infeasible": true}``. One request is in flight at a time.
    """

    def __init__(self, cmd, timeout: float = 60.0, cwd=None):
        argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self.timeout = timeout
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.PIPE, text=True, encoding="utf-8", bufsize=1, cwd=cwd)
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _stderr_tail(self) -> str:
        if self.proc.poll() is None:
            return ""
        try:
            return self.proc.stderr.read()[-500:]
        except (OSError, ValueError):
            return ""

    def query(self, x):
        x = np.asarray(x, dtype=float).ravel()
        request = json.dumps({"x": [float(v) for v in x]}) + "\n"
        try:
            self.proc.stdin.write(request)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise OracleProtocolError(f"oracle process not accepting input: {exc}") from exc
        try:
            raw = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise OracleProtocolError(
                f"oracle did not answer within {self.timeout}s for {request.strip()}") from None
        if raw is None:
            raise OracleProtocolError(
                f"oracle process exited (code {self.proc.poll()}): {self._stderr_tail()}")
        return parse_response(raw)

    __call__ = query

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        for stream in (self.proc.stdout, self.proc.stderr):
            if stream:
                stream.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def parse_response(raw: str):
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise OracleProtocolError(f"malformed response: {raw!r}") from exc
    if not isinstance(msg, dict):
        raise OracleProtocolError(f"malformed response: {raw!r}")
    if msg.get("infeasible") is True and "y" not in msg:
        return None
    y = msg.get("y")
    if isinstance(y, (int, float)) and not isinstance(y, bool):
        y = [y]
    if (not isinstance(y, list) or not y
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in y)):
        raise OracleProtocolError(f"malformed response: {raw!r}")
    out = np.array(y, dtype=float)
    if not np.all(np.isfinite(out)):
        raise OracleProtocolError(f"non-finite target in response: {raw!r}")
    return out


def external_query(oracle: ExternalOracle, x):
    return oracle.query(x)


# ------------------------------------------------------------------ datasets


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    feature_names: list
    target_names: list
    task: str
    categories: dict = field(default_factory=dict)   # column -> ordered values
    labels: list = field(default_factory=list)       # class order (classification)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_targets(self) -> int:
        return self.Y.shape[1]

    def decode(self, column: str) -> list:
        """Recover the original values of a one-hot encoded feature column."""
        values = self.categories[column]
        cols = [self.feature_names.index(f"{column}={v}") for v in values]
        return [values[int(i)] for i in np.argmax(self.X[:, cols], axis=1)]

    def class_labels(self) -> list:
        if len(self.labels) == 2 and self.Y.shape[1] == 1:
            return [self.labels[int(v > 0.5)] for v in self.Y[:, 0]]
        return [self.labels[int(i)] for i in np.argmax(self.Y, axis=1)]


def _first_appearance(values) -> list:
    seen = {}
    for v in values:
        seen.setdefault(v, None)
    return list(seen)


def _parse_float(cell, row, column):
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"row {row}, column {column!r}: cannot parse {cell!r}") from None
    if not math.isfinite(value):
        raise DatasetError(f"row {row}, column {column!r}: non-finite value {cell!r}")
    return value


def _one_hot(values, order):
    pos = {v: i for i, v in enumerate(order)}
    out = np.zeros((len(values), len(order)))
    out[np.arange(len(values)), [pos[v] for v in values]] = 1.0
    return out


def load_csv(path, target, categorical: Sequence[str] = (), ignore: Sequence[str] = (),
             task: str = "regression") -> Dataset:
    """Read a CSV with a header row into features and targets.

    Numeric columns are parsed as floats, ``categorical`` columns one-hot
    encoded (categories in order of first appearance). ``target`` names one
    column or a list of columns. For classification the single target column
    becomes one-hot labels, or one 0/1 output when there are two classes (1
    for the class seen second).
    """
    if task not in ("regression", "classification"):
        raise DatasetError(f"unknown task {task!r}")
    targets = [target] if isinstance(target, str) else list(target)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = [r for r in reader if any(c.strip() for c in r)]
    for name in [*targets, *categorical, *ignore]:
        if name not in header:
            raise DatasetError(f"unknown column {name!r}")
    if task == "classification" and len(targets) != 1:
        raise DatasetError("classification needs exactly one target column")
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DatasetError(f"row {r}: expected {len(header)} cells, got {len(row)}")
    col = {name: [row[i].strip() for row in rows] for i, name in enumerate(header)}

    blocks, names, categories = [], [], {}
    for name in header:
        if name in targets or name in ignore:
            continue
        if name in categorical:
            order = _first_appearance(col[name])
            categories[name] = order
            blocks.append(_one_hot(col[name], order))
            names.extend(f"{name}={v}" for v in order)
        else:
            blocks.append(np.array([[_parse_float(c, r, name)]
                                    for r, c in enumerate(col[name], start=2)]))
            names.append(name)
    if not blocks:
        raise DatasetError("no feature columns")
    X = np.hstack(blocks)

    labels = []
    if task == "classification":
        values = col[targets[0]]
        labels = _first_appearance(values)
        if len(labels) < 2:
            raise DatasetError("classification target has a single class")
        if len(labels) == 2:
            Y = np.array([[float(v == labels[1])] for v in values])
            target_names = [f"{targets[0]}={labels[1]}"]
        else:
            Y = _one_hot(values, labels)
            target_names = [f"{targets[0]}={v}" for v in labels]
    else:
        Y = np.array([[_parse_float(col[t][r - 2], r, t) for t in targets]
                      for r in range(2, len(rows) + 2)]).reshape(len(rows), len(targets))
        target_names = list(targets)
    return Dataset(X, Y, names, target_names, task, categories, labels)


def load_schema(path) -> dict:
    """Schema file: ``{"target": ..., "categorical": [...], "ignore": [...]}``."""
    with open(path, encoding="utf-8") as fh:
        schema = json.load(fh)
    if not isinstance(schema, dict) or "target" not in schema:
        raise DatasetError("schema needs a 'target' entry")
    unknown = set(schema) - {"target", "categorical", "ignore", "task"}
    if unknown:
        raise DatasetError(f"unknown schema keys: {sorted(unknown)}")
    return schema


BUNDLED = Path(__file__).parent / "datasets"


def iris_path() -> Path:
    return BUNDLED / "iris.csv"
