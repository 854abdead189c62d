"""Domain types, clipping, empirical risks, pseudo-metrics and dataset rescaling.

All risks are computed in rescaled units where outputs live in [-M, M]
with M = 1/2, so that every per-sample l_p loss of a clipped prediction
lies in [0, 1].
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

CANONICAL_M = 0.5


class SwitchboundError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(SwitchboundError, ValueError):
    pass


class InvalidInput(SwitchboundError, ValueError):
    pass


class NumericalError(SwitchboundError, ArithmeticError):
    pass


class ResourceLimit(SwitchboundError, RuntimeError):
    pass


class DataError(InvalidInput):
    """Malformed dataset file; ``line`` is the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Norm(enum.Enum):
    INF = "inf"

    def __str__(self) -> str:
        return self.value


#: Sup-norm exponent for :func:`pseudo_metric` and the covering routines.
INF = Norm.INF

QExponent = Union[float, int, Norm]


def parse_q(q) -> QExponent:
    """Accept 1 <= q < inf as a number, or INF / "inf" / math.inf."""
    if q is INF:
        return INF
    if isinstance(q, str):
        if q.strip().lower() in {"inf", "infinity", "oo"}:
            return INF
        q = float(q)
    q = float(q)
    if math.isinf(q) and q > 0:
        return INF
    if not q >= 1.0:
        raise InvalidParameter(f"q must be >= 1 or INF, got {q}")
    return q


def q_root(C: int, q: QExponent) -> float:
    """C**(1/q), with the q = INF limit equal to 1."""
    q = parse_q(q)
    if q is INF:
        return 1.0
    return float(C) ** (1.0 / q)


@dataclass(frozen=True)
class ScaleInfo:
    """Affine map raw_y = offset + factor * scaled_y."""

    offset: float = 0.0
    factor: float = 1.0

    def to_raw(self, ys):
        return self.offset + self.factor * np.asarray(ys, dtype=float)

    def to_scaled(self, ys):
        return (np.asarray(ys, dtype=float) - self.offset) / self.factor

    def risk_to_raw(self, value: float, p: float) -> float:
        """Re-express an l_p quantity in original output units."""
        return float(value) * self.factor**p

    def to_dict(self) -> dict:
        return {"offset": self.offset, "factor": self.factor}


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable (x, y) sample.

    ``xs`` has shape (n, d) and ``ys`` shape (n,). ``M`` is the output
    half-range; every ``|y_i| <= M``.
    """

    xs: np.ndarray
    ys: np.ndarray
    M: float = CANONICAL_M
    scale: ScaleInfo = field(default_factory=ScaleInfo)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        if xs.ndim != 2:
            raise InvalidInput("xs must be a 2-D array of shape (n, d)")
        if ys.ndim != 1:
            raise InvalidInput("ys must be 1-D")
        if xs.shape[0] == 0:
            raise InvalidInput("empty dataset")
        if xs.shape[0] != ys.shape[0]:
            raise InvalidInput(f"{xs.shape[0]} inputs but {ys.shape[0]} outputs")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise InvalidInput("dataset contains NaN or Inf")
        if not self.M > 0:
            raise InvalidParameter(f"M must be positive, got {self.M}")
        if np.max(np.abs(ys)) > self.M * (1 + 1e-12):
            raise InvalidInput(f"outputs exceed the half-range M={self.M}")
        object.__setattr__(self, "xs", _readonly(xs))
        object.__setattr__(self, "ys", _readonly(ys))
        object.__setattr__(self, "M", float(self.M))

    @classmethod
    def raw(cls, xs, ys) -> "Dataset":
        """Wrap unscaled data; M is set to max |y| (1/2 if all outputs are 0)."""
        ys = np.asarray(ys, dtype=float)
        if ys.size == 0:
            raise InvalidInput("empty dataset")
        m = float(np.max(np.abs(ys))) if np.all(np.isfinite(ys)) else 0.0
        return cls(xs, ys, M=m if m > 0 else CANONICAL_M)

    @property
    def n(self) -> int:
        return int(self.xs.shape[0])

    @property
    def d(self) -> int:
        return int(self.xs.shape[1])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.xs[idx], self.ys[idx], M=self.M, scale=self.scale)

    def with_bias(self) -> "Dataset":
        """Append a constant-1 feature so linear models become affine."""
        xs = np.hstack([self.xs, np.ones((self.n, 1))])
        return Dataset(xs, self.ys, M=self.M, scale=self.scale)

    @property
    def max_input_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.xs, axis=1)))


@dataclass(frozen=True)
class LossParams:
    p: float = 2.0

    def __post_init__(self):
        if not (self.p >= 1.0 and math.isfinite(self.p)):
            raise InvalidParameter(f"loss exponent p must lie in [1, inf), got {self.p}")


def clip(t, M: float = CANONICAL_M):
    """Truncate ``t`` (scalar or array) to [-M, M]."""
    if not M > 0:
        raise InvalidParameter(f"clip level M must be positive, got {M}")
    if np.isscalar(t):
        return float(min(max(t, -M), M))
    return np.clip(np.asarray(t, dtype=float), -M, M)


def rescale_dataset(raw: Dataset) -> Dataset:
    """Map outputs affinely onto [-1/2, 1/2].

    The center is the midrange and the factor the range of ``raw.ys``; a
    constant output vector maps to 0 with factor 1. Any scaling already
    recorded on ``raw`` is composed into the returned ``scale``.
    """
    ys = np.asarray(raw.ys, dtype=float)
    if ys.size == 0:
        raise InvalidInput("empty dataset")
    lo, hi = float(np.min(ys)), float(np.max(ys))
    center = 0.5 * (lo + hi)
    factor = hi - lo
    if not factor > 0:
        factor = 1.0
    scaled = np.clip((ys - center) / factor, -CANONICAL_M, CANONICAL_M)
    prev = raw.scale
    composed = ScaleInfo(offset=prev.offset + prev.factor * center, factor=prev.factor * factor)
    return Dataset(raw.xs, scaled, M=CANONICAL_M, scale=composed)


def _as_values(v, n: int | None = None, what: str = "values") -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise InvalidInput(f"{what} must be 1-D")
    if n is not None and a.shape[0] != n:
        raise InvalidInput(f"{what} has length {a.shape[0]}, expected {n}")
    return a


def empirical_lp_risk(fvals, data: Dataset, loss: LossParams | float = 2.0) -> float:
    """(1/n) sum_i |y_i - f(x_i)|^p. Values are used as given (not clipped)."""
    p = loss.p if isinstance(loss, LossParams) else LossParams(float(loss)).p
    f = _as_values(fvals, data.n, "fvals")
    return float(np.mean(np.abs(data.ys - f) ** p))


def empirical_switching_risk(fvals_per_mode, data: Dataset, loss: LossParams | float = 2.0) -> float:
    """(1/n) sum_i min_k |y_i - f_k(x_i)|^p.

    ``fvals_per_mode`` is a sequence of C value vectors or a (C, n) array.
    """
    p = loss.p if isinstance(loss, LossParams) else LossParams(float(loss)).p
    F = np.asarray(fvals_per_mode, dtype=float)
    if F.ndim == 1 and F.size > 0:
        F = F.reshape(1, -1)
    if F.ndim != 2 or F.shape[0] == 0:
        raise InvalidInput("need at least one mode (C >= 1)")
    if F.shape[1] != data.n:
        raise InvalidInput(f"mode values have length {F.shape[1]}, expected {data.n}")
    return float(np.mean(np.min(np.abs(data.ys[None, :] - F) ** p, axis=0)))


def pseudo_metric(f, g, q: QExponent = 2.0) -> float:
    """Empirical d_q distance between two value vectors."""
    q = parse_q(q)
    a = _as_values(f, what="f")
    b = _as_values(g, a.shape[0], "g")
    diff = np.abs(a - b)
    if q is INF:
        return float(np.max(diff))
    return float(np.mean(diff**q) ** (1.0 / q))


def pairwise_distances(rows: np.ndarray, q: QExponent = 2.0) -> np.ndarray:
    """Matrix of d_q distances between the rows of an (m, n) array."""
    q = parse_q(q)
    R = np.asarray(rows, dtype=float)
    diff = np.abs(R[:, None, :] - R[None, :, :])
    if q is INF:
        return diff.max(axis=2)
    return np.mean(diff**q, axis=2) ** (1.0 / q)


def load_csv(path: str | Path) -> Dataset:
    """Read a ``x1,...,xd,y`` CSV file into a raw (unscaled) Dataset."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file", line=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "y":
            raise DataError("header must be x1,...,xd,y", line=1)
        expected = [f"x{j + 1}" for j in range(len(header) - 1)]
        if header[:-1] != expected:
            raise DataError("header must be x1,...,xd,y", line=1)
        width = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise DataError(f"expected {width} fields, got {len(row)}", line=lineno)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise DataError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError("NaN or Inf value", line=lineno)
            rows.append(vals)
    if not rows:
        raise DataError("no data rows", line=2)
    arr = np.array(rows, dtype=float)
    return Dataset.raw(arr[:, :-1], arr[:, -1])


def save_csv(data: Dataset, path: str | Path, raw_units: bool = False) -> None:
    ys = data.scale.to_raw(data.ys) if raw_units else data.ys
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(data.d)] + ["y"])
        for x, y in zip(data.xs, ys):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def as_rows(values: Sequence) -> np.ndarray:
    """Stack a sequence of value vectors into a 2-D float array."""
    R = np.asarray(values, dtype=float)
    if R.ndim != 2:
        raise InvalidInput("expected a list of equal-length value vectors")
    return R
