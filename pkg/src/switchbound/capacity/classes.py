"""Component class descriptions and capacity report records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

from ..core import InvalidParameter
from ..models import Kernel


def _floor_dim(v: float) -> int:
    # dimensions are integers; absorb float error just below an integer
    if not math.isfinite(v):
        raise InvalidParameter("fat-shattering bound is not finite")
    return int(math.floor(v + 1e-9 * max(1.0, abs(v))))


def _positive(**kw):
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise InvalidParameter(f"{k} must be positive and finite, got {v}")


def _nonnegative(**kw):
    for k, v in kw.items():
        if not (v >= 0 and math.isfinite(v)):
            raise InvalidParameter(f"{k} must be nonnegative and finite, got {v}")


@dataclass(frozen=True)
class LinearClass:
    """{x -> <w, x> : ||w||_2 <= R_w} on inputs with ||x||_2 <= R_x."""

    d: int
    R_x: float
    R_w: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParameter("d must be an integer >= 1")
        _nonnegative(R_x=self.R_x, R_w=self.R_w)

    def fat_at(self, eps: float) -> int:
        return fat_shattering_linear(self.R_x, self.R_w, eps)


@dataclass(frozen=True)
class KernelClass:
    """RKHS ball of radius R_H; R_x bounds sqrt(K(x, x)) on the inputs."""

    R_x: float
    R_H: float
    kernel: Optional[Kernel] = None

    def __post_init__(self):
        _nonnegative(R_x=self.R_x, R_H=self.R_H)

    @property
    def R_w(self) -> float:
        return self.R_H

    def fat_at(self, eps: float) -> int:
        return fat_shattering_linear(self.R_x, self.R_H, eps)


@dataclass(frozen=True)
class FatPolyClass:
    """Any class whose fat-shattering dimension obeys d(eps) <= alpha * eps**-beta."""

    alpha: float
    beta: float

    def __post_init__(self):
        _positive(alpha=self.alpha)
        if not self.beta >= 1:
            raise InvalidParameter(f"beta must be >= 1, got {self.beta}")

    def fat_at(self, eps: float) -> int:
        if not eps > 0:
            raise InvalidParameter("scale must be positive")
        return _floor_dim(self.alpha * eps ** (-self.beta))


ComponentClassSpec = Union[LinearClass, KernelClass, FatPolyClass]


def fat_shattering_linear(R_x: float, R_w: float, eps: float) -> int:
    """floor((R_x R_w / eps)^2), the fat-shattering bound for norm-bounded linear classes."""
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    if R_x < 0 or R_w < 0:
        raise InvalidParameter("radii must be nonnegative")
    return _floor_dim((R_x * R_w / eps) ** 2)


@dataclass(frozen=True)
class CapacityReport:
    kind: str  # rademacher | fat | entropy | growth | cover
    value: float
    formula_id: str
    eps: Optional[float] = None
    n: Optional[int] = None
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in {"rademacher", "fat", "entropy", "growth", "cover"}:
            raise InvalidParameter(f"unknown capacity kind {self.kind!r}")
        if not self.value >= 0:
            raise InvalidParameter("capacity values are nonnegative")
        if self.kind == "cover" and self.value < 1:
            raise InvalidParameter("covering numbers are >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "formula_id": self.formula_id,
            "eps": self.eps,
            "n": self.n,
            "inputs": self.inputs,
        }
