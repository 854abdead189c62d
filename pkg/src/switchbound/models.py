"""PWS and switching model representations, prediction and JSON serialization.

Modes are indexed from 0. Classifiers are sets of linear score vectors
``w_k`` with ``g(x) = argmax_k <w_k, x>``; ties go to the lowest index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .core import CANONICAL_M, InvalidInput, InvalidParameter, NumericalError, clip

PSD_TOL = 1e-10


@dataclass(frozen=True)
class Kernel:
    """Named positive semi-definite kernel.

    Built-ins: ``gaussian`` (``bandwidth``), ``polynomial`` (``degree``,
    ``offset``) and ``linear``.
    """

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _KERNELS:
            raise InvalidParameter(f"unknown kernel {self.name!r}")
        if self.name == "gaussian" and not self.params.get("bandwidth", 1.0) > 0:
            raise InvalidParameter("gaussian bandwidth must be positive")
        if self.name == "polynomial":
            deg = self.params.get("degree", 2)
            if int(deg) != deg or deg < 1:
                raise InvalidParameter("polynomial degree must be a positive integer")
            if self.params.get("offset", 1.0) < 0:
                raise InvalidParameter("polynomial offset must be nonnegative")

    def __call__(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        return _KERNELS[self.name](A, B, self.params)

    def diag(self, A) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return np.array([self(a, a)[0, 0] for a in A])

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        return cls(d["name"], dict(d.get("params", {})))

    @classmethod
    def gaussian(cls, bandwidth: float = 1.0) -> "Kernel":
        return cls("gaussian", {"bandwidth": float(bandwidth)})

    @classmethod
    def polynomial(cls, degree: int = 2, offset: float = 1.0) -> "Kernel":
        return cls("polynomial", {"degree": int(degree), "offset": float(offset)})

    @classmethod
    def linear(cls) -> "Kernel":
        return cls("linear", {})


def _gaussian(A, B, params):
    h = float(params.get("bandwidth", 1.0))
    sq = np.sum(A**2, 1)[:, None] + np.sum(B**2, 1)[None, :] - 2.0 * A @ B.T
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * h * h))


def _polynomial(A, B, params):
    return (A @ B.T + float(params.get("offset", 1.0))) ** int(params.get("degree", 2))


def _linear(A, B, params):
    return A @ B.T


_KERNELS = {"gaussian": _gaussian, "polynomial": _polynomial, "linear": _linear}


@dataclass(frozen=True)
class LinearClassifier:
    W: np.ndarray  # shape (C, d)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if W.ndim != 2 or W.shape[0] < 1:
            raise InvalidInput("classifier needs at least one score vector")
        W = W.copy()
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def C(self) -> int:
        return int(self.W.shape[0])

    @property
    def d(self) -> int:
        return int(self.W.shape[1])

    @classmethod
    def trivial(cls, d: int) -> "LinearClassifier":
        return cls(np.zeros((1, d)))


@dataclass(frozen=True)
class LinearComponent:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel().copy()
        if not np.all(np.isfinite(w)):
            raise InvalidInput("component weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def d(self) -> int:
        return int(self.w.shape[0])

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise InvalidInput(f"input dimension {X.shape[1]} != component dimension {self.d}")
        return X @ self.w

    def norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def to_dict(self) -> dict:
        return {"type": "linear", "w": self.w.tolist()}


@dataclass(frozen=True)
class KernelComponent:
    """Kernel expansion ``f(x) = sum_i coef_i K(support_i, x)``."""

    support: np.ndarray
    coef: np.ndarray
    kernel: Kernel

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.support, dtype=float)).copy()
        a = np.asarray(self.coef, dtype=float).ravel().copy()
        if S.shape[0] != a.shape[0]:
            raise InvalidInput("one dual coefficient per support point required")
        S.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "support", S)
        object.__setattr__(self, "coef", a)

    @property
    def d(self) -> int:
        return int(self.support.shape[1])

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise InvalidInput(f"input dimension {X.shape[1]} != component dimension {self.d}")
        if self.coef.size == 0:
            return np.zeros(X.shape[0])
        return self.kernel(X, self.support) @ self.coef

    def norm(self) -> float:
        return rkhs_norm(self)

    def to_dict(self) -> dict:
        return {
            "type": "kernel",
            "kernel": self.kernel.to_dict(),
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
        }


Component = Union[LinearComponent, KernelComponent]


def _component_from_dict(d: dict) -> Component:
    if d["type"] == "linear":
        return LinearComponent(d["w"])
    if d["type"] == "kernel":
        return KernelComponent(d["support"], d["coef"], Kernel.from_dict(d["kernel"]))
    raise InvalidInput(f"unknown component type {d['type']!r}")


def _check_components(components) -> tuple:
    comps = tuple(components)
    if not comps:
        raise InvalidInput("a model needs at least one component")
    dims = {c.d for c in comps}
    if len(dims) != 1:
        raise InvalidInput("all components must share the input dimension")
    return comps


@dataclass(frozen=True)
class SwitchingModel:
    components: tuple
    M: float = CANONICAL_M

    def __post_init__(self):
        object.__setattr__(self, "components", _check_components(self.components))

    @property
    def C(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d

    def values(self, X) -> np.ndarray:
        """Clipped component outputs, shape (C, n)."""
        return clip(np.vstack([c.values(X) for c in self.components]), self.M)

    def to_dict(self) -> dict:
        return {
            "type": "switching",
            "C": self.C,
            "M": self.M,
            "classifier": None,
            "components": [c.to_dict() for c in self.components],
        }


@dataclass(frozen=True)
class PwsModel:
    classifier: LinearClassifier
    components: tuple
    M: float = CANONICAL_M

    def __post_init__(self):
        comps = _check_components(self.components)
        if self.classifier.C != len(comps):
            raise InvalidInput(
                f"classifier has {self.classifier.C} modes but {len(comps)} components given"
            )
        if self.classifier.d != comps[0].d:
            raise InvalidInput("classifier and components disagree on input dimension")
        object.__setattr__(self, "components", comps)

    @property
    def C(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d

    def modes(self, X) -> np.ndarray:
        return classify(self.classifier, X)

    def values(self, X) -> np.ndarray:
        """Clipped PWS outputs ``f_{g(x)}(x)``, shape (n,)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        modes = self.modes(X)
        out = np.empty(X.shape[0])
        for k, comp in enumerate(self.components):
            sel = modes == k
            if np.any(sel):
                out[sel] = comp.values(X[sel])
        return clip(out, self.M)

    def as_switching(self) -> SwitchingModel:
        return SwitchingModel(self.components, self.M)

    def to_dict(self) -> dict:
        return {
            "type": "pws",
            "C": self.C,
            "M": self.M,
            "classifier": self.classifier.W.tolist(),
            "components": [c.to_dict() for c in self.components],
        }


Model = Union[PwsModel, SwitchingModel]


def classify(g: LinearClassifier, x):
    """Mode index argmax_k <w_k, x> (lowest index on ties).

    A 1-D ``x`` gives an int; a 2-D array of inputs gives an int array.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != g.d:
        raise InvalidInput(f"input dimension {X.shape[1]} != classifier dimension {g.d}")
    # np.argmax returns the first maximal index
    modes = np.argmax(X @ g.W.T, axis=1)
    return int(modes[0]) if single else modes


def predict_pws(m: PwsModel, x):
    X = np.asarray(x, dtype=float)
    out = m.values(np.atleast_2d(X))
    return float(out[0]) if X.ndim == 1 else out


def predict_switching(m: SwitchingModel, x):
    """Clipped component outputs: shape (C,) for one input, (n, C) for many."""
    X = np.asarray(x, dtype=float)
    out = m.values(np.atleast_2d(X)).T
    return out[0] if X.ndim == 1 else out


def rkhs_norm(c: KernelComponent) -> float:
    """sqrt(a^T K a) over the support points."""
    if c.coef.size == 0:
        return 0.0
    K = c.kernel(c.support, c.support)
    q = float(c.coef @ K @ c.coef)
    if c.coef.size > 1:
        lam_min = float(np.linalg.eigvalsh(0.5 * (K + K.T))[0])
        scale = max(1.0, float(np.max(np.abs(np.diag(K)))))
        if lam_min < -PSD_TOL * scale:
            raise NumericalError(f"Gram matrix is not PSD (min eigenvalue {lam_min:.3g})")
    if q < -PSD_TOL * max(1.0, float(np.sum(c.coef**2))):
        raise NumericalError(f"negative quadratic form {q:.3g}")
    return math.sqrt(max(q, 0.0))


def model_to_dict(m: Model) -> dict:
    return m.to_dict()


def model_from_dict(d: dict) -> Model:
    comps = [_component_from_dict(c) for c in d["components"]]
    M = float(d.get("M", CANONICAL_M))
    if "C" in d and int(d["C"]) != len(comps):
        raise InvalidInput("C does not match the number of components")
    if d["type"] == "switching":
        return SwitchingModel(tuple(comps), M)
    if d["type"] == "pws":
        return PwsModel(LinearClassifier(d["classifier"]), tuple(comps), M)
    raise InvalidInput(f"unknown model type {d['type']!r}")


def dumps_model(m: Model, **kw) -> str:
    return json.dumps(m.to_dict(), **kw)


def loads_model(s: str) -> Model:
    return model_from_dict(json.loads(s))
