"""Empirical Rademacher complexity: Monte Carlo, exhaustive and closed-form."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..core import InvalidInput, InvalidParameter, ResourceLimit
from ..models import Kernel
from .classes import ComponentClassSpec, FatPolyClass, KernelClass, LinearClass

MAX_ENUM_N = 20
_CHUNK = 4096


def make_rng(seed, *key: int) -> np.random.Generator:
    """Counter-based Philox generator for ``seed`` and an optional spawn key.

    Streams for different keys are independent, so trials or chunks can be
    generated in any order (or in parallel) with identical results.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    draws: int
    seed: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "draws": self.draws, "seed": self.seed}


def sign_matrix(start: int, stop: int, n: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the 2^n enumeration of {-1, +1}^n."""
    idx = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(n, dtype=np.int64)[None, :]) & 1
    return (2 * bits - 1).astype(float)


def rademacher_enumerate(sup_fn: Callable[[np.ndarray], np.ndarray], n: int) -> float:
    """Average of ``sup_fn`` over all 2^n sign vectors.

    ``sup_fn`` maps an (m, n) array of sign vectors to the m suprema.
    """
    if n > MAX_ENUM_N:
        raise ResourceLimit(f"exact enumeration needs n <= {MAX_ENUM_N}, got {n}")
    if n < 1:
        raise InvalidInput("need at least one sample point")
    total = 2**n
    parts = []
    for start in range(0, total, _CHUNK):
        S = sign_matrix(start, min(total, start + _CHUNK), n)
        parts.extend(np.asarray(sup_fn(S), dtype=float).tolist())
    return math.fsum(parts) / total


def _finite_rows(fc) -> np.ndarray:
    rows = getattr(fc, "rows", fc)
    R = np.asarray(rows, dtype=float)
    if R.ndim != 2 or R.shape[0] == 0:
        raise InvalidInput("finite class must be a nonempty (m, n) array")
    return R


def rademacher_exact(fc) -> float:
    """Exact empirical Rademacher complexity of a finite class by 2^n enumeration."""
    R = _finite_rows(fc)
    n = R.shape[1]
    return rademacher_enumerate(lambda S: np.max(S @ R.T, axis=1) / n, n)


def _linear_sup(X: np.ndarray, R: float) -> Callable[[np.ndarray], np.ndarray]:
    n = X.shape[0]
    return lambda S: R / n * np.linalg.norm(S @ X, axis=1)


def _kernel_sup(K: np.ndarray, R: float) -> Callable[[np.ndarray], np.ndarray]:
    n = K.shape[0]

    def sup(S):
        q = np.einsum("ij,jk,ik->i", S, K, S)
        return R / n * np.sqrt(np.maximum(q, 0.0))

    return sup


def class_sup(spec: ComponentClassSpec, xs, kernel: Optional[Kernel] = None):
    """Closed-form supremum over a norm ball, as a function of sign vectors.

    For the linear ball, ``sup_{||w|| <= R} (1/n) sum_i s_i <w, x_i> =
    (R/n) ||sum_i s_i x_i||`` by Cauchy-Schwarz; the kernel ball uses the
    Gram matrix in place of the inner products.
    """
    X = np.atleast_2d(np.asarray(xs, dtype=float))
    if isinstance(spec, LinearClass):
        if X.shape[1] != spec.d:
            raise InvalidInput(f"inputs have dimension {X.shape[1]}, class expects {spec.d}")
        return _linear_sup(X, spec.R_w)
    if isinstance(spec, KernelClass):
        kern = kernel or spec.kernel
        if kern is None:
            raise InvalidParameter("kernel class needs a kernel to build the Gram matrix")
        return _kernel_sup(kern(X, X), spec.R_H)
    if isinstance(spec, FatPolyClass):
        raise InvalidParameter("no closed-form supremum for a fat-shattering-only class")
    raise InvalidParameter(f"unsupported class {spec!r}")


def rademacher_mc(
    spec: ComponentClassSpec,
    xs,
    draws: int,
    seed: int,
    kernel: Optional[Kernel] = None,
) -> MCEstimate:
    """Monte Carlo estimate of the empirical Rademacher complexity of a ball.

    Sign vectors are drawn in fixed-size chunks, each from its own Philox
    stream keyed by the chunk index, and summed in chunk order.
    """
    if int(draws) != draws or draws < 1:
        raise InvalidParameter(f"draws must be a positive integer, got {draws}")
    draws = int(draws)
    sup = class_sup(spec, xs, kernel)
    n = np.atleast_2d(np.asarray(xs)).shape[0]
    return _mc(sup, n, draws, seed)


def rademacher_mc_finite(fc, draws: int, seed: int) -> MCEstimate:
    if int(draws) != draws or draws < 1:
        raise InvalidParameter(f"draws must be a positive integer, got {draws}")
    R = _finite_rows(fc)
    n = R.shape[1]
    return _mc(lambda S: np.max(S @ R.T, axis=1) / n, n, int(draws), seed)


def _mc(sup, n: int, draws: int, seed: int) -> MCEstimate:
    vals = []
    for c, start in enumerate(range(0, draws, _CHUNK)):
        m = min(_CHUNK, draws - start)
        rng = make_rng(seed, c)
        S = rng.choice(np.array([-1.0, 1.0]), size=(m, n))
        vals.append(np.asarray(sup(S), dtype=float))
    v = np.concatenate(vals)
    mean = math.fsum(v.tolist()) / draws
    stderr = float(np.std(v, ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0
    return MCEstimate(mean=mean, stderr=stderr, draws=draws, seed=int(seed))


def rademacher_linear_exact(xs, R_w: float) -> float:
    """Exact empirical Rademacher complexity of the linear ball (2^n enumeration)."""
    X = np.atleast_2d(np.asarray(xs, dtype=float))
    return rademacher_enumerate(_linear_sup(X, R_w), X.shape[0])


def rademacher_linear_bound(R_x: float, R_w: float, n: int) -> float:
    """R_x R_w / sqrt(n); the kernel case uses R_w = R_H and R_x = sup sqrt(K(x, x))."""
    if R_x < 0 or R_w < 0:
        raise InvalidParameter("radii must be nonnegative")
    if not n >= 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    return R_x * R_w / math.sqrt(n)


def kernel_radius(kernel: Kernel, xs) -> float:
    """max_i sqrt(K(x_i, x_i)) over a sample."""
    return float(np.sqrt(np.max(kernel.diag(xs))))
