"""Finite function classes, proper epsilon-nets and covering-number decompositions.

A :class:`FiniteClass` stores each function by its values on a fixed
sample, one row per function. Nets are *proper* (centers drawn from the
class) and use the strict inequality ``rho(f, H) < eps``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from ..core import INF, InvalidInput, InvalidParameter, QExponent, ResourceLimit, pairwise_distances, parse_q, q_root

MAX_EXACT_COVER = 20

EntropyFn = Callable[[float], float]


@dataclass(frozen=True)
class FiniteClass:
    rows: np.ndarray  # shape (m, n)

    def __post_init__(self):
        R = np.asarray(self.rows, dtype=float)
        if R.ndim == 1:
            R = R.reshape(1, -1)
        if R.ndim != 2 or R.shape[0] == 0 or R.shape[1] == 0:
            raise InvalidInput("finite class needs at least one function on at least one point")
        R = R.copy()
        R.setflags(write=False)
        object.__setattr__(self, "rows", R)

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n(self) -> int:
        return int(self.rows.shape[1])

    def diameter(self, q: QExponent = 2.0) -> float:
        return float(np.max(pairwise_distances(self.rows, q)))

    def __neg__(self) -> "FiniteClass":
        return FiniteClass(-self.rows)


def _rows(fc) -> np.ndarray:
    return fc.rows if isinstance(fc, FiniteClass) else FiniteClass(fc).rows


def _covers(R: np.ndarray, eps: float, q: QExponent) -> np.ndarray:
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    return pairwise_distances(R, q) < eps


def is_net(fc, centers: Sequence[int], eps: float, q: QExponent = 2.0) -> bool:
    """True if every row lies strictly within ``eps`` of some chosen row."""
    R = _rows(fc)
    if len(centers) == 0:
        return False
    cov = _covers(R, eps, q)[:, list(centers)]
    return bool(np.all(cov.any(axis=1)))


def max_distance_to_net(rows, net_rows, q: QExponent = 2.0) -> float:
    """sup over ``rows`` of the d_q distance to the nearest row of ``net_rows``."""
    A = np.asarray(rows, dtype=float)
    B = np.asarray(net_rows, dtype=float)
    q = parse_q(q)
    diff = np.abs(A[:, None, :] - B[None, :, :])
    D = diff.max(axis=2) if q is INF else np.mean(diff**q, axis=2) ** (1.0 / q)
    return float(np.max(np.min(D, axis=1)))


def greedy_net(fc, eps: float, q: QExponent = 2.0) -> list[int]:
    """Proper eps-net built by scanning rows and keeping every uncovered one."""
    R = _rows(fc)
    cov = _covers(R, eps, q)
    centers: list[int] = []
    covered = np.zeros(R.shape[0], dtype=bool)
    for i in range(R.shape[0]):
        if not covered[i]:
            centers.append(i)
            covered |= cov[:, i]
    return centers


def exact_min_cover_net(fc, eps: float, q: QExponent = 2.0, limit: int = MAX_EXACT_COVER) -> list[int]:
    """A minimum-cardinality proper eps-net, by exhaustive branch and bound."""
    R = _rows(fc)
    m = R.shape[0]
    if m > limit:
        raise ResourceLimit(f"exact covering limited to {limit} functions, got {m}")
    cov = _covers(R, eps, q)
    # mask[j]: rows covered by center j; who[i]: centers covering row i
    mask = [sum(1 << i for i in range(m) if cov[i, j]) for j in range(m)]
    who = [[j for j in range(m) if cov[i, j]] for i in range(m)]
    full = (1 << m) - 1
    best = greedy_net(R, eps, q)
    best_len = [len(best)]
    best_set = [list(best)]

    def search(covered: int, chosen: list[int]):
        if covered == full:
            if len(chosen) < best_len[0]:
                best_len[0] = len(chosen)
                best_set[0] = list(chosen)
            return
        if len(chosen) + 1 >= best_len[0]:
            return
        uncovered = [i for i in range(m) if not (covered >> i) & 1]
        i = min(uncovered, key=lambda r: len(who[r]))
        for j in who[i]:
            chosen.append(j)
            search(covered | mask[j], chosen)
            chosen.pop()

    search(0, [])
    return sorted(best_set[0])


def exact_min_cover(fc, eps: float, q: QExponent = 2.0, limit: int = MAX_EXACT_COVER) -> int:
    """Covering number N(eps, fc, d_q) of a finite class (at most ``limit`` rows)."""
    return len(exact_min_cover_net(fc, eps, q, limit))


def exact_entropy_fn(fc, q: QExponent = 2.0, limit: int = MAX_EXACT_COVER) -> EntropyFn:
    """eps -> ln N(eps, fc, d_q) using exact minimum covers."""
    R = _rows(fc)
    return lambda eps: math.log(exact_min_cover(R, eps, q, limit))


# -- composite finite families ------------------------------------------------


def distinct_classifications(labels) -> np.ndarray:
    """Distinct rows of an (m, n) array of mode labels (the trace of a classifier set)."""
    L = np.asarray(labels)
    if L.ndim != 2:
        raise InvalidInput("classifications must be an (m, n) array of mode labels")
    return np.unique(L.astype(np.int64), axis=0)


def pws_family(components: Sequence, classifications) -> FiniteClass:
    """All functions x_i -> f_{c_i}(x_i) over classifications c and f_k in component k."""
    comps = [_rows(c) for c in components]
    L = distinct_classifications(classifications)
    C = len(comps)
    n = comps[0].shape[1]
    if any(c.shape[1] != n for c in comps) or L.shape[1] != n:
        raise InvalidInput("components and classifications must share the sample size")
    if L.min() < 0 or L.max() >= C:
        raise InvalidInput("classification labels must lie in [0, C)")
    out = []
    cols = np.arange(n)
    for c in L:
        for choice in itertools.product(*[range(len(R)) for R in comps]):
            stacked = np.vstack([comps[k][choice[k]] for k in range(C)])
            out.append(stacked[c, cols])
    return FiniteClass(np.array(out))


def pointwise_family(components: Sequence, op: str = "min") -> FiniteClass:
    """Pointwise min (or max) over one function from each component class."""
    comps = [_rows(c) for c in components]
    reduce = {"min": np.min, "max": np.max}[op]
    out = [reduce(np.vstack(choice), axis=0) for choice in itertools.product(*comps)]
    return FiniteClass(np.array(out))


def switching_loss_family(components: Sequence, ys, p: float = 2.0, M: float = 0.5) -> FiniteClass:
    """Loss rows min_k |y_i - clip(f_k(x_i))|^p over all component choices."""
    y = np.asarray(ys, dtype=float)
    comps = [np.clip(_rows(c), -M, M) for c in components]
    out = [np.min(np.abs(y[None, :] - np.vstack(choice)) ** p, axis=0) for choice in itertools.product(*comps)]
    return FiniteClass(np.array(out))


def product_net_pws(component_nets: Sequence, classifications) -> np.ndarray:
    """Rows of the product-net construction: for each classification, every
    combination of component net centers, glued along the classification."""
    return pws_family(component_nets, classifications).rows


def restricted_net_pws(components: Sequence, classifications, eps: float) -> np.ndarray:
    """Construction for L2 covers on sub-samples: per classification c, nets of
    each component under the d_2 metric restricted to {i : c_i = k}, glued."""
    comps = [_rows(c) for c in components]
    L = distinct_classifications(classifications)
    n = comps[0].shape[1]
    cols = np.arange(n)
    out = []
    for c in L:
        nets = []
        for k, R in enumerate(comps):
            idx = np.flatnonzero(c == k)
            if idx.size == 0:
                nets.append(R[:1])
            else:
                nets.append(R[exact_min_cover_net(R[:, idx], eps, 2.0, limit=max(len(R), MAX_EXACT_COVER))])
        for choice in itertools.product(*[range(len(N)) for N in nets]):
            stacked = np.vstack([nets[k][choice[k]] for k in range(len(nets))])
            out.append(stacked[c, cols])
    return np.array(out)


# -- decomposition evaluators ------------------------------------------------


def _entropy_list(component_entropies_at, C: int | None) -> list[EntropyFn]:
    if callable(component_entropies_at):
        if C is None or C < 1:
            raise InvalidParameter("C >= 1 required with a single shared entropy function")
        return [component_entropies_at] * int(C)
    fns = list(component_entropies_at)
    if not fns:
        raise InvalidParameter("need at least one component entropy function")
    if C is not None and C != len(fns):
        raise InvalidParameter(f"C={C} but {len(fns)} entropy functions given")
    return fns


def entropy_decompose_pws(
    eps: float,
    q: QExponent,
    log_growth: float,
    component_entropies_at: Union[EntropyFn, Sequence[EntropyFn]],
    C: int | None = None,
    mode: str = "lp",
) -> float:
    """Entropy bound of a PWS class from classifier growth and component entropies.

    ``mode="lp"``: ln Pi_G(n) + sum_k ln N(eps / C^(1/q), F_k, d_q).
    ``mode="uniform-l2"``: ln Pi_G(n) + sum_k ln N_2(eps, F_k, n) with no
    rescaling of the scale; the entropy functions must then return uniform
    L2 entropies.
    """
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    fns = _entropy_list(component_entropies_at, C)
    if mode == "lp":
        scale = eps / q_root(len(fns), q)
    elif mode == "uniform-l2":
        scale = eps
    else:
        raise InvalidParameter(f"unknown mode {mode!r}")
    return float(log_growth) + math.fsum(f(scale) for f in fns)


def entropy_decompose_switching(
    eps: float,
    q: QExponent,
    p: float,
    component_entropies_at: Union[EntropyFn, Sequence[EntropyFn]],
    C: int | None = None,
) -> float:
    """sum_k ln N(eps / (p C^(1/q)), F_k, d_q): entropy bound of the switching loss class."""
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    if not p >= 1:
        raise InvalidParameter(f"p must be >= 1, got {p}")
    fns = _entropy_list(component_entropies_at, C)
    scale = eps / (p * q_root(len(fns), q))
    return math.fsum(f(scale) for f in fns)


def entropy_decompose_pointwise(
    eps: float,
    q: QExponent,
    component_entropies_at: Union[EntropyFn, Sequence[EntropyFn]],
    C: int | None = None,
) -> float:
    """sum_k ln N(eps / C^(1/q), A_k, d_q): bound for pointwise max/min classes."""
    return entropy_decompose_switching(eps, q, 1.0, component_entropies_at, C)
