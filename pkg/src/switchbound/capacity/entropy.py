"""Growth-function and metric-entropy bound evaluators.

Every value is a natural logarithm of a counting bound. Where the source
formula uses a base-2 logarithm (the exponent of the L-infinity
Sauer-Shelah bound) it is kept as log2 inside the expression.

``fat_at`` arguments are callables mapping a scale to an integer
fat-shattering dimension, e.g. ``LinearClass(...).fat_at``.
"""

from __future__ import annotations

import math
from typing import Callable

from ..core import CANONICAL_M, InvalidParameter

FatFn = Callable[[float], int]


def _check_scale(eps: float, M: float) -> None:
    if not (0 < eps <= 2 * M):
        raise InvalidParameter(f"scale must lie in (0, 2M] = (0, {2 * M}], got {eps}")


def _dim(fat_at: FatFn, eps: float) -> int:
    d = fat_at(eps)
    if int(d) != d or d < 0:
        raise InvalidParameter(f"fat-shattering dimension must be a nonnegative integer, got {d}")
    return int(d)


def growth_linear_classifiers(C: int, d: int, n: int) -> float:
    """C d ln(3n), an upper bound on ln Pi_G(n) for argmax-of-linear classifiers.

    With a single mode there is one labelling and the exact value 0 is returned.
    """
    if C < 1 or d < 1 or n < 1:
        raise InvalidParameter("C, d and n must be >= 1")
    if C == 1:
        return 0.0
    return C * d * math.log(3 * n)


def growth_natarajan(n: int, C: int, d_G: int) -> float:
    """d_G ln(n e C / (2 d_G)), the Sauer-Shelah-Natarajan bound on ln Pi_G(n)."""
    if n < 1 or C < 1:
        raise InvalidParameter("n and C must be >= 1")
    if d_G < 0:
        raise InvalidParameter("Natarajan dimension must be >= 0")
    if d_G == 0:
        return 0.0
    return d_G * math.log(n * math.e * C / (2.0 * d_G))


def entropy_inf_fat(eps: float, n: int, fat_at: FatFn, M: float = CANONICAL_M) -> float:
    """ln of 2 (16 M^2 n / eps^2)^(d log2(4 M e n / (d eps))) with d = fat_at(eps/4).

    The dimension is capped at n: restricted to n points no class shatters
    more than n of them. A zero dimension gives entropy 0.
    """
    _check_scale(eps, M)
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    d = min(_dim(fat_at, eps / 4.0), int(n))
    if d == 0:
        return 0.0
    exponent = d * math.log2(4.0 * M * math.e * n / (d * eps))
    return max(0.0, math.log(2.0) + exponent * math.log(16.0 * M * M * n / (eps * eps)))


def entropy_l2_dimfree(eps: float, fat_at: FatFn, M: float = CANONICAL_M) -> float:
    """20 d(eps/96) ln(13 M / eps); independent of the sample size."""
    _check_scale(eps, M)
    d = _dim(fat_at, eps / 96.0)
    if d == 0:
        return 0.0
    return 20.0 * d * math.log(13.0 * M / eps)


def entropy_inf_linear_finite_d(eps: float, d: int, R_x: float, R_w: float) -> float:
    """d ln((2 + R_w) R_x / eps) for eps <= R_x R_w, else 0."""
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    if eps > R_x * R_w:
        return 0.0
    return d * math.log((2.0 + R_w) * R_x / eps)


def entropy_inf_kernel(eps: float, R_x: float, R_H: float, n: int) -> float:
    """36 (R_x R_H / eps)^2 ln(15 R_x R_H n / eps) for eps < R_x R_H, else 0."""
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    r = R_x * R_H
    if eps >= r:
        return 0.0
    return 36.0 * (r / eps) ** 2 * math.log(15.0 * r * n / eps)


def entropy_pws(
    eps: float,
    n: int,
    C: int,
    fat_at: FatFn,
    variant: str = "l2",
    classifier_entropy: float | None = None,
    d_G: int | None = None,
) -> float:
    """Metric entropy bound of a PWS class under d_2.

    The classifier part is ``classifier_entropy`` if given, otherwise
    ``growth_natarajan(n, C, d_G)``. ``variant`` selects the component
    part: ``"linf"`` adds 6 C d(eps/4) ln^2(2 e n / eps) (via L-infinity
    covers), ``"l2"`` adds 20 C d(eps/96) ln(7 / eps) (dimension-free
    L2 covers).
    """
    if not (0 < eps <= 1):
        raise InvalidParameter(f"eps must lie in (0, 1], got {eps}")
    if classifier_entropy is None:
        if d_G is None:
            raise InvalidParameter("give classifier_entropy or d_G")
        classifier_entropy = growth_natarajan(n, C, d_G)
    v = variant.lower()
    if v == "linf":
        comp = 6.0 * C * _dim(fat_at, eps / 4.0) * math.log(2 * math.e * n / eps) ** 2
    elif v == "l2":
        comp = 20.0 * C * _dim(fat_at, eps / 96.0) * math.log(7.0 / eps)
    else:
        raise InvalidParameter(f"unknown variant {variant!r}")
    return float(classifier_entropy) + comp
