"""Generalization-bound evaluators.

Two kinds of functions live here:

* ``rad_bound_*`` return an upper bound on an empirical Rademacher
  complexity (of the clipped PWS class, or of the switching loss class);
* ``risk_bound_*`` and :func:`evaluate_bound` assemble a
  :class:`BoundReport`: empirical risk + control term + confidence term.

All logarithms are natural unless the name says log2. Dyadic chaining
depths follow ``N = ceil(log2 n^(1/beta))`` (``ceil(log2 sqrt(n))`` for
the square-root rates).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from scipy import integrate, special

from .core import InvalidInput, InvalidParameter, ScaleInfo

EntropyFn = Callable[[float], float]

# 28 * 192^2, the constant of the beta = 2 PWS chained bound
PWS_BETA2_CONST = 28 * 192**2


@dataclass(frozen=True)
class BoundReport:
    empirical_risk: float
    control_term: float
    confidence_term: float
    raw_total: float
    clamped_total: float
    formula_id: str
    inputs: dict = field(default_factory=dict)
    scale: Optional[ScaleInfo] = None

    def to_dict(self) -> dict:
        d = {
            "formula_id": self.formula_id,
            "empirical_risk": self.empirical_risk,
            "control_term": self.control_term,
            "confidence_term": self.confidence_term,
            "raw_total": self.raw_total,
            "clamped_total": self.clamped_total,
            "inputs": dict(self.inputs),
        }
        if self.scale is not None:
            d["scale"] = self.scale.to_dict()
        return d

    def in_raw_units(self, p: float) -> dict:
        """Totals multiplied back by factor^p (requires ``scale``)."""
        s = self.scale or ScaleInfo()
        return {
            "raw_total": s.risk_to_raw(self.raw_total, p),
            "clamped_total": s.risk_to_raw(self.clamped_total, p),
            "empirical_risk": s.risk_to_raw(self.empirical_risk, p),
        }


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0):
        raise InvalidParameter(f"delta must lie in (0, 1), got {delta}")


def _check_n(n) -> None:
    if not n >= 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")


def _check_p(p) -> None:
    if not p >= 1:
        raise InvalidParameter(f"p must be >= 1, got {p}")


def confidence_term(delta: float, n: int) -> float:
    """sqrt(ln(1/delta) / (2n))."""
    _check_delta(delta)
    _check_n(n)
    return math.sqrt(math.log(1.0 / delta) / (2.0 * n))


def make_report(
    emp: float,
    control: float,
    delta: float,
    n: int,
    formula_id: str,
    scale: Optional[ScaleInfo] = None,
    **inputs,
) -> BoundReport:
    if not (0.0 <= emp <= 1.0 + 1e-12):
        raise InvalidParameter(f"empirical risk must lie in [0, 1], got {emp}")
    if not control >= 0:
        raise InvalidParameter(f"control term must be nonnegative, got {control}")
    conf = confidence_term(delta, n)
    raw = emp + control + conf
    echo = {"n": n, "delta": delta}
    echo.update({k: v for k, v in inputs.items() if v is not None})
    return BoundReport(
        empirical_risk=float(emp),
        control_term=float(control),
        confidence_term=conf,
        raw_total=raw,
        clamped_total=min(raw, 1.0),
        formula_id=formula_id,
        inputs=echo,
        scale=scale,
    )


# -- base bounds -------------------------------------------------------------


def risk_bound_general(emp: float, rad: float, delta: float, n: int) -> BoundReport:
    """emp + 2 rad + sqrt(ln(1/delta)/(2n)) for a [0, 1]-valued loss class."""
    if not rad >= 0:
        raise InvalidParameter("Rademacher complexity must be nonnegative")
    return make_report(emp, 2.0 * rad, delta, n, "general", rad=rad)


def risk_bound_lp(emp: float, rad_of_F: float, p: float, delta: float, n: int) -> BoundReport:
    """emp + 2p R_n(F) + sqrt(ln(1/delta)/(2n)) for l_p losses of a clipped real class."""
    _check_p(p)
    if not rad_of_F >= 0:
        raise InvalidParameter("Rademacher complexity must be nonnegative")
    return make_report(emp, 2.0 * p * rad_of_F, delta, n, "lp", rad=rad_of_F, p=p)


def rad_switching_decomposed(C: int, p: float, R_x: float, R_w: float, n: int) -> float:
    """p C R_x R_w / sqrt(n): the loss-class bound obtained by summing component complexities."""
    _check_p(p)
    _check_n(n)
    return p * C * R_x * R_w / math.sqrt(n)


def risk_bound_switching_linear(
    emp: float, p: float, C: int, R_x: float, R_w: float, n: int, delta: float
) -> BoundReport:
    """emp + 2 p C R_x R_w / sqrt(n) + sqrt(ln(1/delta)/(2n))."""
    ctrl = 2.0 * rad_switching_decomposed(C, p, R_x, R_w, n)
    return make_report(emp, ctrl, delta, n, "switching-linear", p=p, C=C, R_x=R_x, R_w=R_w)


def risk_bound_switching_kernel(
    emp: float, p: float, C: int, R_x: float, R_H: float, n: int, delta: float
) -> BoundReport:
    """Kernel variant of :func:`risk_bound_switching_linear` (R_w replaced by R_H)."""
    ctrl = 2.0 * rad_switching_decomposed(C, p, R_x, R_H, n)
    return make_report(emp, ctrl, delta, n, "switching-kernel", p=p, C=C, R_x=R_x, R_H=R_H)


# -- chaining ----------------------------------------------------------------


def chain_finite(N: int, entropy_at: EntropyFn, n: int, D: float = 1.0) -> float:
    """D 2^-N + 6 D sum_{j=1..N} 2^-j sqrt(entropy_at(D 2^-j) / n)."""
    if int(N) != N or N < 1:
        raise InvalidParameter(f"N must be a positive integer, got {N}")
    _check_n(n)
    terms = []
    for j in range(1, int(N) + 1):
        h = float(entropy_at(D * 2.0**-j))
        if h < 0:
            raise InvalidParameter(f"entropy must be nonnegative, got {h}")
        terms.append(2.0**-j * math.sqrt(h / n))
    return D * 2.0**-N + 6.0 * D * math.fsum(terms)


def chain_best(entropy_at: EntropyFn, n: int, D: float = 1.0, N_max: int = 40) -> tuple[float, int]:
    """min over N in [1, N_max] of :func:`chain_finite`; returns (value, argmin N)."""
    best = None
    for N in range(1, int(N_max) + 1):
        v = chain_finite(N, entropy_at, n, D)
        if best is None or v < best[0]:
            best = (v, N)
    return best


@dataclass(frozen=True)
class IntegralResult:
    value: float
    abserr: float
    diverges: bool

    def __float__(self) -> float:
        return self.value


def chain_integral(
    entropy_at: EntropyFn,
    n: int,
    D: float = 1.0,
    epsrel: float = 1e-6,
    breakpoints: Sequence[float] = (),
    max_pieces: int = 4000,
) -> IntegralResult:
    """12/sqrt(n) * integral_0^{D/2} sqrt(entropy_at(eps)) d eps.

    The integral is taken in the variable u = ln((D/2)/eps) over unit
    pieces [k, k+1]; a geometric tail estimate closes it once pieces decay.
    When the pieces stop decaying (entropy growing like eps^-2 or faster)
    the result has ``diverges=True`` and value ``inf``.
    """
    _check_n(n)
    half = D / 2.0
    norm = 12.0 / math.sqrt(n)

    def g(u):
        e = half * math.exp(-u)
        h = float(entropy_at(e))
        if h < 0:
            raise InvalidParameter(f"entropy must be nonnegative, got {h}")
        return math.sqrt(h) * e

    ubreaks = sorted(math.log(half / b) for b in breakpoints if 0 < b < half)
    last_break = ubreaks[-1] if ubreaks else 0.0
    pieces: list[float] = []
    err = 0.0
    nondecay = 0
    for k in range(max_pieces):
        pts = [u for u in ubreaks if k < u < k + 1] or None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e = integrate.quad(g, k, k + 1, epsabs=0.0, epsrel=min(epsrel, 1e-10), points=pts, limit=200)
        if not math.isfinite(val):
            return IntegralResult(math.inf, math.inf, True)
        pieces.append(val)
        err += e
        if k < 5 or k + 1 < last_break:
            continue
        total = math.fsum(pieces)
        prev = pieces[-2]
        if total == 0.0:
            if k >= 60:
                return IntegralResult(0.0, 0.0, False)
            continue
        if prev <= 0.0:
            continue
        r = val / prev
        if r >= 1.0:
            nondecay += 1
            if nondecay >= 20 and k >= 40:
                return IntegralResult(math.inf, math.inf, True)
            continue
        nondecay = 0
        tail = val * r / (1.0 - r)
        if tail <= 1e-3 * epsrel * total:
            return IntegralResult(norm * (total + tail), norm * (err + tail), False)
    return IntegralResult(math.inf, math.inf, True)


def sqrt_log_integral(a: float, b: float) -> float:
    """integral_0^a sqrt(ln(b/eps)) d eps for 0 < a <= b, in closed form.

    Equals a sqrt(L) + b (sqrt(pi)/2) erfc(sqrt(L)) with L = ln(b/a).
    """
    if not (0 < a <= b):
        raise InvalidParameter("need 0 < a <= b")
    L = math.log(b / a)
    return a * math.sqrt(L) + b * math.sqrt(math.pi) / 2.0 * float(special.erfc(math.sqrt(L)))


# -- dyadic depth schedules --------------------------------------------------


def depth_sqrt(n: int) -> int:
    """ceil(log2 sqrt(n)), the smallest N >= 1 with 4^N >= n."""
    _check_n(n)
    if int(n) == n:
        lg = (int(n) - 1).bit_length()  # ceil(log2 n) for integers
        return max(1, (lg + 1) // 2)
    return max(1, math.ceil(math.log2(n) / 2.0 - 1e-12))


def depth_beta(n: float, beta: float) -> int:
    """ceil(log2 n^(1/beta)), at least 1."""
    _check_n(n)
    if beta == 2:
        return depth_sqrt(n)
    return max(1, math.ceil(math.log2(n) / beta - 1e-12))


def _geom_sum(beta: float, N: int) -> float:
    r = beta / 2.0 - 1.0
    return math.fsum(2.0 ** (j * r) for j in range(1, N + 1))


def _check_beta(beta):
    if not beta >= 1:
        raise InvalidParameter(f"beta must be >= 1, got {beta}")


# -- PWS classes -------------------------------------------------------------


def rad_bound_pws_general(C: int, d: int, alpha: float, beta: float, n: int) -> float:
    """Chained bound on the Rademacher complexity of a clipped PWS class with
    linear classifiers and components of fat-shattering dimension <= alpha eps^-beta.

    beta = 2 and beta > 2 use the closed forms; beta in [1, 2) sums the
    dyadic series directly with N = ceil(log2 n^(1/beta)).
    """
    _check_beta(beta)
    _check_n(n)
    if beta == 2:
        l4n = math.log2(4.0 * n)
        return 1.0 / math.sqrt(n) + 3.0 * l4n**1.5 * math.sqrt(C * (d + PWS_BETA2_CONST * alpha) / n)
    bracket = C * (d + 56.0 * 192.0**beta * alpha / beta) * math.log2(2.0**beta * n)
    if beta > 2:
        r = beta / 2.0 - 1.0
        series = 4.0**r / (2.0**r - 1.0) * n ** (0.5 - 1.0 / beta)
        return n ** (-1.0 / beta) + 6.0 * math.sqrt(bracket / n) * series
    N = depth_beta(n, beta)
    return 2.0**-N + 6.0 * math.sqrt(bracket / n) * _geom_sum(beta, N)


def rad_bound_pws_kernel(C: int, d: int, R_x: float, R_H: float, n: int) -> float:
    """1/sqrt(n) + 3 log2^{3/2}(4n) sqrt(C (d + 28*192^2 R_x^2 R_H^2) / n)."""
    return rad_bound_pws_general(C, d, (R_x * R_H) ** 2, 2, n)


def rad_bound_pwa(C: int, d: int, R_x: float, R_w: float, n: int) -> float:
    """2^-N + 6 sqrt(C d / n * ln(3 n (2 + R_w) R_x 2^N)) with N = ceil(log2 sqrt(n))."""
    _check_n(n)
    N = depth_sqrt(n)
    return 2.0**-N + 6.0 * math.sqrt(C * d / n * math.log(3.0 * n * (2.0 + R_w) * R_x * 2.0**N))


def rad_bound_pwa_relaxed(C: int, d: int, R_x: float, R_w: float, n: int) -> float:
    """1/sqrt(n) + 6 sqrt(C d ln(6 (2 + R_w) R_x n^{3/2}) / n)."""
    _check_n(n)
    return 1.0 / math.sqrt(n) + 6.0 * math.sqrt(C * d * math.log(6.0 * (2.0 + R_w) * R_x * n**1.5) / n)


# -- switching loss classes ----------------------------------------------------


def rad_bound_switching_fatpoly(C: int, p: float, alpha: float, beta: float, n: int) -> float:
    """Chained bound on the Rademacher complexity of the switching l_p loss class
    for components with fat-shattering dimension <= alpha eps^-beta."""
    _check_beta(beta)
    _check_p(p)
    _check_n(n)
    if beta == 2:
        return 1.0 / math.sqrt(n) + 26.0 * p * math.sqrt(alpha * C / n) * math.log(5.0 * p * n) ** 2
    if beta > 2:
        r = beta / 2.0 - 1.0
        coef = 3.0 * 2.0 ** (2.0 * beta - 1.0) * math.sqrt(6.0 * alpha * p**beta * C) / (2.0**r - 1.0)
        return n ** (-1.0 / beta) + coef * math.log(4.0 * math.e * p * n ** (1.0 / beta + 1.0)) / n ** (1.0 / beta)
    N = depth_beta(n, beta)
    lead = 6.0 * 2.0**beta * math.sqrt(6.0 * alpha * p**beta * C / n)
    return 2.0**-N + lead * math.log(2.0 * math.e * n * p * 2.0**N) * _geom_sum(beta, N)


def rad_bound_switching_kernel(C: int, p: float, R_x: float, R_H: float, n: int) -> float:
    """1/sqrt(n) + 36 p R_x R_H log2(2 sqrt(n)) sqrt(C/n ln(30 p R_x R_H n^{3/2}))."""
    _check_p(p)
    _check_n(n)
    r = R_x * R_H
    return 1.0 / math.sqrt(n) + 36.0 * p * r * math.log2(2.0 * math.sqrt(n)) * math.sqrt(
        C / n * math.log(30.0 * p * r * n**1.5)
    )


def rad_bound_switching_linear_chained(C: int, d: int, p: float, R_x: float, R_w: float, n: int) -> float:
    """12 p R_w R_x sqrt(ln(2/R_w + 1)) sqrt(C d / n), in closed form.

    This closed form is smaller than the chaining integral it summarizes;
    :func:`rad_bound_switching_linear_chained_exact` evaluates the integral.
    """
    _check_p(p)
    _check_n(n)
    return 12.0 * p * R_w * R_x * math.sqrt(math.log(2.0 / R_w + 1.0)) * math.sqrt(C * d / n)


def rad_bound_switching_linear_chained_exact(
    C: int, d: int, p: float, R_x: float, R_w: float, n: int
) -> float:
    """12 sqrt(C d / n) integral_0^a sqrt(ln(p (2 + R_w) R_x / eps)) d eps,
    with a = min(1/2, p R_x R_w), evaluated in closed form."""
    _check_p(p)
    _check_n(n)
    a = min(0.5, p * R_x * R_w)
    b = p * (2.0 + R_w) * R_x
    return 12.0 * math.sqrt(C * d / n) * sqrt_log_integral(a, b)


def compare_switching_routes(
    C: int, p: float, R_x: float, R_w: float, n: int, d: Optional[int] = None, kind: str = "kernel"
) -> dict:
    """Control terms (2 x Rademacher bound) of the chained and decomposed routes side by side."""
    decomposed = 2.0 * rad_switching_decomposed(C, p, R_x, R_w, n)
    if kind == "kernel":
        chained = 2.0 * rad_bound_switching_kernel(C, p, R_x, R_w, n)
    elif kind == "linear":
        if d is None:
            raise InvalidParameter("linear comparison needs d")
        chained = 2.0 * rad_bound_switching_linear_chained(C, d, p, R_x, R_w, n)
    else:
        raise InvalidParameter(f"unknown kind {kind!r}")
    return {
        "kind": kind,
        "C": C,
        "n": n,
        "chained": chained,
        "decomposed": decomposed,
        "chained_better": chained < decomposed,
    }


def best_bound(candidates: Sequence[BoundReport]) -> BoundReport:
    """Candidate with the smallest clamped total (first one on ties)."""
    cands = list(candidates)
    if not cands:
        raise InvalidInput("no candidate bounds")
    best = cands[0]
    for c in cands[1:]:
        if c.clamped_total < best.clamped_total:
            best = c
    return best


# -- formula registry --------------------------------------------------------


@dataclass(frozen=True)
class Formula:
    """A bound family: which parameters it needs and how its control term is built."""

    formula_id: str
    params: tuple
    model: str  # "switching" | "pws" | "any"
    control: Callable[..., float]
    description: str


FORMULAS: dict[str, Formula] = {
    f.formula_id: f
    for f in [
        Formula(
            "switching-linear",
            ("p", "C", "R_x", "R_w"),
            "switching",
            lambda p, C, R_x, R_w, n: 2.0 * rad_switching_decomposed(C, p, R_x, R_w, n),
            "emp + 2pC R_x R_w/sqrt(n) + conf  (component complexities summed)",
        ),
        Formula(
            "switching-kernel",
            ("p", "C", "R_x", "R_H"),
            "switching",
            lambda p, C, R_x, R_H, n: 2.0 * rad_switching_decomposed(C, p, R_x, R_H, n),
            "emp + 2pC R_x R_H/sqrt(n) + conf",
        ),
        Formula(
            "switching-linear-chained",
            ("p", "C", "d", "R_x", "R_w"),
            "switching",
            lambda p, C, d, R_x, R_w, n: 2.0 * rad_bound_switching_linear_chained(C, d, p, R_x, R_w, n),
            "emp + 2 * 12 p R_w R_x sqrt(ln(2/R_w+1)) sqrt(Cd/n) + conf  (closed form)",
        ),
        Formula(
            "switching-linear-chained-exact",
            ("p", "C", "d", "R_x", "R_w"),
            "switching",
            lambda p, C, d, R_x, R_w, n: 2.0 * rad_bound_switching_linear_chained_exact(C, d, p, R_x, R_w, n),
            "emp + 2 * 12 sqrt(Cd/n) int_0^a sqrt(ln(p(2+R_w)R_x/eps)) deps + conf",
        ),
        Formula(
            "switching-kernel-chained",
            ("p", "C", "R_x", "R_H"),
            "switching",
            lambda p, C, R_x, R_H, n: 2.0 * rad_bound_switching_kernel(C, p, R_x, R_H, n),
            "emp + 2 * [1/sqrt(n) + 36 p R_x R_H log2(2 sqrt n) sqrt(C/n ln(30 p R_x R_H n^1.5))] + conf",
        ),
        Formula(
            "switching-fatpoly",
            ("p", "C", "alpha", "beta"),
            "switching",
            lambda p, C, alpha, beta, n: 2.0 * rad_bound_switching_fatpoly(C, p, alpha, beta, n),
            "emp + 2 * chained switching bound for fat dimension <= alpha eps^-beta + conf",
        ),
        Formula(
            "pws-general",
            ("p", "C", "d", "alpha", "beta"),
            "pws",
            lambda p, C, d, alpha, beta, n: 2.0 * p * rad_bound_pws_general(C, d, alpha, beta, n),
            "emp + 2p * chained PWS bound for fat dimension <= alpha eps^-beta + conf",
        ),
        Formula(
            "pws-kernel",
            ("p", "C", "d", "R_x", "R_H"),
            "pws",
            lambda p, C, d, R_x, R_H, n: 2.0 * p * rad_bound_pws_kernel(C, d, R_x, R_H, n),
            "emp + 2p [1/sqrt(n) + 3 log2^1.5(4n) sqrt(C(d + 28*192^2 R_x^2 R_H^2)/n)] + conf",
        ),
        Formula(
            "pwa",
            ("p", "C", "d", "R_x", "R_w"),
            "pws",
            lambda p, C, d, R_x, R_w, n: 2.0 * p * rad_bound_pwa(C, d, R_x, R_w, n),
            "emp + 2p [2^-N + 6 sqrt(Cd/n ln(3n(2+R_w)R_x 2^N))] + conf, N = ceil(log2 sqrt n)",
        ),
        Formula(
            "pwa-relaxed",
            ("p", "C", "d", "R_x", "R_w"),
            "pws",
            lambda p, C, d, R_x, R_w, n: 2.0 * p * rad_bound_pwa_relaxed(C, d, R_x, R_w, n),
            "emp + 2p [1/sqrt(n) + 6 sqrt(Cd ln(6(2+R_w)R_x n^1.5)/n)] + conf",
        ),
        Formula(
            "trivial",
            (),
            "any",
            lambda n: 1.0,
            "the trivial bound 1 (losses are <= 1 at M = 1/2)",
        ),
        Formula(
            "empirical",
            (),
            "any",
            lambda n: 0.0,
            "empirical risk with no control term (optimistic; for sanity checks only)",
        ),
    ]
}


def evaluate_bound(
    formula_id: str, emp: float, n: int, delta: float, scale: Optional[ScaleInfo] = None, **params
) -> BoundReport:
    """Risk bound ``formula_id`` for a model with empirical risk ``emp`` on ``n`` points."""
    try:
        f = FORMULAS[formula_id]
    except KeyError:
        raise InvalidParameter(f"unknown formula id {formula_id!r}; known: {sorted(FORMULAS)}") from None
    missing = [k for k in f.params if params.get(k) is None]
    if missing:
        raise InvalidParameter(f"formula {formula_id!r} needs parameters {missing}")
    args = {k: params[k] for k in f.params}
    if "p" in args:
        _check_p(args["p"])
    _check_delta(delta)
    control = f.control(n=n, **args)
    if formula_id == "empirical":
        return BoundReport(emp, 0.0, 0.0, emp, min(emp, 1.0), formula_id, {"n": n, "delta": delta}, scale)
    return make_report(emp, control, delta, n, formula_id, scale=scale, **args)


def grid_tsv(fn: Callable[[float], float], grid: Sequence[float], header: tuple = ("n", "value")) -> str:
    """Two-column TSV of fn over a grid, one-line header."""
    lines = ["\t".join(header)]
    for x in grid:
        lines.append(f"{x!r}\t{fn(x)!r}")
    return "\n".join(lines) + "\n"
