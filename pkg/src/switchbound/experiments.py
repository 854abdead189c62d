"""Synthetic switching data, mode-count selection, bound coverage and rate studies.

Every experiment is a pure function of its configuration and seed. Random
streams come from :func:`~switchbound.capacity.rademacher.make_rng` with a
spawn key per trial, so trials can run in any order or in parallel and the
aggregated report does not change.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .bounds import FORMULAS, BoundReport, evaluate_bound
from .capacity.rademacher import make_rng
from .core import CANONICAL_M, Dataset, InvalidInput, InvalidParameter, clip
from .learn import FitOptions, FitResult, fit_pws, fit_switching_linear
from .models import LinearClassifier, LinearComponent, PwsModel, SwitchingModel

KINDS = ("pws", "arbitrary")
X_DISTS = ("ball", "sphere")
WORKERS_ENV = "SWITCHBOUND_WORKERS"


# -- synthetic data ------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Data-generating process for synthetic switching regression.

    Inputs are uniform in the unit ball (or on the unit sphere) of R^d.
    ``weights`` holds one row per true mode; when omitted, rows are drawn
    uniformly with norm 0.45 so noiseless outputs never reach the clip
    level. ``classifier`` plays the same role for the ``pws`` kind, where
    the mode of x is argmax_k <classifier_k, x>. With the ``arbitrary``
    kind every point draws its mode uniformly at random.
    """

    kind: str = "arbitrary"
    C_true: int = 2
    d: int = 2
    weights: Optional[tuple] = None
    classifier: Optional[tuple] = None
    noise: float = 0.1
    n: int = 500
    seed: int = 0
    x_dist: str = "ball"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.x_dist not in X_DISTS:
            raise InvalidParameter(f"x_dist must be one of {X_DISTS}, got {self.x_dist!r}")
        for name in ("C_true", "d", "n"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidParameter(f"{name} must be a positive integer, got {v}")
        if not (0 <= self.noise and math.isfinite(self.noise)):
            raise InvalidParameter(f"noise half-width must be finite and >= 0, got {self.noise}")
        for name, arr in (("weights", self.weights), ("classifier", self.classifier)):
            if arr is None:
                continue
            a = np.asarray(arr, dtype=float)
            if a.shape != (self.C_true, self.d) or not np.all(np.isfinite(a)):
                raise InvalidParameter(f"{name} must be a finite ({self.C_true}, {self.d}) array")
            object.__setattr__(self, name, tuple(tuple(float(v) for v in row) for row in a))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InvalidParameter(f"unknown synthetic spec fields {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    model: Union[PwsModel, SwitchingModel]
    labels: np.ndarray
    noise: np.ndarray


def _random_rows(rng: np.random.Generator, C: int, d: int, norm: float) -> np.ndarray:
    W = rng.standard_normal((C, d))
    return norm * W / np.linalg.norm(W, axis=1, keepdims=True)


def sample_inputs(rng: np.random.Generator, n: int, d: int, x_dist: str = "ball") -> np.ndarray:
    """n points uniform in (or on) the unit ball of R^d."""
    G = rng.standard_normal((n, d))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    if x_dist == "sphere":
        return G
    return G * rng.random(n)[:, None] ** (1.0 / d)


def _true_parameters(spec: SyntheticSpec) -> tuple[np.ndarray, Optional[np.ndarray]]:
    # drawn from a stream of their own so that they do not depend on n
    rng = make_rng(spec.seed, 0)
    W = np.asarray(spec.weights) if spec.weights is not None else _random_rows(rng, spec.C_true, spec.d, 0.45)
    G = None
    if spec.kind == "pws":
        G = np.asarray(spec.classifier) if spec.classifier is not None else _random_rows(rng, spec.C_true, spec.d, 1.0)
    return W, G


def generate_synthetic(spec: SyntheticSpec, n: Optional[int] = None, stream: Sequence[int] = ()) -> tuple[Dataset, GroundTruth]:
    """Draw a dataset from ``spec`` together with its hidden ground truth.

    ``n`` overrides ``spec.n`` and ``stream`` selects an independent sample
    from the same process (train and test sets of a trial, for example);
    the true parameters depend on ``spec.seed`` only.
    """
    n = spec.n if n is None else int(n)
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    W, G = _true_parameters(spec)
    rng = make_rng(spec.seed, 1, *stream)
    X = sample_inputs(rng, n, spec.d, spec.x_dist)
    if spec.kind == "pws":
        g = LinearClassifier(G)
        labels = np.argmax(X @ G.T, axis=1)
    else:
        labels = rng.integers(0, spec.C_true, size=n)
    eta = rng.uniform(-spec.noise, spec.noise, size=n) if spec.noise > 0 else np.zeros(n)
    clean = np.einsum("ij,ij->i", X, W[labels])
    y = clip(clean + eta, CANONICAL_M)
    comps = tuple(LinearComponent(w) for w in W)
    model = PwsModel(g, comps) if spec.kind == "pws" else SwitchingModel(comps)
    return Dataset(X, y), GroundTruth(model, labels, eta)


def model_risk(model, data: Dataset, p: float = 2.0) -> np.ndarray:
    """Per-point clipped loss: l_p for a PWS model, min over modes for a switching model."""
    if isinstance(model, PwsModel):
        return np.abs(data.ys - model.values(data.xs)) ** p
    return np.min(np.abs(data.ys[None, :] - model.values(data.xs)) ** p, axis=0)


def _mean(v: np.ndarray) -> float:
    return math.fsum(v.tolist()) / v.size


# -- bound plumbing shared by SRM and coverage --------------------------------


def _formula(bound_formula: str):
    try:
        return FORMULAS[bound_formula]
    except KeyError:
        raise InvalidParameter(f"unknown formula id {bound_formula!r}; known: {sorted(FORMULAS)}") from None


def _fit(data: Dataset, C: int, bound_formula: str, opts: FitOptions) -> FitResult:
    if _formula(bound_formula).model == "pws":
        return fit_pws(data, C, opts)
    return fit_switching_linear(data, C, opts)


def _bound(bound_formula: str, emp: float, data: Dataset, C: int, delta: float, params: dict) -> BoundReport:
    args = {"p": 2.0, "C": C, "d": data.d, "R_x": 1.0, "R_w": 1.0}
    args.update(params)
    args["C"] = C
    needed = _formula(bound_formula).params
    return evaluate_bound(bound_formula, emp, data.n, delta, **{k: args.get(k) for k in needed})


def _check_delta(delta: float) -> None:
    if not (0 < delta < 1):
        raise InvalidParameter(f"delta must lie in (0, 1), got {delta}")


# -- structural risk minimization ---------------------------------------------


@dataclass(frozen=True)
class SrmRow:
    C: int
    empirical_risk: float
    control_term: float
    bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def argmin_first(values: Sequence[float]) -> int:
    """Index of the smallest value; ties go to the earliest index."""
    if len(values) == 0:
        raise InvalidInput("empty sequence")
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


def select_modes_srm(
    data: Dataset,
    C_max: int,
    bound_formula: str = "switching-linear",
    delta: float = 0.05,
    opts: FitOptions = FitOptions(),
    bound_params: Optional[dict] = None,
) -> tuple[int, list[SrmRow]]:
    """Pick the number of modes minimizing the clamped risk bound.

    Each C in 1..C_max is fitted with ``opts``; the models are restricted to
    the weight ball of radius ``R_w`` (default 1) that the bound assumes.
    ``bound_params`` overrides the defaults p=2, d=data.d, R_x=1, R_w=1.
    """
    if int(C_max) != C_max or C_max < 1:
        raise InvalidParameter(f"C_max must be a positive integer, got {C_max}")
    _check_delta(delta)
    params = dict(bound_params or {})
    if opts.norm_cap is None and "R_w" in _formula(bound_formula).params:
        opts = replace(opts, norm_cap=float(params.get("R_w", 1.0)))
    rows = []
    for C in range(1, int(C_max) + 1):
        fit = _fit(data, C, bound_formula, opts)
        emp = _mean(model_risk(fit.model, data, float(params.get("p", 2.0))))
        rep = _bound(bound_formula, emp, data, C, delta, params)
        rows.append(SrmRow(C, emp, rep.control_term, rep.clamped_total))
    best = argmin_first([r.bound for r in rows])
    return rows[best].C, rows


def srm_report(C_star: int, table: Sequence[SrmRow], **meta) -> dict:
    return {"C_star": C_star, "table": [r.to_dict() for r in table], **meta}


def srm_tsv(table: Sequence[SrmRow]) -> str:
    lines = ["C\tempirical_risk\tcontrol_term\tbound"]
    lines += [f"{r.C}\t{r.empirical_risk!r}\t{r.control_term!r}\t{r.bound!r}" for r in table]
    return "\n".join(lines) + "\n"


# -- coverage -------------------------------------------------------------------


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    empirical_risk: float
    bound: float
    test_risk: float
    test_stderr: float
    violation: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CoverageReport:
    trials: int
    violations: int
    coverage: float
    delta: float
    mean_slack: float
    bound_formula: str
    outcomes: tuple = field(default=(), repr=False)

    def to_dict(self, include_trials: bool = True) -> dict:
        d = {
            "trials": self.trials,
            "violations": self.violations,
            "coverage": self.coverage,
            "delta": self.delta,
            "mean_slack": self.mean_slack,
            "bound_formula": self.bound_formula,
        }
        if include_trials:
            d["outcomes"] = [o.to_dict() for o in self.outcomes]
        return d


@dataclass(frozen=True)
class _TrialJob:
    spec: SyntheticSpec
    trial: int
    delta: float
    bound_formula: str
    test_n: int
    C_fit: int
    opts: FitOptions
    params: tuple


def _run_trial(job: _TrialJob) -> TrialOutcome:
    train, _ = generate_synthetic(job.spec, stream=(job.trial, 0))
    test, _ = generate_synthetic(job.spec, n=job.test_n, stream=(job.trial, 1))
    opts = replace(job.opts, seed=int(make_rng(job.opts.seed, job.trial).integers(2**31)))
    params = dict(job.params)
    p = float(params.get("p", 2.0))
    fit = _fit(train, job.C_fit, job.bound_formula, opts)
    emp = _mean(model_risk(fit.model, train, p))
    rep = _bound(job.bound_formula, emp, train, job.C_fit, job.delta, params)
    losses = model_risk(fit.model, test, p)
    risk = _mean(losses)
    stderr = float(np.std(losses, ddof=1) / math.sqrt(losses.size))
    return TrialOutcome(job.trial, emp, rep.clamped_total, risk, stderr, rep.clamped_total < risk - 2.0 * stderr)


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit count, else the SWITCHBOUND_WORKERS environment variable, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "").strip()
        try:
            workers = int(env) if env else 1
        except ValueError:
            raise InvalidParameter(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if workers < 1:
        raise InvalidParameter(f"worker count must be >= 1, got {workers}")
    return int(workers)


def validate_coverage(
    spec: SyntheticSpec,
    trials: int,
    delta: float,
    bound_formula: str = "switching-linear",
    test_n: int = 50_000,
    opts: FitOptions = FitOptions(restarts=5),
    C_fit: Optional[int] = None,
    bound_params: Optional[dict] = None,
    workers: Optional[int] = None,
) -> CoverageReport:
    """Monte Carlo check that a clamped risk bound holds with frequency >= 1 - delta.

    Each trial draws a fresh training sample of size ``spec.n``, fits a
    model with ``C_fit`` modes (default ``spec.C_true``) inside the weight
    ball of radius ``R_w``, and estimates its true clipped risk on an
    independent test sample of size ``test_n``. A trial is a violation when
    the bound lies below the estimate by more than two standard errors.
    """
    if int(trials) != trials or trials < 1:
        raise InvalidParameter(f"trials must be a positive integer, got {trials}")
    if int(test_n) != test_n or test_n < 2:
        raise InvalidParameter(f"test_n must be an integer >= 2, got {test_n}")
    _check_delta(delta)
    _formula(bound_formula)
    params = dict(bound_params or {})
    if opts.norm_cap is None and "R_w" in FORMULAS[bound_formula].params:
        opts = replace(opts, norm_cap=float(params.get("R_w", 1.0)))
    C_fit = spec.C_true if C_fit is None else int(C_fit)
    jobs = [
        _TrialJob(spec, t, delta, bound_formula, int(test_n), C_fit, opts, tuple(sorted(params.items())))
        for t in range(int(trials))
    ]
    workers = resolve_workers(workers)
    if workers == 1 or len(jobs) == 1:
        outcomes = [_run_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    outcomes.sort(key=lambda o: o.trial)
    violations = sum(o.violation for o in outcomes)
    slack = math.fsum(o.bound - o.test_risk for o in outcomes) / len(outcomes)
    return CoverageReport(
        trials=len(outcomes),
        violations=violations,
        coverage=1.0 - violations / len(outcomes),
        delta=delta,
        mean_slack=slack,
        bound_formula=bound_formula,
        outcomes=tuple(outcomes),
    )


# -- rate studies -----------------------------------------------------------------


@dataclass(frozen=True)
class RateResult:
    slope: float
    intercept: float
    residual: float
    log_n: tuple
    log_value: tuple

    def to_dict(self) -> dict:
        return asdict(self)

    def tsv(self) -> str:
        lines = ["ln_n\tln_value"] + [f"{a!r}\t{b!r}" for a, b in zip(self.log_n, self.log_value)]
        return "\n".join(lines) + "\n"


def control_term_fn(formula_id: str, **params) -> Callable[[float], float]:
    """n -> control term of a registered formula with the other parameters fixed."""
    f = _formula(formula_id)
    missing = [k for k in f.params if params.get(k) is None]
    if missing:
        raise InvalidParameter(f"formula {formula_id!r} needs parameters {missing}")
    args = {k: params[k] for k in f.params}
    return lambda n: f.control(n=n, **args)


def rate_study(fn: Union[str, Callable[[float], float]], n_grid: Sequence[float], **params) -> RateResult:
    """Least-squares slope of ln fn(n) against ln n.

    ``fn`` is a callable or a formula id (then ``params`` fix its other
    arguments and the control term is studied). The grid needs at least
    four points spanning three decades.
    """
    if isinstance(fn, str):
        fn = control_term_fn(fn, **params)
    ns = np.asarray(n_grid, dtype=float)
    if ns.ndim != 1 or ns.size < 4:
        raise InvalidInput("rate grid needs at least 4 points")
    if np.any(~np.isfinite(ns)) or np.any(ns <= 0):
        raise InvalidInput("rate grid must contain positive finite values")
    if ns.max() / ns.min() < 1e3:
        raise InvalidInput("rate grid must span at least three decades")
    vals = np.array([float(fn(int(n) if float(n).is_integer() else n)) for n in ns])
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise InvalidInput("function values must be positive and finite on the grid")
    lx, ly = np.log(ns), np.log(vals)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ np.array([slope, intercept])
    return RateResult(
        float(slope),
        float(intercept),
        float(np.sqrt(np.mean(resid**2))),
        tuple(float(v) for v in lx),
        tuple(float(v) for v in ly),
    )


def dyadic_grid(lo_exp: int, hi_exp: int) -> list[int]:
    """[2^lo_exp, ..., 2^hi_exp]."""
    return [2**e for e in range(int(lo_exp), int(hi_exp) + 1)]


__all__ = [
    "SyntheticSpec",
    "GroundTruth",
    "generate_synthetic",
    "sample_inputs",
    "model_risk",
    "SrmRow",
    "argmin_first",
    "select_modes_srm",
    "srm_report",
    "srm_tsv",
    "TrialOutcome",
    "CoverageReport",
    "validate_coverage",
    "resolve_workers",
    "RateResult",
    "control_term_fn",
    "rate_study",
    "dyadic_grid",
]
