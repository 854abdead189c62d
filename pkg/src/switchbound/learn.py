"""Empirical risk minimization for switching and PWS models (squared loss).

The learners alternate between assigning each point to its best-fitting
mode and refitting every mode by least squares on its points, k-means
style, keeping the best of several random restarts. Refits use the
minimum-norm least-squares solution, so underdetermined modes are handled
without extra regularization. :func:`fit_switching_exact` enumerates all
assignments and is the ground truth for tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .capacity.rademacher import make_rng
from .core import Dataset, InvalidParameter, NumericalError, ResourceLimit, empirical_lp_risk, empirical_switching_risk
from .models import (
    Kernel,
    KernelComponent,
    LinearClassifier,
    LinearComponent,
    PwsModel,
    SwitchingModel,
)

EXACT_LIMIT = 2_000_000
PINV_RCOND = 1e-10
MONOTONE_RTOL = 1e-12


@dataclass(frozen=True)
class FitOptions:
    """Restart and stopping controls.

    ``init="mixed"`` alternates uniform random assignments (even restarts)
    with modes fitted to d random points (odd restarts); the latter reach
    optima with very small modes far more often.
    """

    restarts: int = 10
    max_iters: int = 100
    tol: float = 1e-12
    seed: int = 0
    norm_cap: Optional[float] = None
    ridge: float = 0.0
    init: str = "mixed"

    def __post_init__(self):
        if self.init not in {"mixed", "assignment", "subset"}:
            raise InvalidParameter(f"unknown init {self.init!r}")
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise InvalidParameter("restarts must be an integer >= 1")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidParameter("max_iters must be an integer >= 1")
        if not self.tol > 0:
            raise InvalidParameter("tol must be positive")
        if self.norm_cap is not None and not self.norm_cap > 0:
            raise InvalidParameter("norm_cap must be positive")
        if self.ridge < 0:
            raise InvalidParameter("ridge must be nonnegative")


@dataclass
class FitResult:
    """Outcome of a fit.

    ``objective`` is the empirical risk of the returned (clipped) model on
    the training data; ``train_objective`` is the unclipped least-squares
    objective the optimizer minimized. ``history`` lists the unclipped
    objective after every refit of the selected restart.
    """

    model: object
    objective: float
    assignments: np.ndarray
    iterations: int
    restarts_used: int
    train_objective: float
    history: list = field(default_factory=list)
    monotone: bool = True
    projected: bool = False
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "objective": self.objective,
            "train_objective": self.train_objective,
            "assignments": [int(a) for a in self.assignments],
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
            "monotone": self.monotone,
            "projected": self.projected,
            "info": self.info,
        }


# -- per-mode refit strategies -------------------------------------------------


def _project_ball(w: np.ndarray, cap: Optional[float]) -> tuple[np.ndarray, bool]:
    if cap is None:
        return w, False
    nrm = float(np.linalg.norm(w))
    if nrm > cap:
        return w * (cap / nrm), True
    return w, False


class _LinearRefit:
    def __init__(self, X: np.ndarray, y: np.ndarray, norm_cap: Optional[float]):
        self.X, self.y, self.cap = X, y, norm_cap

    def __call__(self, idx: np.ndarray):
        w = np.linalg.lstsq(self.X[idx], self.y[idx], rcond=None)[0]
        w, proj = _project_ball(w, self.cap)
        return self.X @ w, w, proj

    def component(self, params) -> LinearComponent:
        return LinearComponent(params)


class _KernelRefit:
    def __init__(self, X, y, kernel: Kernel, ridge: float, R_H: Optional[float]):
        self.X, self.y, self.kernel, self.ridge, self.cap = X, y, kernel, ridge, R_H
        self.K = kernel(X, X)
        lam_min = float(np.linalg.eigvalsh(0.5 * (self.K + self.K.T))[0])
        if lam_min < -1e-10 * max(1.0, float(np.max(np.abs(np.diag(self.K))))):
            raise NumericalError(f"Gram matrix is not PSD (min eigenvalue {lam_min:.3g})")

    def __call__(self, idx: np.ndarray):
        Kmm = self.K[np.ix_(idx, idx)]
        if self.ridge > 0:
            alpha = np.linalg.solve(Kmm + self.ridge * np.eye(len(idx)), self.y[idx])
        else:
            alpha = np.linalg.pinv(Kmm, rcond=PINV_RCOND, hermitian=True) @ self.y[idx]
        proj = False
        if self.cap is not None:
            nrm = math.sqrt(max(float(alpha @ Kmm @ alpha), 0.0))
            if nrm > self.cap:
                alpha = alpha * (self.cap / nrm)
                proj = True
        return self.K[:, idx] @ alpha, (idx.copy(), alpha), proj

    def component(self, params) -> KernelComponent:
        idx, alpha = params
        return KernelComponent(self.X[idx], alpha, self.kernel)


# -- alternating minimization ----------------------------------------------------


@dataclass
class _Run:
    params: list
    labels: np.ndarray
    history: list
    iterations: int
    objective: float
    monotone: bool
    projected: bool


def _reseed_empty(labels: np.ndarray, resid: Optional[np.ndarray], C: int, y: np.ndarray) -> np.ndarray:
    """Give every empty mode the worst-fit point taken from a mode with >= 2 points."""
    labels = labels.copy()
    for k in range(C):
        if np.any(labels == k):
            continue
        counts = np.bincount(labels, minlength=C)
        donors = counts[labels] >= 2
        err = resid if resid is not None else np.abs(y)
        cand = np.flatnonzero(donors)
        i = cand[np.argmax(err[cand])]
        labels[i] = k
    return labels


def _alternate(refit: Callable, y: np.ndarray, C: int, labels: np.ndarray, max_iters: int, tol: float) -> _Run:
    labels = _reseed_empty(labels, None, C, y)
    history: list[float] = []
    monotone = True
    projected = False
    resid = None
    params = [None] * C
    preds = np.empty((C, y.shape[0]))
    it = 0
    for it in range(1, max_iters + 1):
        labels = _reseed_empty(labels, resid, C, y)
        proj_this = False
        for k in range(C):
            preds[k], params[k], pk = refit(np.flatnonzero(labels == k))
            proj_this |= pk
        projected |= proj_this
        sq = (y[None, :] - preds) ** 2
        obj = float(np.mean(np.min(sq, axis=0)))
        if history and not proj_this and obj > history[-1] * (1 + MONOTONE_RTOL) + 1e-300:
            monotone = False
        history.append(obj)
        new_labels = np.argmin(sq, axis=0)
        resid = np.min(sq, axis=0)
        stalled = len(history) >= 2 and history[-2] - obj < tol
        if np.array_equal(new_labels, labels) or stalled:
            break
        labels = new_labels
    sq = (y[None, :] - preds) ** 2
    labels = np.argmin(sq, axis=0)
    return _Run(list(params), labels, history, it, history[-1], monotone, projected)


def _check_fit_args(data: Dataset, C: int, p: float) -> None:
    if int(C) != C or C < 1:
        raise InvalidParameter(f"C must be an integer >= 1, got {C}")
    if C > data.n:
        raise InvalidParameter(f"C={C} exceeds the number of points n={data.n}")
    if p != 2:
        raise InvalidParameter("the learners minimize the squared loss only (p = 2)")


def _initial_labels(refit, y: np.ndarray, C: int, d: int, r: int, rng, init: str) -> np.ndarray:
    n = y.shape[0]
    if init == "assignment" or (init == "mixed" and r % 2 == 0):
        return rng.integers(0, C, size=n)
    # each mode starts from a fit on its own block of (up to) d random points;
    # disjoint blocks keep the start free of exact ties between modes
    m = max(1, min(d, n // C))
    perm = rng.permutation(n)
    blocks = [np.sort(perm[(k * m + np.arange(m)) % n]) for k in range(C)]
    preds = np.vstack([refit(b)[0] for b in blocks])
    labels = np.argmin((y[None, :] - preds) ** 2, axis=0)
    for k, b in enumerate(blocks):
        labels[b] = k
    return labels


def _best_of_restarts(refit, data: Dataset, C: int, opts: FitOptions) -> tuple[_Run, int]:
    best: Optional[_Run] = None
    y = np.asarray(data.ys)
    for r in range(opts.restarts):
        rng = make_rng(opts.seed, r)
        init = _initial_labels(refit, y, C, data.d, r, rng, opts.init)
        run = _alternate(refit, y, C, init, opts.max_iters, opts.tol)
        if best is None or run.objective < best.objective:
            best, best_r = run, r
    return best, best_r


def _switching_result(refit, run: _Run, data: Dataset, M: float, restarts: int, info: dict) -> FitResult:
    comps = tuple(refit.component(p) for p in run.params)
    model = SwitchingModel(comps, M)
    obj = empirical_switching_risk(model.values(data.xs), data, 2.0)
    return FitResult(
        model=model,
        objective=obj,
        assignments=run.labels,
        iterations=run.iterations,
        restarts_used=restarts,
        train_objective=run.objective,
        history=run.history,
        monotone=run.monotone,
        projected=run.projected,
        info=info,
    )


def fit_switching_linear(data: Dataset, C: int, opts: FitOptions = FitOptions(), p: float = 2.0) -> FitResult:
    """Alternating least squares for switching linear regression."""
    _check_fit_args(data, C, p)
    refit = _LinearRefit(np.asarray(data.xs), np.asarray(data.ys), opts.norm_cap)
    run, r = _best_of_restarts(refit, data, C, opts)
    return _switching_result(refit, run, data, data.M, opts.restarts, {"best_restart": r})


def fit_switching_kernel(
    data: Dataset,
    C: int,
    kernel: Kernel,
    R_H: Optional[float] = None,
    opts: FitOptions = FitOptions(),
    p: float = 2.0,
) -> FitResult:
    """Alternating kernel least squares; dual coefficients are scaled back onto
    the RKHS ball of radius ``R_H`` when a refit leaves it."""
    _check_fit_args(data, C, p)
    refit = _KernelRefit(np.asarray(data.xs), np.asarray(data.ys), kernel, opts.ridge, R_H)
    run, r = _best_of_restarts(refit, data, C, opts)
    return _switching_result(refit, run, data, data.M, opts.restarts, {"best_restart": r})


def fit_switching_exact(data: Dataset, C: int, p: float = 2.0) -> FitResult:
    """Global ERM optimum by enumerating every assignment of points to modes.

    Labels of the first point are fixed to mode 0 (modes are exchangeable).
    """
    _check_fit_args(data, C, p)
    n = data.n
    if C ** (n - 1) > EXACT_LIMIT:
        raise ResourceLimit(f"{C}^{n - 1} assignments exceed the enumeration limit {EXACT_LIMIT}")
    X, y = np.asarray(data.xs), np.asarray(data.ys)
    best = None
    for tail in itertools.product(range(C), repeat=n - 1):
        labels = np.array((0,) + tail)
        W = np.zeros((C, data.d))
        for k in range(C):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                W[k] = np.linalg.lstsq(X[idx], y[idx], rcond=None)[0]
        obj = float(np.mean(np.min((y[None, :] - W @ X.T) ** 2, axis=0)))
        if best is None or obj < best[0]:
            best = (obj, W)
    obj, W = best
    model = SwitchingModel(tuple(LinearComponent(w) for w in W), data.M)
    assign = np.argmin((y[None, :] - W @ X.T) ** 2, axis=0)
    return FitResult(
        model=model,
        objective=empirical_switching_risk(model.values(X), data, 2.0),
        assignments=assign,
        iterations=C ** (n - 1),
        restarts_used=1,
        train_objective=obj,
        history=[obj],
    )


# -- PWS ----------------------------------------------------------------------


def fit_linear_classifier(X: np.ndarray, labels: np.ndarray, C: int, reg: float = 1e-6, max_iter: int = 500) -> LinearClassifier:
    """Multinomial logistic regression without intercept, L-BFGS with a fixed budget."""
    n, d = X.shape
    if C == 1:
        return LinearClassifier.trivial(d)
    Y = np.zeros((n, C))
    Y[np.arange(n), labels] = 1.0

    def loss(wflat):
        W = wflat.reshape(C, d)
        S = X @ W.T
        S = S - S.max(axis=1, keepdims=True)
        logZ = np.log(np.exp(S).sum(axis=1))
        P = np.exp(S - logZ[:, None])
        val = float(np.mean(logZ - np.sum(S * Y, axis=1))) + 0.5 * reg * float(wflat @ wflat)
        grad = ((P - Y).T @ X) / n + reg * W
        return val, grad.ravel()

    res = optimize.minimize(loss, np.zeros(C * d), jac=True, method="L-BFGS-B", options={"maxiter": max_iter})
    return LinearClassifier(res.x.reshape(C, d))


def fit_pws(data: Dataset, C: int, opts: FitOptions = FitOptions(), p: float = 2.0) -> FitResult:
    """Switching fit, then a linear classifier on its assignments, then one refit
    of each mode on the points the classifier sends to it."""
    stage1 = fit_switching_linear(data, C, opts, p)
    X, y = np.asarray(data.xs), np.asarray(data.ys)
    g = fit_linear_classifier(X, stage1.assignments, C)
    modes = np.argmax(X @ g.W.T, axis=1)
    comps = list(stage1.model.components)
    projected = stage1.projected
    for k in range(C):
        idx = np.flatnonzero(modes == k)
        if idx.size:
            w = np.linalg.lstsq(X[idx], y[idx], rcond=None)[0]
            w, pk = _project_ball(w, opts.norm_cap)
            projected |= pk
            comps[k] = LinearComponent(w)
    model = PwsModel(g, tuple(comps), data.M)
    obj = empirical_lp_risk(model.values(X), data, 2.0)
    unclipped = np.array([c.values(X) for c in comps])[modes, np.arange(data.n)]
    return FitResult(
        model=model,
        objective=obj,
        assignments=modes,
        iterations=stage1.iterations,
        restarts_used=stage1.restarts_used,
        train_objective=float(np.mean((y - unclipped) ** 2)),
        history=stage1.history,
        monotone=stage1.monotone,
        projected=projected,
        info={
            "switching_objective": stage1.objective,
            "switching_risk_same_components": empirical_switching_risk(model.as_switching().values(X), data, 2.0),
            "classifier_agreement": float(np.mean(modes == stage1.assignments)),
        },
    )
