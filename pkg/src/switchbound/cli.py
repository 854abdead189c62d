"""Command-line front end.

Subcommands: ``fit``, ``bound``, ``capacity``, ``srm``, ``validate`` and
``rate``. Results are JSON on stdout (or ``--out``); plot series are
written as TSV with ``--tsv``. Exit status is 0 on success, 2 for usage
errors (bad or missing flags, invalid parameter values) and 1 for runtime
failures such as unreadable or malformed data.

Randomized subcommands refuse to run without ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bounds import FORMULAS, evaluate_bound
from .capacity import (
    CapacityReport,
    FatPolyClass,
    KernelClass,
    LinearClass,
    class_sup,
    entropy_inf_fat,
    entropy_inf_kernel,
    entropy_inf_linear_finite_d,
    entropy_l2_dimfree,
    entropy_pws,
    fat_shattering_linear,
    growth_linear_classifiers,
    growth_natarajan,
    rademacher_enumerate,
    rademacher_linear_bound,
    rademacher_linear_exact,
    rademacher_mc,
)
from .core import (
    CANONICAL_M,
    DataError,
    Dataset,
    InvalidParameter,
    ScaleInfo,
    SwitchboundError,
    clip,
    load_csv,
    rescale_dataset,
)
from .experiments import (
    SyntheticSpec,
    dyadic_grid,
    model_risk,
    rate_study,
    select_modes_srm,
    srm_report,
    srm_tsv,
    validate_coverage,
)
from .learn import FitOptions, fit_pws, fit_switching_kernel, fit_switching_linear
from .models import Kernel, model_from_dict

CAPACITY_IDS = (
    "rad-linear",
    "rad-exact",
    "rad-mc",
    "fat-linear",
    "fat-poly",
    "growth-linear",
    "growth-natarajan",
    "entropy-inf-fat",
    "entropy-l2-dimfree",
    "entropy-linear",
    "entropy-kernel",
    "entropy-pws",
)


class UsageError(Exception):
    """Bad command line; reported with exit status 2."""


# -- shared helpers ---------------------------------------------------------------


def _emit(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_tsv(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")


def _require(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") if n not in _FLAG else _FLAG[n] for n in missing)
        raise UsageError(f"missing required {flags}")


# attribute name -> spelled flag, where they differ
_FLAG = {"R_x": "--Rx", "R_w": "--Rw", "R_H": "--RH", "C": "--C", "d_G": "--dG", "C_max": "--C-max"}


def _require_seed(args) -> None:
    if args.seed is None:
        raise UsageError("--seed is required (results must be reproducible)")


def _load_data(path: str, add_bias: bool, rescale: bool) -> Dataset:
    raw = load_csv(path)
    if add_bias:
        raw = raw.with_bias()
    if rescale:
        return rescale_dataset(raw)
    return Dataset(raw.xs, raw.ys, M=CANONICAL_M)


def _apply_scale(raw: Dataset, scale: ScaleInfo) -> Dataset:
    ys = clip(scale.to_scaled(raw.ys), CANONICAL_M)
    return Dataset(raw.xs, ys, M=CANONICAL_M, scale=scale)


def _add_bound_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=float, default=None, help="loss exponent (default 2)")
    p.add_argument("--C", type=int, default=None, help="number of modes")
    p.add_argument("--d", type=int, default=None, help="input dimension")
    p.add_argument("--Rx", dest="R_x", type=float, default=None, help="input radius")
    p.add_argument("--Rw", dest="R_w", type=float, default=None, help="weight-ball radius")
    p.add_argument("--RH", dest="R_H", type=float, default=None, help="RKHS-ball radius")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)


def _bound_params(args) -> dict:
    keys = ("p", "C", "d", "R_x", "R_w", "R_H", "alpha", "beta")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _fit_options(args) -> FitOptions:
    return FitOptions(
        restarts=args.restarts,
        max_iters=args.max_iters,
        seed=args.seed,
        norm_cap=args.norm_cap,
    )


# -- subcommands ------------------------------------------------------------------


def cmd_fit(args) -> dict:
    _require_seed(args)
    _require(args, "data", "C")
    data = _load_data(args.data, args.add_bias, not args.no_rescale)
    opts = _fit_options(args)
    if args.model == "switching":
        res = fit_switching_linear(data, args.C, opts)
    elif args.model == "pws":
        res = fit_pws(data, args.C, opts)
    else:
        kern = _kernel_from_args(args)
        res = fit_switching_kernel(data, args.C, kern, R_H=args.R_H, opts=opts)
    out = res.to_dict()
    out["n"] = data.n
    out["d"] = data.d
    out["seed"] = args.seed
    out["preprocess"] = {"add_bias": bool(args.add_bias), "rescale": not args.no_rescale, "scale": data.scale.to_dict()}
    return out


def _kernel_from_args(args) -> Kernel:
    if args.kernel == "gaussian":
        return Kernel.gaussian(args.bandwidth)
    if args.kernel == "polynomial":
        return Kernel.polynomial(args.degree, args.offset)
    return Kernel.linear()


def _emp_from_model(args) -> tuple[float, int, Optional[ScaleInfo]]:
    _require(args, "data")
    try:
        report = json.loads(Path(args.emp_from_model).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc.msg}", line=exc.lineno) from None
    model_dict = report.get("model", report)
    model = model_from_dict(model_dict)
    pre = report.get("preprocess", {})
    raw = load_csv(args.data)
    if pre.get("add_bias", False):
        raw = raw.with_bias()
    scale = ScaleInfo(**pre["scale"]) if "scale" in pre else ScaleInfo()
    data = _apply_scale(raw, scale) if pre.get("rescale", False) else Dataset(raw.xs, raw.ys, M=CANONICAL_M)
    p = args.p if args.p is not None else 2.0
    losses = model_risk(model, data, p)
    return math.fsum(losses.tolist()) / losses.size, data.n, data.scale


def cmd_bound(args) -> dict:
    _require(args, "delta")
    if (args.emp is None) == (args.emp_from_model is None):
        raise UsageError("give exactly one of --emp and --emp-from-model")
    scale = None
    if args.emp_from_model is not None:
        emp, n, scale = _emp_from_model(args)
        if args.n is not None and args.n != n:
            raise UsageError(f"--n {args.n} disagrees with the {n} rows of --data")
    else:
        _require(args, "n")
        emp, n = args.emp, args.n
    params = _bound_params(args)
    f = FORMULAS[args.formula_id]
    if "p" in f.params:
        params.setdefault("p", 2.0)
    missing = [k for k in f.params if k not in params]
    if missing:
        raise UsageError(f"{args.formula_id}: missing " + ", ".join(_FLAG.get(k, "--" + k) for k in missing))
    rep = evaluate_bound(args.formula_id, emp, n, args.delta, scale=scale, **params)
    out = rep.to_dict()
    if scale is not None:
        out["raw_units"] = rep.in_raw_units(params.get("p", 2.0))
    return out


def _fat_fn(args):
    if args.alpha is not None or args.beta is not None:
        _require(args, "alpha", "beta")
        return FatPolyClass(args.alpha, args.beta).fat_at, {"alpha": args.alpha, "beta": args.beta}
    _require(args, "R_x", "R_w")
    return (lambda e: fat_shattering_linear(args.R_x, args.R_w, e)), {"R_x": args.R_x, "R_w": args.R_w}


def cmd_capacity(args) -> dict:
    fid = args.formula_id
    if fid == "rad-linear":
        _require(args, "R_x", "R_w", "n")
        v = rademacher_linear_bound(args.R_x, args.R_w, args.n)
        return CapacityReport("rademacher", v, fid, n=args.n, inputs={"R_x": args.R_x, "R_w": args.R_w}).to_dict()
    if fid in ("rad-exact", "rad-mc"):
        _require(args, "data")
        data = _inputs_only(args)
        if args.R_H is not None:
            kern = _kernel_from_args(args)
            spec, inputs = KernelClass(1.0, args.R_H, kern), {"R_H": args.R_H, "kernel": kern.to_dict()}
        else:
            _require(args, "R_w")
            spec, inputs = LinearClass(data.shape[1], 1.0, args.R_w), {"R_w": args.R_w}
        n = data.shape[0]
        if fid == "rad-exact":
            if isinstance(spec, KernelClass):
                v = rademacher_enumerate(class_sup(spec, data), n)
            else:
                v = rademacher_linear_exact(data, args.R_w)
            return CapacityReport("rademacher", v, fid, n=n, inputs=inputs).to_dict()
        _require_seed(args)
        est = rademacher_mc(spec, data, args.draws, args.seed)
        out = CapacityReport("rademacher", est.mean, fid, n=n, inputs=inputs).to_dict()
        out["mc"] = est.to_dict()
        return out
    if fid == "fat-linear":
        _require(args, "R_x", "R_w", "eps")
        v = fat_shattering_linear(args.R_x, args.R_w, args.eps)
        return CapacityReport("fat", v, fid, eps=args.eps, inputs={"R_x": args.R_x, "R_w": args.R_w}).to_dict()
    if fid == "fat-poly":
        _require(args, "alpha", "beta", "eps")
        v = FatPolyClass(args.alpha, args.beta).fat_at(args.eps)
        return CapacityReport("fat", v, fid, eps=args.eps, inputs={"alpha": args.alpha, "beta": args.beta}).to_dict()
    if fid == "growth-linear":
        _require(args, "C", "d", "n")
        v = growth_linear_classifiers(args.C, args.d, args.n)
        return CapacityReport("growth", v, fid, n=args.n, inputs={"C": args.C, "d": args.d}).to_dict()
    if fid == "growth-natarajan":
        _require(args, "C", "d_G", "n")
        v = growth_natarajan(args.n, args.C, args.d_G)
        return CapacityReport("growth", v, fid, n=args.n, inputs={"C": args.C, "d_G": args.d_G}).to_dict()
    if fid == "entropy-inf-fat":
        _require(args, "eps", "n")
        fat, inputs = _fat_fn(args)
        v = entropy_inf_fat(args.eps, args.n, fat)
        return CapacityReport("entropy", v, fid, eps=args.eps, n=args.n, inputs=inputs).to_dict()
    if fid == "entropy-l2-dimfree":
        _require(args, "eps")
        fat, inputs = _fat_fn(args)
        return CapacityReport("entropy", entropy_l2_dimfree(args.eps, fat), fid, eps=args.eps, inputs=inputs).to_dict()
    if fid == "entropy-linear":
        _require(args, "eps", "d", "R_x", "R_w")
        v = entropy_inf_linear_finite_d(args.eps, args.d, args.R_x, args.R_w)
        inputs = {"d": args.d, "R_x": args.R_x, "R_w": args.R_w}
        return CapacityReport("entropy", v, fid, eps=args.eps, inputs=inputs).to_dict()
    if fid == "entropy-kernel":
        _require(args, "eps", "R_x", "R_H", "n")
        v = entropy_inf_kernel(args.eps, args.R_x, args.R_H, args.n)
        return CapacityReport("entropy", v, fid, eps=args.eps, n=args.n, inputs={"R_x": args.R_x, "R_H": args.R_H}).to_dict()
    # entropy-pws
    _require(args, "eps", "n", "C", "d_G")
    fat, inputs = _fat_fn(args)
    v = entropy_pws(args.eps, args.n, args.C, fat, variant=args.variant, d_G=args.d_G)
    inputs.update({"C": args.C, "d_G": args.d_G, "variant": args.variant})
    return CapacityReport("entropy", v, fid, eps=args.eps, n=args.n, inputs=inputs).to_dict()


def _inputs_only(args) -> np.ndarray:
    raw = load_csv(args.data)
    if args.add_bias:
        raw = raw.with_bias()
    return np.asarray(raw.xs)


def cmd_srm(args) -> dict:
    _require_seed(args)
    _require(args, "data", "C_max")
    data = _load_data(args.data, args.add_bias, not args.no_rescale)
    params = _bound_params(args)
    params.pop("C", None)
    params.setdefault("R_x", data.max_input_norm)
    opts = _fit_options(args)
    C_star, table = select_modes_srm(data, args.C_max, args.formula, args.delta, opts, params)
    _write_tsv(srm_tsv(table), args.tsv)
    return srm_report(C_star, table, formula_id=args.formula, delta=args.delta, n=data.n, seed=args.seed)


def _spec_from_args(args) -> SyntheticSpec:
    base = {}
    if args.spec:
        try:
            base = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"spec file is not valid JSON: {exc.msg}", line=exc.lineno) from None
    overrides = {
        "kind": args.kind,
        "C_true": args.C_true,
        "d": args.d,
        "noise": args.noise,
        "n": args.n,
        "x_dist": args.x_dist,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    base["seed"] = args.seed
    return SyntheticSpec.from_dict(base)


def cmd_validate(args) -> dict:
    _require_seed(args)
    spec = _spec_from_args(args)
    params = _bound_params(args)
    params.pop("d", None)
    C_fit = params.pop("C", None)
    opts = FitOptions(restarts=args.restarts, max_iters=args.max_iters, seed=args.seed)
    rep = validate_coverage(
        spec,
        trials=args.trials,
        delta=args.delta,
        bound_formula=args.formula,
        test_n=args.test_n,
        opts=opts,
        C_fit=C_fit,
        bound_params=params,
        workers=args.workers,
    )
    out = rep.to_dict(include_trials=args.trials_detail)
    out["spec"] = spec.to_dict()
    out["test_n"] = args.test_n
    return out


def cmd_rate(args) -> dict:
    if args.grid:
        grid = [float(v) for v in args.grid.split(",")]
    else:
        grid = dyadic_grid(args.lo_exp, args.hi_exp)
    params = _bound_params(args)
    f = FORMULAS[args.formula_id]
    if "p" in f.params:
        params.setdefault("p", 2.0)
    missing = [k for k in f.params if k not in params]
    if missing:
        raise UsageError(f"{args.formula_id}: missing " + ", ".join(_FLAG.get(k, "--" + k) for k in missing))
    res = rate_study(args.formula_id, grid, **params)
    _write_tsv(res.tsv(), args.tsv)
    out = res.to_dict()
    out["formula_id"] = args.formula_id
    out["inputs"] = params
    return out


# -- parser -----------------------------------------------------------------------


def _delta(s: str) -> float:
    v = float(s)
    if not (0 < v < 1):
        raise argparse.ArgumentTypeError(f"delta must lie in (0, 1), got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchbound", description="Switching-regression capacity and risk bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, out=True):
        if seed:
            p.add_argument("--seed", type=int, default=None, help="random seed (required)")
        if out:
            p.add_argument("--out", default=None, help="write JSON here instead of stdout")

    def data_flags(p):
        p.add_argument("--data", default=None, help="CSV file with header x1,...,xd,y")
        p.add_argument("--add-bias", action="store_true", help="append a constant-1 input (affine components)")

    def fit_flags(p):
        p.add_argument("--restarts", type=int, default=10)
        p.add_argument("--max-iters", type=int, default=100)
        p.add_argument("--norm-cap", type=float, default=None, help="project component weights onto this ball")

    p = sub.add_parser("fit", help="fit a switching or PWS model by ERM")
    common(p)
    data_flags(p)
    fit_flags(p)
    p.add_argument("--C", type=int, default=None)
    p.add_argument("--model", choices=("switching", "pws", "kernel"), default="switching")
    p.add_argument("--kernel", choices=("gaussian", "polynomial", "linear"), default="gaussian")
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--offset", type=float, default=1.0)
    p.add_argument("--RH", dest="R_H", type=float, default=None, help="RKHS norm cap for kernel components")
    p.add_argument("--no-rescale", action="store_true", help="use outputs as given (must lie in [-1/2, 1/2])")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bound", help="evaluate a risk bound")
    p.add_argument("formula_id", choices=sorted(FORMULAS))
    common(p, seed=False)
    p.add_argument("--emp", type=float, default=None, help="empirical risk in rescaled units")
    p.add_argument("--emp-from-model", default=None, help="fit report or model JSON; needs --data")
    p.add_argument("--data", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--delta", type=_delta, default=None)
    _add_bound_params(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("capacity", help="evaluate a capacity measure")
    p.add_argument("formula_id", choices=CAPACITY_IDS)
    common(p)
    data_flags(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--dG", dest="d_G", type=int, default=None, help="Natarajan dimension of the classifier set")
    p.add_argument("--variant", choices=("l2", "linf"), default="l2")
    p.add_argument("--draws", type=int, default=20000)
    p.add_argument("--kernel", choices=("gaussian", "polynomial", "linear"), default="gaussian")
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--offset", type=float, default=1.0)
    _add_bound_params(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("srm", help="select the number of modes by bound minimization")
    common(p)
    data_flags(p)
    fit_flags(p)
    p.add_argument("--C-max", dest="C_max", type=int, default=None)
    p.add_argument("--formula", choices=sorted(FORMULAS), default="switching-linear")
    p.add_argument("--delta", type=_delta, default=0.05)
    p.add_argument("--no-rescale", action="store_true")
    p.add_argument("--tsv", default=None, help="write the C / bound table as TSV")
    _add_bound_params(p)
    p.set_defaults(func=cmd_srm)

    p = sub.add_parser("validate", help="Monte Carlo coverage of a bound on synthetic data")
    common(p)
    p.add_argument("--spec", default=None, help="JSON synthetic spec; flags below override it")
    p.add_argument("--kind", choices=("pws", "arbitrary"), default=None)
    p.add_argument("--C-true", dest="C_true", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--x-dist", dest="x_dist", choices=("ball", "sphere"), default=None)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--test-n", type=int, default=50000)
    p.add_argument("--delta", type=_delta, default=0.05)
    p.add_argument("--formula", choices=sorted(FORMULAS), default="switching-linear")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--workers", type=int, default=None, help="process count (default: $SWITCHBOUND_WORKERS or 1)")
    p.add_argument("--trials-detail", action="store_true", help="include per-trial outcomes")
    _add_bound_params(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rate", help="fit the log-log slope of a control term against n")
    p.add_argument("formula_id", choices=sorted(FORMULAS))
    common(p, seed=False)
    p.add_argument("--grid", default=None, help="comma-separated n values")
    p.add_argument("--lo-exp", type=int, default=10, help="grid starts at 2^lo")
    p.add_argument("--hi-exp", type=int, default=24, help="grid ends at 2^hi")
    p.add_argument("--tsv", default=None, help="write ln n / ln control-term series as TSV")
    _add_bound_params(p)
    p.set_defaults(func=cmd_rate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = args.func(args)
        _emit(result, args.out)
    except (UsageError, InvalidParameter) as exc:
        print(f"switchbound {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"switchbound {args.command}: data error: {exc}", file=sys.stderr)
        return 1
    except (SwitchboundError, OSError, KeyError, ValueError) as exc:
        print(f"switchbound {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
