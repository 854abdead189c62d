import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchbound.bounds import FORMULAS
from switchbound.core import InvalidInput, InvalidParameter
from switchbound.experiments import (
    SyntheticSpec,
    argmin_first,
    control_term_fn,
    dyadic_grid,
    generate_synthetic,
    model_risk,
    rate_study,
    resolve_workers,
    sample_inputs,
    select_modes_srm,
    srm_report,
    srm_tsv,
    validate_coverage,
)
from switchbound.learn import FitOptions

OPPOSITE = ((0.45, 0.0), (-0.45, 0.0))


class TestSynthetic:
    def test_determinism(self):
        spec = SyntheticSpec(n=50, seed=11)
        a, ta = generate_synthetic(spec)
        b, tb = generate_synthetic(spec)
        assert a.xs.tobytes() == b.xs.tobytes() and a.ys.tobytes() == b.ys.tobytes()
        np.testing.assert_array_equal(ta.labels, tb.labels)

    def test_streams_differ_but_share_truth(self):
        spec = SyntheticSpec(n=20, seed=3)
        a, ta = generate_synthetic(spec, stream=(0, 0))
        b, tb = generate_synthetic(spec, stream=(0, 1))
        assert not np.array_equal(a.xs, b.xs)
        assert ta.model.to_dict() == tb.model.to_dict()

    @pytest.mark.parametrize("kind", ["arbitrary", "pws"])
    def test_noiseless_true_risk_zero(self, kind):
        data, truth = generate_synthetic(SyntheticSpec(kind=kind, noise=0.0, n=300, seed=1))
        assert float(np.max(model_risk(truth.model, data))) <= 1e-30

    def test_uniform_noise_second_moment(self):
        b = 0.05
        data, truth = generate_synthetic(SyntheticSpec(kind="pws", noise=b, n=10**6, seed=2))
        risk = float(np.mean(model_risk(truth.model, data)))
        assert risk == pytest.approx(b**2 / 3, rel=5e-3)

    def test_outputs_in_range(self):
        data, _ = generate_synthetic(SyntheticSpec(noise=0.3, n=400, seed=0))
        assert np.all(np.abs(data.ys) <= 0.5)

    @pytest.mark.parametrize("x_dist", ["ball", "sphere"])
    def test_input_norms(self, x_dist):
        from switchbound.capacity.rademacher import make_rng

        norms = np.linalg.norm(sample_inputs(make_rng(0), 500, 3, x_dist), axis=1)
        assert np.all(norms <= 1 + 1e-12)
        if x_dist == "sphere":
            np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_pws_labels_follow_classifier(self):
        data, truth = generate_synthetic(SyntheticSpec(kind="pws", n=100, seed=4))
        G = np.asarray(truth.model.classifier.W)
        np.testing.assert_array_equal(truth.labels, np.argmax(data.xs @ G.T, axis=1))

    @pytest.mark.parametrize(
        "kw",
        [{"kind": "mixture"}, {"n": 0}, {"noise": -0.1}, {"x_dist": "cube"}, {"weights": ((1.0,),)}],
    )
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameter):
            SyntheticSpec(**kw)

    def test_dict_round_trip(self):
        spec = SyntheticSpec(weights=OPPOSITE, x_dist="sphere", seed=9)
        assert SyntheticSpec.from_dict(spec.to_dict()) == spec
        with pytest.raises(InvalidParameter):
            SyntheticSpec.from_dict({"bogus": 1})


class TestSrm:
    def test_argmin_example(self):
        assert [1, 2, 3][argmin_first([0.5, 0.3, 0.35])] == 2

    def test_ties_go_to_smaller(self):
        assert argmin_first([0.4, 0.3, 0.3]) == 1

    def test_single_candidate(self):
        data, _ = generate_synthetic(SyntheticSpec(n=100, seed=0))
        C, rows = select_modes_srm(data, 1)
        assert C == 1 and len(rows) == 1

    def test_control_monotone_and_report(self):
        data, _ = generate_synthetic(SyntheticSpec(n=300, seed=5))
        C, rows = select_modes_srm(data, 4, opts=FitOptions(restarts=3))
        ctrl = [r.control_term for r in rows]
        assert all(b >= a for a, b in zip(ctrl, ctrl[1:]))
        assert min(r.bound for r in rows) == rows[C - 1].bound
        rep = srm_report(C, rows, seed=0)
        assert rep["C_star"] == C and len(rep["table"]) == 4
        assert srm_tsv(rows).splitlines()[0].split("\t")[0] == "C"

    def test_two_modes_selected(self):
        hits = 0
        for seed in range(10):
            spec = SyntheticSpec(n=2000, noise=0.1, x_dist="sphere", weights=OPPOSITE, seed=seed)
            data, _ = generate_synthetic(spec)
            C, _ = select_modes_srm(data, 3, opts=FitOptions(restarts=10, seed=seed))
            hits += C == 2
        assert hits >= 8

    def test_invalid(self):
        data, _ = generate_synthetic(SyntheticSpec(n=20))
        with pytest.raises(InvalidParameter):
            select_modes_srm(data, 0)
        with pytest.raises(InvalidParameter):
            select_modes_srm(data, 2, delta=1.5)


class TestCoverage:
    def test_trivial_bound_always_covers(self):
        rep = validate_coverage(SyntheticSpec(n=100, seed=0), 5, 0.05, "trivial", test_n=2000)
        assert rep.coverage == 1.0 and rep.violations == 0

    def test_empirical_risk_is_optimistic(self):
        spec = SyntheticSpec(n=20, noise=0.5, seed=1, C_true=1)
        rep = validate_coverage(spec, 30, 0.05, "empirical", test_n=5000, C_fit=3)
        assert rep.coverage < 1.0

    def test_switching_linear_small(self):
        rep = validate_coverage(SyntheticSpec(n=200, seed=2), 10, 0.05, test_n=5000)
        assert rep.coverage == 1.0
        assert all(o.bound >= o.empirical_risk for o in rep.outcomes)
        assert [o.trial for o in rep.outcomes] == list(range(10))

    def test_worker_count_irrelevant(self):
        spec = SyntheticSpec(n=100, seed=3)
        a = validate_coverage(spec, 4, 0.05, test_n=1000, workers=1).to_dict()
        b = validate_coverage(spec, 4, 0.05, test_n=1000, workers=2).to_dict()
        assert a == b

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("SWITCHBOUND_WORKERS", "3")
        assert resolve_workers() == 3
        assert resolve_workers(2) == 2
        monkeypatch.setenv("SWITCHBOUND_WORKERS", "many")
        with pytest.raises(InvalidParameter):
            resolve_workers()

    def test_invalid(self):
        spec = SyntheticSpec(n=10)
        with pytest.raises(InvalidParameter):
            validate_coverage(spec, 0, 0.05)
        with pytest.raises(InvalidParameter):
            validate_coverage(spec, 2, 0.05, "no-such-bound")


class TestRates:
    def test_power_law(self):
        r = rate_study(lambda n: 3.0 / math.sqrt(n), dyadic_grid(4, 20))
        assert r.slope == pytest.approx(-0.5, abs=1e-6)
        assert r.residual < 1e-9

    def test_chained_linear(self):
        r = rate_study("switching-linear-chained", dyadic_grid(10, 24), p=2, C=2, d=2, R_x=1, R_w=1)
        assert r.slope == pytest.approx(-0.5, abs=1e-9)

    @pytest.mark.parametrize("fid", ["pws-kernel", "switching-kernel-chained"])
    def test_kernel_slopes(self, fid):
        params = {"p": 2, "C": 2, "d": 2, "R_x": 1, "R_H": 1}
        r = rate_study(fid, dyadic_grid(10, 24), **params)
        assert -0.50 <= r.slope <= -0.35

    def test_tsv(self):
        text = rate_study(lambda n: 1 / n, [1, 10, 100, 1000]).tsv()
        rows = text.splitlines()
        assert rows[0] == "ln_n\tln_value" and len(rows) == 5

    @pytest.mark.parametrize(
        "grid", [[1, 10, 100], [1, 2, 3, 4], [0, 10, 100, 1000], [1, 10, 100, float("nan")]]
    )
    def test_degenerate_grid(self, grid):
        with pytest.raises(InvalidInput):
            rate_study(lambda n: 1.0, grid)

    def test_nonpositive_values(self):
        with pytest.raises(InvalidInput):
            rate_study(lambda n: 0.0, dyadic_grid(0, 12))

    def test_missing_parameters(self):
        with pytest.raises(InvalidParameter):
            control_term_fn("pwa", C=2)

    @settings(max_examples=30, deadline=None)
    @given(fid=st.sampled_from(sorted(FORMULAS)), n=st.integers(10, 10**7))
    def test_control_terms_monotone_in_C(self, fid, n):
        params = {"p": 2, "d": 2, "R_x": 1, "R_w": 1, "R_H": 1, "alpha": 0.5, "beta": 2.5}
        vals = [control_term_fn(fid, C=C, **params)(n) for C in (1, 2, 3, 5)]
        assert all(b >= a * (1 - 1e-15) for a, b in zip(vals, vals[1:]))
