import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchbound.capacity import (
    CapacityReport,
    FatPolyClass,
    FiniteClass,
    KernelClass,
    LinearClass,
    class_sup,
    distinct_classifications,
    entropy_decompose_pointwise,
    entropy_decompose_pws,
    entropy_decompose_switching,
    entropy_inf_fat,
    entropy_inf_kernel,
    entropy_inf_linear_finite_d,
    entropy_l2_dimfree,
    entropy_pws,
    exact_min_cover,
    exact_min_cover_net,
    fat_shattering_linear,
    greedy_net,
    growth_linear_classifiers,
    growth_natarajan,
    is_net,
    max_distance_to_net,
    pointwise_family,
    product_net_pws,
    pws_family,
    rademacher_enumerate,
    rademacher_exact,
    rademacher_linear_bound,
    rademacher_linear_exact,
    rademacher_mc,
    rademacher_mc_finite,
    restricted_net_pws,
    switching_loss_family,
)
from switchbound.capacity.rademacher import make_rng
from switchbound.core import INF, InvalidParameter, ResourceLimit, q_root
from switchbound.models import Kernel

REL = 1e-9


class TestRademacher:
    def test_orthonormal_pair_is_constant(self):
        X = np.eye(2)
        for draws in (1, 7, 5000):
            est = rademacher_mc(LinearClass(2, 1.0, 1.0), X, draws, seed=4)
            assert est.mean == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
        assert rademacher_linear_exact(X, 1.0) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)

    def test_zero_radius(self):
        est = rademacher_mc(LinearClass(2, 1.0, 0.0), np.eye(2), 100, seed=0)
        assert est.mean == 0.0

    def test_within_linear_bound(self):
        X = make_rng(11).uniform(-1, 1, (50, 3))
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
        est = rademacher_mc(LinearClass(3, 1.0, 2.0), X, 4000, seed=1)
        assert est.mean <= rademacher_linear_bound(1.0, 2.0, 50) + 3 * est.stderr

    def test_finite_examples(self):
        assert rademacher_exact(np.zeros((1, 3))) == 0.0
        assert rademacher_exact([[0.5, 0.5], [-0.5, -0.5]]) == pytest.approx(0.25)
        assert rademacher_exact([[0.5], [-0.5]]) == pytest.approx(0.5)

    def test_linear_bound_examples(self):
        assert rademacher_linear_bound(2, 0.5, 16) == 0.25
        assert rademacher_linear_bound(1, 1, 100) == 0.1
        assert rademacher_linear_bound(1, 1, 400) == pytest.approx(rademacher_linear_bound(1, 1, 100) / 2)

    def test_enumeration_matches_exact_for_finite_class(self):
        R = make_rng(2).uniform(-0.5, 0.5, (5, 9))
        via_enum = rademacher_enumerate(lambda S: np.max(S @ R.T, axis=1) / 9, 9)
        assert via_enum == rademacher_exact(R)

    def test_mc_is_reproducible_and_chunked(self):
        R = make_rng(3).uniform(-0.5, 0.5, (4, 6))
        a = rademacher_mc_finite(R, 9000, seed=5)
        b = rademacher_mc_finite(R, 9000, seed=5)
        assert a == b
        assert abs(a.mean - rademacher_exact(R)) <= 4 * a.stderr

    def test_kernel_ball_with_linear_kernel_matches_linear_ball(self):
        X = make_rng(4).normal(size=(8, 2))
        lin = rademacher_enumerate(class_sup(LinearClass(2, 1.0, 1.5), X), 8)
        ker = rademacher_enumerate(class_sup(KernelClass(1.0, 1.5, Kernel.linear()), X), 8)
        assert ker == pytest.approx(lin, rel=1e-12)

    def test_closed_form_sup_matches_grid(self):
        rng = make_rng(5)
        angles = np.linspace(0, 2 * np.pi, 20001)
        W = np.column_stack([np.cos(angles), np.sin(angles)])
        for _ in range(5):
            X = rng.uniform(-1, 1, (6, 2))
            S = rng.choice([-1.0, 1.0], size=(10, 6))
            brute = np.max(S @ X @ W.T, axis=1) / 6
            np.testing.assert_allclose(class_sup(LinearClass(2, 1.0, 1.0), X)(S), brute, atol=1e-3)

    def test_enumeration_limit(self):
        with pytest.raises(ResourceLimit):
            rademacher_exact(np.zeros((1, 21)))

    def test_draws_validated(self):
        with pytest.raises(InvalidParameter):
            rademacher_mc(LinearClass(1, 1.0, 1.0), [[1.0]], 0, seed=0)


class TestDimensions:
    @pytest.mark.parametrize("eps, expected", [(0.25, 16), (1.0, 1), (1.01, 0)])
    def test_linear_examples(self, eps, expected):
        assert fat_shattering_linear(1, 1, eps) == expected

    def test_float_error_at_integers(self):
        # (0.3 / 0.1)^2 evaluates to 8.999999999999998
        assert fat_shattering_linear(0.3, 1.0, 0.1) == 9

    def test_poly_class(self):
        assert FatPolyClass(2.0, 2.0).fat_at(0.5) == 8
        with pytest.raises(InvalidParameter):
            FatPolyClass(1.0, 0.5)

    def test_report_validation(self):
        assert CapacityReport("fat", 3, "fat-linear").to_dict()["value"] == 3
        with pytest.raises(InvalidParameter):
            CapacityReport("cover", 0.5, "x")
        with pytest.raises(InvalidParameter):
            CapacityReport("nonsense", 1, "x")


class TestGrowth:
    def test_linear_examples(self):
        assert growth_linear_classifiers(3, 2, 10) == pytest.approx(6 * math.log(30), rel=REL)
        assert growth_linear_classifiers(3, 2, 10) == pytest.approx(20.4072, abs=1e-4)
        assert growth_linear_classifiers(2, 2, 100) == pytest.approx(4 * math.log(300), rel=REL)

    def test_single_mode_has_one_labelling(self):
        assert growth_linear_classifiers(1, 5, 100) == 0.0

    @given(st.integers(2, 6), st.integers(1, 6), st.integers(1, 1000))
    def test_linear_monotone(self, C, d, n):
        g = growth_linear_classifiers(C, d, n)
        assert g < growth_linear_classifiers(C + 1, d, n)
        assert g < growth_linear_classifiers(C, d + 1, n)
        assert g < growth_linear_classifiers(C, d, n + 1)

    def test_natarajan_examples(self):
        assert growth_natarajan(1, 2, 1) == pytest.approx(1.0, rel=REL)
        assert growth_natarajan(1, 2, 2) == pytest.approx(2 * math.log(math.e / 2), rel=REL)
        assert growth_natarajan(1, 2, 0) == 0.0


class TestEntropyEvaluators:
    def test_inf_fat_example(self):
        expected = math.log(2) + math.log2(8 * math.e) * math.log(16)
        assert entropy_inf_fat(1.0, 4, lambda e: 1) == pytest.approx(expected, rel=REL)
        assert entropy_inf_fat(1.0, 4, lambda e: 1) == pytest.approx(13.0109, abs=1e-4)

    def test_inf_fat_degenerate(self):
        assert entropy_inf_fat(0.3, 10, lambda e: 0) == 0.0

    def test_inf_fat_scale_checked(self):
        with pytest.raises(InvalidParameter):
            entropy_inf_fat(1.5, 4, lambda e: 1)

    def test_l2_dimfree_example(self):
        assert entropy_l2_dimfree(1.0, lambda e: 2) == pytest.approx(40 * math.log(6.5), rel=REL)
        assert entropy_l2_dimfree(1.0, lambda e: 0) == 0.0
        gain = entropy_l2_dimfree(0.25, lambda e: 3) - entropy_l2_dimfree(0.5, lambda e: 3)
        assert gain == pytest.approx(60 * math.log(2), rel=REL)

    def test_linear_finite_d_example(self):
        assert entropy_inf_linear_finite_d(0.5, 2, 1, 1) == pytest.approx(2 * math.log(6), rel=REL)
        assert entropy_inf_linear_finite_d(1.01, 2, 1, 1) == 0.0
        assert entropy_inf_linear_finite_d(0.3, 6, 1, 1) == pytest.approx(3 * entropy_inf_linear_finite_d(0.3, 2, 1, 1))

    def test_kernel_example(self):
        assert entropy_inf_kernel(0.5, 1, 1, 10) == pytest.approx(144 * math.log(300), rel=REL)
        assert entropy_inf_kernel(1.0, 1, 1, 10) == 0.0
        step = entropy_inf_kernel(0.5, 1, 1, 20) - entropy_inf_kernel(0.5, 1, 1, 10)
        assert step == pytest.approx(144 * math.log(2), rel=REL)

    def test_pws_examples(self):
        classifier = growth_natarajan(1, 1, 1)
        assert classifier == pytest.approx(math.log(math.e / 2), rel=REL)
        linf = entropy_pws(1.0, 1, 1, lambda e: 1, variant="linf", d_G=1)
        l2 = entropy_pws(1.0, 1, 1, lambda e: 1, variant="l2", d_G=1)
        assert linf == pytest.approx(classifier + 6 * math.log(2 * math.e) ** 2, rel=REL)
        assert l2 == pytest.approx(classifier + 20 * math.log(7), rel=REL)
        assert linf == pytest.approx(17.5073, abs=1e-4)
        assert l2 == pytest.approx(39.2251, abs=1e-4)

    def test_pws_only_classifier(self):
        assert entropy_pws(0.5, 10, 3, lambda e: 0, classifier_entropy=2.5) == 2.5

    def test_pws_needs_classifier_term(self):
        with pytest.raises(InvalidParameter):
            entropy_pws(0.5, 10, 3, lambda e: 1)

    @settings(max_examples=100)
    @given(
        eps=st.floats(0.01, 0.9),
        shrink=st.floats(0.1, 1.0),
        n=st.integers(1, 10_000),
        grow=st.integers(0, 10_000),
    )
    def test_monotone(self, eps, shrink, n, grow):
        fat = LinearClass(2, 1.0, 1.0).fat_at
        small = eps * shrink
        for f in (
            lambda e, m: entropy_inf_fat(e, m, fat),
            lambda e, m: entropy_l2_dimfree(e, fat),
            lambda e, m: entropy_inf_linear_finite_d(e, 3, 1.0, 1.0),
            lambda e, m: entropy_inf_kernel(e, 1.0, 1.0, m),
            lambda e, m: entropy_pws(e, m, 2, fat, "linf", d_G=2),
            lambda e, m: entropy_pws(e, m, 2, fat, "l2", d_G=2),
        ):
            assert f(small, n) >= f(eps, n) - 1e-9
            assert f(eps, n + grow) >= f(eps, n) - 1e-9


class TestDecompositions:
    def _recorder(self):
        seen = []

        def entropy(e):
            seen.append(e)
            return 1.0

        return seen, entropy

    def test_pws_scales(self):
        seen, h = self._recorder()
        assert entropy_decompose_pws(0.4, INF, 2.0, h, C=3) == 5.0
        assert seen == [0.4] * 3
        seen.clear()
        entropy_decompose_pws(0.4, 2, 0.0, h, C=4)
        assert seen == [0.2] * 4
        seen.clear()
        assert entropy_decompose_pws(0.4, 1, 1.5, [h]) == 2.5
        assert seen == [0.4]

    def test_pws_uniform_l2_keeps_scale(self):
        seen, h = self._recorder()
        entropy_decompose_pws(0.4, 2, 0.0, h, C=4, mode="uniform-l2")
        assert seen == [0.4] * 4

    def test_switching_scales(self):
        seen, h = self._recorder()
        entropy_decompose_switching(0.4, INF, 1, h, C=2)
        assert seen == [0.4, 0.4]
        seen.clear()
        entropy_decompose_switching(0.4, INF, 2, h, C=5)
        assert seen == [0.2] * 5
        seen.clear()
        assert entropy_decompose_switching(0.4, 2, 1, [h]) == 1.0
        assert seen == [0.4]

    def test_mismatched_counts(self):
        with pytest.raises(InvalidParameter):
            entropy_decompose_pws(0.1, 2, 0.0, [lambda e: 0.0], C=2)


def _random_class(rng, m, n):
    return FiniteClass(rng.uniform(-0.5, 0.5, (m, n)))


class TestNets:
    def test_single_row(self):
        for eps in (1e-6, 0.5, 10.0):
            assert exact_min_cover(np.zeros((1, 3)), eps) == 1

    def test_two_rows(self):
        R = np.array([[0.0, 0.0], [0.3, 0.3]])
        assert exact_min_cover(R, 0.5, 2) == 1
        assert exact_min_cover(R, 0.2, 2) == 2

    def test_strict_inequality(self):
        R = np.array([[0.0], [0.3]])
        assert not is_net(R, [0], 0.3, INF)
        assert is_net(R, [0], 0.3000001, INF)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), eps=st.floats(0.05, 0.6), q=st.sampled_from([1.0, 2.0, INF]))
    def test_greedy_and_exact_are_nets(self, seed, eps, q):
        fc = _random_class(make_rng(seed), 9, 4)
        greedy = greedy_net(fc, eps, q)
        exact = exact_min_cover_net(fc, eps, q)
        assert is_net(fc, greedy, eps, q) and is_net(fc, exact, eps, q)
        assert len(exact) <= len(greedy)
        # no smaller proper net exists
        if len(exact) > 1:
            for sub in itertools.combinations(range(len(fc)), len(exact) - 1):
                assert not is_net(fc, sub, eps, q)

    def test_exact_limit(self):
        with pytest.raises(ResourceLimit):
            exact_min_cover(np.zeros((21, 2)), 0.1)

    def test_sup_metric_dominates(self):
        fc = _random_class(make_rng(9), 12, 5)
        for eps in (0.1, 0.2, 0.4):
            assert exact_min_cover(fc, eps, 2) <= exact_min_cover(fc, eps, INF)
            assert exact_min_cover(fc, eps, 1) <= exact_min_cover(fc, eps, 2)


class TestFamilies:
    def test_distinct_classifications(self):
        L = distinct_classifications([[0, 1, 1], [0, 1, 1], [1, 0, 0]])
        assert L.shape == (2, 3)

    def test_pws_family_contents(self):
        A = [[0.1, 0.2]]
        B = [[-0.1, -0.2], [0.3, 0.4]]
        fam = pws_family([A, B], [[0, 1], [1, 1]])
        rows = {tuple(r) for r in fam.rows.tolist()}
        assert rows == {(0.1, -0.2), (0.1, 0.4), (-0.1, -0.2), (0.3, 0.4)}

    @pytest.mark.parametrize("q", [1.0, 2.0, INF])
    def test_product_net_is_a_net(self, q):
        rng = make_rng(21)
        for _ in range(5):
            comps = [rng.uniform(-0.5, 0.5, (4, 5)) for _ in range(2)]
            labels = rng.integers(0, 2, (3, 5))
            eps = 0.3
            nets = [c[exact_min_cover_net(c, eps, q)] for c in comps]
            fam = pws_family(comps, labels)
            net = product_net_pws(nets, labels)
            assert max_distance_to_net(fam.rows, net, q) < q_root(2, q) * eps
            if q is INF:
                assert max_distance_to_net(fam.rows, net, INF) < eps

    def test_restricted_net_is_l2_net(self):
        rng = make_rng(22)
        for _ in range(5):
            comps = [rng.uniform(-0.5, 0.5, (5, 6)) for _ in range(2)]
            labels = rng.integers(0, 2, (3, 6))
            fam = pws_family(comps, labels)
            net = restricted_net_pws(comps, labels, 0.25)
            assert max_distance_to_net(fam.rows, net, 2) < 0.25

    def test_pointwise_min_cover(self):
        rng = make_rng(23)
        for q in (1.0, 2.0, INF):
            comps = [rng.uniform(-0.5, 0.5, (3, 4)) for _ in range(2)]
            eps = 0.2
            bound = math.prod(exact_min_cover(c, eps / q_root(2, q), q) for c in comps)
            fns = [lambda e, c=c: math.log(exact_min_cover(c, e, q)) for c in comps]
            assert entropy_decompose_pointwise(eps, q, fns) == pytest.approx(math.log(bound))
            assert exact_min_cover(pointwise_family(comps, "min"), eps, q) <= bound
            assert exact_min_cover(pointwise_family(comps, "max"), eps, q) <= bound

    def test_switching_loss_cover(self):
        rng = make_rng(24)
        y = rng.uniform(-0.5, 0.5, 4)
        for p in (1.0, 2.0):
            for q in (2.0, INF):
                comps = [rng.uniform(-0.5, 0.5, (3, 4)) for _ in range(2)]
                eps = 0.3
                loss = switching_loss_family(comps, y, p)
                bound = entropy_decompose_switching(
                    eps, q, p, [lambda e, c=c: math.log(exact_min_cover(c, e, q)) for c in comps]
                )
                assert math.log(exact_min_cover(loss, eps, q)) <= bound + 1e-12
