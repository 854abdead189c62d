import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchbound.core import InvalidInput, InvalidParameter, NumericalError
from switchbound.models import (
    Kernel,
    KernelComponent,
    LinearClassifier,
    LinearComponent,
    PwsModel,
    SwitchingModel,
    classify,
    dumps_model,
    loads_model,
    model_from_dict,
    predict_pws,
    predict_switching,
    rkhs_norm,
)


class TestClassify:
    def test_largest_score(self):
        g = LinearClassifier([[1.0, 0.0], [0.0, 1.0]])
        assert classify(g, [2.0, 1.0]) == 0
        assert classify(g, [1.0, 2.0]) == 1

    def test_tie_goes_to_lowest_index(self):
        g = LinearClassifier([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]])
        assert classify(g, [0.3, -0.1]) == 0

    def test_single_mode(self):
        g = LinearClassifier.trivial(3)
        np.testing.assert_array_equal(classify(g, np.ones((4, 3))), [0, 0, 0, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInput):
            classify(LinearClassifier([[1.0, 0.0]]), [1.0, 2.0, 3.0])


class TestPredict:
    def test_pws_example(self):
        g = LinearClassifier([[1.0, 0.0], [0.0, 1.0]])
        m = PwsModel(g, (LinearComponent([0.1, 0.1]), LinearComponent([5.0, 5.0])))
        assert predict_pws(m, [2.0, 1.0]) == pytest.approx(0.3)
        assert predict_pws(m, [1.0, 2.0]) == 0.5

    def test_pws_single_mode(self):
        m = PwsModel(LinearClassifier.trivial(1), (LinearComponent([0.9]),))
        assert predict_pws(m, [1.0]) == 0.5
        assert predict_pws(m, [-0.2]) == pytest.approx(-0.18)

    def test_switching_example(self):
        m = SwitchingModel((LinearComponent([0.4]), LinearComponent([-0.4])))
        np.testing.assert_allclose(predict_switching(m, [1.0]), [0.4, -0.4])

    def test_switching_zero_and_clipped(self):
        m = SwitchingModel((LinearComponent([0.0]), LinearComponent([3.0])))
        np.testing.assert_array_equal(predict_switching(m, [1.0]), [0.0, 0.5])
        assert predict_switching(m, [[1.0], [-1.0]]).shape == (2, 2)

    def test_mismatched_components(self):
        with pytest.raises(InvalidInput):
            SwitchingModel((LinearComponent([1.0]), LinearComponent([1.0, 2.0])))
        with pytest.raises(InvalidInput):
            PwsModel(LinearClassifier.trivial(1), (LinearComponent([1.0]), LinearComponent([2.0])))

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
    def test_pws_value_is_one_of_switching_values(self, w, x):
        g = LinearClassifier([[1.0, -1.0], [-1.0, 1.0]])
        comps = (LinearComponent(w), LinearComponent([0.1, 0.2]))
        pws = PwsModel(g, comps)
        assert predict_pws(pws, x) in set(predict_switching(pws.as_switching(), x).tolist())


class TestKernels:
    def test_rkhs_norm_examples(self):
        k = Kernel.gaussian(1.0)
        assert rkhs_norm(KernelComponent([[0.0]], [1.0], k)) == pytest.approx(1.0)
        assert rkhs_norm(KernelComponent([[0.0]], [0.0], k)) == 0.0
        far = KernelComponent([[0.0], [100.0]], [1.0, 1.0], k)
        assert rkhs_norm(far) == pytest.approx(math.sqrt(2))

    def test_linear_kernel_norm_matches_weight_norm(self):
        rng = np.random.default_rng(3)
        S = rng.normal(size=(5, 3))
        a = rng.normal(size=5)
        assert rkhs_norm(KernelComponent(S, a, Kernel.linear())) == pytest.approx(np.linalg.norm(S.T @ a))

    def test_kernel_values(self):
        c = KernelComponent([[0.0, 0.0], [1.0, 0.0]], [0.5, -0.5], Kernel.polynomial(2, 1.0))
        x = np.array([[1.0, 1.0]])
        assert c.values(x)[0] == pytest.approx(0.5 * 1.0 - 0.5 * 4.0)

    def test_gram_psd(self):
        X = np.random.default_rng(0).normal(size=(12, 2))
        for k in (Kernel.gaussian(0.7), Kernel.polynomial(3), Kernel.linear()):
            assert np.linalg.eigvalsh(k(X, X))[0] > -1e-8

    def test_non_psd_rejected(self):
        class Bad(Kernel):
            def __call__(self, A, B):
                return -np.eye(np.atleast_2d(A).shape[0])

        with pytest.raises(NumericalError):
            rkhs_norm(KernelComponent([[0.0], [1.0]], [1.0, 1.0], Bad("linear")))

    @pytest.mark.parametrize("args", [("nope", {}), ("gaussian", {"bandwidth": 0.0}), ("polynomial", {"degree": 1.5})])
    def test_invalid_kernel(self, args):
        with pytest.raises(InvalidParameter):
            Kernel(*args)


class TestSerialization:
    def test_round_trip(self):
        g = LinearClassifier([[0.3, -0.1], [0.2, 0.5]])
        k = Kernel.gaussian(0.5)
        pws = PwsModel(g, (LinearComponent([0.1, 0.2]), KernelComponent([[0.0, 1.0]], [0.3], k)))
        sw = SwitchingModel((LinearComponent([0.1, 1 / 3]),), M=0.5)
        X = np.random.default_rng(1).normal(size=(6, 2))
        for m in (pws, sw):
            back = loads_model(dumps_model(m))
            np.testing.assert_array_equal(back.values(X), m.values(X))
            assert back.to_dict() == m.to_dict()

    def test_switching_has_no_classifier(self):
        assert SwitchingModel((LinearComponent([1.0]),)).to_dict()["classifier"] is None

    def test_count_mismatch(self):
        d = SwitchingModel((LinearComponent([1.0]),)).to_dict()
        d["C"] = 2
        with pytest.raises(InvalidInput):
            model_from_dict(d)
