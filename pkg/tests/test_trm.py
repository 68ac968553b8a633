import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mgpboot.errors import DomainError, EmptyRequestError, ShapeError, UnsupportedMethodError
from mgpboot.margins import MarginalModel
from mgpboot.rand_core import RngState, StudentTParams
from mgpboot.synthetic import JointModel, sample_joint_model
from mgpboot.trm import (
    EMPIRICAL,
    VarVector,
    estimate,
    estimate_dcte,
    estimate_es,
    estimate_mmes,
    trm_oracle,
    trm_oracle_table,
    var_empirical,
    var_theoretical,
)


def row_scan(metric, x, j, v):
    """Reference estimator: explicit Python loops over rows."""
    picked = []
    for row in x.tolist():
        if metric == "ES":
            ok = row[j] > v[j]
        elif metric == "MMES":
            ok = all(row[k] >= v[k] for k in range(len(row)) if k != j)
        else:
            ok = all(row[k] >= v[k] for k in range(len(row)))
        if ok:
            picked.append(row[j])
    if not picked:
        return None, 0
    return sum(picked) / len(picked), len(picked)


class TestVar:
    def test_theoretical_t2(self):
        model = MarginalModel.known([StudentTParams(2.0)])
        c = 1 - 2 * 0.0025
        oracle = c * math.sqrt(2 / (1 - c * c))
        assert var_theoretical(model, 0.0025).values[0] == pytest.approx(oracle, rel=1e-10)
        assert oracle == pytest.approx(14.09, abs=0.01)

    def test_alpha_domain(self):
        model = MarginalModel.known([StudentTParams(2.0)])
        for a in (0.5, 0.0, 0.7):
            with pytest.raises(DomainError):
                var_theoretical(model, a)

    def test_monotone_in_alpha(self):
        model = MarginalModel.known([StudentTParams(2.0), StudentTParams(3.0)])
        v1, v2 = var_theoretical(model, 0.001).values, var_theoretical(model, 0.01).values
        assert np.all(v1 > v2)

    def test_empirical_margins_unsupported(self):
        with pytest.raises(UnsupportedMethodError):
            var_theoretical(MarginalModel.empirical(np.arange(10.0)), 0.1)

    def test_empirical_order_statistic(self):
        v = var_empirical(np.arange(1.0, 101.0), 0.05)
        assert v.values[0] == 95.0
        assert v.method == EMPIRICAL and not v.small_sample

    def test_empirical_small_sample(self):
        with pytest.warns(UserWarning):
            v = var_empirical(np.arange(1.0, 101.0), 0.001)
        assert v.values[0] == 100.0 and v.small_sample

    def test_empirical_exponential(self):
        x = RngState(1).generator().standard_exponential(1_000_000)
        assert abs(var_empirical(x, 0.01).values[0] - math.log(100)) < 0.05

    def test_empirical_empty(self):
        with pytest.raises(EmptyRequestError):
            var_empirical(np.zeros((0, 2)), 0.1)


class TestEstimators:
    def test_es_example(self):
        v = VarVector(0.1, [5.0], "test")
        r = estimate_es(np.array([10, 12, 20, 1, 2.0]), 0, v)
        assert r.estimate == 14.0 and r.support_count == 3

    def test_es_na(self):
        r = estimate_es(np.array([1.0, 2.0]), 0, VarVector(0.1, [5.0], "test"))
        assert r.estimate is None and r.support_count == 0 and not r.available

    def test_mmes_dcte_examples(self):
        x = np.array([[5.0, 10.0], [1.0, 20.0], [7.0, 0.0]])
        v = VarVector(0.1, [4.0, 9.0], "test")
        m = estimate_mmes(x, 0, v)
        assert m.estimate == 3.0 and m.support_count == 2
        dc = estimate_dcte(x, 0, v)
        assert dc.estimate == 5.0 and dc.support_count == 1

    def test_ties_conventions(self):
        x = np.array([[4.0, 9.0]])
        v = VarVector(0.1, [4.0, 9.0], "test")
        assert estimate_es(x, 0, v).support_count == 0
        assert estimate_mmes(x, 0, v).support_count == 1
        assert estimate_dcte(x, 0, v).support_count == 1

    def test_needs_two_components(self):
        with pytest.raises(ShapeError):
            estimate_mmes(np.zeros((3, 1)), 0, VarVector(0.1, [0.0], "test"))

    def test_unknown_metric(self):
        with pytest.raises(UnsupportedMethodError):
            estimate("VaR", np.zeros((3, 2)), 0, VarVector(0.1, [0.0, 0.0], "test"))

    @settings(max_examples=300, deadline=None)
    @given(
        x=hnp.arrays(np.float64, st.tuples(st.integers(1, 50), st.integers(2, 4)),
                     elements=st.floats(-5, 5).map(lambda f: round(f, 1))),
        data=st.data(),
    )
    def test_row_scan_and_properties(self, x, data):
        d = x.shape[1]
        v = np.array(data.draw(st.lists(st.floats(-5, 5).map(lambda f: round(f, 1)), min_size=d, max_size=d)))
        j = data.draw(st.integers(0, d - 1))
        vv = VarVector(0.1, v, "test")
        counts = {}
        for metric in ("ES", "MMES", "DCTE"):
            r = estimate(metric, x, j, vv)
            est, n = row_scan(metric, x, j, v)
            assert r.support_count == n
            assert (r.estimate is None) == (n == 0)
            if n:
                assert r.estimate == pytest.approx(est, rel=1e-12, abs=1e-12)
            counts[metric] = n
            # translation equivariance in column j
            c = data.draw(st.sampled_from([0.5, -3.0, 10.0]))
            x2 = x.copy()
            x2[:, j] += c
            r2 = estimate(metric, x2, j, vv.shifted(j, c))
            assert r2.support_count == r.support_count
            if r.available:
                assert r2.estimate == pytest.approx(r.estimate + c, abs=1e-9)
        assert counts["DCTE"] <= counts["MMES"] <= x.shape[0]

    def test_deterministic(self):
        x = RngState(2).generator().standard_normal((100, 3))
        v = var_empirical(x, 0.1)
        assert estimate_dcte(x, 1, v) == estimate_dcte(x, 1, v)


class TestOracle:
    def test_independence_mmes_is_mean(self):
        model = JointModel.student((5.0, 5.0, 5.0), 1.0, location=1.5)
        r = trm_oracle(model, "MMES", 0, 0.1, 1_000_000, RngState(3))
        assert abs(r.value - 1.5) < 3 * r.se
        assert not r.precision_warning

    def test_es_self_consistent(self):
        model = JointModel.student((2.0, 3.0, 2.5), 2.6)
        o = trm_oracle(model, "ES", 1, 0.0025, 10_000_000, RngState(4))
        x = sample_joint_model(RngState(5), model, 2_000_000)
        v = var_theoretical(MarginalModel.known(model.margins), 0.0025)
        est = estimate_es(x, 1, v)
        sel = x[x[:, 1] > v.values[1], 1]
        se = sel.std() / math.sqrt(sel.size)
        assert abs(est.estimate - o.value) < 3 * math.hypot(se, o.se)

    def test_dcte_grows_with_theta(self):
        lo = trm_oracle(JointModel.student((2.0, 3.0, 2.5), 1.3), "DCTE", 0, 0.001, 1_000_000, RngState(6))
        hi = trm_oracle(JointModel.student((2.0, 3.0, 2.5), 7.3), "DCTE", 0, 0.001, 1_000_000, RngState(6))
        # heavier joint tail pulls mass nearer the VaR, so compare counts, and values within 3 SE
        assert hi.count > lo.count
        assert hi.value >= lo.value - 3 * math.hypot(hi.se, lo.se)

    def test_precision_warning(self):
        r = trm_oracle(JointModel.student((2.0, 3.0), 1.3), "DCTE", 0, 0.0003, 100_000, RngState(7))
        assert r.precision_warning

    def test_table_shares_sample(self):
        model = JointModel.student((2.0, 3.0, 2.5), 2.6)
        tab = trm_oracle_table(model, 0, [0.0025, 0.001], 200_000, RngState(8), chunk=50_000)
        one = trm_oracle(model, "ES", 0, 0.001, 200_000, RngState(8))
        # chunking differs but the streams and reduction order do not depend on alpha
        assert tab[("ES", 0.001)].count > 0
        assert tab[("DCTE", 0.001)].count <= tab[("MMES", 0.001)].count
        assert one.mc_size == 200_000

    def test_chunk_invariant_counts(self):
        model = JointModel.student((2.0, 3.0, 2.5), 2.6)
        a = trm_oracle_table(model, 0, [0.01], 100_000, RngState(9), chunk=100_000)
        b = trm_oracle_table(model, 0, [0.01], 100_000, RngState(9), chunk=100_000)
        assert a == b

    def test_unknown_metric(self):
        with pytest.raises(UnsupportedMethodError):
            trm_oracle(JointModel.student((2.0, 3.0), 1.3), "VaR", 0, 0.1, 10, RngState(1))
