"""Randomized invariants of the filter, the orders and the cost construction."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from optsample.costs import build_action_costs, build_qd_costs, transform_underline
from optsample.models import (
    OrderVerdict,
    SamplingModel,
    change_time_pmf,
    discrete_observations,
    fosd_compare,
    mlr_compare,
    observation_likelihoods,
    predict,
)

probs = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def stochastic(draw, rows, cols, positive=False):
    lo = 1e-3 if positive else 0.0
    M = draw(arrays(float, (rows, cols), elements=st.floats(lo, 1.0)))
    M = M + 1e-9
    return M / M.sum(axis=1, keepdims=True)


@st.composite
def belief(draw, X):
    v = draw(arrays(float, X, elements=st.floats(0.0, 1.0))) + 1e-12
    return v / v.sum()


@st.composite
def small_model(draw):
    X = draw(st.integers(2, 3))
    Y = draw(st.integers(1, 4))
    A = draw(stochastic(X, X))
    B = draw(stochastic(X, Y))
    D = tuple(sorted(draw(st.sets(st.integers(1, 6), min_size=1, max_size=3))))
    return SamplingModel(A, discrete_observations(B), D)


@settings(max_examples=200, deadline=None)
@given(small_model(), st.data())
def test_likelihoods_sum_to_one(model, data):
    pi = data.draw(belief(model.X))
    for u in range(1, model.L + 1):
        sig = observation_likelihoods(pi, u, model)
        assert abs(sig.sum() - 1) <= 1e-10 and np.all(sig >= 0)


@settings(max_examples=200, deadline=None)
@given(small_model(), st.data())
def test_prediction_is_valid_belief(model, data):
    pi = data.draw(belief(model.X))
    out = predict(pi, model.A, data.draw(st.integers(1, 8)))
    assert np.all(out >= -1e-15) and abs(out.sum() - 1) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 4).flatmap(lambda X: st.tuples(belief(X), belief(X))))
def test_mlr_implies_fosd_and_symmetry(pair):
    p1, p2 = pair
    fwd, back = mlr_compare(p1, p2), mlr_compare(p2, p1)
    flip = {OrderVerdict.GREATER: OrderVerdict.LESS, OrderVerdict.LESS: OrderVerdict.GREATER,
            OrderVerdict.EQUAL: OrderVerdict.EQUAL, OrderVerdict.INCOMPARABLE: OrderVerdict.INCOMPARABLE}
    assert back is flip[fwd]
    if fwd.geq():
        assert fosd_compare(p1, p2).geq()


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(1, 40))
def test_geometric_change_time(a22, t):
    A = np.array([[1.0, 0.0], [1 - a22, a22]])
    assert abs(change_time_pmf(A, [0, 1], t) - (1 - a22) * a22 ** (t - 1)) <= 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.0, 30.0), st.floats(0.01, 2.0), st.floats(0.0, 3.0),
       st.sets(st.integers(1, 12), min_size=2, max_size=4))
def test_underline_costs_are_increasing_and_submodular(a22, f, d, m, D):
    D = tuple(sorted(D))
    A = np.array([[1.0, 0.0], [1 - a22, a22]])
    model = SamplingModel(A, discrete_observations(np.eye(2)), D, build_qd_costs(f, d, m, A, D))
    U = transform_underline(build_action_costs(model), model).C
    scale = 1e-9 * max(1.0, np.abs(U).max())
    assert np.all(np.diff(U, axis=1) >= -scale)
    assert np.all(np.diff(np.diff(U[1:], axis=0), axis=1) <= scale)
