import numpy as np
import pytest

from optsample.costs import (
    CostSpec,
    a7_alpha,
    build_action_costs,
    build_qd_costs,
    default_underline_alpha,
    transform_bar,
    transform_underline,
)
from optsample.models import ModelError, SamplingModel, StructureError, discrete_observations

GEOM = np.array([[1.0, 0.0], [0.1, 0.9]])
ERASURE = [[0.3, 0.7, 0.0], [0.0, 0.2, 0.8]]
D = (1, 3, 5, 10)


def qd(f=17, d=0.4, m=1.0, A=GEOM, B=ERASURE, intervals=D):
    A = np.asarray(A, float)
    return SamplingModel(A, discrete_observations(B), intervals, build_qd_costs(f, d, m, A, intervals))


def test_constant_cost_vectors():
    C = build_action_costs(qd())
    np.testing.assert_allclose(C.C[0], [0, 17])
    np.testing.assert_allclose(C.C[1], [1.4, 1.0])
    np.testing.assert_allclose(C.C[2], [2.2, 1.116])


def test_zero_costs():
    C = build_action_costs(qd(f=0, d=0, m=0))
    assert np.all(C.C == 0)


def test_linear_in_costs():
    spec = build_qd_costs(17, 0.4, 1.0, GEOM, D)
    m = SamplingModel(GEOM, discrete_observations(ERASURE), D, spec)
    doubled = m.with_costs(CostSpec(2 * spec.c, 2 * spec.m))
    np.testing.assert_allclose(build_action_costs(doubled).C, 2 * build_action_costs(m).C)


def test_three_state_stop_cost():
    A = np.array([[1, 0, 0], [0.7, 0.3, 0], [0.3, 0.4, 0.3]])
    spec = build_qd_costs(10, 0.4, 1.0, A, (1, 2, 4, 5))
    np.testing.assert_allclose(spec.c[:, 0], [0, 10, 10])


def test_quickest_needs_shared_cost_outside_target():
    A = np.array([[1, 0, 0], [0.7, 0.3, 0], [0.3, 0.4, 0.3]])
    m = np.ones((3, 4))
    m[2] = 2
    with pytest.raises(ModelError):
        build_qd_costs(10, 0.4, m, A, (1, 2, 4, 5))


def test_negative_costs_rejected():
    with pytest.raises(ModelError):
        build_qd_costs(-1, 0.4, 1.0, GEOM, D)


def test_default_alpha():
    assert default_underline_alpha(qd()) == pytest.approx(1 / (1 - 0.9 ** 10))
    assert default_underline_alpha(qd()) == pytest.approx(1.5354, abs=1e-4)


def test_default_alpha_degenerate_chain():
    with pytest.raises(ZeroDivisionError):
        default_underline_alpha(qd(A=np.eye(2)))


def test_underline_alpha_zero_is_identity():
    m = qd()
    C = build_action_costs(m)
    np.testing.assert_allclose(transform_underline(C, m, alpha=0.0).C, C.C)


def test_underline_needs_two_state_chain():
    A = np.array([[1, 0, 0], [0.7, 0.3, 0], [0.3, 0.4, 0.3]])
    m = SamplingModel(A, discrete_observations(np.eye(3)), (1, 2), build_qd_costs(1, 1, 1, A, (1, 2)))
    with pytest.raises(StructureError):
        transform_underline(build_action_costs(m), m)


def test_underline_example1_increasing_and_submodular():
    m = qd(m=np.array([[0, 0, 0, 0], [2.8] * 4]))
    U = transform_underline(build_action_costs(m), m).C
    assert np.all(np.diff(U, axis=1) >= -1e-12)
    step = np.diff(U[1:], axis=0)
    assert np.all(np.diff(step, axis=1) <= 1e-12)


def test_bar_cancels_at_target():
    m = qd()
    C = build_action_costs(m)
    bar = transform_bar(C, m, 47.0)
    # continue actions: +alpha d A_11 - alpha d (A^{D+1})_11 = 0 at e_1
    np.testing.assert_allclose(bar.C[1:, 0], C.C[1:, 0])
    # stopping only carries the first term
    assert bar.C[0, 0] == pytest.approx(47.0 * 0.4)


def test_a7_alpha_examples():
    assert a7_alpha(qd()) == pytest.approx(17 / (0.4 * 0.9))
    assert a7_alpha(qd()) == pytest.approx(47.222, abs=1e-3)
    A = np.array([[1, 0, 0], [0.7, 0.3, 0], [0.3, 0.4, 0.3]])
    m = SamplingModel(A, discrete_observations(np.eye(3)), (1, 2, 4, 5), build_qd_costs(10, 0.4, 1, A, (1, 2, 4, 5)))
    assert a7_alpha(m) == pytest.approx(10 / (0.4 * 0.3))
