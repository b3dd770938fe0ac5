import math

import numpy as np
import pytest

from optsample.analysis import (
    compare_optimal_costs,
    gaussian_scale_norms,
    implicit_discount,
    misspecification_gap,
    mismatch_norm_kl,
    random_model_pair,
    sensitivity_bound,
    tv_norm,
)
from optsample.cli import load_scenario
from optsample.models import ModelError, discrete_observations
from optsample.solver import make_grid


def test_identical_models(ex1):
    v = compare_optimal_costs(ex1, ex1, make_grid(2, 200))
    assert v.passed
    np.testing.assert_array_equal(v.values_a, v.values_b)
    r = sensitivity_bound(ex1, ex1)
    assert r.norm == 0 and r.bound == 0


def test_perfect_observations_are_cheaper(ex1):
    perfect = ex1.with_observations(discrete_observations(np.eye(2)))
    v = compare_optimal_costs(ex1, perfect, make_grid(2, 300))
    assert v.implied and v.values_ok


def test_geometric_pair():
    a, b = load_scenario("geometric_slow").model, load_scenario("geometric_fast").model
    v = compare_optimal_costs(a, b, make_grid(2, 300))
    assert v.passed


def test_perturbed_erasure_channel_bound(ex1):
    Bb = np.array([[0.31, 0.69, 0.0], [0.0, 0.19, 0.81]])
    tb = ex1.with_observations(discrete_observations(Bb))
    r = sensitivity_bound(ex1, tb)
    gap, _ = misspecification_gap(ex1, tb, make_grid(2, 500))
    assert r.tail_condition and gap.max() <= r.bound


def test_one_row_perturbation_norm(ex1):
    eps = 0.02
    Bb = ex1.B.copy()
    Bb[1] = [0.0, 0.2 + eps, 0.8 - eps]
    tb = ex1.with_observations(discrete_observations(Bb))
    assert tv_norm(ex1, tb) <= 2 * eps + 1e-15


def test_kl_zero_for_same_channel(ex1):
    assert mismatch_norm_kl(ex1, ex1).kl == 0


def test_kl_support_mismatch_is_flagged(ex1):
    Bb = np.array([[0.3, 0.7, 0.0], [0.1, 0.1, 0.8]])
    out = mismatch_norm_kl(ex1.with_observations(discrete_observations(Bb)), ex1)
    assert out.infinite and math.isinf(out.kl)


def test_kl_needs_shared_transitions(ex1):
    other = load_scenario("geometric_fast").model
    with pytest.raises(ModelError):
        mismatch_norm_kl(ex1, other)


def test_gaussian_closed_forms():
    printed, standard = gaussian_scale_norms(1.0, 1.1)
    assert printed == pytest.approx(0.0663, abs=5e-5)
    r = 1 / 1.21
    assert standard == pytest.approx(math.sqrt(r - math.log(r) - 1))
    assert gaussian_scale_norms(1.0, 1.0) == (0.0, 0.0)


def test_gaussian_pair_discretized_kl_matches_standard_form():
    a, b = load_scenario("example2").model, load_scenario("example2_wide").model
    out = mismatch_norm_kl(a, b)
    assert out.gaussian_printed == pytest.approx(0.0663, abs=5e-5)
    assert out.kl == pytest.approx(out.gaussian_standard, rel=1e-2)
    assert out.kl >= out.tv


def test_no_qualifying_observation_gives_infinite_bound(ex1):
    flat = ex1.with_observations(discrete_observations([[0.5, 0.5], [0.5, 0.5]]))
    tb = flat.with_observations(discrete_observations([[0.6, 0.4], [0.5, 0.5]]))
    r = sensitivity_bound(flat, tb)
    assert r.rho == 1 and not r.tail_condition and math.isinf(r.bound)




def test_random_pair_is_admissible():
    th, tb = random_model_pair(np.random.default_rng(0))
    assert sensitivity_bound(th, tb).tail_condition


def test_discount_at_far_vertex_dominates():
    grid = make_grid(2, 101)
    for k in range(20):
        th, tb = random_model_pair(np.random.default_rng([9, k]), share_transition=k % 2 == 0)
        _, rho_far = implicit_discount(th, tb, [0.0, 1.0])
        for p in grid.points:
            ys, rho = implicit_discount(th, tb, p)
            if ys is not None:  # near e_1 no observation favours continuing
                assert rho <= rho_far + 1e-12
