import numpy as np
import pytest
from hypothesis import given

from conftest import dims, rng_for, seeds, small_function
from stitchkit import generators
from stitchkit.errors import DegreeOverflow, DimensionMismatch, IndexOutOfRange, NotClosed
from stitchkit.torus import (LSection, Precision, TorusFunction as TF, TwoFormSection, classify,
                             coefficient_distance, cycle_integral, equal_after_pruning, fibrewise_d,
                             poisson)

TWO_PI = 2 * np.pi


def test_additive_identity_and_cancellation():
    f = TF.cos(2, (1,), 1.0, alpha=(1,))
    assert f + TF.zero(2) == f
    assert (TF.cos(2, (1,)) + TF.cos(2, (1,), -1.0)).is_zero()


def test_sum_of_b2_and_b2_cos_has_three_terms():
    b2 = TF.base(2, 2)
    g = b2 + b2 * TF.cos(2, (1,))
    assert g.terms == {((0,), (1,)): 1, ((1,), (1,)): 0.5, ((-1,), (1,)): 0.5}


def test_product_to_sum():
    c = TF.cos(2, (1,))
    expected = TF.constant(2, 0.5) + TF.cos(2, (2,), 0.5)
    assert equal_after_pruning(c * c, expected)
    assert c * TF.constant(2, 1.0) == c


def test_monomial_product():
    f = TF.base(3, 2) * TF.base(3, 3)
    assert f.terms == {((0, 0), (1, 1)): 1}


def test_derivatives():
    b2 = TF.base(2, 2)
    assert (b2 * b2).d_base(2) == b2.scale(2.0)
    s = TF.sin(3, (0, 1))
    assert equal_after_pruning(s.d_angle(3), TF.cos(3, (0, 1), TWO_PI))
    assert b2.d_angle(2).is_zero()


def test_index_and_dimension_errors():
    with pytest.raises(IndexOutOfRange):
        TF.base(2, 2).d_base(3)
    with pytest.raises(IndexOutOfRange):
        TF.base(3, 2).d_angle(1)
    with pytest.raises(DimensionMismatch):
        TF.base(2, 2) + TF.base(3, 2)
    with pytest.raises(DimensionMismatch):
        TF(5)


def test_reality_condition_enforced():
    with pytest.raises(ValueError):
        TF(2, {((1,), (0,)): 1.0})


def test_degree_caps_raise():
    prec = Precision(max_degree=2)
    b = TF.base(2, 2, precision=prec)
    with pytest.raises(DegreeOverflow):
        b * b * b


def test_bracket_examples():
    assert poisson(TF.base(2, 2), TF.base(2, 2) * TF.base(2, 2)).is_zero()
    f = TF.sin(3, (1, 0))
    assert poisson(f, f).is_zero()
    assert equal_after_pruning(poisson(f, TF.base(3, 2)), TF.cos(3, (1, 0), TWO_PI))


def test_fibre_average_examples():
    assert (TF.constant(2, 3.0) + TF.cos(2, (1,))).fibre_average() == TF.constant(2, 3.0)
    assert (TF.base(3, 2) * TF.sin(3, (0, 1))).fibre_average().is_zero()
    b2 = TF.base(2, 2)
    assert equal_after_pruning((b2 * (TF.constant(2, 2.0) + TF.cos(2, (1,)))).fibre_average(), b2.scale(2.0))


def test_cycle_integral_examples():
    ell = LSection(2, [TF.constant(2, 3.0) + TF.cos(2, (1,))])
    assert cycle_integral(ell, 2) == TF.constant(2, 3.0)
    one = TF.constant(3, 1.0)
    assert cycle_integral(LSection(3, [one, one]), 3) == one
    exact = LSection.gradient(TF.sin(3, (1, 1), 1.0))
    assert cycle_integral(exact, 2).is_zero() and cycle_integral(exact, 3).is_zero()
    with pytest.raises(NotClosed):
        cycle_integral(LSection(3, [TF.sin(3, (0, 1)), TF.zero(3)]), 2)


def test_fibrewise_d_examples():
    assert fibrewise_d(LSection(3, [TF.base(3, 2), TF.base(3, 3)])).is_zero()
    assert fibrewise_d(LSection.gradient(TF.cos(3, (1, 2), alpha=(1, 0)))).is_zero()
    p = fibrewise_d(LSection(3, [TF.sin(3, (0, 1)), TF.zero(3)]))
    # component on dy2 ^ dy3 is d_{y2} a_3 - d_{y3} a_2
    assert equal_after_pruning(p[(2, 3)], TF.cos(3, (0, 1), -TWO_PI))
    assert equal_after_pruning(p[(3, 2)], TF.cos(3, (0, 1), TWO_PI))


def test_two_form_storage_is_antisymmetric():
    f = TF.base(3, 2)
    w = TwoFormSection(3, {(3, 2): f})
    assert w[(2, 3)] == -f and w[(2, 2)].is_zero()


def test_classify_examples():
    c = classify(LSection(2, [TF.constant(2, 1.0)]))
    assert (c.closed, c.exact, c.constant) == (True, False, True)
    c = classify(LSection(2, [TF.cos(2, (1,))]))
    assert (c.closed, c.exact, c.constant) == (True, True, False)
    c = classify(LSection(3, [TF.sin(3, (0, 1)), TF.zero(3)]))
    assert not c.closed


def test_evaluate_spot_checks():
    f = TF.constant(2, 2.5) + TF.cos(2, (1,), 1.0, alpha=(1,))
    b, y = np.array([0.7]), np.array([0.1])
    assert f.evaluate(b, y) == pytest.approx(2.5 + 0.7 * np.cos(TWO_PI * 0.1), abs=1e-15)
    g = TF.sin(3, (1, -2), 3.0, alpha=(2, 1))
    b, y = np.array([0.3, -1.2]), np.array([0.25, 0.4])
    assert g.evaluate(b, y) == pytest.approx(3 * 0.09 * -1.2 * np.sin(TWO_PI * (0.25 - 0.8)), abs=1e-14)


def test_records_round_trip_is_bit_exact(rng):
    f = generators.random_function(rng, 3)
    back = TF.from_records(3, f.to_records())
    assert back == f
    recs = f.to_records()
    assert recs == sorted(recs, key=lambda r: (r["k"], r["alpha"]))


@given(seeds, dims)
def test_leibniz(seed, n):
    f, g, h = (small_function(seed + i, n) for i in range(3))
    assert equal_after_pruning(poisson(f, g * h), poisson(f, g) * h + g * poisson(f, h))


@given(seeds, dims)
def test_jacobi(seed, n):
    f, g, h = (small_function(seed + i, n) for i in range(3))
    assert (poisson(f, poisson(g, h)) + poisson(g, poisson(h, f)) + poisson(h, poisson(f, g))).is_zero()


@given(seeds, dims)
def test_antisymmetry(seed, n):
    f, g = small_function(seed, n), small_function(seed + 1, n)
    assert equal_after_pruning(poisson(f, g), -poisson(g, f))


@given(seeds, dims)
def test_derivatives_commute_and_d_of_gradient_vanishes(seed, n):
    f = small_function(seed, n)
    for j in range(2, n + 1):
        for k in range(2, n + 1):
            assert coefficient_distance(f.d_angle(j).d_base(k), f.d_base(k).d_angle(j)) == 0
    assert fibrewise_d(LSection.gradient(f)).is_zero()


@given(seeds, dims)
def test_cycle_integral_gauge_invariance(seed, n):
    rng = rng_for(seed)
    ell = generators.random_closed_section(rng, n)
    g = generators.random_function(rng, n)
    shifted = ell + LSection.gradient(g)
    for j in range(2, n + 1):
        assert equal_after_pruning(cycle_integral(ell, j), cycle_integral(shifted, j))


@given(seeds, dims)
def test_evaluate_is_periodic(seed, n):
    rng = rng_for(seed)
    f = generators.random_function(rng, n)
    b = rng.normal(size=(5, n - 1))
    y = rng.uniform(size=(5, n - 1))
    shift = rng.integers(-3, 4, size=(5, n - 1))
    assert np.max(np.abs(f.evaluate(b, y + shift) - f.evaluate(b, y))) <= 1e-12


@given(seeds, dims)
def test_products_preserve_reality(seed, n):
    f, g = small_function(seed, n), small_function(seed + 7, n)
    h = f * g
    vals = h.evaluate_complex(np.full(n - 1, 0.4), np.full(n - 1, 0.3))
    assert abs(np.imag(vals)) <= 1e-12
