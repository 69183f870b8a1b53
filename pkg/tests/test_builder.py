import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rng_for, seeds
from stitchkit import generators
from stitchkit.builder import (BuiltFibration, GluePoint, angle_distance, build, glue_point_to_phase, glue_Q, glue_Q_tilde,
                               line_integral, period_lattice, taylor_error, verify_lagrangian)
from stitchkit.errors import NotClosed
from stitchkit.invariants import EllSequence, integrality_check
from stitchkit.torus import LSection, TorusFunction as TF

SMALL = dict(max_modes=2, max_mode=1, max_degree=1, scale=0.25)


def constant_ell(c, n=2):
    return EllSequence(n, [LSection(n, [TF.constant(n, c)] + [TF.zero(n)] * (n - 2))])


def test_zero_sequence_gives_projection():
    fib = build(EllSequence.zero(3, 2))
    z = np.array([0.05, 0.3, -0.2, 0.1, 0.7, 0.4])
    assert np.array_equal(fib.u(z), z[:3])
    assert verify_lagrangian(fib, 20).max_bracket == 0.0


def test_constant_form_gives_linear_shear():
    c = 0.7
    fib = build(constant_ell(c))
    z = np.array([[0.05, 0.3, 0.1, 0.2], [-0.08, -0.4, 0.9, 0.6]])
    assert np.allclose(fib.u(z)[:, 1], z[:, 1] - c * z[:, 0], atol=1e-14)


def test_projection_on_seam():
    fib = build(generators.random_closed_ell(rng_for(4), 3, 2, **SMALL))
    z = np.array([0.0, 0.2, -0.4, 0.3, 0.8, 0.1])
    assert np.allclose(fib.u(z), z[:3], atol=1e-14)


def test_brackets_and_taylor_match_for_closed_sequence():
    fib = build(generators.random_closed_ell(rng_for(7), 3, 2, **SMALL))
    assert verify_lagrangian(fib, 50).max_bracket <= 1e-7
    assert taylor_error(fib, count=5) <= 1e-5


def test_non_closed_first_order_term_breaks_commutation():
    ell1 = LSection(3, [TF.sin(3, (0, 1), 0.3), TF.zero(3)])
    fib = BuiltFibration(EllSequence(3, [ell1], check=False), eps=0.1)
    z = np.array([[0.08, 0.1, 0.1, 0.0, 0.1, 0.05]])
    assert verify_lagrangian(fib, z).max_bracket > 1e-3
    with pytest.raises(NotClosed):
        build(EllSequence(3, [ell1], check=False))


def test_glue_Q_examples():
    p = GluePoint((0.2,), 0.3, (0.25,))
    assert glue_Q(LSection.zero(2), p) == p
    q = glue_Q(LSection(2, [TF.constant(2, 2.0)]), p)
    assert q.b == p.b and q.t == p.t
    assert q.t1 == pytest.approx((0.3 - 2 * 0.25) % 1.0, abs=1e-13)
    with pytest.raises(NotClosed):
        glue_Q(LSection(3, [TF.sin(3, (0, 1)), TF.zero(3)]), GluePoint((0.0, 0.0), 0.0, (0.1, 0.1)))


@settings(max_examples=15)
@given(seeds)
def test_glue_Q_path_independence(seed):
    rng = rng_for(seed)
    ell1 = generators.random_closed_section(rng, 3, **SMALL)
    b, t = rng.uniform(-1, 1, 2), rng.uniform(0, 1, 2)
    assert abs(line_integral(ell1, b, t) - line_integral(ell1, b, t, path="axis")) <= 1e-10


@settings(max_examples=15)
@given(seeds, st.integers(-2, 2), st.integers(-2, 2))
def test_glue_Q_lattice_translation_changes_offset_by_integer(seed, k2, k3):
    rng = rng_for(seed)
    ell1 = generators.random_closed_section(rng, 3, max_degree=0, max_modes=2)
    ell1 = ell1.map(lambda a: a.oscillatory_part()) + LSection(3, [TF.constant(3, 1.0), TF.constant(3, -2.0)])
    assert integrality_check(ell1) == [1, -2]
    b, t = rng.uniform(-1, 1, 2), rng.uniform(0, 1, 2)
    shifted = t + np.array([k2, k3])
    diff = line_integral(ell1, b, shifted) - line_integral(ell1, b, t)
    assert abs(diff - round(diff)) <= 1e-9


def test_glue_Q_tilde_trivial_cases():
    fib = build(EllSequence.zero(2, 1))
    p = GluePoint((0.3,), 0.2, (0.45,))
    assert angle_distance(glue_Q_tilde(fib, p), glue_point_to_phase(p), 2) <= 1e-12
    fib = build(constant_ell(1.5))
    p = GluePoint((0.3,), 0.2, (0.0,))
    assert angle_distance(glue_Q_tilde(fib, p), glue_point_to_phase(p), 2) <= 1e-12


def test_glue_Q_tilde_extends_glue_Q():
    rng = rng_for(9)
    ell = generators.random_closed_ell(rng, 3, 1, **SMALL)
    fib = build(ell)
    pts = [GluePoint(tuple(rng.uniform(-0.8, 0.8, 2)), rng.uniform(), tuple(rng.uniform(0, 1, 2))) for _ in range(10)]
    flowed = glue_Q_tilde(fib, pts)
    for z, p in zip(flowed, pts):
        assert angle_distance(z, glue_point_to_phase(glue_Q(ell, p)), 3) <= 1e-6


def test_period_lattice():
    rows = period_lattice(build(EllSequence.zero(2, 1)), [0.05, 0.3]).rows
    assert np.allclose(rows, np.eye(2), atol=1e-12)
    fib = build(constant_ell(2.0))
    for b in ([-0.05, 0.3], [-0.05, -0.6], [0.04, 0.1]):
        assert np.allclose(period_lattice(fib, b).rows, [[1, 0], [2, 1]], atol=1e-9)
