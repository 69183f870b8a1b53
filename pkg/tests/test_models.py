import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rng_for, seeds
from stitchkit import models
from stitchkit.amoeba import member_line
from stitchkit.errors import UndefinedAtPoint, UnknownName
from stitchkit.flows import circle_action


def test_gamma_examples():
    assert models.gamma(1, 1) == 1
    assert models.gamma(2, 1) == pytest.approx(1.0)
    z1, z2 = np.exp(0.4j), np.exp(1.3j)
    assert models.gamma(z1, z2, "plus") == pytest.approx(models.gamma(z1, z2, "minus"), abs=1e-15)
    with pytest.raises(UndefinedAtPoint):
        models.gamma(0.0, 1.0, "plus")


@given(seeds)
def test_gamma_modulus(seed):
    rng = rng_for(seed)
    z1, z2 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    expected = abs(z2) if abs(z1) >= abs(z2) else abs(z1)
    assert abs(models.gamma(z1, z2)) == pytest.approx(expected, rel=1e-12)


def test_registry():
    assert models.names() == ["amoeba", "focus_focus", "leg"]
    with pytest.raises(UnknownName):
        models.make("torus")
    ff, amoeba = models.make("focus_focus"), models.make("amoeba")
    assert ff.metadata["seam_components"] == 2 and amoeba.metadata["seam_components"] == 3


def test_focus_focus_value():
    ff = models.make("focus_focus")
    assert np.allclose(ff(np.array([1, 1])), [0.0, np.log(2)], atol=1e-15)
    assert not ff.in_domain(np.array([1, -1]))
    with pytest.raises(UndefinedAtPoint):
        ff(np.array([1, -1]))


def test_leg_values():
    leg = models.make("leg")
    assert not leg.in_domain(np.array([1, 1, 1]))
    # gamma = -1 so |gamma - 1| = 2
    assert np.allclose(leg(np.array([1, -1, np.e])), [0.0, 1.0, np.log(2)], atol=1e-15)


def test_amoeba_value_is_finite():
    z = np.array([1.0, 1j, 0.3 + 0.2j])
    assert np.all(np.isfinite(models.make("amoeba")(z)))


@pytest.mark.parametrize("name", ["focus_focus", "leg", "amoeba"])
def test_invariance_and_continuity(name):
    ex = models.make(name)
    rng = rng_for(1)
    seam = models.random_seam_points(ex, 10, rng)
    for theta in (0.0, np.pi, 1.234):
        rotated = circle_action(seam, theta)
        assert np.max(np.abs(ex(rotated) - ex(seam))) <= 1e-10
    assert np.max(np.abs(ex.evaluate_side(seam, "plus") - ex.evaluate_side(seam, "minus"))) <= 1e-12
    assert np.allclose(ex(seam)[:, 0], 0.0, atol=1e-12)


@pytest.mark.parametrize("name", ["focus_focus", "leg", "amoeba"])
def test_point_on_fibre_round_trip(name):
    ex = models.make(name)
    rng = rng_for(2)
    for _ in range(5):
        b = rng.uniform(-0.8, 0.8, ex.n)
        theta = rng.uniform(-np.pi, np.pi, ex.n)
        z = ex.point_on_fibre(b, theta)
        if ex.in_domain(z):
            assert np.allclose(ex(z), b, atol=1e-12)


def test_properness_proxy():
    ex = models.make("amoeba")
    rng = rng_for(3)
    b = rng.uniform(-1, 1, (200, 3))
    theta = rng.uniform(-np.pi, np.pi, (200, 3))
    z = ex.point_on_fibre(b, theta)
    assert np.max(np.abs(z)) < 50


def test_closed_form_variants():
    ff = models.make("focus_focus")
    z = np.array([1.0, 1.0])
    # the printed denominator vanishes at this regular point
    with pytest.raises(UndefinedAtPoint):
        models.closed_form_a(ff, z, "printed")
    assert np.isfinite(models.closed_form_a(ff, z)).all()
    with pytest.raises(UnknownName):
        models.closed_form_a(ff, z, "nonexistent")


@settings(max_examples=100)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_amoeba_discriminant_matches_line_amoeba(s, t):
    ex = models.make("amoeba")
    assert bool(ex.in_discriminant(np.array([0.0, s, t]))) == bool(member_line(s, t))


def test_amoeba_discriminant_off_seam():
    assert not models.make("amoeba").in_discriminant(np.array([0.5, 0.0, 0.0]))
