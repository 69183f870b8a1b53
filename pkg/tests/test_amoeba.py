import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stitchkit.amoeba import (MEMBER, OUTSIDE, UNKNOWN, AmoebaSpec, InvalidSpec, IoError, boundary_band,
                              count_components,
                              marching_squares, member_line, member_sampled, render)


def test_member_line_examples():
    assert member_line(0.0, 0.0)
    assert not member_line(5.0, 0.0)
    assert not member_line(-3.0, -3.0)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_member_line_symmetric(s, t):
    assert member_line(s, t) == member_line(t, s)


def test_spec_validation():
    with pytest.raises(InvalidSpec):
        AmoebaSpec(())
    with pytest.raises(InvalidSpec):
        AmoebaSpec(((0, 0, 0.0),))
    with pytest.raises(InvalidSpec):
        AmoebaSpec(((-1, 0, 1.0), (0, 0, 1.0)))
    with pytest.raises(InvalidSpec):
        AmoebaSpec.line((0.0, 0.0, -1.0, 1.0))
    with pytest.raises(InvalidSpec):
        AmoebaSpec.line((0.0, np.inf, -1.0, 1.0))
    with pytest.raises(InvalidSpec):
        AmoebaSpec.line(res=(8, 400))
    with pytest.raises(InvalidSpec):
        AmoebaSpec.parse("1,0")


def test_parse():
    assert AmoebaSpec.parse("line").tag == "line"
    spec = AmoebaSpec.parse("1,0,1;0,1,1;0,0,1")
    assert spec.terms == AmoebaSpec.line().terms


def test_sampled_agrees_with_exact_on_line():
    spec = AmoebaSpec.line(res=(200, 200))
    S, T = spec.grid()
    exact = np.where(member_line(S, T), MEMBER, OUTSIDE)
    sampled = member_sampled(spec, S, T)
    differ = sampled != exact
    assert not np.any(differ & ~boundary_band(exact == MEMBER, 1))


def test_binomial_amoeba_is_the_diagonal():
    # v1 - v2 = 0 has Log image {s = t}
    spec = AmoebaSpec(((1, 0, 1.0), (0, 1, -1.0)), (-2, 2, -2, 2), (16, 16))
    s = np.linspace(-2, 2, 9)
    assert np.all(member_sampled(spec, s, s) == MEMBER)
    assert np.all(member_sampled(spec, s, s + 0.3) == OUTSIDE)


def test_monomial_amoeba_is_empty():
    spec = AmoebaSpec(((1, 1, 2.0),), res=(16, 16))
    assert np.all(render(spec).verdict == OUTSIDE)


def test_line_complement_has_three_components():
    # tentacles narrow like e^-|s|; these bounds keep them several pixels wide
    raster = render(AmoebaSpec.line((-2.0, 2.0, -2.0, 2.0), (200, 200)))
    assert raster.complement_components == 3 and raster.member_components == 1


def test_tiny_bounds_inside_a_tentacle():
    spec = AmoebaSpec.line((-6.0, -5.9, -0.001, 0.001), (16, 16))
    for method in ("exact", "sampled"):
        raster = render(spec, method)
        assert raster.member_components == 1 and raster.complement_components == 0


@settings(max_examples=5)
@given(st.sampled_from([(-2.0, 2.0, -2.0, 2.0), (-4.0, 1.0, -1.0, 3.0)]))
def test_resolution_monotone(bounds):
    coarse = AmoebaSpec.line(bounds, (32, 32))
    fine = AmoebaSpec.line(bounds, (64, 64))
    # fine pixel centres at odd offsets coincide with no coarse centre, so compare on shared points:
    # exact verdicts are pointwise, and sampled verdicts only narrow as the sampling doubles
    S, T = coarse.grid()
    assert np.array_equal(render(coarse, "exact").verdict == MEMBER, member_line(S, T))
    Sf, Tf = fine.grid()
    assert np.array_equal(render(fine, "exact").verdict == MEMBER, member_line(Sf, Tf))
    va = member_sampled(fine, Sf, Tf, samples=32, max_samples=32)
    vb = member_sampled(fine, Sf, Tf, samples=32, max_samples=64)
    assert not np.any((va == MEMBER) & (vb != MEMBER))
    assert not np.any((va == OUTSIDE) & (vb != OUTSIDE))
    assert np.count_nonzero(vb == UNKNOWN) <= np.count_nonzero(va == UNKNOWN)


def test_threads_do_not_change_result():
    spec = AmoebaSpec(((2, 0, 1.0), (0, 1, 1.0), (0, 0, -1.0), (1, 1, 0.5)), res=(64, 64))
    assert np.array_equal(render(spec, threads=1).verdict, render(spec, threads=4).verdict)


def test_count_components():
    mask = np.zeros((5, 5), bool)
    mask[0, 0] = mask[4, 4] = mask[1, 1] = True
    assert count_components(mask) == 3
    mask[0, 1] = True
    assert count_components(mask) == 2


def test_marching_squares_square():
    mask = np.zeros((4, 4), bool)
    mask[1:3, 1:3] = True
    assert len(marching_squares(mask)) == 8


def test_outputs_are_deterministic(tmp_path):
    spec = AmoebaSpec.line(res=(32, 24))
    r1, r2 = render(spec), render(spec)
    ppm = r1.to_ppm()
    assert ppm == r2.to_ppm() and ppm.startswith(b"P6\n32 24\n255\n") and len(ppm) == 13 + 32 * 24 * 3
    r1.save(tmp_path / "a.ppm", tmp_path / "a.svg")
    assert (tmp_path / "a.ppm").read_bytes() == ppm
    assert (tmp_path / "a.svg").read_text().startswith("<svg")
    with pytest.raises(IoError):
        r1.save(tmp_path / "missing" / "a.ppm")


def test_exact_method_only_for_line():
    with pytest.raises(InvalidSpec):
        render(AmoebaSpec(((1, 0, 1.0), (0, 0, 1.0)), res=(16, 16)), "exact")
    with pytest.raises(InvalidSpec):
        render(AmoebaSpec.line(res=(16, 16)), "magic")
