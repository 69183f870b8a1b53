from stitchkit import generators
from stitchkit.torus import classify

from conftest import rng_for


def test_generators_are_seeded_and_well_formed():
    a = generators.random_closed_ell(rng_for(1), 3, 3)
    b = generators.random_closed_ell(rng_for(1), 3, 3)
    assert a == b and a.order == 3
    assert all(classify(t).closed for t in a.terms)
    assert all(t.is_y_free() for t in generators.random_constant_ell(rng_for(2), 2, 2).terms)
    germ = generators.random_germ(rng_for(3), 3, 2)
    assert all(f.is_y_free() for row in germ.terms for f in row)
    f = generators.random_function(rng_for(4), 3, max_degree=2)
    assert max(sum(a) for a in f.exponents.tolist()) <= 2
