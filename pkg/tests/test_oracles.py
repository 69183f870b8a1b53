from hypothesis import given, settings

from conftest import dims, rng_for, seeds
from stitchkit import generators
from stitchkit.invariants import SSequence, ell_to_s, s_to_ell
from stitchkit.oracles import series_inversion
from stitchkit.series import series_mul, substitute, zero_series
from stitchkit.torus import LSection, TorusFunction as TF, equal_after_pruning

SMALL = dict(max_modes=2, max_mode=1, max_degree=1, scale=0.25)


def test_substitute_binomial():
    # (b2 + t)^2 = b2^2 + 2 b2 t + t^2
    shift = zero_series(2, 3)
    shift[1] = TF.constant(2, 1.0)
    out = substitute(TF.base(2, 2) ** 2, [shift])
    assert out[0] == TF.base(2, 2) ** 2
    assert equal_after_pruning(out[1], TF.base(2, 2).scale(2.0))
    assert out[2] == TF.constant(2, 1.0) and out[3].is_zero()


def test_series_mul_truncates():
    one_plus_t = [TF.constant(2, 1.0), TF.constant(2, 1.0), TF.zero(2)]
    sq = series_mul(one_plus_t, one_plus_t)
    assert [c.coefficient((0,), (0,)).real for c in sq] == [1.0, 2.0, 1.0]


def test_oracle_zero_and_first_order():
    S = generators.random_s(rng_for(1), 3, 1, **SMALL)
    ell = series_inversion(S)
    assert all(equal_after_pruning(ell[1][j], -S[1][j]) for j in (2, 3))
    assert all(t.is_zero() for t in series_inversion(SSequence.zero(2, 3)).terms)


@settings(max_examples=10)
@given(seeds, dims)
def test_recursion_matches_oracle_on_admissible_sequences(seed, n):
    rng = rng_for(seed)
    S = ell_to_s(generators.random_closed_ell(rng, n, 4 if n == 2 else 3, **SMALL))
    direct, oracle = s_to_ell(S), series_inversion(S)
    assert all(equal_after_pruning(a, b) for a, b in zip(direct.terms, oracle.terms))


@settings(max_examples=10)
@given(seeds)
def test_recursion_matches_oracle_on_arbitrary_sequences(seed):
    S = generators.random_s(rng_for(seed), 3, 3, **SMALL)
    assert all(equal_after_pruning(a, b) for a, b in zip(s_to_ell(S).terms, series_inversion(S).terms))
