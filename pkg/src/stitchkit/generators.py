"""Seeded random instances for tests, the acceptance suite and the CLI."""

import numpy as np

from .invariants import EllSequence, GermChange, SSequence
from .torus import LSection, TorusFunction

DYADIC = 64


def _coef(rng, scale):
    # dyadic coefficients keep products exact in floating point for longer
    return float(rng.integers(-DYADIC, DYADIC + 1)) / DYADIC * scale


def random_polynomial(rng, n, max_degree=2, n_terms=3, scale=0.5):
    """A real polynomial in b_2..b_n with at most ``n_terms`` monomials."""
    d = n - 1
    terms = {}
    for _ in range(n_terms):
        alpha = tuple(int(v) for v in rng.multinomial(int(rng.integers(0, max_degree + 1)), [1 / d] * d))
        terms[((0,) * d, alpha)] = terms.get(((0,) * d, alpha), 0.0) + _coef(rng, scale)
    return TorusFunction(n, terms)


def random_function(rng, n, max_modes=3, max_mode=1, max_degree=2, scale=0.5):
    """A real function with at most ``max_modes`` Fourier pairs, polynomial of degree <= ``max_degree``."""
    d = n - 1
    f = random_polynomial(rng, n, max_degree, 2, scale)
    for _ in range(int(rng.integers(1, max_modes + 1))):
        k = tuple(int(v) for v in rng.integers(-max_mode, max_mode + 1, size=d))
        if not any(k):
            continue
        alpha = tuple(int(v) for v in rng.multinomial(int(rng.integers(0, max_degree + 1)), [1 / d] * d))
        c = complex(_coef(rng, scale), _coef(rng, scale))
        neg = tuple(-v for v in k)
        f = f + TorusFunction(n, {(k, alpha): c, (neg, alpha): c.conjugate()})
    return f


def random_closed_section(rng, n, max_modes=3, max_mode=1, max_degree=2, scale=0.5):
    """A fibrewise closed section: y-free part plus the fibrewise gradient of a random function."""
    const = [random_polynomial(rng, n, max_degree, 2, scale) for _ in range(n - 1)]
    g = random_function(rng, n, max_modes, max_mode, max_degree, scale / (2 * np.pi))
    g = g.oscillatory_part()
    return LSection(n, [c + g.d_angle(j) for j, c in zip(range(2, n + 1), const)])


def random_section(rng, n, max_modes=3, max_mode=1, max_degree=2, scale=0.5):
    """An arbitrary (generally non-closed) section."""
    return LSection(n, [random_function(rng, n, max_modes, max_mode, max_degree, scale) for _ in range(n - 1)])


def random_closed_ell(rng, n, order, **kw):
    return EllSequence(n, [random_closed_section(rng, n, **kw) for _ in range(order)])


def random_constant_ell(rng, n, order, max_degree=2, scale=0.5):
    return EllSequence(n, [LSection(n, [random_polynomial(rng, n, max_degree, 2, scale) for _ in range(n - 1)])
                           for _ in range(order)])


def random_s(rng, n, order, **kw):
    return SSequence(n, [random_section(rng, n, **kw) for _ in range(order)])


def random_germ(rng, n, order, max_degree=2, scale=0.5):
    return GermChange(n, [[random_polynomial(rng, n, max_degree, 2, scale) for _ in range(n - 1)]
                          for _ in range(order)])
