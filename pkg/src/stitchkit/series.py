"""Truncated power series in one variable with TorusFunction coefficients.

A series is a plain list ``[c_0, c_1, ..., c_N]`` of TorusFunctions standing for
``sum c_m t**m + o(t**N)``.
"""

import numpy as np

from .torus import TorusFunction, _weights


def zero_series(n, order, precision=None):
    return [TorusFunction.zero(n, precision) for _ in range(order + 1)]


def series_add(p, q):
    return [a + b for a, b in zip(p, q)]


def series_mul(p, q):
    order = min(len(p), len(q)) - 1
    out = []
    for m in range(order + 1):
        acc = TorusFunction.zero(p[0].n, p[0].precision)
        for i in range(m + 1):
            if p[i].is_zero() or q[m - i].is_zero():
                continue
            acc = acc + p[i] * q[m - i]
        out.append(acc)
    return out


def split_by_exponent(f):
    """Yield ``(alpha, F_alpha)`` with ``f = sum_alpha F_alpha(y) b**alpha``."""
    exps = f.exponents
    if not len(f):
        return
    w = _weights(f.d)[f.d:]
    for alpha in np.unique(exps, axis=0):
        mask = np.all(exps == alpha, axis=1)
        codes = f._codes[mask] - int(alpha @ w)
        yield tuple(int(v) for v in alpha), TorusFunction._raw(
            f.n, codes, f._coefs[mask].copy(), f.precision, aggregate=False)


def substitute(f, shifts):
    """Series of ``f(b + shift(t), y)`` where ``shifts[i]`` is the series added to b_{i+2}.

    Each shift must have a vanishing constant term.  Monomials are expanded
    with repeated series multiplication, so no Taylor constants are involved.
    """
    n = f.n
    order = len(shifts[0]) - 1
    powers = {}

    def power(i, e):
        key = (i, e)
        if key not in powers:
            if e == 0:
                powers[key] = [TorusFunction.constant(n, 1.0, f.precision)] + zero_series(n, order, f.precision)[1:]
            else:
                lin = [TorusFunction.base(n, i + 2, f.precision)] + list(shifts[i][1:])
                powers[key] = series_mul(power(i, e - 1), lin)
        return powers[key]

    out = zero_series(n, order, f.precision)
    for alpha, coeff in split_by_exponent(f):
        term = [coeff] + zero_series(n, order, f.precision)[1:]
        for i, e in enumerate(alpha):
            if e:
                term = series_mul(term, power(i, e))
        out = series_add(out, term)
    return out
