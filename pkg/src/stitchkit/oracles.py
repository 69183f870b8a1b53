"""Independent cross-checks for the multi-index recursion.

The oracle solves u_j(r, b + a(r), y) = b_j directly on truncated series in r,
with u_j(b_1, b, y) = b_j + sum_k S_jk(b, y) b_1^k.  Substitution is done by
plain series multiplication, so no Taylor constants enter.
"""

from .errors import OrderOutOfRange
from .invariants import EllSequence
from .series import substitute, zero_series
from .torus import LSection, TorusFunction


def _leading_jacobian(n):
    """d u / d b at r = 0, as TorusFunctions; equals the identity."""
    rows = []
    for i in range(2, n + 1):
        rows.append([TorusFunction.base(n, i).d_base(j) for j in range(2, n + 1)])
    return rows


def series_inversion(S, order=None):
    """Invariant sequence of ``S`` by order-by-order solve of the fibration equations."""
    n = S.n
    N = S.order if order is None else order
    if N > S.order:
        raise OrderOutOfRange(f"order {N} exceeds the sequence order {S.order}")
    jac = _leading_jacobian(n)
    for i, row in enumerate(jac):
        for j, entry in enumerate(row):
            expected = 1.0 if i == j else 0.0
            assert entry == TorusFunction.constant(n, expected), "leading jacobian is not the identity"
    a = [zero_series(n, N) for _ in range(n - 1)]
    for l in range(1, N + 1):
        # residual_j = [r^l] (sum_k S_jk(b + a_{<l}(r)) r^k); a_l enters only through the identity block
        for j in range(2, n + 1):
            acc = TorusFunction.zero(n)
            for k in range(1, l + 1):
                f = S[k][j]
                if f.is_zero():
                    continue
                acc = acc + substitute(f, [s[:l - k + 1] for s in a])[l - k]
            a[j - 2][l] = -acc
    terms = [LSection(n, [a[j][l] for j in range(n - 1)]) for l in range(1, N + 1)]
    return EllSequence(n, terms, check=False)
