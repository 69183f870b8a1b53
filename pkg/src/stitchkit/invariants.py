"""Conversion between invariant sequences and Taylor sequences, plus the germ action.

An :class:`EllSequence` holds the coefficients l_1..l_N of the family
l(r) = sum_k l_k r^k of fibrewise closed forms.  An :class:`SSequence` holds
the b_1-Taylor coefficients S_1..S_N of a fibration u_j = b_j + sum_k S_jk b_1^k.
The two are related order by order through the relation

    a_j(r) + sum_k S_jk(b + a(r), y) r^k = 0   (mod r^(N+1)),

which is solved here with the multi-index Taylor formula (constants 1/I!).
"""

import json
from dataclasses import dataclass, field
from itertools import product
from math import comb, factorial

import numpy as np

from .errors import FormatError, NotClosed, NotConstant, NotIntegral, OrderMismatch, OrderOutOfRange
from .series import substitute
from .torus import LSection, TorusFunction, TwoFormSection, classify, cycle_integral, fibrewise_d, poisson

DEFAULT_ORDER = 4


def _check_terms(n, terms):
    terms = tuple(terms)
    for t in terms:
        if not isinstance(t, LSection) or t.n != n:
            raise ValueError("sequence elements must be LSections with matching n")
    return terms


class _Sequence:
    kind = ""

    def __init__(self, n, terms):
        self.n = int(n)
        self.terms = _check_terms(self.n, terms)

    @property
    def order(self):
        return len(self.terms)

    def __getitem__(self, m):
        if not 1 <= m <= self.order:
            raise OrderOutOfRange(f"order {m} outside 1..{self.order}")
        return self.terms[m - 1]

    def coefficient(self, j, m):
        return self[m][j]

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, order={self.order})"

    def truncate(self, order):
        if order > self.order:
            raise OrderOutOfRange(f"cannot extend order {self.order} to {order}")
        return type(self)(self.n, self.terms[:order])


class EllSequence(_Sequence):
    """Truncated sequence l_1..l_N of sections sum_j a_jk dy_j.

    With ``check=True`` every element must be fibrewise closed.  When
    ``action_normalized`` is set, the cycle integrals of l_1 must be integers.
    """

    kind = "ell"

    def __init__(self, n, terms, *, check=True, action_normalized=False):
        super().__init__(n, terms)
        self.closedness_verified = False
        if check:
            for m, ell in enumerate(self.terms, start=1):
                if not classify(ell).closed:
                    raise NotClosed(f"l_{m} is not fibrewise closed")
            self.closedness_verified = True
        self.action_normalized = bool(action_normalized)
        if action_normalized:
            integrality_check(self)

    @property
    def flags(self):
        return frozenset() if self.closedness_verified else frozenset({"unverified-closedness"})

    def truncate(self, order):
        if order > self.order:
            raise OrderOutOfRange(f"cannot extend order {self.order} to {order}")
        return EllSequence(self.n, self.terms[:order], check=self.closedness_verified)

    @classmethod
    def zero(cls, n, order=DEFAULT_ORDER):
        return cls(n, [LSection.zero(n)] * order)


class SSequence(_Sequence):
    """Truncated Taylor sequence S_1..S_N with S_m = sum_j S_jm dy_j."""

    kind = "S"

    @classmethod
    def zero(cls, n, order=DEFAULT_ORDER):
        return cls(n, [LSection.zero(n)] * order)

    @property
    def admissible(self):
        return check_admissible(self).passed


class GermChange:
    """Truncated germ of an admissible base change b_j -> b_j + sum_m Phi_jm(b) b_1^m.

    ``terms[m-1][j-2]`` is the y-free function Phi_jm.
    """

    def __init__(self, n, terms):
        self.n = int(n)
        rows = []
        for m, row in enumerate(terms, start=1):
            row = tuple(row)
            if len(row) != self.n - 1:
                raise ValueError(f"Phi_{m} must have {self.n - 1} components")
            for f in row:
                if not isinstance(f, TorusFunction) or f.n != self.n:
                    raise ValueError("germ components must be TorusFunctions with matching n")
                if not f.is_y_free():
                    raise ValueError(f"germ component at order {m} depends on the angles")
            rows.append(row)
        self.terms = tuple(rows)

    @classmethod
    def identity(cls, n, order=DEFAULT_ORDER):
        return cls(n, [[TorusFunction.zero(n)] * (n - 1)] * order)

    @property
    def order(self):
        return len(self.terms)

    def component(self, j, m):
        return self.terms[m - 1][j - 2]

    def __eq__(self, other):
        if not isinstance(other, GermChange):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    __hash__ = None

    def is_identity(self):
        return all(f.is_zero() for row in self.terms for f in row)

    def __repr__(self):
        return f"GermChange(n={self.n}, order={self.order})"


# bracket forms and admissibility

def compute_P(S, m):
    """P_m = sum_{j<l} sum_{k=1}^{m-1} {S_jk, S_l,m-k} dy_j ^ dy_l (and P_1 = 0)."""
    if not 1 <= m <= S.order:
        raise OrderOutOfRange(f"order {m} outside 1..{S.order}")
    comps = {}
    for (j, l) in TwoFormSection.pairs(S.n):
        acc = TorusFunction.zero(S.n)
        for k in range(1, m):
            acc = acc + poisson(S[k][j], S[m - k][l])
        comps[(j, l)] = acc
    return TwoFormSection(S.n, comps)


@dataclass
class AdmissibilityReport:
    passed: bool
    failures: list = field(default_factory=list)
    max_residual: float = 0.0

    @property
    def first_failure(self):
        """(m, j, l, (k, alpha, coefficient)) of the first failing order, or None."""
        if not self.failures:
            return None
        m, j, l, res = self.failures[0]
        i = int(np.argmax(np.abs(res.coefficients)))
        k = tuple(int(v) for v in res.modes[i])
        alpha = tuple(int(v) for v in res.exponents[i])
        return m, j, l, (k, alpha, complex(res.coefficients[i]))

    def __bool__(self):
        return self.passed


def check_admissible(S):
    """Compare fibrewise_d(S_m) with P_m for every order, after pruning."""
    failures = []
    worst = 0.0
    for m in range(1, S.order + 1):
        diff = fibrewise_d(S[m]) - compute_P(S, m)
        for key, res in diff.items():
            if not res.is_zero():
                failures.append((m, key[0], key[1], res))
                worst = max(worst, res.max_abs())
    return AdmissibilityReport(passed=not failures, failures=failures, max_residual=worst)


# the multi-index recursion

def _multi_indices(d, total):
    """All tuples of d non-negative integers summing to ``total``."""
    if d == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _multi_indices(d - 1, total - first):
            yield (first,) + rest


def _compositions(m, parts):
    """Ordered tuples of ``parts`` positive integers summing to m."""
    if parts == 0:
        if m == 0:
            yield ()
        return
    if parts == 1:
        if m >= 1:
            yield (m,)
        return
    for first in range(1, m - parts + 2):
        for rest in _compositions(m - first, parts - 1):
            yield (first,) + rest


def index_sets(I, m):
    """Enumerate H in H_{I,m}: per slot k a tuple of i_k positive parts, all parts summing to m."""
    p = sum(I)
    for comp in _compositions(m, p):
        out, pos = [], 0
        for ik in I:
            out.append(comp[pos:pos + ik])
            pos += ik
        yield tuple(out)


def index_set_size(I, m):
    p = sum(I)
    if p == 0:
        return int(m == 0)
    return comb(m - 1, p - 1) if m >= p else 0


class _Recursion:
    """Shared state for one sweep through orders 1..N of the multi-index formula."""

    def __init__(self, n):
        self.n = n
        self.d = n - 1
        self.S = {}
        self.a = {}
        self._deriv = {}
        self._prod = {}

    def derivative(self, j, k, I):
        key = (j, k, I)
        if key not in self._deriv:
            if not any(I):
                self._deriv[key] = self.S[(j, k)]
            else:
                slot = next(i for i, v in enumerate(I) if v)
                lower = list(I)
                lower[slot] -= 1
                self._deriv[key] = self.derivative(j, k, tuple(lower)).d_base(slot + 2)
        return self._deriv[key]

    def a_product(self, H):
        """A_H = prod over slots k and parts h of a_{k,h}."""
        return self._prod_of(tuple(sorted((k + 2, h) for k, parts in enumerate(H) for h in parts)))

    def _prod_of(self, factors):
        if factors not in self._prod:
            if not factors:
                self._prod[factors] = TorusFunction.constant(self.n, 1.0)
            else:
                self._prod[factors] = self._prod_of(factors[1:]) * self.a[factors[0]]
        return self._prod[factors]

    def remainder(self, j, l):
        """R_jl = -sum_{m=1}^{l-1} sum_{1<=|I|<=m} sum_{H in H_{I,m}} C_I d^I S_{j,l-m} A_H."""
        out = TorusFunction.zero(self.n)
        for m in range(1, l):
            if self.S[(j, l - m)].is_zero():
                continue
            for p in range(1, m + 1):
                for I in _multi_indices(self.d, p):
                    dS = self.derivative(j, l - m, I)
                    if dS.is_zero():
                        continue
                    acc = TorusFunction.zero(self.n)
                    for H in index_sets(I, m):
                        acc = acc + self.a_product(H)
                    if acc.is_zero():
                        continue
                    c_I = 1.0 / np.prod([factorial(i) for i in I])
                    out = out - (dS * acc).scale(c_I)
        return out


def s_to_ell(S):
    """Invariant sequence of a Taylor sequence: a_jl = -S_jl + R_jl.

    A non-admissible input is processed anyway; the result then carries the
    ``unverified-closedness`` flag.
    """
    rec = _Recursion(S.n)
    terms = []
    for l in range(1, S.order + 1):
        comps = []
        for j in range(2, S.n + 1):
            rec.S[(j, l)] = S[l][j]
        for j in range(2, S.n + 1):
            comps.append(-S[l][j] + rec.remainder(j, l))
        for j, c in zip(range(2, S.n + 1), comps):
            rec.a[(j, l)] = c
        terms.append(LSection(S.n, comps))
    out = EllSequence(S.n, terms, check=False)
    out.closedness_verified = check_admissible(S).passed
    return out


def ell_to_s(ell):
    """Taylor sequence of an invariant sequence: S_jl = -a_jl + R_jl."""
    rec = _Recursion(ell.n)
    terms = []
    for l in range(1, ell.order + 1):
        for j in range(2, ell.n + 1):
            rec.a[(j, l)] = ell[l][j]
        # R_jl only involves S_{j,k} with k < l, so S_jl is explicit.
        comps = [-ell[l][j] + rec.remainder(j, l) for j in range(2, ell.n + 1)]
        for j, c in zip(range(2, ell.n + 1), comps):
            rec.S[(j, l)] = c
        terms.append(LSection(ell.n, comps))
    return SSequence(ell.n, terms)


@dataclass(frozen=True)
class TransferVerdict:
    ell_closed: bool
    s_admissible: bool

    @property
    def holds(self):
        return self.ell_closed == self.s_admissible

    def __bool__(self):
        return self.holds


def closedness_transfer(seq):
    """Check that an invariant sequence is closed exactly when its Taylor partner is admissible."""
    if isinstance(seq, EllSequence):
        ell, S = seq, ell_to_s(seq)
    elif isinstance(seq, SSequence):
        ell, S = s_to_ell(seq), seq
    else:
        raise TypeError("expected an EllSequence or SSequence")
    closed = all(classify(t).closed for t in ell.terms)
    return TransferVerdict(ell_closed=closed, s_admissible=check_admissible(S).passed)


# germs of admissible base changes

def _apply_germ(germ, base_series):
    """Coefficients of sum_m Phi_jm(b + delta) t^m, where delta is read from ``base_series``.

    ``base_series[i]`` is the series added to b_{i+2} (constant term zero).
    Returns ``out[j-2][k]`` for k = 0..N.
    """
    n, N = germ.n, germ.order
    out = []
    for j in range(2, n + 1):
        coeffs = [TorusFunction.zero(n) for _ in range(N + 1)]
        for m in range(1, N + 1):
            phi = germ.component(j, m)
            if phi.is_zero():
                continue
            sub = substitute(phi, base_series)
            for k in range(m, N + 1):
                coeffs[k] = coeffs[k] + sub[k - m]
        out.append(coeffs)
    return out


def _shifts_from(rows, n, N):
    return [[TorusFunction.zero(n)] + [rows[m][i] for m in range(N)] for i in range(n - 1)]


def germ_compose(phi, psi):
    """Germ of phi o psi, truncated at the common order."""
    if phi.n != psi.n or phi.order != psi.order:
        raise OrderMismatch(f"cannot compose germs of (n, order) {(phi.n, phi.order)} and {(psi.n, psi.order)}")
    n, N = phi.n, phi.order
    applied = _apply_germ(phi, _shifts_from(psi.terms, n, N))
    rows = [[psi.component(j, m) + applied[j - 2][m] for j in range(2, n + 1)] for m in range(1, N + 1)]
    return GermChange(n, rows)


def germ_inverse(phi):
    """The germ psi with phi o psi equal to the identity, solved order by order."""
    n, N = phi.n, phi.order
    rows = [[TorusFunction.zero(n)] * (n - 1) for _ in range(N)]
    for k in range(1, N + 1):
        applied = _apply_germ(phi, _shifts_from(rows, n, N))
        rows[k - 1] = [rows[k - 1][j] - (rows[k - 1][j] + applied[j][k]) for j in range(n - 1)]
    return GermChange(n, rows)


def germ_act(phi, ell):
    """Invariant sequence of phi o u, where u realises ``ell``."""
    if phi.n != ell.n or phi.order != ell.order:
        raise OrderMismatch(f"germ (n, order) {(phi.n, phi.order)} does not match sequence {(ell.n, ell.order)}")
    n, N = ell.n, ell.order
    S = ell_to_s(ell)
    rows = [[S[m][j] for j in range(2, n + 1)] for m in range(1, N + 1)]
    applied = _apply_germ(phi, _shifts_from(rows, n, N))
    new_terms = [LSection(n, [S[m][j] + applied[j - 2][m] for j in range(2, n + 1)]) for m in range(1, N + 1)]
    return s_to_ell(SSequence(n, new_terms))


def germ_from_taylor(S):
    """The germ with Phi_m = (S_2m, ..., S_nm); requires y-free coefficients."""
    return GermChange(S.n, [[S[m][j] for j in range(2, S.n + 1)] for m in range(1, S.order + 1)])


def smoothing_germ(ell):
    """For a fibrewise constant sequence, a germ phi with phi^{-1} . ell = 0 (returns phi^{-1})."""
    if not all(t.is_y_free() for t in ell.terms):
        raise NotConstant("the sequence is not fibrewise constant")
    return germ_inverse(germ_from_taylor(ell_to_s(ell)))


# first-order class and integrality

@dataclass(frozen=True)
class FirstOrderClass:
    representative: LSection
    residual: LSection


def first_order_class(ell1):
    """Split l_1 into its oscillatory part and its fibrewise constant part."""
    return FirstOrderClass(representative=ell1.map(lambda a: a.oscillatory_part()),
                           residual=ell1.map(lambda a: a.fibre_average()))


def equivalent_first_order(ell1, other):
    """Equal up to a fibrewise constant section, i.e. equal oscillatory parts."""
    return (first_order_class(ell1).representative - first_order_class(other).representative).is_zero()


def integrality_check(ell, tol=1e-9):
    """Integers m_j equal to the cycle integrals of l_1, or raise."""
    ell1 = ell[1] if isinstance(ell, EllSequence) else ell
    out = []
    for j in range(2, ell1.n + 1):
        value = cycle_integral(ell1, j)
        if np.any(value.exponents):
            raise NotConstant(f"the cycle integral in direction {j} depends on b")
        c = value.coefficient((0,) * (ell1.n - 1), (0,) * (ell1.n - 1)).real
        m = int(round(c))
        if abs(c - m) > tol:
            raise NotIntegral(f"the cycle integral in direction {j} is {c!r}")
        out.append(m)
    return out


# sequence files

CONVENTION = "period-1"
_KEYS = {"ell": EllSequence, "S": SSequence, "germ": GermChange}


def sequence_to_dict(seq):
    if isinstance(seq, GermChange):
        key, body = "germ", [[f.to_records() for f in row] for row in seq.terms]
    else:
        key, body = seq.kind, [t.to_records() for t in seq.terms]
    return {"n": seq.n, "order": seq.order, "convention": CONVENTION, key: body}


def sequence_from_dict(doc, check=True):
    """Inverse of :func:`sequence_to_dict`; unknown conventions are rejected."""
    if not isinstance(doc, dict):
        raise FormatError("a sequence document must be a JSON object")
    if doc.get("convention") != CONVENTION:
        raise FormatError(f"unsupported angle convention {doc.get('convention')!r}")
    found = [k for k in _KEYS if k in doc]
    if len(found) != 1:
        raise FormatError("expected exactly one of 'ell', 'S' or 'germ'")
    key = found[0]
    try:
        n, order, body = int(doc["n"]), int(doc["order"]), doc[key]
        if len(body) != order:
            raise FormatError(f"order is {order} but {len(body)} elements are given")
        if key == "germ":
            rows = [[TorusFunction.from_records(n, r) for r in row] for row in body]
            return GermChange(n, rows)
        terms = [LSection.from_records(n, r) for r in body]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (FormatError, NotClosed)):
            raise
        raise FormatError(str(exc)) from exc
    if key == "ell":
        return EllSequence(n, terms, check=check)
    return SSequence(n, terms)


def dumps(seq):
    return json.dumps(sequence_to_dict(seq), indent=1, sort_keys=True) + "\n"


def loads(text, check=True):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    return sequence_from_dict(doc, check=check)


def save(seq, path):
    with open(path, "w") as fh:
        fh.write(dumps(seq))


def load(path, check=True):
    with open(path) as fh:
        return loads(fh.read(), check=check)


__all__ = [
    "AdmissibilityReport", "EllSequence", "FirstOrderClass", "GermChange", "SSequence", "TransferVerdict",
    "check_admissible", "closedness_transfer", "compute_P", "ell_to_s", "equivalent_first_order",
    "first_order_class", "germ_act", "germ_compose", "germ_from_taylor", "germ_inverse",
    "index_set_size", "index_sets", "integrality_check", "load", "loads", "dumps", "save",
    "s_to_ell", "sequence_from_dict", "sequence_to_dict", "smoothing_germ",
]
