"""Exact algebra of S^1-invariant functions and forms on the reduced seam.

A :class:`TorusFunction` is a finite sum of terms ``c * b**alpha * exp(2*pi*i*k.y)``
in base variables ``b = (b_2, ..., b_n)`` and angles ``y = (y_2, ..., y_n)`` of
period 1.  Public variable indices follow the 2..n numbering throughout.

Coefficients are complex doubles.  After every operation terms whose modulus is
below the pruning threshold are dropped, so "exact equality" means equality of
the pruned canonical forms.
"""

from dataclasses import dataclass
from functools import cached_property
from numbers import Integral, Real

import numpy as np

from .errors import DegreeOverflow, DimensionMismatch, IndexOutOfRange, NotClosed

PRUNE_TOL = 1e-13
MAX_MODE = 64
MAX_DEGREE = 64
MAX_N = 4

# Terms are addressed by a single int64: balanced base-1024 digits holding
# k_2..k_n followed by alpha_2..alpha_n.  Digit sums stay inside +-511 as long
# as the caps are at most 255, so codes add exactly under multiplication.
_RADIX = 1024
_HALF = _RADIX // 2
_CAP_LIMIT = 255
_CHUNK = 1 << 21
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Precision:
    """Pruning threshold and hard caps on |k|_inf and |alpha|_1."""

    tol: float = PRUNE_TOL
    max_mode: int = MAX_MODE
    max_degree: int = MAX_DEGREE

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("pruning threshold must be positive")
        for cap in (self.max_mode, self.max_degree):
            if not 0 <= cap <= _CAP_LIMIT:
                raise ValueError(f"caps must lie in [0, {_CAP_LIMIT}]")

    def merge(self, other):
        if other is self or other == self:
            return self
        return Precision(max(self.tol, other.tol),
                         min(self.max_mode, other.max_mode),
                         min(self.max_degree, other.max_degree))


DEFAULT_PRECISION = Precision()


def _check_n(n):
    if not isinstance(n, Integral) or not 2 <= n <= MAX_N:
        raise DimensionMismatch(f"n must be an integer in [2, {MAX_N}], got {n!r}")
    return int(n)


def _weights(d):
    return _RADIX ** np.arange(2 * d, dtype=np.int64)


def _encode(k, alpha, d):
    digits = np.concatenate([np.asarray(k, dtype=np.int64).reshape(-1, d),
                             np.asarray(alpha, dtype=np.int64).reshape(-1, d)], axis=1)
    return digits @ _weights(d)


def _decode(codes, d):
    x = np.array(codes, dtype=np.int64)
    digits = np.empty((x.size, 2 * d), dtype=np.int64)
    for i in range(2 * d):
        dig = (x + _HALF) % _RADIX - _HALF
        digits[:, i] = dig
        x = (x - dig) // _RADIX
    return digits[:, :d], digits[:, d:]


def _aggregate(codes, coefs, tol):
    if codes.size == 0:
        return codes.astype(np.int64), coefs.astype(np.complex128)
    uniq, inv = np.unique(codes, return_inverse=True)
    re = np.bincount(inv, weights=coefs.real, minlength=uniq.size)
    im = np.bincount(inv, weights=coefs.imag, minlength=uniq.size)
    out = re + 1j * im
    keep = np.abs(out) >= tol
    return uniq[keep], out[keep]


class TorusFunction:
    """Immutable sparse Fourier-polynomial function on the reduced seam.

    ``terms`` maps ``(k, alpha)`` pairs of length-(n-1) integer tuples to complex
    coefficients.  The reality condition ``c[-k, alpha] == conj(c[k, alpha])``
    is checked on construction.
    """

    __array_priority__ = 20

    def __init__(self, n, terms=None, *, precision=None, check_reality=True):
        n = _check_n(n)
        d = n - 1
        prec = precision or DEFAULT_PRECISION
        ks, als, cs = [], [], []
        for (k, alpha), c in dict(terms or {}).items():
            k, alpha = tuple(k), tuple(alpha)
            if len(k) != d or len(alpha) != d:
                raise DimensionMismatch(f"term indices must have length {d}")
            if any(a < 0 for a in alpha):
                raise ValueError("monomial exponents must be non-negative")
            ks.append(k)
            als.append(alpha)
            cs.append(complex(c))
        k_arr = np.array(ks, dtype=np.int64).reshape(-1, d)
        a_arr = np.array(als, dtype=np.int64).reshape(-1, d)
        _check_caps(k_arr, a_arr, prec)
        codes, coefs = _aggregate(_encode(k_arr, a_arr, d), np.array(cs, dtype=np.complex128), prec.tol)
        self._init(n, codes, coefs, prec)
        if check_reality:
            self._check_reality()

    def _init(self, n, codes, coefs, prec):
        self.n = n
        self.precision = prec
        self._codes = codes
        self._coefs = coefs
        self._codes.flags.writeable = False
        self._coefs.flags.writeable = False

    @classmethod
    def _raw(cls, n, codes, coefs, prec, aggregate=True):
        if aggregate:
            codes, coefs = _aggregate(codes, coefs, prec.tol)
        obj = cls.__new__(cls)
        obj._init(n, codes, coefs, prec)
        if aggregate:
            _check_caps(obj.modes, obj.exponents, prec)
        return obj

    # construction helpers

    @classmethod
    def zero(cls, n, precision=None):
        return cls(n, precision=precision)

    @classmethod
    def constant(cls, n, value, precision=None):
        d = _check_n(n) - 1
        return cls(n, {((0,) * d, (0,) * d): float(value)}, precision=precision)

    @classmethod
    def monomial(cls, n, alpha, coef=1.0, precision=None):
        d = _check_n(n) - 1
        return cls(n, {((0,) * d, tuple(alpha)): float(coef)}, precision=precision)

    @classmethod
    def base(cls, n, j, precision=None):
        """The coordinate function b_j."""
        d = _check_n(n) - 1
        _check_index(n, j)
        alpha = [0] * d
        alpha[j - 2] = 1
        return cls.monomial(n, alpha, 1.0, precision)

    @classmethod
    def cos(cls, n, k, amplitude=1.0, alpha=None, precision=None):
        """amplitude * b**alpha * cos(2 pi k.y)"""
        return cls._trig(n, k, amplitude, alpha, precision, sine=False)

    @classmethod
    def sin(cls, n, k, amplitude=1.0, alpha=None, precision=None):
        """amplitude * b**alpha * sin(2 pi k.y)"""
        return cls._trig(n, k, amplitude, alpha, precision, sine=True)

    @classmethod
    def _trig(cls, n, k, amplitude, alpha, precision, sine):
        d = _check_n(n) - 1
        k = tuple(int(v) for v in k)
        alpha = tuple(alpha) if alpha is not None else (0,) * d
        neg = tuple(-v for v in k)
        if k == neg:
            value = 0.0 if sine else float(amplitude)
            return cls(n, {(k, alpha): value}, precision=precision)
        half = float(amplitude) / 2
        if sine:
            terms = {(k, alpha): -0.5j * float(amplitude), (neg, alpha): 0.5j * float(amplitude)}
        else:
            terms = {(k, alpha): half, (neg, alpha): half}
        return cls(n, terms, precision=precision)

    # inspection

    @property
    def d(self):
        return self.n - 1

    def __len__(self):
        return int(self._codes.size)

    @cached_property
    def _decoded(self):
        return _decode(self._codes, self.d)

    @property
    def modes(self):
        return self._decoded[0]

    @property
    def exponents(self):
        return self._decoded[1]

    @property
    def coefficients(self):
        return self._coefs

    @property
    def terms(self):
        k, a = self._decoded
        return {(tuple(int(v) for v in k[i]), tuple(int(v) for v in a[i])): complex(self._coefs[i])
                for i in range(len(self))}

    def is_zero(self):
        return self._codes.size == 0

    def is_y_free(self):
        return not np.any(self.modes)

    def max_mode(self):
        return int(np.abs(self.modes).max()) if len(self) else 0

    def degree(self):
        return int(self.exponents.sum(axis=1).max()) if len(self) else 0

    def max_abs(self):
        return float(np.abs(self._coefs).max()) if len(self) else 0.0

    def coefficient(self, k, alpha):
        code = _encode(np.array(k), np.array(alpha), self.d)[0]
        i = np.searchsorted(self._codes, code)
        if i < len(self) and self._codes[i] == code:
            return complex(self._coefs[i])
        return 0j

    def _check_reality(self):
        if not len(self):
            return
        kpart = self.modes @ _weights(self.d)[: self.d]
        partner = self._codes - 2 * kpart
        idx = np.searchsorted(self._codes, partner)
        idx = np.minimum(idx, len(self) - 1)
        found = self._codes[idx] == partner
        scale = np.maximum(1.0, np.abs(self._coefs))
        ok = found & (np.abs(self._coefs[idx] - np.conj(self._coefs)) <= 1e-12 * scale)
        if not np.all(ok):
            raise ValueError("coefficients violate the reality condition c[-k] = conj(c[k])")

    def __eq__(self, other):
        if not isinstance(other, TorusFunction):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self._codes, other._codes)
                and np.array_equal(self._coefs, other._coefs))

    __hash__ = None

    def __repr__(self):
        return f"TorusFunction(n={self.n}, terms={len(self)})"

    # arithmetic

    def _coerce(self, other):
        if isinstance(other, TorusFunction):
            if other.n != self.n:
                raise DimensionMismatch(f"n={self.n} vs n={other.n}")
            return other
        if isinstance(other, Real):
            return TorusFunction.constant(self.n, float(other), self.precision)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        prec = self.precision.merge(other.precision)
        return TorusFunction._raw(self.n, np.concatenate([self._codes, other._codes]),
                                  np.concatenate([self._coefs, other._coefs]), prec)

    __radd__ = __add__

    def __neg__(self):
        return TorusFunction._raw(self.n, self._codes.copy(), -self._coefs, self.precision, aggregate=False)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor):
        factor = float(factor)
        if factor == 0.0:
            return TorusFunction.zero(self.n, self.precision)
        return TorusFunction._raw(self.n, self._codes.copy(), self._coefs * factor, self.precision)

    def __mul__(self, other):
        if isinstance(other, Real):
            return self.scale(other)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        prec = self.precision.merge(other.precision)
        if not len(self) or not len(other):
            return TorusFunction.zero(self.n, prec)
        f, g = (self, other) if len(self) >= len(other) else (other, self)
        step = max(1, _CHUNK // len(g))
        codes, coefs = [], []
        for s in range(0, len(f), step):
            c = (f._codes[s:s + step, None] + g._codes[None, :]).ravel()
            v = (f._coefs[s:s + step, None] * g._coefs[None, :]).ravel()
            codes.append(c)
            coefs.append(v)
        return TorusFunction._raw(self.n, np.concatenate(codes), np.concatenate(coefs), prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Real):
            return self.scale(1.0 / float(other))
        return NotImplemented

    def __pow__(self, p):
        if not isinstance(p, Integral) or p < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = TorusFunction.constant(self.n, 1.0, self.precision)
        for _ in range(int(p)):
            out = out * self
        return out

    # calculus

    def d_base(self, j):
        _check_index(self.n, j)
        i = j - 2
        a = self.exponents[:, i]
        keep = a > 0
        codes = self._codes[keep] - _weights(self.d)[self.d + i]
        return TorusFunction._raw(self.n, codes, self._coefs[keep] * a[keep], self.precision, aggregate=False)

    def d_angle(self, j):
        _check_index(self.n, j)
        k = self.modes[:, j - 2]
        keep = k != 0
        coefs = self._coefs[keep] * (_TWO_PI * 1j * k[keep])
        return TorusFunction._raw(self.n, self._codes[keep].copy(), coefs, self.precision, aggregate=False)

    def fibre_average(self):
        keep = ~np.any(self.modes, axis=1)
        return TorusFunction._raw(self.n, self._codes[keep].copy(), self._coefs[keep].copy(),
                                  self.precision, aggregate=False)

    def oscillatory_part(self):
        keep = np.any(self.modes, axis=1)
        return TorusFunction._raw(self.n, self._codes[keep].copy(), self._coefs[keep].copy(),
                                  self.precision, aggregate=False)

    # numerics

    @cached_property
    def _compiled(self):
        k, a = self._decoded
        return k.astype(float), a, self._coefs

    def evaluate_complex(self, b, y):
        """Evaluate at broadcastable arrays ``b`` and ``y`` of trailing size n-1."""
        b = np.asarray(b, dtype=float)
        y = np.asarray(y, dtype=float)
        if b.shape[-1:] != (self.d,) or y.shape[-1:] != (self.d,):
            raise DimensionMismatch(f"points must have trailing dimension {self.d}")
        shape = np.broadcast_shapes(b.shape, y.shape)[:-1]
        if not len(self):
            return np.zeros(shape, dtype=complex)
        k, a, c = self._compiled
        mono = np.prod(b[..., None, :] ** a, axis=-1)
        phase = np.exp(_TWO_PI * 1j * (y @ k.T))
        return np.broadcast_to((mono * phase) @ c, shape)

    def evaluate(self, b, y):
        return np.real(self.evaluate_complex(b, y))

    __call__ = evaluate

    # serialization

    def to_records(self):
        k, a = self._decoded
        order = sorted(range(len(self)), key=lambda i: (tuple(k[i]), tuple(a[i])))
        return [{"k": [int(v) for v in k[i]], "alpha": [int(v) for v in a[i]],
                 "re": float(self._coefs[i].real), "im": float(self._coefs[i].imag)} for i in order]

    @classmethod
    def from_records(cls, n, records, precision=None):
        terms = {}
        for rec in records:
            key = (tuple(int(v) for v in rec["k"]), tuple(int(v) for v in rec["alpha"]))
            if key in terms:
                raise ValueError(f"duplicate term {key}")
            terms[key] = complex(float(rec["re"]), float(rec["im"]))
        return cls(n, terms, precision=precision)


def _check_index(n, j):
    if not isinstance(j, Integral) or not 2 <= j <= n:
        raise IndexOutOfRange(f"index must lie in 2..{n}, got {j!r}")


def _check_caps(k, alpha, prec):
    if k.size and int(np.abs(k).max()) > prec.max_mode:
        raise DegreeOverflow(f"Fourier mode {int(np.abs(k).max())} exceeds cap {prec.max_mode}")
    if alpha.size and int(alpha.sum(axis=1).max()) > prec.max_degree:
        raise DegreeOverflow(f"degree {int(alpha.sum(axis=1).max())} exceeds cap {prec.max_degree}")


def _same_n(*objs):
    ns = {o.n for o in objs}
    if len(ns) != 1:
        raise DimensionMismatch(f"mismatched dimensions {sorted(ns)}")
    return ns.pop()


def add(f, g):
    _same_n(f, g)
    return f + g


def mul(f, g):
    _same_n(f, g)
    return f * g


def d_base(f, j):
    return f.d_base(j)


def d_angle(f, j):
    return f.d_angle(j)


def poisson(f, g):
    """{f, g} = sum_k  df/dy_k dg/db_k - df/db_k dg/dy_k."""
    n = _same_n(f, g)
    out = TorusFunction.zero(n, f.precision.merge(g.precision))
    for k in range(2, n + 1):
        out = out + f.d_angle(k) * g.d_base(k) - f.d_base(k) * g.d_angle(k)
    return out


def fibre_average(f):
    return f.fibre_average()


def evaluate(f, b, y):
    return f.evaluate(b, y)


def equal_after_pruning(f, g):
    return (f - g).is_zero()


def coefficient_distance(f, g):
    """Largest coefficient difference, without pruning."""
    _same_n(f, g)
    codes = np.concatenate([f._codes, g._codes])
    coefs = np.concatenate([f._coefs, -g._coefs])
    if not len(codes):
        return 0.0
    uniq, inv = np.unique(codes, return_inverse=True)
    acc = np.zeros(len(uniq), dtype=complex)
    np.add.at(acc, inv, coefs)
    return float(np.max(np.abs(acc)))


def section_distance(ell, other):
    """Largest coefficient difference between two sections or two sequences of sections."""
    if isinstance(ell, LSection):
        return max(coefficient_distance(a, b) for a, b in zip(ell.components, other.components))
    return max((section_distance(a, b) for a, b in zip(ell, other)), default=0.0)


class LSection:
    """A section sum_j a_j dy_j; components are indexed by j = 2..n."""

    def __init__(self, n, components):
        n = _check_n(n)
        comps = tuple(components)
        if len(comps) != n - 1:
            raise DimensionMismatch(f"expected {n - 1} components, got {len(comps)}")
        for c in comps:
            if not isinstance(c, TorusFunction) or c.n != n:
                raise DimensionMismatch("components must be TorusFunctions with matching n")
        self.n = n
        self.components = comps

    @classmethod
    def zero(cls, n, precision=None):
        return cls(n, [TorusFunction.zero(n, precision)] * (n - 1))

    @classmethod
    def gradient(cls, g):
        """The fibrewise differential of a function: components dg/dy_j."""
        return cls(g.n, [g.d_angle(j) for j in range(2, g.n + 1)])

    def __getitem__(self, j):
        _check_index(self.n, j)
        return self.components[j - 2]

    def __iter__(self):
        return iter(self.components)

    def _zip(self, other, op):
        if not isinstance(other, LSection):
            return NotImplemented
        _same_n(self, other)
        return LSection(self.n, [op(a, b) for a, b in zip(self.components, other.components)])

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __neg__(self):
        return LSection(self.n, [-a for a in self.components])

    def __mul__(self, scalar):
        if isinstance(scalar, Real):
            return LSection(self.n, [a.scale(scalar) for a in self.components])
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LSection):
            return NotImplemented
        return self.n == other.n and all(a == b for a, b in zip(self.components, other.components))

    __hash__ = None

    def __repr__(self):
        return f"LSection(n={self.n}, terms={[len(a) for a in self.components]})"

    def is_zero(self):
        return all(a.is_zero() for a in self.components)

    def is_y_free(self):
        return all(a.is_y_free() for a in self.components)

    def map(self, fn):
        return LSection(self.n, [fn(a) for a in self.components])

    def evaluate(self, b, y):
        return np.stack([a.evaluate(b, y) for a in self.components], axis=-1)

    def to_records(self):
        return [a.to_records() for a in self.components]

    @classmethod
    def from_records(cls, n, records, precision=None):
        return cls(n, [TorusFunction.from_records(n, r, precision) for r in records])


class TwoFormSection:
    """A section sum_{j<l} p_jl dy_j ^ dy_l with only j < l stored."""

    def __init__(self, n, components=None):
        n = _check_n(n)
        self.n = n
        comps = {}
        for (j, l), p in dict(components or {}).items():
            _check_index(n, j)
            _check_index(n, l)
            if j == l:
                raise ValueError("diagonal components are identically zero")
            if j > l:
                j, l, p = l, j, -p
            comps[(j, l)] = comps[(j, l)] + p if (j, l) in comps else p
        self._comps = {key: comps.get(key, TorusFunction.zero(n)) for key in self.pairs(n)}

    @staticmethod
    def pairs(n):
        return [(j, l) for j in range(2, n + 1) for l in range(j + 1, n + 1)]

    def __getitem__(self, key):
        j, l = key
        if j == l:
            return TorusFunction.zero(self.n)
        if j > l:
            return -self._comps[(l, j)]
        return self._comps[(j, l)]

    def items(self):
        return self._comps.items()

    def __sub__(self, other):
        _same_n(self, other)
        return TwoFormSection(self.n, {key: self[key] - other[key] for key in self._comps})

    def __add__(self, other):
        _same_n(self, other)
        return TwoFormSection(self.n, {key: self[key] + other[key] for key in self._comps})

    def is_zero(self):
        return all(p.is_zero() for p in self._comps.values())

    def __repr__(self):
        return f"TwoFormSection(n={self.n}, pairs={list(self._comps)})"


def fibrewise_d(ell):
    """Components d_{y_j} a_l - d_{y_l} a_j for j < l."""
    return TwoFormSection(ell.n, {(j, l): ell[l].d_angle(j) - ell[j].d_angle(l)
                                  for (j, l) in TwoFormSection.pairs(ell.n)})


@dataclass(frozen=True)
class Classification:
    closed: bool
    exact: bool
    constant: bool


def classify(ell):
    closed = fibrewise_d(ell).is_zero()
    constant = ell.is_y_free()
    exact = closed and all(a.fibre_average().is_zero() for a in ell)
    return Classification(closed=closed, exact=exact, constant=constant)


def cycle_integral(ell, j):
    """Pairing of a closed section with the unit cycle in direction j: the zero mode of a_j."""
    if not fibrewise_d(ell).is_zero():
        raise NotClosed("cycle integrals are defined for fibrewise closed sections only")
    return ell[j].fibre_average()
