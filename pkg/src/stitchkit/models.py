"""Stitched example fibrations on C^2 and C^3.

Points are complex arrays of shape (..., n).  Every function f_j comes with
its two smooth branches f_j^+ (used where mu >= 0) and f_j^-, each carrying an
analytic Wirtinger derivative d/dz-bar.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedAtPoint, UnknownName
from .flows import FieldSet, ScalarField

DOMAIN_MARGIN = 1e-9
SQRT2 = np.sqrt(2.0)


def _as_points(z, n=None):
    z = np.asarray(z, dtype=complex)
    if n is not None and z.shape[-1] != n:
        raise ValueError(f"expected points with {n} complex coordinates")
    return z


def moment_map(z):
    z = _as_points(z)
    return 0.5 * (np.abs(z[..., 0]) ** 2 - np.abs(z[..., 1]) ** 2)


def side_of(z):
    """'plus' where mu >= 0, else 'minus' (elementwise as a boolean array: True for plus)."""
    return moment_map(z) >= 0


def gamma(z1, z2, side=None):
    """z1 z2 / |z1| on the plus side (mu >= 0), z1 z2 / |z2| on the minus side.

    ``side`` forces a branch ('plus' or 'minus'); otherwise it is chosen by mu.
    """
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    if side is None:
        plus = np.abs(z1) >= np.abs(z2)
    else:
        plus = np.full(np.broadcast_shapes(z1.shape, z2.shape), side == "plus")
    den = np.where(plus, np.abs(z1), np.abs(z2))
    other = np.where(plus, np.abs(z2), np.abs(z1))
    num = z1 * z2
    # |gamma| equals the other modulus, so a vanishing denominator is only harmless when both vanish
    if np.any((den == 0) & (other != 0)):
        raise UndefinedAtPoint("gamma branch is undefined at this point")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out[()] if out.ndim == 0 else out


def _gamma_derivatives(z, side):
    """(gamma, d gamma/dz, d gamma/dz-bar) on one branch; derivative arrays have shape (..., n)."""
    z1, z2 = z[..., 0], z[..., 1]
    dz = np.zeros(z.shape, dtype=complex)
    dzb = np.zeros(z.shape, dtype=complex)
    if side == "plus":
        r = np.abs(z1)
        if np.any(r == 0):
            raise UndefinedAtPoint("the plus branch needs z1 != 0")
        g = z1 * z2 / r
        dz[..., 0] = z2 / (2 * r)
        dzb[..., 0] = -z1 ** 2 * z2 / (2 * r ** 3)
        dz[..., 1] = z1 / r
    else:
        r = np.abs(z2)
        if np.any(r == 0):
            raise UndefinedAtPoint("the minus branch needs z2 != 0")
        g = z1 * z2 / r
        dz[..., 0] = z2 / r
        dz[..., 1] = z1 / (2 * r)
        dzb[..., 1] = -z1 * z2 ** 2 / (2 * r ** 3)
    return g, dz, dzb


def _log_modulus(P, dP, dPb, shift=0.0):
    """Value and d/dz-bar of log|P| + shift from P, dP/dz and dP/dz-bar."""
    if np.any(P == 0):
        raise UndefinedAtPoint("log|P| is undefined where P = 0")
    value = np.log(np.abs(P)) + shift
    dbar = 0.5 * (dPb / P[..., None] + np.conj(dP) / np.conj(P)[..., None])
    return value, dbar


def _mu_field(n):
    def value(z):
        return moment_map(z)

    def dbar(z):
        out = np.zeros(z.shape, dtype=complex)
        out[..., 0] = z[..., 0] / 2
        out[..., 1] = -z[..., 1] / 2
        return out
    return ScalarField(value, dbar, side="global", name="mu")


def _gamma_log_field(side, offset, z3_coef=0.0, shift=0.0, name=""):
    """Field log|gamma + z3_coef z3 + offset| + shift on one branch."""
    def parts(z):
        z = _as_points(z)
        g, dg, dgb = _gamma_derivatives(z, side)
        P = g + offset
        dP = dg.copy()
        if z3_coef:
            P = P + z3_coef * z[..., 2]
            dP[..., 2] += z3_coef
        return _log_modulus(P, dP, dgb, shift)

    return ScalarField(lambda z: parts(z)[0], lambda z: parts(z)[1], side=side, name=name)


def _z3_log_field():
    def parts(z):
        z = _as_points(z)
        P = z[..., 2]
        dP = np.zeros(z.shape, dtype=complex)
        dP[..., 2] = 1.0
        return _log_modulus(P, dP, np.zeros_like(dP))
    return ScalarField(lambda z: parts(z)[0], lambda z: parts(z)[1], side="global", name="log|z3|")


def _fused(side, n, gamma_logs, with_z3=False):
    """All d/dz-bar of (mu, [log|z3|], log|gamma + c z3 + offset| ...) on one branch at once."""
    def stacked(z):
        g, dg, dgb = _gamma_derivatives(z, side)
        rows = [np.zeros(z.shape, dtype=complex)]
        rows[0][..., 0] = z[..., 0] / 2
        rows[0][..., 1] = -z[..., 1] / 2
        if with_z3:
            row = np.zeros(z.shape, dtype=complex)
            row[..., 2] = 0.5 / np.conj(z[..., 2])
            rows.append(row)
        for offset, coef in gamma_logs:
            P = g + offset
            dP = dg.copy()
            if coef:
                P = P + coef * z[..., 2]
                dP[..., 2] += coef
            rows.append(0.5 * (dgb / P[..., None] + np.conj(dP) / np.conj(P)[..., None]))
        return np.stack(rows, axis=-2)
    return stacked


def _polar(r, theta):
    return r * np.exp(1j * np.asarray(theta, dtype=float))


def _z12_from_gamma(g, b1, theta1):
    """Points (z1, z2) with the given gamma value, moment b1 and arg z1 = theta1."""
    g = np.asarray(g, dtype=complex)
    b1 = np.asarray(b1, dtype=float)
    a = np.abs(g)
    plus = b1 >= 0
    r1 = np.where(plus, np.sqrt(np.maximum(2 * b1 + a ** 2, 0.0)), a)
    r2 = np.where(plus, a, np.sqrt(np.maximum(a ** 2 - 2 * b1, 0.0)))
    z1 = _polar(r1, theta1)
    z2 = _polar(r2, np.angle(g) - theta1)
    return z1, z2


@dataclass
class ExampleFibration:
    """A stitched fibration f = (mu, f_2, ..., f_n) with smooth branches on either side."""

    name: str
    n: int
    plus: list
    minus: list
    domain_check: object
    angle_fn: object
    fibre_point_fn: object
    closed_forms: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    discriminant_fn: object = None

    @property
    def mu(self):
        return self.plus[0]

    def in_discriminant(self, b, tol=1e-9):
        """Whether the fibre over ``b`` contains a point of the singular set gamma = 0."""
        b = np.asarray(b, dtype=float)
        return np.asarray(self.discriminant_fn(b, tol), dtype=bool)

    def fields(self, side):
        return self.plus if side == "plus" else self.minus

    def in_domain(self, z):
        z = _as_points(z, self.n)
        try:
            return np.asarray(self.domain_check(z), dtype=bool)
        except UndefinedAtPoint:
            return np.zeros(z.shape[:-1], dtype=bool)

    def _require_domain(self, z):
        if not np.all(self.in_domain(z)):
            raise UndefinedAtPoint(f"point outside the domain of {self.name}")

    def evaluate_side(self, z, side):
        z = _as_points(z, self.n)
        return np.stack([f(z) for f in self.fields(side)], axis=-1)

    def __call__(self, z):
        """The stitched map, choosing the branch by the sign of mu."""
        z = _as_points(z, self.n)
        self._require_domain(z)
        plus = side_of(z)
        out = np.empty(z.shape[:-1] + (self.n,))
        if np.any(plus):
            out[plus] = self.evaluate_side(z[plus], "plus")
        if np.any(~plus):
            out[~plus] = self.evaluate_side(z[~plus], "minus")
        return out

    def angles(self, z):
        """Angle coordinates on fibres of the seam (arg z1 first)."""
        return self.angle_fn(_as_points(z, self.n))

    def point_on_fibre(self, b, theta):
        """A point z with f(z) = b and angle coordinates theta."""
        return self.fibre_point_fn(np.asarray(b, dtype=float), np.asarray(theta, dtype=float))

    def closed_form_a(self, z, variant=None):
        return closed_form_a(self, z, variant)


def _ff_domain(z):
    g = gamma(z[..., 0], z[..., 1])
    return np.abs(g + 1) > DOMAIN_MARGIN


def _leg_domain(z):
    g = gamma(z[..., 0], z[..., 1])
    return (np.abs(z[..., 2]) > DOMAIN_MARGIN) & (np.abs(g - 1) > DOMAIN_MARGIN)


def _amoeba_domain(z):
    g = gamma(z[..., 0], z[..., 1])
    return (np.abs(g - z[..., 2]) > DOMAIN_MARGIN) & (np.abs(g + z[..., 2] - SQRT2) > DOMAIN_MARGIN)


def _ff_discriminant(b, tol):
    # gamma = 0 lies on the seam with |gamma + 1| = 1
    return (np.abs(b[..., 0]) <= tol) & (np.abs(b[..., 1]) <= tol)


def _leg_discriminant(b, tol):
    # gamma = 0 gives |gamma - 1| = 1 with z3 free
    return (np.abs(b[..., 0]) <= tol) & (np.abs(b[..., 2]) <= tol)


def _amoeba_discriminant(b, tol):
    # gamma = 0 needs z3 with |z3| = sqrt2 e^{b2} and |z3 - sqrt2| = sqrt2 e^{b3}: intersect the circles
    r1, r2 = SQRT2 * np.exp(b[..., 1]), SQRT2 * np.exp(b[..., 2])
    x = (r1 ** 2 - r2 ** 2 + 2.0) / (2 * SQRT2)
    return (np.abs(b[..., 0]) <= tol) & (r1 ** 2 - x ** 2 >= -tol)


def _ff_point(b, theta):
    g = np.exp(b[..., 1] + 1j * theta[..., 1]) - 1
    z1, z2 = _z12_from_gamma(g, b[..., 0], theta[..., 0])
    return np.stack([z1, z2], axis=-1)


def _leg_point(b, theta):
    z3 = np.exp(b[..., 1] + 1j * theta[..., 1])
    g = 1 + np.exp(b[..., 2] + 1j * theta[..., 2])
    z1, z2 = _z12_from_gamma(g, b[..., 0], theta[..., 0])
    return np.stack([z1, z2, z3], axis=-1)


def _amoeba_point(b, theta):
    v1 = np.exp(b[..., 1] + 1j * theta[..., 1])
    v2 = np.exp(b[..., 2] + 1j * theta[..., 2])
    g = (v1 + v2 + 1) / SQRT2
    z3 = g - SQRT2 * v1
    z1, z2 = _z12_from_gamma(g, b[..., 0], theta[..., 0])
    return np.stack([z1, z2, z3], axis=-1)


def _ff_angles(z):
    g = gamma(z[..., 0], z[..., 1])
    return np.stack([np.angle(z[..., 0]), np.angle(g + 1)], axis=-1)


def _leg_angles(z):
    g = gamma(z[..., 0], z[..., 1])
    return np.stack([np.angle(z[..., 0]), np.angle(z[..., 2]), np.angle(g - 1)], axis=-1)


def _amoeba_angles(z):
    g = gamma(z[..., 0], z[..., 1])
    v1 = (g - z[..., 2]) / SQRT2
    v2 = (g + z[..., 2] - SQRT2) / SQRT2
    return np.stack([np.angle(z[..., 0]), np.angle(v1), np.angle(v2)], axis=-1)


def _seam_gamma(z):
    z = _as_points(z)
    r = np.abs(z[..., 0])
    if np.any(r == 0):
        raise UndefinedAtPoint("closed forms need z1 != 0")
    return z[..., 0] * z[..., 1] / r, r


def _ff_printed(z):
    z = _as_points(z)
    z1, z2 = z[..., 0], z[..., 1]
    r = np.abs(z1)
    den = r ** 2 * z1 * z2 - r ** 3
    if np.any(np.abs(den) == 0):
        raise UndefinedAtPoint("the printed denominator vanishes")
    return np.real(z1 * z2 / den)[..., None]


def _ff_corrected(z):
    z = _as_points(z)
    z1, z2 = z[..., 0], z[..., 1]
    r = np.abs(z1)
    den = r ** 2 * z1 * z2 + r ** 3
    if np.any(np.abs(den) == 0):
        raise UndefinedAtPoint("the denominator vanishes")
    return -np.real(z1 * z2 / den)[..., None]


def _leg_derived(z):
    g, r = _seam_gamma(z)
    return np.stack([np.zeros_like(r), -np.real(g / (g - 1)) / r ** 2], axis=-1)


def _amoeba_printed(z):
    z = _as_points(z)
    z1, z2, z3 = z[..., 0], z[..., 1], z[..., 2]
    g, r = _seam_gamma(z)
    w = np.conj(z1) * np.conj(z2) / r ** 3
    p2, p3 = g - z3, g + z3 - SQRT2
    a2 = -np.real(p2 * w) / np.abs(p2) ** 2
    a3 = -np.real(p3 * w) / np.abs(p3) ** 2
    return np.stack([a2, a3], axis=-1)


def _make_focus_focus():
    mu = _mu_field(2)
    return ExampleFibration(
        name="focus_focus", n=2,
        plus=FieldSet([mu, _gamma_log_field("plus", 1.0, name="log|gamma+1|")],
                      _fused("plus", 2, [(1.0, 0.0)])),
        minus=FieldSet([mu, _gamma_log_field("minus", 1.0, name="log|gamma+1|")],
                       _fused("minus", 2, [(1.0, 0.0)])),
        domain_check=_ff_domain, angle_fn=_ff_angles, fibre_point_fn=_ff_point,
        closed_forms={"printed": _ff_printed, "corrected": _ff_corrected}, discriminant_fn=_ff_discriminant,
        metadata={"discriminant": "the origin of R^2", "seam_components": 2, "default_variant": "corrected"},
    )


def _make_leg():
    mu = _mu_field(3)
    z3 = _z3_log_field()
    return ExampleFibration(
        name="leg", n=3,
        plus=FieldSet([mu, z3, _gamma_log_field("plus", -1.0, name="log|gamma-1|")],
                      _fused("plus", 3, [(-1.0, 0.0)], with_z3=True)),
        minus=FieldSet([mu, z3, _gamma_log_field("minus", -1.0, name="log|gamma-1|")],
                       _fused("minus", 3, [(-1.0, 0.0)], with_z3=True)),
        domain_check=_leg_domain, angle_fn=_leg_angles, fibre_point_fn=_leg_point,
        closed_forms={"derived": _leg_derived}, discriminant_fn=_leg_discriminant,
        metadata={"discriminant": "the line {0} x R x {0}", "seam_components": 1, "default_variant": "derived"},
    )


def _make_amoeba():
    mu = _mu_field(3)
    shift = -np.log(SQRT2)

    def side(s):
        return FieldSet([mu,
                         _gamma_log_field(s, 0.0, z3_coef=-1.0, shift=shift, name="log|gamma-z3|/sqrt2"),
                         _gamma_log_field(s, -SQRT2, z3_coef=1.0, shift=shift, name="log|gamma+z3-sqrt2|/sqrt2")],
                        _fused(s, 3, [(0.0, -1.0), (-SQRT2, 1.0)]))
    return ExampleFibration(
        name="amoeba", n=3, plus=side("plus"), minus=side("minus"),
        domain_check=_amoeba_domain, angle_fn=_amoeba_angles, fibre_point_fn=_amoeba_point,
        closed_forms={"printed": _amoeba_printed}, discriminant_fn=_amoeba_discriminant,
        metadata={"discriminant": "the amoeba of v1 + v2 + 1 = 0 in the plane b1 = 0",
                  "seam_components": 3, "default_variant": "printed",
                  "seam_points": {"c": (0.0, -2.0, -2.0), "d": (0.0, 2.0, 0.0), "e": (0.0, 0.0, 2.0)}},
    )


_REGISTRY = {"focus_focus": _make_focus_focus, "leg": _make_leg, "amoeba": _make_amoeba}


def names():
    return sorted(_REGISTRY)


def make(name):
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise UnknownName(f"unknown example {name!r}; known: {', '.join(names())}") from None


def closed_form_a(example, z, variant=None):
    """Closed-form discrepancy coefficients a_2..a_n at seam points."""
    if isinstance(example, str):
        example = make(example)
    variant = variant or example.metadata.get("default_variant")
    try:
        fn = example.closed_forms[variant]
    except KeyError:
        raise UnknownName(f"no closed form {variant!r} for {example.name}") from None
    return fn(_as_points(z, example.n))


def random_seam_points(example, count, rng, radius=(0.3, 1.5)):
    """Points with mu = 0 inside the domain of ``example``."""
    out = []
    while len(out) < count:
        r = rng.uniform(*radius)
        z = [r * np.exp(2j * np.pi * rng.uniform()), r * np.exp(2j * np.pi * rng.uniform())]
        if example.n == 3:
            z.append(complex(rng.normal(), rng.normal()))
        z = np.array(z)
        if example.in_domain(z) and np.all(np.abs(example.closed_forms[example.metadata["default_variant"]](z)) < 1e6):
            out.append(z)
    return np.array(out)
