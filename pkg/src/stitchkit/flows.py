"""Hamiltonian flows on C^n with the standard form sum dx_k ^ dy_k.

With iota_v omega = dH the flow of mu = (|z1|^2 - |z2|^2)/2 would turn z1
backwards, so the field is taken with the opposite sign: z_k dot = 2i dH/dz-bar_k.
The flow of mu is then z -> (e^{it} z1, e^{-it} z2, z3), period 2 pi.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (ContinuationLost, DriftExceeded, FlowDivergence, ReturnSearchFailed, SingularPoint,
                     UndefinedAtPoint)

FIELD_SIGN = -1.0  # relative to iota_v omega = dH
DRIFT_TOL = 1e-8
STEPS_PER_UNIT = 100


class ScalarField:
    """A real function on C^n with an optional analytic d/dz-bar and a side tag."""

    def __init__(self, value, dbar=None, side="global", name=""):
        if side not in ("plus", "minus", "global"):
            raise ValueError(f"unknown side {side!r}")
        self.value = value
        self._dbar = dbar
        self.side = side
        self.name = name

    def __call__(self, z):
        return self.value(np.asarray(z, dtype=complex))

    def dbar(self, z):
        z = np.asarray(z, dtype=complex)
        if self._dbar is None:
            return fd_dbar(self.value, z)
        return self._dbar(z)

    def __repr__(self):
        return f"ScalarField({self.name or 'anonymous'}, side={self.side})"


class FieldSet(list):
    """Components of a map on one side; ``stacked`` optionally computes all d/dz-bar at once."""

    def __init__(self, fields, stacked=None):
        super().__init__(fields)
        self._stacked = stacked

    def dbar_stack(self, z):
        """Array of shape (..., k, n) with the d/dz-bar of every component."""
        z = np.asarray(z, dtype=complex)
        if self._stacked is not None:
            return self._stacked(z)
        return np.stack([f.dbar(z) for f in self], axis=-2)

    def fields_at(self, z):
        """Hamiltonian fields of all components, shape (..., k, n)."""
        v = -FIELD_SIGN * 2j * self.dbar_stack(z)
        if not np.all(np.isfinite(v)):
            raise UndefinedAtPoint("the Hamiltonian field is undefined here")
        return v


class Combination(ScalarField):
    """sum_k w_k H_k for fixed weights."""

    def __init__(self, fields, weights):
        self.fields = fields if isinstance(fields, FieldSet) else FieldSet(fields)
        self.weights = np.asarray(weights, dtype=float)
        super().__init__(self._value, self._dbar_sum, side="global", name="combination")

    def _weight(self, k):
        w = self.weights[..., k]
        return w if np.ndim(w) == 0 else w[..., None]

    def _value(self, z):
        return sum(self.weights[..., k] * f(z) for k, f in enumerate(self.fields))

    def _dbar_sum(self, z):
        return np.einsum("...k,...kn->...n", self.weights, self.fields.dbar_stack(z))


def fd_dbar(value, z, h=1e-6):
    """d/dz-bar = (d/dx + i d/dy) / 2 by central differences."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape, dtype=complex)
    for k in range(z.shape[-1]):
        e = np.zeros(z.shape[-1], dtype=complex)
        e[k] = h
        dx = (value(z + e) - value(z - e)) / (2 * h)
        dy = (value(z + 1j * e) - value(z - 1j * e)) / (2 * h)
        out[..., k] = 0.5 * (dx + 1j * dy)
    return out


def real_gradient(dbar):
    """(dH/dx_k, dH/dy_k) interleaved from d/dz-bar."""
    out = np.empty(dbar.shape[:-1] + (2 * dbar.shape[-1],))
    out[..., 0::2] = 2 * dbar.real
    out[..., 1::2] = 2 * dbar.imag
    return out


def to_real(z):
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def from_real(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def ham_field(H, z):
    """Hamiltonian vector field of H at z, as complex velocities z_k dot."""
    v = -FIELD_SIGN * 2j * H.dbar(z)
    if not np.all(np.isfinite(v)):
        raise UndefinedAtPoint("the Hamiltonian field is undefined here")
    return v


def symplectic_pairing(u, v):
    """omega(u, v) for omega = sum dx ^ dy and complex velocity vectors u, v."""
    return np.sum(u.real * v.imag - u.imag * v.real, axis=-1)


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    values: np.ndarray

    @property
    def end(self):
        return self.points[-1]

    @property
    def drift(self):
        return float(np.max(np.abs(self.values - self.values[0]), initial=0.0))


def _rk4(H, z, h, steps, keep):
    pts = [z] if keep else None
    for _ in range(steps):
        k1 = ham_field(H, z)
        k2 = ham_field(H, z + 0.5 * h * k1)
        k3 = ham_field(H, z + 0.5 * h * k2)
        k4 = ham_field(H, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise FlowDivergence("the flow left the finite region")
        if keep:
            pts.append(z)
    return z, pts


def integrate(H, z0, T, steps=None, drift_tol=DRIFT_TOL, max_halvings=4, keep=True):
    """Fixed-step RK4 flow of H for time T; the step is halved while the H drift is too large."""
    z0 = np.asarray(z0, dtype=complex)
    if steps is None:
        steps = max(16, int(np.ceil(STEPS_PER_UNIT * abs(T))))
    for _ in range(max_halvings + 1):
        end, pts = _rk4(H, z0, T / steps, steps, keep=True)
        pts = np.array(pts)
        vals = H(pts)
        drift = np.max(np.abs(vals - vals[0]), axis=0) if vals.ndim > 1 else np.max(np.abs(vals - vals[0]))
        if np.all(drift <= drift_tol * max(1.0, abs(T))):
            return Trajectory(np.linspace(0.0, T, steps + 1), pts if keep else pts[[0, -1]], vals)
        steps *= 2
    raise DriftExceeded(f"energy drift {float(np.max(drift)):.3e} exceeds tolerance")


def flow_combination(fields, weights, z0, steps, keep=False):
    """Time-1 RK4 flow of sum_k weights[..., k] fields[k]; batches over leading axes of z0."""
    H = Combination(fields, weights)
    w = np.asarray(weights, dtype=float)
    z0 = np.asarray(z0, dtype=complex)
    z0 = np.broadcast_to(z0, np.broadcast_shapes(z0.shape[:-1], w.shape[:-1]) + z0.shape[-1:]).copy()
    end, pts = _rk4(H, z0, 1.0 / steps, steps, keep)
    return end, (np.array(pts) if keep else None)


# discrepancy between the two sides

@dataclass
class Discrepancy:
    a: np.ndarray
    residual: np.ndarray


def discrepancy(example, z):
    """Coefficients a_j with eta_j^+ - eta_j^- = a_j eta_1 at seam points, plus orthogonal residuals."""
    z = np.asarray(z, dtype=complex)
    eta1 = ham_field(example.mu, z)
    norm = np.sum(np.abs(eta1) ** 2, axis=-1)
    if np.any(norm < 1e-24):
        raise SingularPoint("the circle action has a fixed point here")
    a, res = [], []
    for fp, fm in zip(example.plus[1:], example.minus[1:]):
        delta = ham_field(fp, z) - ham_field(fm, z)
        coef = np.sum(delta.real * eta1.real + delta.imag * eta1.imag, axis=-1) / norm
        a.append(coef)
        res.append(np.sqrt(np.sum(np.abs(delta - coef[..., None] * eta1) ** 2, axis=-1)))
    return Discrepancy(np.stack(a, axis=-1), np.stack(res, axis=-1))


def circle_action(z, theta):
    """e^{i theta} . z = (e^{i theta} z1, e^{-i theta} z2, z3, ...)."""
    z = np.array(z, dtype=complex)
    z[..., 0] = z[..., 0] * np.exp(1j * theta)
    z[..., 1] = z[..., 1] * np.exp(-1j * theta)
    return z


def invariance_check(example, z, theta, tol=1e-10):
    """f(e^{i theta} z) agrees with f(z)."""
    return bool(np.max(np.abs(example(circle_action(z, theta)) - example(z))) <= tol)


# period lattices and monodromy

def _as_fieldset(fields):
    return fields if isinstance(fields, FieldSet) else FieldSet(fields)


def return_residual(fields, z0, T, steps):
    end, _ = flow_combination(fields, T, z0, steps)
    return end - z0, end


def solve_return(fields, z0, T0, steps, tol=1e-9, max_iter=30, accept=1e-5, max_doublings=2):
    """Gauss-Newton on the return times T (one row per cycle) so that the flow closes up at z0.

    Stops when the residual is below ``tol`` or the update stalls; the
    discretised flow closes only up to the integrator error, so a stalled
    residual up to ``accept`` is accepted.  A stall above ``accept`` doubles
    the number of integration steps (at most ``max_doublings`` times).
    """
    T = np.array(T0, dtype=float)
    z0 = np.broadcast_to(np.asarray(z0, dtype=complex), T.shape[:-1] + (len(fields),)).copy()
    err = np.inf
    for _ in range(max_doublings + 1):
        for _ in range(max_iter):
            res, end = return_residual(fields, z0, T, steps)
            err = float(np.max(np.abs(res)))
            if err < tol:
                return T, err
            # d end / d T_k is the field of f_k at the end point (the flows commute)
            J = np.swapaxes(to_real(_as_fieldset(fields).fields_at(end)), -1, -2)
            r = to_real(res)
            if T.ndim == 1:
                dT = np.linalg.lstsq(J, r, rcond=None)[0]
            else:
                dT = np.stack([np.linalg.lstsq(J[i], r[i], rcond=None)[0] for i in range(len(T))])
            T = T - dT
            if np.max(np.abs(dT)) < 1e-8 * max(1.0, float(np.max(np.abs(T)))):
                break
        if err <= accept:
            return T, err
        steps *= 2
    raise ReturnSearchFailed(f"return-time search did not converge (residual {err:.2e})")


def _unwrapped_angles(example, pts):
    ang = example.angles(pts)
    return np.unwrap(ang, axis=0)


def cycle_from_winding(example, z0, winding, side, steps, T0=None, tol=1e-9, max_iter=40):
    """Return times of the cycle with the given winding numbers in the example's angle coordinates."""
    fields = example.fields(side)
    n = example.n
    w = np.asarray(winding, dtype=float)
    T = np.array(T0 if T0 is not None else 2 * np.pi * w, dtype=float)
    for _ in range(max_iter):
        end, pts = flow_combination(fields, T, z0, steps, keep=True)
        ang = _unwrapped_angles(example, pts)
        res = ang[-1] - ang[0] - 2 * np.pi * w
        if np.max(np.abs(res)) < 1e-6:
            return solve_return(fields, z0, T, steps, tol=tol)[0]
        h = 1e-6
        J = np.empty((n, n))
        for k, f in enumerate(fields):
            v = ham_field(f, end)
            da = np.angle(np.exp(1j * (example.angles(end + h * v) - example.angles(end - h * v))))
            J[:, k] = da / (2 * h)
        T = T - np.linalg.solve(J, res)
    raise ReturnSearchFailed("could not find a cycle with the requested winding")


def natural_basis(example, b, side, steps, theta=None):
    """Rows: return times of the unit windings in the example's angle coordinates."""
    theta = np.full(example.n, 0.3) if theta is None else theta
    z0 = example.point_on_fibre(b, theta)
    return np.array([cycle_from_winding(example, z0, np.eye(example.n)[i], side, steps)
                     for i in range(example.n)]), z0


def orbit_discrepancy_integral(example, z0, T, steps):
    """int_0^1 sum_j T_j a_j along the time-1 orbit of sum_k T_k f_k^- (one value per row of T)."""
    _, pts = flow_combination(example.minus, T, z0, steps, keep=True)
    a = discrepancy(example, pts).a  # (steps+1, ..., n-1)
    integrand = np.sum(a * np.asarray(T)[..., 1:], axis=-1)
    return _simpson(integrand, 1.0 / steps)


def _simpson(y, h):
    m = len(y) - 1
    if m % 2:
        return np.trapezoid(y, dx=h, axis=0)
    return h / 3 * (y[0] + y[-1] + 4 * np.sum(y[1:-1:2], axis=0) + 2 * np.sum(y[2:-1:2], axis=0))


def seam_convert(example, z0, T, steps, to_side):
    """Re-express return times of the same cycles on a seam fibre for the other side's fields."""
    T = np.array(T, dtype=float)
    if to_side == "plus":
        corr = orbit_discrepancy_integral(example, z0, T, steps)
        T[..., 0] -= corr
    else:
        # solve T^+_1 = T^-_1 - I(T^-), with I depending only on T_2..T_n
        corr = orbit_discrepancy_integral(example, z0, T, steps)
        T[..., 0] += corr
    return solve_return(example.fields(to_side), z0, T, steps)[0]


@dataclass
class LoopSpec:
    """A circle in the base: center + radius (cos phi e_u + sin phi e_v), starting at phi0."""

    center: tuple
    u: tuple
    v: tuple
    radius: float
    samples: int = 64
    phi0: float = 0.0
    turns: float = 1.0

    def point(self, phi):
        c, u, v = (np.asarray(x, dtype=float) for x in (self.center, self.u, self.v))
        return c + self.radius * (np.cos(phi) * u + np.sin(phi) * v)

    def seam_crossings(self):
        """Angles phi in (phi0, phi0 + 2 pi turns) with b_1 = 0."""
        c1, u1, v1 = self.center[0], self.u[0], self.v[0]
        amp = np.hypot(u1, v1) * self.radius
        if amp == 0 or abs(c1) > amp:
            return []
        base = np.arctan2(v1, u1)
        delta = np.arccos(-c1 / amp)
        out = []
        end = self.phi0 + 2 * np.pi * self.turns
        for s in (base + delta, base - delta):
            for k in range(-2, int(self.turns) + 3):
                phi = s + 2 * np.pi * k
                if self.phi0 + 1e-12 < phi < end - 1e-12:
                    out.append(phi)
        return sorted(set(out))

    def schedule(self):
        """Sample angles as (phi, crosses_seam) pairs; grid points next to a crossing are dropped."""
        end = self.phi0 + 2 * np.pi * self.turns
        grid = np.linspace(self.phi0, end, int(round(self.samples * self.turns)) + 1)
        cross = self.seam_crossings()
        keep = [(float(p), False) for i, p in enumerate(grid)
                if i in (0, len(grid) - 1) or all(abs(p - c) > 1e-9 for c in cross)]
        return sorted(keep + [(float(c), True) for c in cross])


@dataclass
class ContinuationResult:
    start: np.ndarray
    end: np.ndarray
    matrix: np.ndarray
    snap_error: float
    points: int


def _start_side(loop, phis):
    """Side of the first loop segment; a start on the seam looks a little ahead."""
    b1 = loop.point(phis[0])[0]
    if abs(b1) < 1e-13:
        b1 = loop.point(phis[0] + 1e-3 * (phis[1] - phis[0]))[0]
    return "plus" if b1 >= 0 else "minus"


def continue_lattice(example, loop, B0, steps, theta=None, side0=None, max_refine=6, path=None):
    """Carry the return-time rows B0 (given at the loop's first point) around ``loop``.

    Returns the rows at the final point.  On seam fibres the rows are
    converted between the two sides' fields.
    """
    theta = np.full(example.n, 0.3) if theta is None else np.asarray(theta, dtype=float)
    sched = loop.schedule() if path is None else list(path)
    phis = [p for p, _ in sched]
    crossings = {p for p, c in sched if c}
    B = np.array(B0, dtype=float)
    side = side0 or _start_side(loop, phis)
    count = 0

    def solve_at(phi, B, side):
        bb = loop.point(phi)
        if abs(bb[0]) < 1e-13:
            bb = bb.copy()
            bb[0] = 0.0
        z0 = example.point_on_fibre(bb, theta)
        Bn, _ = solve_return(example.fields(side), z0, B, steps)
        return Bn, z0, bb

    hist = []  # (phi, B) on the current side, for a linear predictor
    for prev, phi in zip(phis[:-1], phis[1:]):
        stack = [(prev, phi)]
        while stack:
            lo, hi = stack.pop()
            guess = B
            if len(hist) >= 2 and hist[-1][0] == lo:
                (p0, B0_), (p1, B1_) = hist[-2], hist[-1]
                guess = B1_ + (B1_ - B0_) * (hi - p1) / (p1 - p0)
            try:
                Bn, z0, bb = solve_at(hi, guess, side)
                jump = np.max(np.abs(Bn - B)) / max(1.0, np.max(np.abs(B)))
            except (ReturnSearchFailed, UndefinedAtPoint, FlowDivergence):
                jump = np.inf
            if jump > 0.1:
                if len(stack) > max_refine * 4 or hi - lo < 1e-6:
                    raise ContinuationLost(f"lattice continuation lost near phi={hi:.6f}")
                mid = 0.5 * (lo + hi)
                stack.append((mid, hi))
                stack.append((lo, mid))
                continue
            B = Bn
            count += 1
            hist = (hist + [(hi, B)])[-2:]
            if hi in crossings:
                new_side = "plus" if side == "minus" else "minus"
                B = seam_convert(example, z0, B, steps, new_side) if new_side == "plus" else \
                    _convert_to_minus(example, z0, B, steps)
                side = new_side
                hist = [(hi, B)]
    return B, side, count


def _convert_to_minus(example, z0, Tplus, steps):
    """Inverse of the minus-to-plus conversion, by fixed-point iteration on the first entry."""
    T = np.array(Tplus, dtype=float)
    guess = T.copy()
    for _ in range(3):
        corr = orbit_discrepancy_integral(example, z0, guess, steps)
        guess[..., 0] = T[..., 0] + corr
    return solve_return(example.minus, z0, guess, steps)[0]


def _snap(M):
    R = np.rint(M)
    return R.astype(int), float(np.max(np.abs(M - R)))


def monodromy(example, loop, fibre_basis=None, steps=64, theta=None):
    """Integer monodromy of the homology basis around ``loop``.

    ``fibre_basis`` gives the cycles as return-time rows at the first loop
    point; by default the unit windings of the example's angle coordinates.
    The matrix is returned in column convention: column j holds the image of
    cycle j in the starting basis.
    """
    theta = np.full(example.n, 0.3) if theta is None else np.asarray(theta, dtype=float)
    phis = [p for p, _ in loop.schedule()]
    b0 = loop.point(phis[0])
    side0 = _start_side(loop, phis)
    if fibre_basis is None:
        fibre_basis, _ = natural_basis(example, b0, side0, steps, theta)
    B0 = np.asarray(fibre_basis, dtype=float)
    B1, side1, count = continue_lattice(example, loop, B0, steps, theta, side0)
    if side1 != side0:
        z0 = example.point_on_fibre(b0, theta)
        B1 = seam_convert(example, z0, B1, steps, side0) if side0 == "plus" else \
            _convert_to_minus(example, z0, B1, steps)
    rows = B1 @ np.linalg.inv(B0)
    M, err = _snap(rows.T)
    return ContinuationResult(start=B0, end=B1, matrix=M, snap_error=err, points=count)


def is_unipotent_conjugate(M):
    """Conjugate in GL_2(Z) to [[1, 1], [0, 1]] (up to the orientation of the loop)."""
    M = np.asarray(M)
    if M.shape != (2, 2):
        return False
    N = M - np.eye(2, dtype=int)
    det = int(round(np.linalg.det(M)))
    g = np.gcd.reduce(np.abs(N).ravel())
    return int(np.trace(M)) == 2 and det == 1 and np.any(N) and g == 1 and not np.any(N @ N)


def transvection_form(M):
    """For M = I + e_1 psi with psi(e_1) = 0, return psi; else None."""
    M = np.asarray(M)
    N = M - np.eye(len(M), dtype=int)
    if np.any(N[1:]) or N[0, 0] != 0:
        return None
    return N[0]


# cohomology jump

@dataclass
class CohomologyJump:
    values: np.ndarray
    integers: np.ndarray
    snap_error: float


def cohomology_jump(example, reference, target, steps=64, theta=None):
    """The m_j with gamma_j^+ = gamma_j^- + m_j gamma_1 on the seam fibre over ``target``.

    The cycles gamma_j are the unit windings of the angle coordinates over the
    seam point ``reference``.  gamma_j^+ reaches ``target`` along the half
    circle through b_1 > 0, gamma_j^- along the mirror half circle through
    b_1 < 0.  There gamma_j^- is re-expressed for the plus fields by the orbit
    integral of the discrepancy coefficients, and the difference of first
    return times gives m_j (for j = 2..n).
    """
    theta = np.full(example.n, 0.3) if theta is None else np.asarray(theta, dtype=float)
    reference = np.asarray(reference, dtype=float)
    target = np.asarray(target, dtype=float)
    Bp, _ = natural_basis(example, reference, "plus", steps, theta)
    Bm, _ = natural_basis(example, reference, "minus", steps, theta)
    if not np.allclose(reference, target):
        center = 0.5 * (reference + target)
        radius = 0.5 * np.linalg.norm(target - reference)
        u = (reference - center) / radius
        e1 = np.zeros_like(reference)
        e1[0] = 1.0
        up = LoopSpec(tuple(center), tuple(u), tuple(e1), radius, samples=64, turns=0.5)
        down = LoopSpec(tuple(center), tuple(u), tuple(-e1), radius, samples=64, turns=0.5)
        Bp, _ = _carry_half(example, up, Bp, steps, theta)
        Bm, _ = _carry_half(example, down, Bm, steps, theta)
    z_target = example.point_on_fibre(target, theta)
    corr = orbit_discrepancy_integral(example, z_target, Bm, steps)
    values = ((Bp[:, 0] - Bm[:, 0] + corr) / (2 * np.pi))[1:]
    ints = np.rint(values).astype(int)
    return CohomologyJump(values=values, integers=ints, snap_error=float(np.max(np.abs(values - ints), initial=0.0)))


def _carry_half(example, half, B, steps, theta):
    """Continue rows along a half circle whose interior lies on one side; endpoints are seam points."""
    sched = [(p, False) for p, _ in half.schedule()]
    side = "plus" if half.point(sched[len(sched) // 2][0])[0] > 0 else "minus"
    B1, _, _ = continue_lattice(example, half, B, steps, theta, side, path=sched)
    return B1, side
