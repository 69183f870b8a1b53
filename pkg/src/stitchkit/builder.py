"""Numerical fibrations realising a truncated invariant sequence.

Phase points of T*U are stored as arrays ``(..., 2n)``: first the base
coordinates b'_1..b'_n, then the angles y'_1..y'_n (period 1).  The fibration
is u_1 = b'_1 and u_j(b', y') = b_j for j >= 2, where b solves

    b_j + sum_k a_jk(b, y') r^k = b'_j,   r = b'_1.

The Hamiltonian field of H is  y' dot = dH/db',  b' dot = -dH/dy'.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainTooLarge, FlowDivergence, NewtonDivergence, NotClosed
from .invariants import EllSequence, ell_to_s
from .torus import LSection, classify, fibrewise_d

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
DEFAULT_EPS = 0.1
MAX_HALVINGS = 12


@dataclass(frozen=True)
class GluePoint:
    """Base point b in the seam (b_2..b_n) and angles t_1, (t_2..t_n), reduced mod 1."""

    b: tuple
    t1: float
    t: tuple

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        object.__setattr__(self, "t1", float(self.t1) % 1.0)
        object.__setattr__(self, "t", tuple(float(v) % 1.0 for v in self.t))

    def as_array(self):
        return np.array(self.b + (self.t1,) + self.t)


class BuiltFibration:
    """The map u attached to ``ell`` on the box |b'_1| <= eps, b'_j in ``box``."""

    def __init__(self, ell, eps=DEFAULT_EPS, box=None, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        self.ell = ell
        self.n = ell.n
        self.eps = float(eps)
        d = self.n - 1
        self.box = np.array(box if box is not None else [(-1.0, 1.0)] * d, dtype=float).reshape(d, 2)
        self.tol = tol
        self.max_iter = max_iter
        self._a = [[ell[k][j] for j in range(2, self.n + 1)] for k in range(1, ell.order + 1)]
        self._da = [[[f.d_base(i) for i in range(2, self.n + 1)] for f in row] for row in self._a]
        self._dy = [[[f.d_angle(i) for i in range(2, self.n + 1)] for f in row] for row in self._a]

    def __repr__(self):
        return f"BuiltFibration(n={self.n}, order={self.ell.order}, eps={self.eps})"

    # pieces of the defining system

    def _series(self, funcs, b, y, r, weights):
        """sum_k weights(k, r) funcs[k](b, y) for nested component lists."""
        out = None
        for k, row in enumerate(funcs, start=1):
            w = weights(k, r)
            val = _eval_nested(row, b, y) * w.reshape(w.shape + (1,) * (_depth(row)))
            out = val if out is None else out + val
        return out

    def a_of(self, r, b, y):
        """a_j(r, b, y) for j = 2..n, shape (..., n-1)."""
        r = np.asarray(r, dtype=float)
        if not self._a:
            return np.zeros(np.broadcast_shapes(b.shape, y.shape))
        return self._series(self._a, b, y, r, lambda k, r: r ** k)

    def _jac_b(self, r, b, y):
        eye = np.eye(self.n - 1)
        if not self._a:
            return np.broadcast_to(eye, np.broadcast_shapes(b.shape, y.shape)[:-1] + eye.shape)
        return eye + self._series(self._da, b, y, r, lambda k, r: r ** k)

    def _jac_y(self, r, b, y):
        if not self._a:
            return np.zeros(np.broadcast_shapes(b.shape, y.shape)[:-1] + (self.n - 1, self.n - 1))
        return self._series(self._dy, b, y, r, lambda k, r: r ** k)

    def _d_r(self, r, b, y):
        if not self._a:
            return np.zeros(np.broadcast_shapes(b.shape, y.shape))
        return self._series(self._a, b, y, r, lambda k, r: k * r ** (k - 1))

    def solve(self, bp, yp):
        """Solve the defining system; ``bp`` has shape (..., n), ``yp`` shape (..., n-1)."""
        bp = np.asarray(bp, dtype=float)
        yp = np.asarray(yp, dtype=float)
        r = bp[..., 0]
        target = bp[..., 1:]
        b = target.copy()
        for _ in range(self.max_iter):
            res = b + self.a_of(r, b, yp) - target
            err = np.max(np.abs(res), initial=0.0)
            if not np.isfinite(err):
                break
            if err <= self.tol:
                # one extra step polishes to roundoff
                b = b - np.linalg.solve(self._jac_b(r, b, yp), res[..., None])[..., 0]
                return b
            step = np.linalg.solve(self._jac_b(r, b, yp), res[..., None])[..., 0]
            lam = 1.0
            base = np.linalg.norm(res, axis=-1)
            while True:
                trial = b - lam * step
                new = np.linalg.norm(trial + self.a_of(r, trial, yp) - target, axis=-1)
                if np.all(new <= (1 - 0.5 * lam) * base + self.tol) or lam < 1e-4:
                    break
                lam *= 0.5
            b = trial
        bad = np.argmax(np.max(np.abs(b + self.a_of(r, b, yp) - target), axis=-1)) if b.ndim > 1 else None
        point = (bp.reshape(-1, self.n)[bad], yp.reshape(-1, self.n - 1)[bad]) if bad is not None else (bp, yp)
        raise NewtonDivergence("Newton iteration did not converge", point=point)

    def u(self, z):
        """Values (u_1..u_n) at phase points ``z`` of shape (..., 2n)."""
        z = np.asarray(z, dtype=float)
        n = self.n
        b = self.solve(z[..., :n], z[..., n + 1:])
        return np.concatenate([z[..., :1], b], axis=-1)

    def gradients(self, z):
        """Return (u, G) with G[..., j, :] the gradient of u_{j+1} in (b', y'), by implicit differentiation."""
        z = np.asarray(z, dtype=float)
        n = self.n
        r, yp = z[..., 0], z[..., n + 1:]
        b = self.solve(z[..., :n], yp)
        minv = np.linalg.inv(self._jac_b(r, b, yp))
        db_dbp = minv
        db_dy = -minv @ self._jac_y(r, b, yp)
        db_dr = -(minv @ self._d_r(r, b, yp)[..., None])[..., 0]
        shape = z.shape[:-1]
        G = np.zeros(shape + (n, 2 * n))
        G[..., 0, 0] = 1.0
        G[..., 1:, 0] = db_dr
        G[..., 1:, 1:n] = db_dbp
        G[..., 1:, n + 1:] = db_dy
        return np.concatenate([r[..., None], b], axis=-1), G

    def field(self, z, weights):
        """Hamiltonian field of sum_k weights[k] u_k at ``z``."""
        _, G = self.gradients(z)
        n = self.n
        weights = np.asarray(weights, dtype=float)
        dH = np.einsum("...k,...kc->...c", np.broadcast_to(weights, G.shape[:-1]), G)
        return np.concatenate([-dH[..., n:], dH[..., :n]], axis=-1)

    def section(self, b):
        """Lagrangian section: the point with y' = 0 on the fibre u = b (b of shape (..., n))."""
        b = np.asarray(b, dtype=float)
        zero = np.zeros(b.shape[:-1] + (self.n - 1,))
        bp = b[..., 1:] + self.a_of(b[..., 0], b[..., 1:], zero)
        return np.concatenate([b[..., :1], bp, np.zeros(b.shape[:-1] + (self.n,))], axis=-1)

    def flow(self, z, weights, time=1.0, steps=64):
        """RK4 flow of sum_k weights[k] u_k for ``time``; angles are not reduced."""
        z = np.array(z, dtype=float)
        h = time / steps
        for _ in range(steps):
            k1 = self.field(z, weights)
            k2 = self.field(z + 0.5 * h * k1, weights)
            k3 = self.field(z + 0.5 * h * k2, weights)
            k4 = self.field(z + h * k3, weights)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(z)):
                raise FlowDivergence("flow left the finite region")
        return z


def _depth(row):
    return 1 if not isinstance(row[0], list) else 2


def _eval_nested(row, b, y):
    if isinstance(row[0], list):
        return np.stack([np.stack([f.evaluate(b, y) for f in sub], axis=-1) for sub in row], axis=-2)
    return np.stack([f.evaluate(b, y) for f in row], axis=-1)


def _probe_points(fib, rng, count=64):
    d = fib.n - 1
    r = rng.uniform(-fib.eps, fib.eps, size=count)
    lo, hi = fib.box[:, 0], fib.box[:, 1]
    b = lo + (hi - lo) * rng.uniform(size=(count, d))
    y = rng.uniform(size=(count, d))
    return np.concatenate([r[:, None], b], axis=1), y


def build(ell, eps=DEFAULT_EPS, box=None, seed=0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Build u for ``ell``, halving eps until Newton converges and the Jacobian stays invertible."""
    if not isinstance(ell, EllSequence):
        raise TypeError("expected an EllSequence")
    for m, t in enumerate(ell.terms, start=1):
        if not classify(t).closed:
            raise NotClosed(f"l_{m} is not fibrewise closed")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_HALVINGS):
        fib = BuiltFibration(ell, eps=eps, box=box, tol=tol, max_iter=max_iter)
        bp, yp = _probe_points(fib, rng)
        corners = np.array([[s * eps] for s in (-1.0, 1.0)])
        try:
            b = fib.solve(bp, yp)
            for c in corners:
                fib.solve(np.concatenate([np.full((len(bp), 1), c[0]), bp[:, 1:]], axis=1), yp)
            sv = np.linalg.svd(fib._jac_b(bp[:, 0], b, yp), compute_uv=False)
            if np.min(sv) > 0.25:
                return fib
        except NewtonDivergence:
            pass
        eps *= 0.5
    raise DomainTooLarge(f"no certified box found down to eps={eps}")


def _brackets_from_gradients(G, n):
    """Canonical brackets {u_i, u_j} = sum_k d_y u_i d_b u_j - d_b u_i d_y u_j."""
    gb, gy = G[..., :n], G[..., n:]
    return np.einsum("...ik,...jk->...ij", gy, gb) - np.einsum("...ik,...jk->...ij", gb, gy)


@dataclass
class LagrangianReport:
    max_bracket: float
    samples: int
    step: float
    worst_point: object = None

    @property
    def passed(self):
        return self.max_bracket <= 1e-7


def fd_gradients(fib, z, step=1e-5):
    """Central finite-difference gradients of u at phase points ``z`` (shape (P, 2n))."""
    z = np.asarray(z, dtype=float)
    n = fib.n
    G = np.zeros(z.shape[:-1] + (n, 2 * n))
    for c in range(2 * n):
        e = np.zeros(2 * n)
        e[c] = step
        G[..., c] = (fib.u(z + e) - fib.u(z - e)) / (2 * step)
    return G


def sample_points(fib, count, seed=0):
    rng = np.random.default_rng(seed)
    n = fib.n
    bp, yp = _probe_points(fib, rng, count)
    bp[:, 0] *= 0.9
    y1 = rng.uniform(size=(count, 1))
    return np.concatenate([bp, y1, yp], axis=1)


def verify_lagrangian(fib, samples=100, step=1e-5, seed=0):
    """Largest canonical bracket among the u_j at sample points, from central differences."""
    z = samples if isinstance(samples, np.ndarray) else sample_points(fib, samples, seed)
    G = fd_gradients(fib, z, step)
    br = np.abs(_brackets_from_gradients(G, fib.n))
    flat = br.reshape(len(z), -1).max(axis=1)
    worst = int(np.argmax(flat))
    return LagrangianReport(max_bracket=float(flat[worst]), samples=len(z), step=step, worst_point=z[worst])


def taylor_coefficients(fib, b, y, order, width=0.03, nodes=8):
    """b_1-Taylor coefficients 1..order of u_2..u_n at (b, y), from a one-sided polynomial fit.

    The fit uses Chebyshev nodes on [0, width]; returns an array of shape (order, n-1).
    """
    b = np.asarray(b, dtype=float)
    y = np.asarray(y, dtype=float)
    t = width * (1.0 - np.cos(np.pi * np.arange(nodes + 1) / nodes)) / 2.0
    d = fib.n - 1
    bp = np.concatenate([t[:, None], np.broadcast_to(b, (len(t), d))], axis=1)
    vals = fib.solve(bp, np.broadcast_to(y, (len(t), d)))
    out = np.empty((order, d))
    for col in range(d):
        cheb = np.polynomial.Chebyshev.fit(t, vals[:, col], nodes, domain=[0.0, width])
        power = cheb.convert(kind=np.polynomial.Polynomial, domain=[-1.0, 1.0], window=[-1.0, 1.0]).coef
        power = np.pad(power, (0, max(0, order + 1 - len(power))))
        out[:, col] = power[1:order + 1]
    return out


def taylor_error(fib, count=20, seed=0, **kw):
    """Largest mismatch between fitted Taylor coefficients of u and ell_to_s(ell)."""
    S = ell_to_s(fib.ell)
    rng = np.random.default_rng(seed)
    d = fib.n - 1
    lo, hi = fib.box[:, 0], fib.box[:, 1]
    worst = 0.0
    for _ in range(count):
        b = lo + (hi - lo) * rng.uniform(size=d) * 0.9
        y = rng.uniform(size=d)
        fit = taylor_coefficients(fib, b, y, S.order, **kw)
        exact = np.array([[S[m][j].evaluate(b, y) for j in range(2, fib.n + 1)] for m in range(1, S.order + 1)])
        worst = max(worst, float(np.max(np.abs(fit - exact))))
    return worst


# gluing maps

def _composite(integrand, a, b, nodes=32, tol=1e-11, max_panels=1 << 12):
    """Composite Gauss-Legendre of ``integrand`` over [a, b], doubling panels until stable."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = 0.5 * (x + 1.0), 0.5 * w

    def rule(panels):
        edges = np.linspace(a, b, panels + 1)
        width = np.diff(edges)
        pts = (edges[:-1, None] + width[:, None] * x[None, :]).ravel()
        wts = (width[:, None] * w[None, :]).ravel()
        return float(np.sum(integrand(pts) * wts))

    panels = max(1, int(np.ceil(abs(b - a))))
    prev = rule(panels)
    while panels < max_panels:
        panels *= 2
        cur = rule(panels)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return prev


def line_integral(ell1, b, t, path="straight"):
    """Integral of the closed section ``ell1`` over a path from 0 to ``t`` in the fibre over ``b``."""
    b = np.asarray(b, dtype=float)
    t = np.asarray(t, dtype=float)
    d = ell1.n - 1
    if path == "straight":
        def integrand(s):
            y = s[:, None] * t[None, :]
            vals = ell1.evaluate(np.broadcast_to(b, y.shape), y)
            return vals @ t
        return _composite(integrand, 0.0, 1.0)
    if path == "axis":
        total = 0.0
        for j in range(d):
            if t[j] == 0.0:
                continue

            def integrand(s, j=j):
                y = np.zeros((len(s), d))
                y[:, :j] = t[:j]
                y[:, j] = s
                return ell1[j + 2].evaluate(np.broadcast_to(b, y.shape), y)
            total += _composite(integrand, 0.0, float(t[j]))
        return total
    raise ValueError(f"unknown path {path!r}")


def glue_Q(ell1, p, path="straight"):
    """Q(b, t_1, t) = (b, t_1 - int_0^t ell1, t), angles mod 1."""
    if isinstance(ell1, EllSequence):
        ell1 = ell1[1]
    if not isinstance(ell1, LSection):
        raise TypeError("expected an LSection")
    if not fibrewise_d(ell1).is_zero():
        raise NotClosed("glue_Q needs a fibrewise closed section")
    shift = line_integral(ell1, p.b, p.t, path)
    return GluePoint(p.b, p.t1 - shift, p.t)


def glue_Q_tilde(fib, p, b1=0.0, steps=64, reduce=True):
    """Compose the flows of u_n, ..., u_2 and then u_1 from the section over (b1, b).

    ``p`` is a GluePoint or a list of them (flowed together).  Returns phase
    points (b', y') with angles reduced mod 1 when ``reduce``.
    """
    n = fib.n
    single = isinstance(p, GluePoint)
    pts = [p] if single else list(p)
    base = np.array([(b1,) + q.b for q in pts])
    times = np.array([(q.t1,) + q.t for q in pts])
    z = fib.section(base)
    for k in range(n - 1, -1, -1):
        if not np.any(times[:, k]):
            continue
        w = np.zeros_like(times)
        w[:, k] = times[:, k]
        z = fib.flow(z, w, 1.0, steps)
    if reduce:
        z[:, n:] = np.mod(z[:, n:], 1.0)
    return z[0] if single else z


def glue_point_to_phase(p):
    """Seam phase point (b' = (0, b), y' = (t_1, t)) of a GluePoint."""
    return np.array((0.0,) + p.b + (p.t1,) + p.t)


def angle_distance(z, w, n):
    """Max-norm distance of phase points with angles compared mod 1."""
    db = np.max(np.abs(z[..., :n] - w[..., :n]))
    dy = np.mod(z[..., n:] - w[..., n:] + 0.5, 1.0) - 0.5
    return float(max(db, np.max(np.abs(dy))))


# period lattice

@dataclass
class PeriodLattice:
    rows: np.ndarray
    residual: float
    base: tuple = field(default=())


def _return_map(fib, z0, T, steps):
    """Lifted displacement of the time-1 flow of sum T_k u_k, plus the Jacobian in T."""
    n = fib.n
    z = fib.flow(z0, T, 1.0, steps)
    _, G = fib.gradients(z)
    # y' components of the field of u_k are the b' derivatives of u_k
    jac = G[:, :n].T
    return z, z[n:] - z0[n:], z[:n] - z0[:n], jac


def period_lattice(fib, b, steps=64, tol=1e-10, max_iter=30):
    """Return times T (rows) for the unit lattice vectors, by Newton from the flat guess."""
    from .errors import ReturnSearchFailed

    n = fib.n
    z0 = fib.section(np.asarray(b, dtype=float))
    rows = []
    worst = 0.0
    for j in range(n):
        target = np.zeros(n)
        target[j] = 1.0
        T = target.copy()
        for _ in range(max_iter):
            _, disp, bdisp, jac = _return_map(fib, z0, T, steps)
            res = disp - target
            err = float(np.max(np.abs(res)))
            if err < tol:
                break
            T = T - np.linalg.solve(jac, res)
        else:
            raise ReturnSearchFailed(f"no return time found for lattice direction {j + 1}")
        worst = max(worst, err, float(np.max(np.abs(bdisp))))
        rows.append(T)
    return PeriodLattice(rows=np.array(rows), residual=worst, base=tuple(np.asarray(b, dtype=float)))
