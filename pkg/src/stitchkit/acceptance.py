"""The acceptance suite: one function per criterion, each returning a CriterionResult."""

import time
from dataclasses import dataclass

import numpy as np

from . import amoeba, builder, flows, generators, models, oracles
from .invariants import EllSequence, check_admissible, ell_to_s, s_to_ell
from .torus import (LSection, TorusFunction, cycle_integral, equal_after_pruning, fibrewise_d,
                    poisson, section_distance)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metric: str
    seconds: float = 0.0

    def line(self):
        return f"CHECK {self.number:02d}_{self.name} {'PASS' if self.passed else 'FAIL'} {self.metric}"


def _timed(number, name):
    def wrap(fn):
        def run(seed=0):
            t0 = time.perf_counter()
            passed, metric = fn(seed)
            return CriterionResult(number, name, bool(passed), metric, time.perf_counter() - t0)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.number = number
        run.criterion = name
        return run
    return wrap


@_timed(1, "recursion_exactness")
def recursion_exactness(seed=0):
    """Round trip s_to_ell(ell_to_s(l)) on 50 closed sequences, plus exact admissibility."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst, admissible = 0.0, True
    for k in range(50):
        n = 2 + k % 2
        order = 5 if n == 2 else 4
        ell = generators.random_closed_ell(rng, n, order, max_modes=3, max_degree=2)
        S = ell_to_s(ell)
        admissible &= check_admissible(S).passed
        worst = max(worst, section_distance(s_to_ell(S), ell))
    elapsed = time.perf_counter() - t0
    return worst <= 1e-12 and admissible and elapsed <= 30, \
        f"max_err={worst:.3e} admissible={admissible} within_time={elapsed <= 30}"


def _second_order_prediction(S, j):
    out = -S[2][j]
    for k in range(2, S.n + 1):
        out = out + S[1][j].d_base(k) * S[1][k]
    return out


def _unit_fixtures():
    """Small sequences built from unit monomials and unit Fourier pairs."""
    fx = []
    y2 = TorusFunction.cos(2, (1,), 1.0, alpha=(1,))
    fx.append(ell_to_s(_ell(2, [[y2], [TorusFunction.base(2, 2)]])))
    b2, b3 = TorusFunction.base(3, 2), TorusFunction.base(3, 3)
    fx.append(ell_to_s(_ell(3, [[b3, b2], [b2 * b3, TorusFunction.constant(3, 1.0)]])))
    return fx


def _ell(n, rows):
    return EllSequence(n, [LSection(n, r) for r in rows])


@_timed(2, "low_order_formulas")
def low_order_formulas(seed=0):
    """First- and second-order coefficients against their closed expressions."""
    rng = np.random.default_rng(seed)
    cases = _unit_fixtures() + [ell_to_s(generators.random_closed_ell(rng, 2 + k % 2, 2)) for k in range(10)]
    ok, count = True, 0
    for S in cases:
        a = s_to_ell(S)
        for j in range(2, S.n + 1):
            ok &= equal_after_pruning(a[1][j], -S[1][j])
            ok &= equal_after_pruning(a[2][j], _second_order_prediction(S, j))
            count += 1
    return ok, f"exact={ok} components={count}"


@_timed(3, "oracle_equivalence")
def oracle_equivalence(seed=0):
    """Multi-index recursion against order-by-order series inversion."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(20):
        ell = generators.random_closed_ell(rng, 2 + k % 2, 4)
        S = ell_to_s(ell)
        worst = max(worst, section_distance(s_to_ell(S), oracles.series_inversion(S, 4)))
    return worst <= 1e-12, f"max_err={worst:.3e}"


@_timed(4, "builder_commutation")
def builder_commutation(seed=0):
    """Brackets of the built u and its Taylor coefficients."""
    rng = np.random.default_rng(seed)
    worst_bracket, worst_taylor = 0.0, 0.0
    for k in range(10):
        ell = generators.random_closed_ell(rng, 2 + k % 2, 1 + k % 3, max_modes=2, max_degree=1, scale=0.25)
        fib = builder.build(ell, seed=seed + k)
        worst_bracket = max(worst_bracket, builder.verify_lagrangian(fib, samples=100, seed=seed + k).max_bracket)
        worst_taylor = max(worst_taylor, builder.taylor_error(fib, count=10, seed=seed + k))
    return worst_bracket <= 1e-7 and worst_taylor <= 1e-5, \
        f"max_bracket={worst_bracket:.3e} max_taylor_err={worst_taylor:.3e}"


def _glue_points(rng, fib, count):
    d = fib.n - 1
    lo, hi = fib.box[:, 0], fib.box[:, 1]
    pts = []
    for _ in range(count):
        b = lo + (hi - lo) * rng.uniform(size=d) * 0.9
        pts.append(builder.GluePoint(tuple(b), float(rng.uniform()), tuple(rng.uniform(size=d))))
    return pts


@_timed(5, "gluing_consistency")
def gluing_consistency(seed=0):
    """Flow-built gluing against the line-integral formula, and the integral offset."""
    rng = np.random.default_rng(seed)
    ell = generators.random_closed_ell(rng, 2, 2, max_modes=2, max_degree=1, scale=0.25)
    fib = builder.build(ell, seed=seed)
    pts = _glue_points(rng, fib, 50)
    flowed = builder.glue_Q_tilde(fib, pts)
    worst = 0.0
    for p, z in zip(pts, flowed):
        q = builder.glue_point_to_phase(builder.glue_Q(ell, p))
        worst = max(worst, builder.angle_distance(z, q, fib.n))
    offset_err = 0.0
    for m in (1, 2, -3):
        ell1 = LSection(2, [TorusFunction.constant(2, float(m))])
        for p in pts[:10]:
            shift = builder.line_integral(ell1, p.b, p.t)
            offset_err = max(offset_err, abs(-shift + m * p.t[0]))
    return worst <= 1e-6 and offset_err <= 1e-10, f"max_err={worst:.3e} offset_err={offset_err:.3e}"


@_timed(6, "example_discrepancies")
def example_discrepancies(seed=0):
    """Numeric discrepancy coefficients against the closed forms, with residuals."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst_res, worst_err, printed_err = 0.0, 0.0, 0.0
    for name in ("focus_focus", "amoeba"):
        ex = models.make(name)
        for z in models.random_seam_points(ex, 20, rng):
            d = flows.discrepancy(ex, z)
            worst_res = max(worst_res, float(np.max(np.abs(d.residual))))
            worst_err = max(worst_err, float(np.max(np.abs(d.a - ex.closed_form_a(z)))))
            if name == "focus_focus":
                printed_err = max(printed_err, float(np.max(np.abs(d.a - ex.closed_form_a(z, "printed")))))
    elapsed = time.perf_counter() - t0
    return worst_res <= 1e-7 and worst_err <= 1e-6 and elapsed <= 60, \
        f"max_residual={worst_res:.3e} max_err={worst_err:.3e} printed_ff_err={printed_err:.3e} within_time={elapsed <= 60}"


FOCUS_FOCUS_LOOP = flows.LoopSpec((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), 0.5)
AMOEBA_LOOPS = (
    flows.LoopSpec((0.0, 0.0, -2.0), (0.0, -1.0, 0.0), (1.0, 0.0, 0.0), 2.0),
    flows.LoopSpec((0.0, -2.0, 0.0), (0.0, 0.0, -1.0), (1.0, 0.0, 0.0), 2.0),
)


@_timed(7, "monodromy")
def monodromy(seed=0):
    """Integer monodromy around the focus-focus point and two amoeba legs."""
    res = flows.monodromy(models.make("focus_focus"), FOCUS_FOCUS_LOOP)
    ok = flows.is_unipotent_conjugate(res.matrix)
    errs = [res.snap_error]
    mats = [res.matrix]
    ex = models.make("amoeba")
    psis = []
    for loop in AMOEBA_LOOPS:
        r = flows.monodromy(ex, loop)
        errs.append(r.snap_error)
        mats.append(r.matrix)
        psis.append(flows.transvection_form(r.matrix))
    # each leg gives I + e_1 psi with psi a unit vector on one of the two cycles
    ok &= all(p is not None and sorted(np.abs(p[1:]).tolist()) == [0, 1] for p in psis)
    ok &= psis[0] is not None and psis[1] is not None and not np.array_equal(np.abs(psis[0]), np.abs(psis[1]))
    err = max(errs)
    text = " ".join(_matrix_text(m) for m in mats)
    return ok and err <= 1e-3, f"snap_err={err:.3e} matrices={text}"


def _matrix_text(M):
    return "[" + ";".join(",".join(str(int(v)) for v in row) for row in M) + "]"


@_timed(8, "cohomology_jump")
def cohomology_jump(seed=0):
    """Jumps of the first return time across the three amoeba seam components."""
    ex = models.make("amoeba")
    pts = ex.metadata["seam_points"]
    jumps = {k: flows.cohomology_jump(ex, pts["c"], pts[k]) for k in ("c", "d", "e")}
    err = max(j.snap_error for j in jumps.values())
    pattern = {k: tuple(int(v) for v in j.integers) for k, j in jumps.items()}
    ok = pattern["c"] == (0, 0)
    ok &= [abs(v) for v in pattern["d"]] == [1, 0]
    ok &= [abs(v) for v in pattern["e"]] == [0, 1]
    text = " ".join(f"{k}=({v[0]},{v[1]})" for k, v in pattern.items())
    return ok and err <= 1e-3, f"snap_err={err:.3e} {text}"


@_timed(9, "amoeba_figure")
def amoeba_figure(seed=0):
    """Complement components of the line amoeba and sampled-vs-exact agreement."""
    spec = amoeba.AmoebaSpec.line((-4.0, 4.0, -4.0, 4.0), (400, 400))
    comps = amoeba.render(spec).complement_components
    outside_band, differ = amoeba.disagreement_outside_band(spec, width=2)
    return comps == 3 and outside_band == 0, \
        f"components={comps} disagree_outside_band={outside_band} disagree_total={differ}"


def _small_function(rng, n):
    return generators.random_function(rng, n, max_modes=2, max_mode=1, max_degree=1)


@_timed(10, "algebra_properties")
def algebra_properties(seed=0, cases=1000):
    """Leibniz, Jacobi, antisymmetry, d of a gradient, gauge invariance of cycle integrals."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    fails = {"leibniz": 0, "jacobi": 0, "antisymmetry": 0, "dd": 0, "gauge": 0}
    for k in range(cases):
        n = 2 + k % 2
        f, g, h = (_small_function(rng, n) for _ in range(3))
        fg, gh, hf = poisson(f, g), poisson(g, h), poisson(h, f)
        fails["antisymmetry"] += not equal_after_pruning(fg, -poisson(g, f))
        fails["leibniz"] += not equal_after_pruning(poisson(f, g * h), fg * h + g * poisson(f, h))
        fails["jacobi"] += not (poisson(f, gh) + poisson(g, hf) + poisson(h, fg)).is_zero()
        fails["dd"] += not fibrewise_d(LSection.gradient(f)).is_zero()
        ell = generators.random_closed_section(rng, n, max_modes=2, max_degree=1)
        shifted = ell + LSection.gradient(g)
        fails["gauge"] += not all(equal_after_pruning(cycle_integral(ell, j), cycle_integral(shifted, j))
                                  for j in range(2, n + 1))
    elapsed = time.perf_counter() - t0
    total = sum(fails.values())
    text = " ".join(f"{k}={v}" for k, v in fails.items())
    return total == 0 and elapsed <= 10, f"cases={cases} failures:{text} within_time={elapsed <= 10}"


CRITERIA = (recursion_exactness, low_order_formulas, oracle_equivalence, builder_commutation,
            gluing_consistency, example_discrepancies, monodromy, cohomology_jump, amoeba_figure,
            algebra_properties)


def run_all(seed=0, select=None):
    """Run the selected criteria (all by default) in order."""
    out = []
    for fn in CRITERIA:
        if select and fn.number not in select:
            continue
        out.append(fn(seed))
    return out
