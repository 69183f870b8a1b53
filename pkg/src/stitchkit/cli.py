"""Command line entry point: verification, conversion, construction, monodromy, rendering."""

import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources

import click
import numpy as np

from . import __version__, acceptance, amoeba, builder, flows, models
from .errors import FormatError, StitchError, UnknownName
from .invariants import (EllSequence, GermChange, SSequence, check_admissible, closedness_transfer,
                         dumps, ell_to_s, germ_act, integrality_check, loads, s_to_ell)
from .torus import classify

DEFAULT_TOLERANCES = {
    "invariance": 1e-10, "continuity": 1e-12, "gradient": 1e-6, "lagrangian": 1e-8, "energy": 1e-7,
    "discrepancy_residual": 1e-7, "discrepancy_match": 1e-6, "discrepancy_invariance": 1e-8,
    "bracket": 1e-7, "taylor": 1e-5, "snap": 1e-3,
}


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    output: str = ""
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    order: int = 0

    def __post_init__(self):
        bad = [k for k, v in self.tolerances.items() if not v > 0]
        if bad:
            raise click.UsageError(f"tolerances must be positive: {', '.join(bad)}")


def thread_limit():
    """Parallelism cap from STITCHKIT_THREADS (default 1)."""
    raw = os.environ.get("STITCHKIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise click.UsageError(f"STITCHKIT_THREADS must be an integer, got {raw!r}") from None


class Report:
    """Ordered CHECK lines with a provenance header; written once at the end."""

    def __init__(self, config):
        self.config = config
        self.checks = []
        self.lines = []

    def check(self, name, passed, metric):
        self.checks.append(bool(passed))
        self.lines.append(f"CHECK {name} {'PASS' if passed else 'FAIL'} {metric}")

    def note(self, text):
        self.lines.append(text)

    @property
    def passed(self):
        return all(self.checks)

    def text(self):
        head = [f"# stitchkit {__version__}",
                "# config " + json.dumps(asdict(self.config), sort_keys=True)]
        return "\n".join(head + self.lines) + "\n"

    def emit(self):
        body = self.text()
        click.echo(body, nl=False)
        if self.config.output:
            with open(self.config.output, "w") as fh:
                fh.write(body)
        sys.exit(0 if self.passed else 1)


def _tolerances(pairs):
    tol = dict(DEFAULT_TOLERANCES)
    for item in pairs:
        key, _, value = item.partition("=")
        if key not in tol:
            raise click.UsageError(f"unknown tolerance {key!r}")
        try:
            tol[key] = float(value)
        except ValueError:
            raise click.UsageError(f"bad tolerance value {item!r}") from None
    return tol


def _read_sequence(path, check=True):
    """A sequence file, or ``fixture:<name>`` for a shipped fixture."""
    if path.startswith("fixture:"):
        name = path.split(":", 1)[1].removesuffix(".json")
        try:
            text = resources.files("stitchkit.fixtures").joinpath(f"{name}.json").read_text()
        except FileNotFoundError:
            raise click.UsageError(f"no fixture named {name!r}") from None
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise click.UsageError(str(exc)) from None
    return loads(text, check=check)


def _write_text(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


# example checks

def _random_phase_points(example, count, rng, min_mu=0.05):
    out = []
    while len(out) < count:
        z = rng.normal(size=example.n) + 1j * rng.normal(size=example.n)
        if abs(models.moment_map(z)) > min_mu and example.in_domain(z):
            out.append(z)
    return np.array(out)


def example_checks(example, report, count=20, seed=0, dump=None):
    """Invariance, continuity, gradients, Lagrangian, energy and discrepancy checks."""
    tol = report.config.tolerances
    rng = np.random.default_rng(seed)
    pts = _random_phase_points(example, count, rng)
    seam = models.random_seam_points(example, count, rng)
    thetas = rng.uniform(0, 2 * np.pi, size=count)

    worst = max(float(np.max(np.abs(example(flows.circle_action(z, t)) - example(z))))
                for z, t in zip(np.concatenate([pts, seam]), np.concatenate([thetas, thetas])))
    report.check("invariance", worst <= tol["invariance"], f"max_err={worst:.3e}")

    worst = float(np.max(np.abs(example.evaluate_side(seam, "plus") - example.evaluate_side(seam, "minus"))))
    report.check("continuity", worst <= tol["continuity"], f"max_err={worst:.3e}")

    grad = lag = energy = 0.0
    for side in ("plus", "minus"):
        fs = example.fields(side)
        zs = pts[(models.moment_map(pts) > 0) == (side == "plus")]
        if not len(zs):
            continue
        for f in fs:
            grad = max(grad, float(np.max(np.abs(f.dbar(zs) - flows.fd_dbar(f.value, zs)))))
        V = fs.fields_at(zs)
        for i in range(example.n):
            for j in range(i + 1, example.n):
                lag = max(lag, float(np.max(np.abs(flows.symplectic_pairing(V[:, i], V[:, j])))))
        # flows from points with moderate fields, away from the singular fibres
        calm = zs[np.max(np.abs(V), axis=(1, 2)) < 3.0]
        for k in range(example.n if len(calm) else 0):
            w = np.zeros(example.n)
            w[k] = 0.5
            end, _ = flows.flow_combination(fs, w, calm, 200)
            drift = np.abs(example.evaluate_side(end, side) - example.evaluate_side(calm, side))
            energy = max(energy, float(np.max(drift)) / 0.5)
    report.check("gradient", grad <= tol["gradient"], f"max_err={grad:.3e}")
    report.check("lagrangian", lag <= tol["lagrangian"], f"max_pairing={lag:.3e}")
    report.check("energy", energy <= tol["energy"], f"max_drift_per_time={energy:.3e}")

    d = flows.discrepancy(example, seam)
    res = float(np.max(d.residual))
    report.check("discrepancy_residual", res <= tol["discrepancy_residual"], f"max_residual={res:.3e}")
    err = float(np.max(np.abs(d.a - example.closed_form_a(seam))))
    variant = example.metadata["default_variant"]
    report.check("discrepancy_match", err <= tol["discrepancy_match"], f"max_err={err:.3e} variant={variant}")
    for other in sorted(set(example.closed_forms) - {variant}):
        e = float(np.max(np.abs(d.a - example.closed_form_a(seam, other))))
        report.note(f"INFO closed_form_variant {other} max_err={e:.3e}")
    rot = flows.discrepancy(example, flows.circle_action(seam, thetas)).a
    err = float(np.max(np.abs(rot - d.a)))
    report.check("discrepancy_invariance", err <= tol["discrepancy_invariance"], f"max_err={err:.3e}")

    if example.name == "amoeba":
        b = np.c_[np.zeros(100), rng.uniform(-2, 2, size=(100, 2))]
        agree = example.in_discriminant(b) == amoeba.member_line(b[:, 1], b[:, 2])
        report.check("discriminant_vs_amoeba", bool(np.all(agree)), f"agree={int(agree.sum())}/100")

    if dump:
        _dump_trajectory(example, pts[0], dump)


def _dump_trajectory(example, z0, path, time=1.0, steps=100):
    side = "plus" if models.moment_map(z0) > 0 else "minus"
    fs = example.fields(side)
    w = np.zeros(example.n)
    w[-1] = time
    _, traj = flows.flow_combination(fs, w, z0, steps, keep=True)
    vals = example.evaluate_side(traj, side)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"{p}{k + 1}" for k in range(example.n) for p in ("re_z", "im_z")]
                    + [f"H{k + 1}" for k in range(example.n)])
    for i, (z, v) in enumerate(zip(traj, vals)):
        row = [i * time / steps] + [x for c in z for x in (c.real, c.imag)] + list(v)
        writer.writerow([f"{x:.17g}" for x in row])
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


# commands

@click.group()
@click.version_option(__version__, prog_name="stitchkit")
def main():
    """Invariants of stitched Lagrangian torus fibrations."""


@main.command()
@click.argument("example", required=False)
@click.option("--list", "list_", is_flag=True, help="List the example registry.")
@click.option("--seed", default=0, show_default=True)
@click.option("--points", default=20, show_default=True, help="Sample points per check.")
@click.option("--tol", multiple=True, help="Override a tolerance, e.g. --tol lagrangian=1e-9.")
@click.option("--dump-trajectory", type=click.Path(dir_okay=False), help="CSV of one eta_n trajectory.")
@click.option("--out", type=click.Path(dir_okay=False), default="", help="Also write the report here.")
def verify(example, list_, seed, points, tol, dump_trajectory, out):
    """Check an example fibration against its invariants and closed forms."""
    if list_:
        for name in models.names():
            ex = models.make(name)
            md = ex.metadata
            click.echo(f"{name} n={ex.n} seam_components={md['seam_components']} "
                       f"discriminant={md['discriminant']!r}")
        return
    if not example:
        raise click.UsageError("missing EXAMPLE (or use --list)")
    try:
        ex = models.make(example)
    except StitchError as exc:
        raise click.UsageError(str(exc)) from None
    config = RunConfig("verify", {"example": example, "points": points}, out or "", _tolerances(tol), seed)
    report = Report(config)
    example_checks(ex, report, points, seed, dump_trajectory)
    report.emit()


@main.group()
def seq():
    """Invariant sequence files."""


@seq.command("convert")
@click.argument("path")
@click.option("--dir", "direction", type=click.Choice(["ell2s", "s2ell"]), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default="")
def seq_convert(path, direction, out):
    """Convert l -> S or S -> l."""
    seqn = _read_sequence(path, check=False)
    if direction == "ell2s":
        if not isinstance(seqn, EllSequence):
            raise click.UsageError("ell2s expects an 'ell' file")
        seqn = EllSequence(seqn.n, seqn.terms)
        result = ell_to_s(seqn)
    else:
        if not isinstance(seqn, SSequence):
            raise click.UsageError("s2ell expects an 'S' file")
        result = s_to_ell(seqn)
    _write_text(dumps(result), out)


@seq.command("check")
@click.argument("path")
@click.option("--out", type=click.Path(dir_okay=False), default="")
def seq_check(path, out):
    """Closedness, admissibility, integrality and the closed-iff-admissible verdict."""
    seqn = _read_sequence(path, check=False)
    if isinstance(seqn, GermChange):
        raise click.UsageError("expected an 'ell' or 'S' file")
    report = Report(RunConfig("seq check", {"path": path}, out or "", order=seqn.order))
    if isinstance(seqn, EllSequence):
        ell, S = seqn, ell_to_s(seqn)
    else:
        ell, S = s_to_ell(seqn), seqn
    closed = [m for m, t in enumerate(ell.terms, start=1) if not classify(t).closed]
    report.check("closedness", not closed, f"non_closed_orders={closed or 'none'}")
    adm = check_admissible(S)
    first = adm.first_failure
    report.check("admissibility", adm.passed,
                 f"max_residual={adm.max_residual:.3e}" + (f" first_failure={first[:3]}" if first else ""))
    try:
        ms = integrality_check(ell)
        report.check("integrality", True, f"cycle_integrals={ms}")
    except StitchError as exc:
        report.check("integrality", False, f"reason={type(exc).__name__}")
    verdict = closedness_transfer(seqn)
    report.check("closed_iff_admissible", verdict.holds,
                 f"closed={verdict.ell_closed} admissible={verdict.s_admissible}")
    report.emit()


@seq.command("act")
@click.argument("path")
@click.option("--germ", "germ_path", required=True, help="Germ file.")
@click.option("--out", type=click.Path(dir_okay=False), default="")
def seq_act(path, germ_path, out):
    """Apply a germ of admissible base change to an 'ell' sequence."""
    ell = _read_sequence(path)
    germ = _read_sequence(germ_path)
    if not isinstance(ell, EllSequence) or not isinstance(germ, GermChange):
        raise click.UsageError("expected an 'ell' file and a 'germ' file")
    _write_text(dumps(germ_act(germ, ell)), out)


@main.command("build-u")
@click.option("--seq", "seq_path", required=True, help="'ell' sequence file or fixture:<name>.")
@click.option("--eps", default=builder.DEFAULT_EPS, show_default=True)
@click.option("--samples", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", multiple=True)
@click.option("--out", type=click.Path(dir_okay=False), default="")
def build_u(seq_path, eps, samples, seed, tol, out):
    """Build u from a sequence and certify brackets and Taylor coefficients."""
    ell = _read_sequence(seq_path)
    if not isinstance(ell, EllSequence):
        raise click.UsageError("build-u expects an 'ell' file")
    config = RunConfig("build-u", {"seq": seq_path, "eps": eps, "samples": samples}, out or "",
                       _tolerances(tol), seed, ell.order)
    report = Report(config)
    fib = builder.build(ell, eps=eps, seed=seed)
    lag = builder.verify_lagrangian(fib, samples=samples, seed=seed)
    taylor = builder.taylor_error(fib, count=10, seed=seed)
    rows = [("certified_eps", f"{fib.eps:.6g}"), ("box", json.dumps(fib.box.tolist())),
            ("max_bracket", f"{lag.max_bracket:.3e}"), ("taylor_error", f"{taylor:.3e}")]
    report.note("key,value")
    for k, v in rows:
        report.note(f"{k},{v}")
    report.check("brackets", lag.max_bracket <= config.tolerances["bracket"], f"max_bracket={lag.max_bracket:.3e}")
    report.check("taylor_match", taylor <= config.tolerances["taylor"], f"max_err={taylor:.3e}")
    report.emit()


DEFAULT_LOOPS = {
    "focus_focus": "0,0;1,0;0,1;0.5",
    "amoeba": "0,0,-2;0,-1,0;1,0,0;2",
    "leg": "0,0,0;1,0,0;0,0,1;0.5",
}


def parse_loop(text):
    """``center;u;v;radius`` with comma separated vectors."""
    try:
        c, u, v, r = text.split(";")
        vec = [tuple(float(x) for x in part.split(",")) for part in (c, u, v)]
        radius = float(r)
    except ValueError:
        raise click.UsageError(f"bad loop spec {text!r}; expected 'center;u;v;radius'") from None
    if len({len(x) for x in vec}) != 1 or radius <= 0:
        raise click.UsageError("loop vectors must share a dimension and the radius must be positive")
    return flows.LoopSpec(vec[0], vec[1], vec[2], radius)


@main.command("monodromy")
@click.argument("example")
@click.option("--loop", "loop_text", default=None, help="center;u;v;radius in base coordinates.")
@click.option("--steps", default=64, show_default=True)
@click.option("--tol", multiple=True)
@click.option("--out", type=click.Path(dir_okay=False), default="")
def monodromy_cmd(example, loop_text, steps, tol, out):
    """Integer monodromy of the fibre homology around a base loop."""
    try:
        ex = models.make(example)
    except StitchError as exc:
        raise click.UsageError(str(exc)) from None
    loop_text = loop_text or DEFAULT_LOOPS[example]
    loop = parse_loop(loop_text)
    if len(loop.center) != ex.n:
        raise click.UsageError(f"{example} has a {ex.n}-dimensional base")
    config = RunConfig("monodromy", {"example": example, "loop": loop_text, "steps": steps}, out or "",
                       _tolerances(tol))
    report = Report(config)
    res = flows.monodromy(ex, loop, steps=steps)
    report.note("matrix " + acceptance._matrix_text(res.matrix))
    M = res.matrix
    report.check("snap", res.snap_error <= config.tolerances["snap"], f"snap_err={res.snap_error:.3e}")
    det = int(round(np.linalg.det(M)))
    report.check("unimodular", abs(det) == 1, f"det={det}")
    report.check("fixes_orbit_class", bool(M[0, 0] == 1 and not np.any(M[1:, 0])), f"first_column={M[:, 0].tolist()}")
    if example == "focus_focus":
        report.check("conjugate_to_unipotent", flows.is_unipotent_conjugate(M), f"trace={int(np.trace(M))}")
    report.emit()


@main.group("amoeba")
def amoeba_group():
    """Amoebas of plane curves."""


@amoeba_group.command("render")
@click.option("--poly", default="line", show_default=True, help="'line' or 'i,j,c;i,j,c;...'.")
@click.option("--bounds", default="-4,4,-4,4", show_default=True, help="smin,smax,tmin,tmax")
@click.option("--res", default="400", show_default=True, help="N or NX,NY")
@click.option("--method", type=click.Choice(["exact", "sampled"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="PPM output path.")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Optional SVG outline.")
def amoeba_render(poly, bounds, res, method, out, svg):
    """Rasterize an amoeba and count complement components."""
    try:
        b = tuple(float(x) for x in bounds.split(","))
        r = tuple(int(x) for x in res.split(","))
        spec = amoeba.AmoebaSpec.parse(poly, b, r if len(r) == 2 else r[0])
        raster = amoeba.render(spec, method, threads=thread_limit())
    except (ValueError, amoeba.InvalidSpec) as exc:
        raise click.UsageError(str(exc)) from None
    raster.save(out, svg)
    click.echo(f"components={raster.complement_components}")


@main.command()
@click.option("--select", default="", help="Comma separated criterion numbers (default all).")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="")
def report(select, seed, out):
    """Run the acceptance suite."""
    try:
        chosen = {int(x) for x in select.split(",") if x.strip()}
    except ValueError:
        raise click.UsageError(f"bad --select {select!r}") from None
    if chosen - {fn.number for fn in acceptance.CRITERIA}:
        raise click.UsageError(f"unknown criteria {sorted(chosen)}")
    rep = Report(RunConfig("report", {"select": sorted(chosen)}, out or "", seed=seed))
    for res in acceptance.run_all(seed, chosen or None):
        rep.checks.append(res.passed)
        rep.lines.append(res.line())
    rep.emit()


def run(argv=None):
    """Run the CLI and return the exit code (0 pass, 1 failed check, 2 usage or input error)."""
    try:
        main.main(args=argv, prog_name="stitchkit", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.exceptions.Abort:
        return 2
    except (FormatError, UnknownName, amoeba.InvalidSpec) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return 2
    except StitchError as exc:
        # a computation that could not be carried out counts as a failed check
        click.echo(f"CHECK computation FAIL {type(exc).__name__}: {exc}")
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


def entry():
    sys.exit(run())


if __name__ == "__main__":
    entry()
