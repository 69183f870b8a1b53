"""Log-images of plane curves: membership tests, rasters, component counts."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import StitchError

MEMBER, OUTSIDE, UNKNOWN = 1, 0, -1

_COLORS = {MEMBER: (32, 32, 32), OUTSIDE: (255, 255, 255), UNKNOWN: (160, 160, 160)}


class InvalidSpec(StitchError, ValueError):
    pass


class IoError(StitchError, OSError):
    pass


@dataclass(frozen=True)
class AmoebaSpec:
    """Polynomial sum c * v1**i * v2**j as ``terms = ((i, j, c), ...)`` on a log grid."""

    terms: tuple
    bounds: tuple = (-4.0, 4.0, -4.0, 4.0)
    res: tuple = (400, 400)
    tag: str = "custom"

    def __post_init__(self):
        terms = tuple((int(i), int(j), complex(c)) for i, j, c in self.terms if complex(c) != 0)
        if not terms:
            raise InvalidSpec("empty polynomial")
        if min(min(i, j) for i, j, _ in terms) < 0:
            raise InvalidSpec("negative exponent")
        object.__setattr__(self, "terms", terms)
        b = tuple(float(x) for x in self.bounds)
        if len(b) != 4 or not np.all(np.isfinite(b)):
            raise InvalidSpec(f"bounds must be four finite numbers, got {self.bounds}")
        if not (b[1] > b[0] and b[3] > b[2]):
            raise InvalidSpec(f"zero-area grid {b}")
        object.__setattr__(self, "bounds", b)
        res = (self.res, self.res) if np.isscalar(self.res) else tuple(self.res)
        res = tuple(int(r) for r in res)
        if len(res) != 2 or min(res) < 16:
            raise InvalidSpec(f"resolution must be at least 16 per axis, got {self.res}")
        object.__setattr__(self, "res", res)

    @classmethod
    def line(cls, bounds=(-4.0, 4.0, -4.0, 4.0), res=(400, 400)):
        """The curve v1 + v2 + 1 = 0."""
        return cls(((1, 0, 1), (0, 1, 1), (0, 0, 1)), bounds, res, tag="line")

    @classmethod
    def parse(cls, text, bounds=(-4.0, 4.0, -4.0, 4.0), res=(400, 400)):
        """``"line"`` or ``"i,j,c;i,j,c;..."`` with complex-parsable c."""
        if text.strip() == "line":
            return cls.line(bounds, res)
        try:
            terms = []
            for chunk in text.split(";"):
                if chunk.strip():
                    i, j, c = chunk.split(",")
                    terms.append((int(i), int(j), complex(c.strip().replace(" ", ""))))
        except ValueError as exc:
            raise InvalidSpec(f"cannot parse polynomial {text!r}") from exc
        return cls(tuple(terms), bounds, res)

    def grid(self):
        """Pixel centres ``(s, t)``; row 0 is the top (largest t)."""
        s0, s1, t0, t1 = self.bounds
        nx, ny = self.res
        s = s0 + (np.arange(nx) + 0.5) * (s1 - s0) / nx
        t = t1 - (np.arange(ny) + 0.5) * (t1 - t0) / ny
        return np.meshgrid(s, t)


def member_line(s, t):
    """Exact membership in the Log-image of v1 + v2 + 1 = 0 (triangle inequalities)."""
    a, b = np.exp(np.asarray(s, dtype=float)), np.exp(np.asarray(t, dtype=float))
    return (np.abs(a - b) <= 1.0) & (a + b >= 1.0)


def _term_arrays(spec):
    i = np.array([p[0] for p in spec.terms], dtype=float)
    j = np.array([p[1] for p in spec.terms], dtype=float)
    c = np.array([p[2] for p in spec.terms])
    return i, j, c


def _sampled_block(spec, s, t, samples):
    """Tri-state verdicts for 1-d arrays s, t using a samples x samples angle grid."""
    i, j, c = _term_arrays(spec)
    logmag = np.log(np.abs(c)) + s[:, None] * i + t[:, None] * j
    mags = np.exp(logmag - logmag.max(axis=1, keepdims=True))
    total = mags.sum(axis=1)
    out = np.full(s.shape, UNKNOWN, dtype=np.int8)
    # one term outweighing all others leaves no zero on the fibre torus
    out[2 * mags.max(axis=1) > total * (1 + 1e-12)] = OUTSIDE
    todo = np.flatnonzero(out == UNKNOWN)
    if not todo.size:
        return out
    theta = 2 * np.pi * np.arange(samples) / samples
    phase1 = np.exp(1j * np.outer(i, theta))  # (terms, samples)
    phase2 = np.exp(1j * np.outer(j, theta))
    weights = mags[todo] * (c / np.abs(c))  # (pts, terms)
    # F[p, row over arg v2, col over arg v1]
    F = np.einsum("pk,kr,kc->prc", weights, phase2, phase1)
    absF = np.abs(F)
    scale = total[todo]
    lipschitz = (mags[todo] * (i + j)).sum(axis=1) * np.pi / samples
    minabs = absF.reshape(len(todo), -1).min(axis=1)
    hit = minabs <= 1e-12 * scale
    clear = minabs > lipschitz * (1 + 1e-9)
    # winding of each row in arg v1, trusted where consecutive samples stay on one side of 0
    nxt = np.roll(F, -1, axis=2)
    steps = np.angle(nxt / np.where(absF == 0, 1, F))
    winding = np.rint(steps.sum(axis=2) / (2 * np.pi)).astype(int)
    trusted = np.all(np.abs(nxt - F) < np.minimum(absF, np.abs(nxt)), axis=2)
    big = np.iinfo(int).max
    lo = np.where(trusted, winding, big).min(axis=1)
    hi = np.where(trusted, winding, -big).max(axis=1)
    changes = trusted.any(axis=1) & (hi > lo)
    verdict = np.full(todo.shape, UNKNOWN, dtype=np.int8)
    verdict[clear] = OUTSIDE
    verdict[hit | changes] = MEMBER
    out[todo] = verdict
    return out


def member_sampled(spec, s, t, samples=32, max_samples=128, chunk=2048, threads=1):
    """Tri-state membership (1 member, 0 outside, -1 inconclusive) by sampling fibre tori.

    Outside is certified by a dominant term or by a Lipschitz bound on the
    sampled modulus.  Member is certified by an exact sampled zero or by a
    change of the argument-principle winding number between circles of the
    family.  Inconclusive points are retried with doubled sampling.  Chunks
    write disjoint slices, so ``threads`` does not change the result.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast(s, t).shape
    s, t = (np.broadcast_to(x, shape).ravel() for x in (s, t))
    out = np.full(s.shape, UNKNOWN, dtype=np.int8)
    pending = np.arange(s.size)
    n = samples
    while pending.size and n <= max_samples:
        step = max(1, chunk * 1024 // (n * n))
        blocks = [pending[k:k + step] for k in range(0, pending.size, step)]

        def work(idx, n=n):
            out[idx] = _sampled_block(spec, s[idx], t[idx], n)
        if threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, blocks))
        else:
            for idx in blocks:
                work(idx)
        pending = pending[out[pending] == UNKNOWN]
        n *= 2
    return out.reshape(shape)


def count_components(mask):
    """Number of 4-connected components of a boolean mask."""
    return int(ndimage.label(np.asarray(mask, dtype=bool))[1])


@dataclass
class Raster:
    spec: AmoebaSpec
    verdict: np.ndarray
    method: str
    complement_components: int = field(init=False)
    member_components: int = field(init=False)

    def __post_init__(self):
        self.complement_components = count_components(self.verdict == OUTSIDE)
        self.member_components = count_components(self.verdict == MEMBER)

    def to_ppm(self):
        ny, nx = self.verdict.shape
        rgb = np.zeros((ny, nx, 3), dtype=np.uint8)
        for key, color in _COLORS.items():
            rgb[self.verdict == key] = color
        return f"P6\n{nx} {ny}\n255\n".encode() + rgb.tobytes()

    def to_svg(self):
        """Outline of the member region as marching-squares segments."""
        ny, nx = self.verdict.shape
        lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx}" height="{ny}" viewBox="0 0 {nx} {ny}">',
                 '<path fill="none" stroke="black" stroke-width="1" d="']
        for (x0, y0), (x1, y1) in marching_squares(self.verdict == MEMBER):
            lines.append(f"M{x0 + 0.5:g} {y0 + 0.5:g}L{x1 + 0.5:g} {y1 + 0.5:g}")
        lines.append('"/>')
        lines.append("</svg>")
        return "\n".join(lines) + "\n"

    def save(self, path, svg_path=None):
        try:
            with open(path, "wb") as fh:
                fh.write(self.to_ppm())
            if svg_path:
                with open(svg_path, "w") as fh:
                    fh.write(self.to_svg())
        except OSError as exc:
            raise IoError(str(exc)) from exc


# edges of a cell: 0 top, 1 right, 2 bottom, 3 left; case bits: tl=8, tr=4, br=2, bl=1
_CASES = {1: ((3, 2),), 2: ((2, 1),), 3: ((3, 1),), 4: ((0, 1),), 5: ((3, 0), (2, 1)),
          6: ((0, 2),), 7: ((3, 0),), 8: ((3, 0),), 9: ((0, 2),), 10: ((3, 2), (0, 1)),
          11: ((0, 1),), 12: ((3, 1),), 13: ((2, 1),), 14: ((3, 2),)}
_MID = {0: (0.5, 0.0), 1: (1.0, 0.5), 2: (0.5, 1.0), 3: (0.0, 0.5)}


def marching_squares(mask):
    """Segments ``((x0, y0), (x1, y1))`` separating True from False pixel centres."""
    m = np.asarray(mask, dtype=np.uint8)
    code = 8 * m[:-1, :-1] + 4 * m[:-1, 1:] + 2 * m[1:, 1:] + m[1:, :-1]
    segs = []
    for y, x in zip(*np.nonzero((code > 0) & (code < 15))):
        for a, b in _CASES[int(code[y, x])]:
            pa, pb = _MID[a], _MID[b]
            segs.append(((x + pa[0], y + pa[1]), (x + pb[0], y + pb[1])))
    return segs


def render(spec, method=None, samples=32, threads=1):
    """Rasterize; ``method`` is ``"exact"`` (line only) or ``"sampled"``."""
    method = method or ("exact" if spec.tag == "line" else "sampled")
    S, T = spec.grid()
    if method == "exact":
        if spec.tag != "line":
            raise InvalidSpec("exact membership is only available for the line")
        verdict = np.where(member_line(S, T), MEMBER, OUTSIDE).astype(np.int8)
    elif method == "sampled":
        verdict = member_sampled(spec, S, T, samples=samples, threads=threads)
    else:
        raise InvalidSpec(f"unknown method {method!r}")
    return Raster(spec, verdict, method)


def boundary_band(member, width):
    """Pixels within Chebyshev distance ``width`` of a member/non-member edge."""
    member = np.asarray(member, dtype=bool)
    edge = np.zeros_like(member)
    edge[:-1] |= member[:-1] != member[1:]
    edge[1:] |= member[:-1] != member[1:]
    edge[:, :-1] |= member[:, :-1] != member[:, 1:]
    edge[:, 1:] |= member[:, :-1] != member[:, 1:]
    if width <= 0:
        return edge
    return ndimage.binary_dilation(edge, structure=np.ones((3, 3), bool), iterations=width)


def disagreement_outside_band(spec, width=2, samples=32):
    """Count of pixels where sampled and exact line membership differ away from the boundary band."""
    S, T = spec.grid()
    exact = member_line(S, T)
    sampled = member_sampled(spec, S, T, samples=samples)
    differ = sampled != np.where(exact, MEMBER, OUTSIDE)
    band = boundary_band(exact, width)
    return int(np.count_nonzero(differ & ~band)), int(np.count_nonzero(differ))
