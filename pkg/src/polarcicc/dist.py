"""Dense joint probability tables over finite alphabets.

Entropies are computed with natural logs internally and converted to the
requested base at the boundary; ``0 log 0 = 0``.
"""

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .field import is_prime

__all__ = [
    "JointDist",
    "CiccInstance",
    "MarkovViolation",
    "entropy",
    "mutual_information",
    "check_markov",
    "sample",
    "total_variation",
    "stream",
    "DEFAULT_CELL_LIMIT",
]

DEFAULT_CELL_LIMIT = 10**7
SUM_TOL = 1e-12


class MarkovViolation(ValueError):
    """A design or joint distribution breaks a required Markov chain."""


def stream(seed, *keys):
    """Counter-based generator (Philox) for the stream ``(seed, *keys)``.

    Distinct key tuples give statistically independent streams, so workers
    never share one.  Philox output is identical on every platform.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


class JointDist:
    """Probability table over the product of named finite alphabets.

    Parameters
    ----------
    variables : sequence of (name, size)
        Ordered variables; ``size`` is an int or an object with a ``q`` field.
    probs : array_like
        Table with one axis per variable.
    """

    def __init__(self, variables, probs, *, tol=SUM_TOL, cell_limit=DEFAULT_CELL_LIMIT):
        names, sizes = [], []
        for name, size in variables:
            names.append(str(name))
            sizes.append(int(getattr(size, "q", size)))
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        cells = math.prod(sizes)
        if cells > cell_limit:
            raise ValueError(f"product space has {cells} cells, above the limit {cell_limit}")
        p = np.asarray(probs, dtype=float)
        if p.size != cells:
            raise ValueError(f"table has {p.size} entries, expected {cells}")
        p = p.reshape(sizes)
        if (p < 0).any():
            raise ValueError("negative probability entry")
        total = p.sum()
        if abs(total - 1.0) > tol:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        self.names = tuple(names)
        self.sizes = tuple(sizes)
        self.probs = p
        self.probs.setflags(write=False)

    def __repr__(self):
        vs = ", ".join(f"{n}:{s}" for n, s in zip(self.names, self.sizes))
        return f"JointDist({vs})"

    @property
    def variables(self):
        return list(zip(self.names, self.sizes))

    def size_of(self, name):
        return self.sizes[self.axis(name)]

    def axis(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}; have {self.names}") from None

    def axes(self, names):
        return tuple(self.axis(n) for n in _as_names(names))

    def marginal(self, names):
        """Joint of ``names`` (in the given order)."""
        names = _as_names(names)
        keep = self.axes(names)
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        p = self.probs.sum(axis=drop) if drop else self.probs
        # p has the kept axes in original order; permute to requested order
        order = sorted(keep)
        p = np.transpose(p, [order.index(k) for k in keep])
        return JointDist([(n, self.size_of(n)) for n in names], p, tol=1e-9)

    def conditional(self, target, given):
        """Array ``c[g..., t...] = P(target | given)``; uniform where P(given)=0."""
        target, given = _as_names(target), _as_names(given)
        m = self.marginal(list(given) + list(target)).probs
        g_nd = len(given)
        den = m.sum(axis=tuple(range(g_nd, m.ndim)), keepdims=True)
        t_cells = math.prod(m.shape[g_nd:])
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.where(den > 0, m / np.where(den > 0, den, 1.0), 1.0 / t_cells)
        return c

    def relabel(self, name, perm):
        """Distribution of the relabeled variable ``perm[value]``."""
        ax = self.axis(name)
        perm = np.asarray(perm)
        p = np.zeros_like(self.probs)
        idx = [slice(None)] * p.ndim
        for old, new in enumerate(perm):
            src = list(idx)
            dst = list(idx)
            src[ax] = old
            dst[ax] = new
            p[tuple(dst)] += self.probs[tuple(src)]
        return JointDist(self.variables, p, tol=1e-9)


def _as_names(names):
    if names is None:
        return ()
    if isinstance(names, str):
        return (names,)
    return tuple(names)


def _h_nats(p):
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def entropy(d, targets, given=(), base=2):
    """``H(targets | given)`` in base-``base`` units."""
    targets, given = _as_names(targets), _as_names(given)
    if set(targets) & set(given):
        raise ValueError("targets and given must be disjoint")
    d.axes(targets + given)
    h = _h_nats(d.marginal(targets + given).probs)
    if given:
        h -= _h_nats(d.marginal(given).probs)
    return max(h, 0.0) / math.log(base)


def mutual_information(d, a, b, given=(), base=2):
    """``I(a; b | given)`` in base-``base`` units, clipped at zero."""
    a, b, given = _as_names(a), _as_names(b), _as_names(given)
    if set(a) & set(b) or set(a) & set(given) or set(b) & set(given):
        raise ValueError("variable sets must be pairwise disjoint")
    val = entropy(d, a, given, base) - entropy(d, a, b + given, base)
    return val if val > 0 else 0.0


def check_markov(d, a, b, c, tol=1e-9):
    """Test the chain ``a <-> b <-> c``; returns ``(holds, I(a; c | b))``."""
    v = mutual_information(d, a, c, b)
    return v <= tol, v


def sample(d, rng, size=None):
    """Draw joint samples as ``{name: value(s)}`` by inverse-CDF on ``rng`` uniforms."""
    cdf = np.cumsum(d.probs.ravel())
    r = rng.random(size)
    flat = np.minimum(np.searchsorted(cdf, r * cdf[-1], side="right"), cdf.size - 1)
    idx = np.unravel_index(flat, d.sizes)
    return {n: (int(i) if size is None else i) for n, i in zip(d.names, idx)}


def total_variation(p, q):
    """``(1/2) sum |p - q|`` for distributions over the same variables."""
    if p.names != q.names or p.sizes != q.sizes:
        raise ValueError(f"structure mismatch: {p!r} vs {q!r}")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def next_prime_above(k):
    k += 1
    while not is_prime(k):
        k += 1
    return k


@dataclass
class CiccInstance:
    """Channel ``P(y1, y2 | x1, x2)`` plus a design ``P(u, v, x1, x2)``.

    ``channel`` has shape ``(|X1|, |X2|, |Y1|, |Y2|)``; ``design`` is a
    :class:`JointDist` over variables named ``U, V, X1, X2``.
    """

    channel: np.ndarray
    design: JointDist
    name: str = "instance"
    markov_tol: float = 1e-9
    full: JointDist = field(init=False, repr=False)

    def __post_init__(self):
        d = self.design
        if set(d.names) != {"U", "V", "X1", "X2"}:
            raise ValueError(f"design must be over U, V, X1, X2; got {d.names}")
        if d.names != ("U", "V", "X1", "X2"):
            self.design = d = d.marginal(["U", "V", "X1", "X2"])
        for v in d.names:
            if not is_prime(d.size_of(v)):
                raise ValueError(f"alphabet of {v} has non-prime size {d.size_of(v)}")
        ch = np.asarray(self.channel, dtype=float)
        q1, q2 = d.size_of("X1"), d.size_of("X2")
        if ch.ndim != 4 or ch.shape[:2] != (q1, q2):
            raise ValueError(f"channel shape {ch.shape} does not match inputs ({q1}, {q2})")
        if (ch < 0).any():
            raise ValueError("negative channel probability")
        rows = ch.reshape(q1, q2, -1).sum(axis=2)
        bad = np.argwhere(np.abs(rows - 1.0) > 1e-9)
        if bad.size:
            x1, x2 = bad[0]
            raise ValueError(f"channel row (x1={x1}, x2={x2}) sums to {rows[x1, x2]!r}, not 1")
        self.channel = ch
        ok, viol = check_markov(d, ["U", "X1"], ["V"], ["X2"], self.markov_tol)
        if not ok:
            raise MarkovViolation(
                f"design breaks (U,X1) <-> V <-> X2: I(U,X1; X2 | V) = {viol:.3e}")
        joint = d.probs[:, :, :, :, None, None] * ch[None, None]
        self.full = JointDist(
            [("U", d.size_of("U")), ("V", d.size_of("V")), ("X1", q1), ("X2", q2),
             ("Y1", ch.shape[2]), ("Y2", ch.shape[3])], joint, tol=1e-9)
        self.cardinality_warnings()

    @property
    def q(self):
        return {n: s for n, s in zip(self.full.names, self.full.sizes)}

    def cardinality_warnings(self):
        q1, q2 = self.q["X1"], self.q["X2"]
        msgs = []
        if self.q["U"] > q1 * q2 + 3:
            msgs.append(f"|U|={self.q['U']} exceeds |X1||X2|+3={q1 * q2 + 3}")
        vb = q1**2 * q2**2 + 4 * q1 * q2 + 3
        if self.q["V"] > vb:
            msgs.append(f"|V|={self.q['V']} exceeds {vb}")
        for m in msgs:
            warnings.warn(f"cardinality bound: {m}", stacklevel=3)
        return msgs

    def digest(self):
        """Stable content hash of the instance tables."""
        h = hashlib.sha256()
        h.update(repr(self.full.sizes).encode())
        h.update(np.round(self.design.probs, 15).tobytes())
        h.update(np.round(self.channel, 15).tobytes())
        return h.hexdigest()[:16]
