"""Entropy profiles of synthesized sources and the index sets built from them.

A profile holds ``h[j] = H_q(U^j | side^{1:N}, U^{1:j-1})`` for ``U = X G_N``.
H-sets collect near-uniform indices, L-sets near-deterministic ones; every
code partition below is plain set algebra on those.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dist import JointDist, mutual_information, stream
from .field import log2_exact, polar_transform
from .sc import posterior_entropy, sc_pass, synthetic_entropies

__all__ = [
    "EntropyProfile",
    "IndexPartition",
    "ExactLimitError",
    "source_model",
    "exact_entropy_profile",
    "monte_carlo_entropy_profile",
    "threshold_sets",
    "delta_schedule",
    "lowest_entropy",
    "partition_p2p",
    "partition_common",
    "partition_confidential",
    "classify_case",
    "case_mutual_informations",
    "EXACT_LIMIT",
]

EXACT_LIMIT = 16
MIN_MC_SAMPLES = 100


class ExactLimitError(ValueError):
    pass


@dataclass
class EntropyProfile:
    """Per-index conditional entropies (base q) of one synthesized source."""

    N: int
    base: int
    h: np.ndarray
    se: np.ndarray = None
    estimator: str = "exact"
    samples: int = 0
    seed: int = None
    source: str = ""
    side: tuple = ()

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.se is None:
            self.se = np.zeros(self.N)
        self.se = np.asarray(self.se, dtype=float)
        if len(self.h) != self.N:
            raise ValueError("profile length does not match N")

    def mean(self):
        return float(self.h.mean())

    def to_dict(self):
        return {
            "N": self.N, "base": self.base, "h": self.h.tolist(), "se": self.se.tolist(),
            "estimator": self.estimator, "samples": self.samples, "seed": self.seed,
            "source": self.source, "side": list(self.side),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["side"] = tuple(d.get("side", ()))
        return cls(**d)


@dataclass
class IndexPartition:
    """Named index subsets of ``range(N)``."""

    N: int
    sets: dict
    is_partition: bool = False

    def __post_init__(self):
        self.sets = {k: frozenset(int(i) for i in v) for k, v in self.sets.items()}
        for k, s in self.sets.items():
            if s and (min(s) < 0 or max(s) >= self.N):
                raise ValueError(f"set {k} leaves range({self.N})")
        if self.is_partition:
            self.check_partition()

    def __getitem__(self, key):
        return self.sets[key]

    def check_partition(self):
        seen = set()
        for k, s in self.sets.items():
            if seen & s:
                raise ValueError(f"set {k} overlaps an earlier set")
            seen |= s
        if seen != set(range(self.N)):
            raise ValueError("sets do not cover range(N)")

    def sizes(self):
        return {k: len(v) for k, v in self.sets.items()}

    def to_dict(self):
        return {"N": self.N, "is_partition": self.is_partition,
                "sets": {k: sorted(v) for k, v in self.sets.items()}}

    @classmethod
    def from_dict(cls, d):
        return cls(d["N"], d["sets"], d.get("is_partition", False))


def source_model(design, source, side=()):
    """Side-symbol masses and posterior table for ``source`` given ``side``.

    Returns ``(p_side, post)`` with ``p_side`` of shape (S,) and ``post`` of
    shape (S, q), ``post[s, a] = P(source = a | side = s)``; side tuples are
    flattened in row-major order.
    """
    side = tuple(side)
    q = design.size_of(source)
    m = design.marginal(list(side) + [source]).probs.reshape(-1, q)
    p_side = m.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.where(p_side[:, None] > 0, m / np.where(p_side > 0, p_side, 1)[:, None], 1.0 / q)
    return p_side, post


def exact_entropy_profile(design, source, side, N, limit=EXACT_LIMIT):
    """Exact profile via the synthetic-channel recursion (small N only)."""
    n = log2_exact(N)
    if N > limit:
        raise ExactLimitError(
            f"N={N} exceeds the exact-mode limit {limit}; use monte_carlo_entropy_profile")
    q = design.size_of(source)
    p_side, post = source_model(design, source, side)
    h = synthetic_entropies(p_side, post, n, q)
    return EntropyProfile(N, q, np.clip(h, 0.0, 1.0), estimator="exact",
                          source=source, side=tuple(side))


def monte_carlo_entropy_profile(design, source, side, N, samples, rng, batch=2048):
    """Estimate the profile by averaging SC posterior entropies over samples.

    ``rng`` is a seed (int) or a ``numpy.random.Generator``.
    """
    n = log2_exact(N)
    if samples < MIN_MC_SAMPLES:
        raise ValueError(f"samples={samples} is below the minimum {MIN_MC_SAMPLES}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    if seed is not None:
        rng = stream(seed, 0xC0)
    q = design.size_of(source)
    p_side, post = source_model(design, source, side)
    joint = (p_side[:, None] * post).ravel()
    cdf = np.cumsum(joint)
    total = np.zeros(N)
    total_sq = np.zeros(N)
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        r = rng.random((b, N))
        flat = np.minimum(np.searchsorted(cdf, r * cdf[-1], side="right"), joint.size - 1)
        s_idx, x = np.divmod(flat, q)
        u = polar_transform(x, q).astype(np.int64)
        ent = np.empty((b, N))

        def record(j, pst, u=u, ent=ent):
            ent[:, j] = posterior_entropy(pst, q)
            return u[:, j]

        sc_pass(post[s_idx], record)
        # compensated by accumulating per batch in float64; batches are few
        total += ent.sum(axis=0)
        total_sq += (ent ** 2).sum(axis=0)
        done += b
    mean = total / samples
    var = np.maximum(total_sq / samples - mean ** 2, 0.0) * samples / max(samples - 1, 1)
    se = np.sqrt(var / samples)
    return EntropyProfile(N, q, np.clip(mean, 0.0, 1.0), se, estimator="mc", samples=samples,
                          seed=seed, source=source, side=tuple(side))


def delta_schedule(N, beta):
    """``2^{-N^beta}``; only meaningful for large N."""
    return 2.0 ** (-(N ** beta))


def threshold_sets(profile, deltaH, deltaL=None, guard=2.0):
    """H-set ``{h >= 1 - deltaH}`` and L-set ``{h <= deltaL}``.

    Monte-Carlo profiles are thresholded conservatively: ``guard`` standard
    errors are charged against membership in either set.
    """
    if deltaL is None:
        deltaL = deltaH
    if not (0 < deltaH < 0.5 and 0 < deltaL < 0.5):
        raise ValueError("thresholds must lie in (0, 0.5)")
    band = guard * profile.se if profile.estimator == "mc" else 0.0
    h = profile.h
    H = np.flatnonzero(h - band >= 1 - deltaH)
    L = np.flatnonzero(h + band <= deltaL)
    return frozenset(H.tolist()), frozenset(L.tolist())


def lowest_entropy(indices, h, k):
    """The ``k`` members of ``indices`` with smallest ``h`` (ties: smaller index)."""
    idx = sorted(indices, key=lambda j: (h[j], j))
    if k > len(idx):
        raise ValueError(f"asked for {k} indices out of {len(idx)}")
    return frozenset(idx[:k])


def partition_p2p(hx, lxy, N):
    """Information / frozen / almost-deterministic sets of a point-to-point code."""
    hx, lxy = frozenset(hx), frozenset(lxy)
    full = frozenset(range(N))
    return IndexPartition(N, {"I": hx & lxy, "F": hx - lxy, "D": full - hx}, is_partition=True)


def partition_common(h_set, l1, l2, N):
    """Sets of a common-message layer decoded by both receivers."""
    h_set, l1, l2 = frozenset(h_set), frozenset(l1), frozenset(l2)
    full = frozenset(range(N))
    return IndexPartition(N, {
        "I1": h_set & l1,
        "I2": h_set & l2,
        "F": h_set - l1 - l2,
        "D": full - h_set,
    })


def partition_confidential(hV, lV_y2, hV_y1, N):
    """Reliable-and-secure / reliable-insecure / frozen / unreliable-insecure /
    deterministic sets of the confidential layer."""
    hV, l2, h1 = frozenset(hV), frozenset(lV_y2), frozenset(hV_y1)
    full = frozenset(range(N))
    return IndexPartition(N, {
        "I2s": hV & l2 & h1,
        "I2p": (hV & l2) - h1,
        "F2": (hV & h1) - l2,
        "R2": hV - l2 - h1,
        "D2": full - hV,
    }, is_partition=True)


def case_mutual_informations(instance, base=2):
    """The mutual informations the case split is decided on."""
    d = instance.full
    return {
        "I(X1;Y1)": mutual_information(d, ["X1"], ["Y1"], base=base),
        "I(X1;Y2)": mutual_information(d, ["X1"], ["Y2"], base=base),
        "I(U;Y1|X1)": mutual_information(d, ["U"], ["Y1"], ["X1"], base=base),
        "I(U;Y2|X1)": mutual_information(d, ["U"], ["Y2"], ["X1"], base=base),
        "I(U,X1;Y1)": mutual_information(d, ["U", "X1"], ["Y1"], base=base),
        "I(U,X1;Y2)": mutual_information(d, ["U", "X1"], ["Y2"], base=base),
    }


def classify_case(instance, tol=1e-9):
    """One of ``'1', '2', '3-1', '3-2', '4'``.

    Equalities within ``tol`` count toward Cases 1/2, which need no
    cross-transmitter chaining.
    """
    mi = case_mutual_informations(instance)
    d1 = mi["I(X1;Y2)"] - mi["I(X1;Y1)"]
    d2 = mi["I(U;Y2|X1)"] - mi["I(U;Y1|X1)"]
    if d1 >= -tol and d2 >= -tol:
        return "1"
    if d1 <= tol and d2 <= tol:
        return "2"
    if d1 > 0:
        # receiver 2 better on X1, receiver 1 better on U
        return "3-1" if mi["I(U,X1;Y1)"] <= mi["I(U,X1;Y2)"] + tol else "3-2"
    return "4"


def weak_receiver(instance, label, tol=1e-9):
    """Receiver whose reliable sets are chained forward (decodes in chain order)."""
    if label in ("1", "3-1"):
        return 1
    if label in ("2", "3-2"):
        return 2
    mi = case_mutual_informations(instance)
    return 1 if mi["I(U,X1;Y1)"] <= mi["I(U,X1;Y2)"] + tol else 2
