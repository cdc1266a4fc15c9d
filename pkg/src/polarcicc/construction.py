"""Full code construction for one instance and block length, and the
cross-block chaining plan that wires message, frozen and copied positions.

Layer order is X1 -> U -> V -> X2.  The two common layers (X1 carried by
transmitter 1, U by transmitter 2) are decoded by both receivers; V carries
transmitter 2's private and confidential symbols; X2 is the channel-prefix
layer.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dist import stream
from .polarizer import (
    EntropyProfile,
    IndexPartition,
    case_mutual_informations,
    classify_case,
    delta_schedule,
    exact_entropy_profile,
    lowest_entropy,
    monte_carlo_entropy_profile,
    partition_common,
    partition_confidential,
    threshold_sets,
    weak_receiver,
)

__all__ = [
    "PROFILE_SPECS",
    "Construction",
    "ChainingPlan",
    "RateInfeasible",
    "build_construction",
    "build_chaining_plan",
    "MSG", "FROZEN", "SPECIAL", "CHAIN", "DET", "SEED", "W", "FRESH",
    "PARTS",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

PROFILE_SPECS = {
    "X1": ("X1", ()),
    "X1|Y1": ("X1", ("Y1",)),
    "X1|Y2": ("X1", ("Y2",)),
    "U|X1": ("U", ("X1",)),
    "U|X1Y1": ("U", ("X1", "Y1")),
    "U|X1Y2": ("U", ("X1", "Y2")),
    "V|X1U": ("V", ("X1", "U")),
    "V|X1UY1": ("V", ("X1", "U", "Y1")),
    "V|X1UY2": ("V", ("X1", "U", "Y2")),
    "X2|X1UV": ("X2", ("X1", "U", "V")),
    "X2|X1UVY1": ("X2", ("X1", "U", "V", "Y1")),
}

# per-position roles inside one block of one layer
MSG, FROZEN, SPECIAL, CHAIN, DET, SEED, W, FRESH = range(8)
KIND_NAMES = ["MSG", "FROZEN", "SPECIAL", "CHAIN", "DET", "SEED", "W", "FRESH"]
# message parts; "M1u" is transmitter 1's message riding on the U layer
PARTS = ["M1", "M1u", "M2c", "M2p", "M2s"]
LAYERS = ["X1", "U", "V", "X2"]
COMMON_PROFILES = {
    "X1": ("X1", "X1|Y1", "X1|Y2"),
    "U": ("U|X1", "U|X1Y1", "U|X1Y2"),
}


class RateInfeasible(ValueError):
    """The constructed sets are too small for the requested chaining."""


@dataclass
class Construction:
    """Profiles and thresholded sets of every synthesized source."""

    N: int
    q: dict
    delta: float
    mode: str
    profiles: dict
    mis: dict
    case: str
    instance_digest: str = ""
    samples: int = 0
    seed: int = 0
    guard: float = 2.0
    sets: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sets:
            for key, prof in self.profiles.items():
                H, L = threshold_sets(prof, self.delta, self.delta, self.guard)
                self.sets["H_" + key] = H
                self.sets["L_" + key] = L

    def h(self, key):
        return self.profiles[key].h

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "N": self.N, "q": self.q, "delta": self.delta, "mode": self.mode,
            "samples": self.samples, "seed": self.seed, "guard": self.guard,
            "case": self.case, "mis": self.mis, "instance_digest": self.instance_digest,
            "profiles": {k: p.to_dict() for k, p in self.profiles.items()},
            "sets": {k: sorted(v) for k, v in self.sets.items()},
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported construction schema {d.get('schema_version')}")
        return cls(
            N=d["N"], q=d["q"], delta=d["delta"], mode=d["mode"],
            profiles={k: EntropyProfile.from_dict(p) for k, p in d["profiles"].items()},
            mis=d["mis"], case=d["case"], instance_digest=d["instance_digest"],
            samples=d["samples"], seed=d["seed"], guard=d["guard"],
            sets={k: frozenset(v) for k, v in d["sets"].items()},
        )

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self):
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]


def build_construction(instance, N, delta=0.05, mode="mc", samples=4000, seed=0,
                       beta=None, guard=2.0, exact_limit=16):
    """Compute all eleven profiles and their H/L sets.

    With ``beta`` set, the threshold follows ``2^{-N^beta}`` instead of the
    fixed ``delta`` (clipped into a usable range).
    """
    if beta is not None:
        delta = min(max(delta_schedule(N, beta), 1e-12), 0.49)
    d = instance.full
    profiles = {}
    for k, (key, (src, side)) in enumerate(PROFILE_SPECS.items()):
        if mode == "exact":
            profiles[key] = exact_entropy_profile(d, src, side, N, limit=exact_limit)
        elif mode == "mc":
            p = monte_carlo_entropy_profile(d, src, side, N, samples, stream(seed, 0xC0, k))
            p.seed = seed
            profiles[key] = p
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return Construction(N=N, q=dict(instance.q), delta=delta, mode=mode, profiles=profiles,
                        mis=case_mutual_informations(instance), case=classify_case(instance),
                        instance_digest=instance.digest(), samples=samples if mode == "mc" else 0,
                        seed=seed, guard=guard)


@dataclass
class Link:
    """Block ``dst_block`` of ``dst_layer`` copies ``src`` positions of an earlier block."""

    dst_layer: str
    dst_block: int
    dst_pos: np.ndarray
    src_layer: str
    src_block: int
    src_pos: np.ndarray


@dataclass
class ChainingPlan:
    """Resolved case, set family and per-block position roles of one frame."""

    case: str
    weak: int
    m: int
    N: int
    q: dict
    secrecy: bool
    backoff: float
    sets: dict
    kinds: dict
    parts: dict
    links: list
    side: dict
    decoded: dict = field(default_factory=dict)

    def block_order(self, receiver):
        return list(range(self.m)) if receiver == 1 else list(range(self.m - 1, -1, -1))

    def count(self, layer, kind):
        return int((self.kinds[layer] == kind).sum())

    def part_count(self, part):
        return int(sum((p == PARTS.index(part)).sum() for p in self.parts.values()))

    def known_from_chain(self, receiver, layer, block):
        """Positions of (layer, block) the receiver deduces from another block.

        Returns a list of ``(dst_pos, src_layer, src_block, src_pos)`` meaning
        ``value[dst_pos] = decoded[src_layer][src_block][src_pos]``.
        """
        order = self.block_order(receiver)
        rank = {b: i for i, b in enumerate(order)}
        out = []
        for ln in self.links:
            if ln.dst_layer == layer and ln.dst_block == block and rank[ln.src_block] < rank[block]:
                out.append((ln.dst_pos, ln.src_layer, ln.src_block, ln.src_pos))
            if ln.src_layer == layer and ln.src_block == block and rank[ln.dst_block] < rank[block]:
                out.append((ln.src_pos, ln.dst_layer, ln.dst_block, ln.dst_pos))
        return out

    def known_mask(self, receiver, layer, block):
        """Positions the receiver does not run SC decisions on."""
        k = self.kinds[layer][block]
        mask = np.isin(k, [FROZEN, SPECIAL])
        if receiver == 2:
            mask |= k == SEED
        side = self.side.get((layer, receiver), frozenset())
        if side:
            mask[sorted(side)] = True
        for dst, *_ in self.known_from_chain(receiver, layer, block):
            mask[dst] = True
        return mask

    def rates(self, common_to_m1=0.0):
        """Message symbols per channel use for each part (symbol units of the layer)."""
        mN = self.m * self.N
        counts = {p: self.part_count(p) for p in PARTS}
        mc = counts["M2c"]
        r = {
            "M1": (counts["M1"] + counts["M1u"] + common_to_m1 * mc) / mN,
            "M2c": (1 - common_to_m1) * mc / mN,
            "M2p": counts["M2p"] / mN,
            "M2s": counts["M2s"] / mN,
        }
        return r

    def randomness_count(self):
        """Fresh uniform prefix symbols per frame: reused W once, fresh every block."""
        return len(self.sets["X2"]["W"]) + self.m * len(self.sets["X2"]["FRESH"])

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "case": self.case, "weak": self.weak, "m": self.m, "N": self.N, "q": self.q,
            "secrecy": self.secrecy, "backoff": self.backoff,
            "sets": {ly: {k: sorted(v) for k, v in s.items()} for ly, s in self.sets.items()},
        }

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def _trim(I, L, h, backoff):
    keep = int(math.floor(backoff * len(I) + 1e-9))
    kept = lowest_entropy(I, h, keep)
    return (L - I) | kept


def _arr(s):
    return np.array(sorted(s), dtype=np.int64)


def build_chaining_plan(con, case=None, m=1, *, weak=None, backoff=1.0, secrecy=True,
                        strict=True, common_to_m1=0.0):
    """Resolve every subset choice for an ``m``-block frame.

    Parameters
    ----------
    con : Construction
    case : str, optional
        Case label; defaults to the construction's classification.
    weak : {1, 2}, optional
        Receiver chained forward.  Derived from the case when omitted.
    backoff : float
        Fraction of each receiver's reliable set kept (most reliable first).
    secrecy : bool
        Build the confidential-layer chain.  When False, reliable V positions
        carry private symbols and the unreliable-insecure set is frozen.
    strict : bool
        Raise :class:`RateInfeasible` when realized set sizes contradict the
        case; otherwise unmatched positions are frozen.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < backoff <= 1:
        raise ValueError("backoff must lie in (0, 1]")
    case = case or con.case
    N = con.N
    S = con.sets
    full = frozenset(range(N))
    sets = {}
    kinds = {ly: np.full((m, N), DET, dtype=np.int8) for ly in LAYERS}
    parts = {ly: np.full((m, N), -1, dtype=np.int8) for ly in LAYERS}
    links = []
    side = {}

    # ---- common layers -------------------------------------------------
    info = {}
    for ly, (hk, l1k, l2k) in COMMON_PROFILES.items():
        Hs = S["H_" + hk]
        L = {1: S["L_" + l1k], 2: S["L_" + l2k]}
        hr = {1: con.h(l1k), 2: con.h(l2k)}
        for r in (1, 2):
            L[r] = _trim(Hs & L[r], L[r], hr[r], backoff)
        part = partition_common(Hs, L[1], L[2], N)
        info[ly] = dict(H=Hs, L=L, h=hr, I1=part["I1"], I2=part["I2"], F=part["F"], D=part["D"])
        for r in (1, 2):
            side[(ly, r)] = (full - Hs) - L[r]
    if weak is None:
        if case == "4":
            # the receiver with fewer reliable common indices in total
            tot = {r: sum(len(st["I%d" % r]) for st in info.values()) for r in (1, 2)}
            weak = 1 if tot[1] <= tot[2] else 2
        else:
            weak = {"1": 1, "3-1": 1, "2": 2, "3-2": 2}[case]
    strong = 3 - weak
    # logical block t -> physical block
    phys = (lambda t: t) if weak == 1 else (lambda t: m - 1 - t)
    for st in info.values():
        Iw, Is = st["I%d" % weak], st["I%d" % strong]
        st.update(I0=Iw & Is, Iwa=Iw - Is, spare=Is - Iw)

    excess = {ly: len(info[ly]["Iwa"]) - len(info[ly]["spare"]) for ly in info}
    donor = host = None
    need = 0
    if excess["X1"] > 0 and excess["U"] > 0:
        msg = ("both common layers have more weak-only than strong-only reliable indices "
               f"(excess {excess}); no chaining serves both receivers")
        if strict:
            raise RateInfeasible(msg)
    for d_ly, h_ly in (("X1", "U"), ("U", "X1")):
        if excess[d_ly] > 0 and excess[h_ly] < 0:
            donor, host = d_ly, h_ly
            need = min(excess[d_ly], -excess[h_ly])
    cross_expected = case in ("3-1", "3-2", "4")
    if strict:
        if not cross_expected and (excess["X1"] > 0 or excess["U"] > 0):
            ly = "X1" if excess["X1"] > 0 else "U"
            raise RateInfeasible(
                f"case {case}: layer {ly} needs |I^(s) \\ I^(w)| >= |I^(w) \\ I^(s)| "
                f"but has {len(info[ly]['spare'])} < {len(info[ly]['Iwa'])}")
        if cross_expected and donor is not None and excess[donor] > -excess[host]:
            raise RateInfeasible(
                f"case {case}: host layer {host} has {-excess[host]} spare strong-only indices, "
                f"fewer than the {excess[donor]} the donor layer {donor} must route")

    for ly, st in info.items():
        Iwa = st["Iwa"]
        hw, hs = st["h"][weak], st["h"][strong]
        wb = frozenset()
        if ly == donor:
            wb = lowest_entropy(Iwa, hw, need)
        # weak-only indices that cannot be chained anywhere are frozen
        own = len(Iwa) - len(wb)
        if ly != host and own > len(st["spare"]):
            dropped = sorted(Iwa - wb, key=lambda j: (-hw[j], j))[: own - len(st["spare"])]
            Iwa = Iwa - frozenset(dropped)
            own = len(Iwa) - len(wb)
        if ly == host:
            extra = need
            if own + extra > len(st["spare"]):
                dropped = sorted(Iwa, key=lambda j: (-hw[j], j))[: own + extra - len(st["spare"])]
                Iwa = Iwa - frozenset(dropped)
                own = len(Iwa)
            Isa = lowest_entropy(st["spare"], hs, own + extra)
            Isb = lowest_entropy(Isa, hs, extra)
        else:
            Isa = lowest_entropy(st["spare"], hs, own)
            Isb = frozenset()
        st.update(Iwa=Iwa, Iwb=wb, Isa=Isa, Isb=Isb)
        sets[ly] = {k: st[k] for k in ("I1", "I2", "F", "D", "I0", "Iwa", "Isa", "Iwb", "Isb")}
        sets[ly]["I%da" % weak] = Iwa
        sets[ly]["I%da" % strong] = Isa
        sets[ly]["H"] = st["H"]
        sets[ly]["L1"], sets[ly]["L2"] = st["L"][1], st["L"][2]

    msg_part = {"X1": PARTS.index("M1"), "U": PARTS.index("M2c")}
    for ly, st in info.items():
        k, p = kinds[ly], parts[ly]
        k[:, sorted(st["H"])] = FROZEN  # default for H; refined below
        for t in range(m):
            b = phys(t)
            k[b, sorted(st["I0"])] = MSG
            p[b, sorted(st["I0"])] = msg_part[ly]
            src = sorted(st["Iwa"])
            if t < m - 1:
                k[b, src] = MSG
                p[b, src] = msg_part[ly]
                if ly == "U" and st["Iwb"]:
                    p[b, sorted(st["Iwb"])] = PARTS.index("M1u")
            else:
                k[b, src] = SPECIAL
            dst = sorted(st["Isa"])
            k[b, dst] = SPECIAL if t == 0 else CHAIN
        k[:, sorted(st["D"])] = DET
    for t in range(1, m):
        b, prev = phys(t), phys(t - 1)
        for ly, st in info.items():
            own_dst = st["Isa"] - st["Isb"]
            own_src = st["Iwa"] - st["Iwb"] if ly == donor else st["Iwa"]
            if own_src:
                links.append(Link(ly, b, _arr(own_dst), ly, prev, _arr(own_src)))
        if donor is not None and need:
            links.append(Link(host, b, _arr(info[host]["Isb"]), donor, prev,
                              _arr(info[donor]["Iwb"])))

    # ---- confidential layer --------------------------------------------
    hV = S["H_V|X1U"]
    h1 = S["H_V|X1UY1"]
    L2 = _trim(hV & S["L_V|X1UY2"], S["L_V|X1UY2"], con.h("V|X1UY2"), backoff)
    cp = partition_confidential(hV, L2, h1, N)
    I2s, R2 = cp["I2s"], cp["R2"]
    kv, pv = kinds["V"], parts["V"]
    kv[:, sorted(cp["F2"])] = FROZEN
    kv[:, sorted(cp["D2"])] = DET
    if secrecy:
        if len(I2s) <= len(R2):
            raise RateInfeasible(
                f"positive secrecy needs |I_2s| > |R_2|; have {len(I2s)} <= {len(R2)}")
        I2s2 = lowest_entropy(I2s, con.h("V|X1UY2"), len(R2))
        I2s1 = I2s - I2s2
        for b in range(m):
            kv[b, sorted(I2s1)] = MSG
            pv[b, sorted(I2s1)] = PARTS.index("M2s")
            kv[b, sorted(cp["I2p"])] = MSG
            pv[b, sorted(cp["I2p"])] = PARTS.index("M2p")
            if b == 0:
                kv[b, sorted(I2s2)] = MSG
                pv[b, sorted(I2s2)] = PARTS.index("M2p")
            else:
                kv[b, sorted(I2s2)] = CHAIN
            if b < m - 1:
                kv[b, sorted(R2)] = MSG
                pv[b, sorted(R2)] = PARTS.index("M2p")
            else:
                kv[b, sorted(R2)] = SEED
        for b in range(1, m):
            if R2:
                links.append(Link("V", b, _arr(I2s2), "V", b - 1, _arr(R2)))
    else:
        I2s2, I2s1 = frozenset(), frozenset()
        priv = I2s | cp["I2p"]
        kv[:, sorted(priv)] = MSG
        pv[:, sorted(priv)] = PARTS.index("M2p")
        kv[:, sorted(R2)] = FROZEN
    sets["V"] = dict(cp.sets, I2s1=I2s1, I2s2=I2s2, H=hV, L2=L2, HY1=h1)
    side[("V", 2)] = cp["D2"] - L2

    # ---- channel prefix ----------------------------------------------------
    Hx = S["H_X2|X1UV"]
    Hy = S["H_X2|X1UVY1"]
    fresh = Hx - Hy
    kinds["X2"][:, sorted(Hy)] = W
    kinds["X2"][:, sorted(fresh)] = FRESH
    sets["X2"] = {"H": Hx, "HY1": Hy, "LY1": S["L_X2|X1UVY1"], "W": Hy, "FRESH": fresh,
                  "DET": frozenset(range(N)) - Hx - Hy}

    plan = ChainingPlan(case=case, weak=weak, m=m, N=N, q=dict(con.q), secrecy=secrecy,
                        backoff=backoff, sets=sets, kinds=kinds, parts=parts, links=links,
                        side=side)
    plan.donor, plan.host = donor, host
    return plan
