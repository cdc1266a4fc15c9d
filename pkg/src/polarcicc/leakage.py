"""Secrecy and resolvability audits: an exact small-N leakage oracle, a
plug-in leakage estimator for simulated frames, and the exact
induced-vs-design distance behind the encoder's approximation bound.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .codec import decode_rx, draw_randomness, encode_frames, layer_prior, sc_decode_layer, transmit
from .construction import DET, FRESH, FROZEN, MSG, PARTS, SEED, SPECIAL, W
from .field import polar_inverse, polar_transform

__all__ = [
    "all_vectors",
    "conditional_chain",
    "exact_leakage",
    "adversarial_plan",
    "plugin_leakage_estimate",
    "LeakageEstimate",
    "induced_tv",
    "ExactSizeError",
]

EXACT_VECTOR_LIMIT = 1 << 10
JOINT_CELL_LIMIT = 1 << 26


class ExactSizeError(ValueError):
    """The exact computation would enumerate too many vectors."""


def all_vectors(q, N):
    """Every length-N vector over Z_q, position 0 most significant."""
    if q ** N > EXACT_VECTOR_LIMIT:
        raise ExactSizeError(f"{q}^{N} vectors exceed the enumeration limit {EXACT_VECTOR_LIMIT}")
    return np.array(list(itertools.product(range(q), repeat=N)), dtype=np.int64)


def conditional_chain(P, q, N):
    """``c[s, k, j] = P(u^j = vec_k[j] | u^{<j} = vec_k[<j], s)`` from a joint
    table ``P[s, k]`` over u-vectors ``vec_k`` (lexicographic order)."""
    S, K = P.shape
    out = np.ones((S, K, N))
    for j in range(N):
        head = P.reshape(S, q ** (j + 1), q ** (N - j - 1)).sum(axis=2)
        prev = head.reshape(S, q ** j, q).sum(axis=2, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.where(prev > 0, head.reshape(S, q ** j, q) / np.where(prev > 0, prev, 1), 1.0 / q)
        out[:, :, j] = np.repeat(c.reshape(S, q ** (j + 1)), q ** (N - j - 1), axis=1)
    return out


def _design_u_table(W_single, N, sides, x_of_u):
    """``P(u | s)`` for every side vector in ``sides`` (S, N) and every u-vector.

    ``W_single[s, a] = P(x = a | side symbol s)``; ``x_of_u`` lists the
    x-vector of each u-vector.
    """
    probs = np.ones((len(sides), len(x_of_u)))
    for i in range(N):
        probs *= W_single[sides[:, i][:, None], x_of_u[None, :, i]]
    return probs


def _induced_factor(cond, kinds_row, q, skip=()):
    """Per u-vector encoder weight: the design conditional at sampled
    positions, 1/q at uniform ones, 1 at positions listed in ``skip``."""
    f = np.where((kinds_row == DET)[None, None, :], cond, 1.0 / q)
    if len(skip):
        f[:, :, list(skip)] = 1.0
    return f.prod(axis=2)


def _require_trivial_common(instance):
    d = instance.design
    p1 = d.marginal(["X1"]).probs
    pu = d.marginal(["U"]).probs
    if p1.max() < 1 - 1e-12 or pu.max() < 1 - 1e-12:
        raise ExactSizeError(
            "exact leakage needs deterministic X1 and U; the common layers would add "
            f"{d.size_of('X1')}^N x {d.size_of('U')}^N vectors per block")
    return int(p1.argmax()), int(pu.argmax())


def _index_of(vecs_sub, q):
    """Row-major index of each row (most significant first)."""
    if vecs_sub.shape[1] == 0:
        return np.zeros(len(vecs_sub), dtype=np.int64)
    w = q ** np.arange(vecs_sub.shape[1] - 1, -1, -1)
    return vecs_sub @ w


def _mi_bits(joint):
    """I(A; B) in bits for a 2-D joint table."""
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(joint > 0, joint * np.log2(joint / (pa * pb)), 0.0)
    return float(t.sum())


def exact_leakage(instance, plan):
    """Exact ``I(M2s blocks; Y1 blocks, F)`` in bits for one frame.

    Requires deterministic common layers, ``m <= 2`` and binary-size
    enumeration (q^N up to 1024).  Frozen symbols are public; private,
    seed and fresh prefix symbols are marginalized.
    """
    if plan.m > 2:
        raise ExactSizeError("exact leakage supports m <= 2")
    x1c, uc = _require_trivial_common(instance)
    N, qv, q2 = plan.N, plan.q["V"], plan.q["X2"]
    vv = all_vectors(qv, N)
    xv = polar_inverse(vv, qv)
    u2 = all_vectors(q2, N)
    x2 = polar_inverse(u2, q2)
    full = instance.full
    # prefix: induced law of the x2 u-vector given (v, W)
    Px2v = full.conditional(["X2"], ["X1", "U", "V"])[x1c, uc]
    cond = conditional_chain(_design_u_table(Px2v, N, xv, x2), q2, N)
    kx = plan.kinds["X2"][0]
    wpos = np.flatnonzero(kx == W)
    fac = _induced_factor(cond, kx, q2, skip=wpos)
    widx = _index_of(u2[:, wpos], q2)
    nW = q2 ** len(wpos)
    Qx2 = fac[:, None, :] * (widx[None, None, :] == np.arange(nW)[None, :, None])
    # eavesdropper channel for fixed x1
    ch = instance.channel[x1c]  # (q2, Y1, Y2)
    W1 = ch.sum(axis=2)
    ny = W1.shape[1]
    yv = all_vectors(ny, N) if ny ** N <= EXACT_VECTOR_LIMIT else None
    if yv is None:
        raise ExactSizeError(f"{ny}^{N} eavesdropper outputs exceed the limit")
    Py = np.ones((len(u2), len(yv)))
    for i in range(N):
        Py *= W1[x2[:, i][:, None], yv[None, :, i]]
    T = np.einsum("vwx,xy->vwy", Qx2, Py)  # P(y1 | v x-vector, w)

    kv = plan.kinds["V"]
    pv = plan.parts["V"]
    Pv = full.conditional(["V"], ["X1", "U"])[x1c, uc]
    vcond = conditional_chain(_design_u_table(Pv[None, :], N, np.zeros((1, N), dtype=np.int64), xv),
                              qv, N)[0]
    m = plan.m
    conf = [np.flatnonzero((kv[b] == MSG) & (pv[b] == PARTS.index("M2s"))) for b in range(m)]
    link_dst = {ln.dst_block: ln.dst_pos for ln in plan.links if ln.dst_layer == "V"}
    link_src = {ln.src_block: ln.src_pos for ln in plan.links if ln.src_layer == "V"}
    frozen_pos = np.flatnonzero(kv[0] == FROZEN)
    nR = qv ** len(link_src.get(0, ()))
    cells = math.prod(qv ** len(c) for c in conf) * len(yv) ** m * max(nR, 1) * nW
    if cells > JOINT_CELL_LIMIT:
        raise ExactSizeError(f"exact leakage joint table would hold {cells} cells")
    total = 0.0
    nF = qv ** len(frozen_pos)
    for f in range(nF):
        fvals = np.array(np.unravel_index(f, (qv,) * len(frozen_pos))).reshape(-1) \
            if len(frozen_pos) else np.zeros(0, dtype=np.int64)
        A = []
        for b in range(m):
            k = kv[b]
            ok = np.ones(len(vv), dtype=bool)
            if len(frozen_pos):
                ok &= (vv[:, frozen_pos] == fvals).all(axis=1)
            chained = link_src.get(b, link_dst.get(b, np.zeros(0, dtype=np.int64)))
            hidden = np.isin(k, [MSG, SEED, SPECIAL])
            hidden[conf[b]] = False
            hidden[chained] = False
            wgt = np.where((k == DET)[None, :], vcond, 1.0).prod(axis=1) * ok
            wgt = wgt * float(qv) ** (-int(hidden.sum()))
            midx = _index_of(vv[:, conf[b]], qv)
            ridx = _index_of(vv[:, chained], qv)
            nM = qv ** len(conf[b])
            a = np.zeros((nM, nR, nW, len(yv)))
            np.add.at(a, (midx, ridx), wgt[:, None, None] * T)
            A.append(a)
        pr = 1.0 / (nR * nW)
        if m == 1:
            pym = A[0].sum(axis=1).sum(axis=1) * pr  # (M, Y)
            joint = pym / pym.shape[0]
        else:
            pym = np.einsum("arwy,brwz->abyz", A[0], A[1]) * pr
            joint = pym.reshape(pym.shape[0] * pym.shape[1], -1) / (pym.shape[0] * pym.shape[1])
        total += _mi_bits(joint) / nF
    return total


def adversarial_plan(plan, con):
    """Copy of ``plan`` with confidential symbols moved to the reliable or
    frozen V indices that are most exposed to receiver 1.

    Same number of confidential symbols; displaced ones become private.
    """
    import copy

    adv = copy.deepcopy(plan)
    kv, pv = adv.kinds["V"], adv.parts["V"]
    S = plan.sets["V"]
    k = len(S["I2s1"])
    cand = S["I2s1"] | S["I2p"] | S["F2"]
    h1 = con.h("V|X1UY1")
    chosen = sorted(cand, key=lambda j: (h1[j], j))[:k]
    old = sorted(S["I2s1"])
    kv[:, old] = MSG
    pv[:, old] = PARTS.index("M2p")
    kv[:, chosen] = MSG
    pv[:, chosen] = PARTS.index("M2s")
    adv.sets["V"] = dict(S, I2s1=frozenset(chosen))
    return adv


@dataclass
class LeakageEstimate:
    value: float
    stderr: float
    method: str
    frames: int
    positions: int


def _plugin_mi(a, b, q):
    """Per-column plug-in MI (bits) between symbol columns of ``a`` and ``b``."""
    n, K = a.shape
    joint = np.zeros((K, q, q))
    cols = np.arange(K)
    for i in range(n):
        joint[cols, a[i], b[i]] += 1
    joint /= n
    pa = joint.sum(axis=2, keepdims=True)
    pb = joint.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(joint > 0, joint * np.log2(joint / (pa * pb)), 0.0)
    mi = t.sum(axis=(1, 2))
    # Miller-Madow style bias correction for the occupied cells
    ka = (pa > 0).sum(axis=(1, 2))
    kb = (pb > 0).sum(axis=(1, 2))
    return mi - (ka - 1) * (kb - 1) / (2 * n * math.log(2))


def eavesdropper_decisions(instance, plan, frames, seed, batch=50):
    """Simulate frames; return (true, decided) confidential symbols.

    Receiver 1 is handed the true x1 and u blocks and the public frozen
    symbols, then runs SC on the V layer.  Arrays have shape
    (frames, confidential positions summed over blocks).
    """
    conf = [np.flatnonzero((plan.kinds["V"][b] == MSG) & (plan.parts["V"][b] == PARTS.index("M2s")))
            for b in range(plan.m)]
    trues, decs = [], []
    frames = list(frames)
    for s in range(0, len(frames), batch):
        chunk = frames[s:s + batch]
        rnd = draw_randomness(plan, seed, chunk)
        u, x = encode_frames(instance, plan, rnd)
        y1, _ = transmit(instance, x, rnd.chan)
        B = len(chunk)
        t_rows, d_rows = [], []
        for b in range(plan.m):
            k = plan.kinds["V"][b]
            mask = k == FROZEN
            vals = np.zeros((B, plan.N), dtype=np.int64)
            vals[:, mask] = rnd.frozen["V"][:, mask]
            prior = layer_prior(instance, "V", ("X1", "U", "Y1"),
                                {"X1": x["X1"][:, b], "U": x["U"][:, b], "Y1": y1[:, b]})
            dv, _ = sc_decode_layer(prior, mask, vals)
            t_rows.append(u["V"][:, b][:, conf[b]])
            d_rows.append(dv[:, conf[b]])
        trues.append(np.concatenate(t_rows, axis=1))
        decs.append(np.concatenate(d_rows, axis=1))
    return np.concatenate(trues), np.concatenate(decs)


def plugin_leakage_estimate(instance, plan, frames, seed, groups=10, batch=50):
    """Lower-bound estimate of the confidential leakage (bits per frame).

    Sums per-symbol plug-in ``I(M_j; T_j)`` between each confidential
    symbol and receiver 1's SC decision on it; the symbols are independent
    so the sum bounds ``I(M; Y1, F)`` from below up to estimation error.
    The standard error is a grouped jackknife over frames.
    """
    M, T = eavesdropper_decisions(instance, plan, range(frames), seed, batch)
    q = plan.q["V"]
    K = M.shape[1]
    if K == 0:
        return LeakageEstimate(0.0, 0.0, "plugin-mm", frames, 0)
    full = float(_plugin_mi(M, T, q).sum())
    g = np.array_split(np.arange(frames), groups)
    loo = np.array([_plugin_mi(np.delete(M, idx, 0), np.delete(T, idx, 0), q).sum() for idx in g])
    G = len(g)
    se = math.sqrt((G - 1) / G * ((loo - loo.mean()) ** 2).sum())
    return LeakageEstimate(full, se, "plugin-mm", frames, K)


def _layer_tables(cond_sym, sides, xvecs, kinds_row, q, N):
    """Design and induced laws of a layer's u-vector for each side vector."""
    P = _design_u_table(cond_sym, N, sides, xvecs)
    Q = _induced_factor(conditional_chain(P, q, N), kinds_row, q)
    return P, Q


def induced_tv(instance, plan, con, chunk=16):
    """Exact distance between the encoder's one-block output law and the
    design law on (X1, U, V, X2) vectors.

    Returns a dict with the L1 distance ``tv_l1`` (sum of absolute
    differences), ``kl_nats`` = D(P || Q), the realized deficit sum
    ``deficit`` (base-q units, q = 2 here) and ``bound`` =
    sqrt(2 ln 2 * deficit).  Needs binary layers and N <= 8; cost grows with
    the number of (x1, u) vector pairs of positive mass, so full-support
    designs are only practical at N <= 4.
    """
    N = plan.N
    q = plan.q
    if any(q[L] != 2 for L in ("X1", "U", "V", "X2")):
        raise ExactSizeError("induced_tv supports binary layers only")
    vecs = all_vectors(2, N)
    xs = polar_inverse(vecs, 2)
    full = instance.full
    K = len(vecs)
    k = {L: plan.kinds[L][0] for L in ("X1", "U", "V", "X2")}
    p1 = full.marginal(["X1"]).probs
    P1, Q1 = _layer_tables(p1[None, :], np.zeros((1, N), dtype=np.int64), xs, k["X1"], 2, N)
    P1, Q1 = P1[0], Q1[0]
    Pu, Qu = _layer_tables(full.conditional(["U"], ["X1"]), xs, xs, k["U"], 2, N)
    cv = full.conditional(["V"], ["X1", "U"]).reshape(4, 2)
    cx = full.conditional(["X2"], ["X1", "U", "V"]).reshape(8, 2)
    tv = 0.0
    kl = 0.0
    for a in range(K):
        if P1[a] == 0 and Q1[a] == 0:
            continue
        if not ((Pu[a] > 0) | (Qu[a] > 0)).any():
            continue
        sv = 2 * xs[a][None, :] + xs  # (u, N) side symbols for V
        Pv, Qv = _layer_tables(cv, sv, xs, k["V"], 2, N)
        live = ((Pu[a] > 0) | (Qu[a] > 0))[:, None] & ((Pv > 0) | (Qv > 0))
        pairs = np.argwhere(live)  # (u, v) index pairs of positive mass
        for s in range(0, len(pairs), chunk * K):
            pu, pv = pairs[s:s + chunk * K].T
            side = (4 * xs[a][None, :] + 2 * xs[pu] + xs[pv])
            Px, Qx = _layer_tables(cx, side, xs, k["X2"], 2, N)
            Pj = (P1[a] * Pu[a, pu] * Pv[pu, pv])[:, None] * Px
            Qj = (Q1[a] * Qu[a, pu] * Qv[pu, pv])[:, None] * Qx
            tv += float(np.abs(Pj - Qj).sum())
            with np.errstate(divide="ignore", invalid="ignore"):
                kl += float(np.where(Pj > 0, Pj * np.log(Pj / Qj), 0.0).sum())
    prof = {"X1": "X1", "U": "U|X1", "V": "V|X1U", "X2": "X2|X1UV"}
    deficit = float(sum((1.0 - con.h(p)[k[L] != DET]).sum() for L, p in prof.items()))
    return {"tv_l1": tv, "kl_nats": kl, "deficit": deficit,
            "bound": math.sqrt(2 * math.log(2) * deficit)}
