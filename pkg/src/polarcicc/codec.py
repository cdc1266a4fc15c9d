"""Frame encoders and decoders for the layered chained scheme.

Everything is batched: arrays carry a leading frame axis ``B`` and a block
axis of length ``m``.  All randomness of frame ``f`` comes from
``stream(seed, FRAME_KEY, f)``, so a frame's content does not depend on
which batch or worker processed it.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .construction import (
    CHAIN, DET, FRESH, FROZEN, LAYERS, MSG, PARTS, SEED, SPECIAL, W,
)
from .dist import stream
from .sc import sc_pass

__all__ = [
    "FRAME_KEY",
    "ENC_SIDE",
    "FrameRandomness",
    "FrameTranscript",
    "draw_randomness",
    "layer_prior",
    "sc_encode_layer",
    "sc_decode_layer",
    "encode_frames",
    "transmit",
    "decode_rx",
    "message_errors",
    "randomness_consumed",
    "TRANSCRIPT_VERSION",
]

FRAME_KEY = 0xF4
TRANSCRIPT_VERSION = 1
ENC_SIDE = {"X1": (), "U": ("X1",), "V": ("X1", "U"), "X2": ("X1", "U", "V")}


def _dec_side(layer, r):
    return {"X1": ("Y%d" % r,), "U": ("X1", "Y%d" % r), "V": ("X1", "U", "Y%d" % r)}[layer]


@dataclass
class FrameRandomness:
    """Pre-drawn randomness of a batch of frames.

    Shapes: ``frozen[L]`` (B, N) reused by every block; ``special[L]``,
    ``msg[L]``, ``unif[L]`` (B, m, N); ``seed`` and ``w`` (B, N);
    ``fresh`` and ``chan`` (B, m, N).
    """

    frozen: dict
    special: dict
    msg: dict
    unif: dict
    seed: np.ndarray
    w: np.ndarray
    fresh: np.ndarray
    chan: np.ndarray


def draw_randomness(plan, seed, frames):
    """Draw per-frame randomness for the frame indices in ``frames``."""
    m, N, q = plan.m, plan.N, plan.q
    per = []
    for f in frames:
        g = stream(seed, FRAME_KEY, int(f))
        d = {"frozen": {}, "special": {}, "msg": {}, "unif": {}}
        for L in LAYERS:
            d["frozen"][L] = g.integers(0, q[L], N)
            d["special"][L] = g.integers(0, q[L], (m, N))
            d["msg"][L] = g.integers(0, q[L], (m, N))
            d["unif"][L] = g.random((m, N))
        d["seed"] = g.integers(0, q["V"], N)
        d["w"] = g.integers(0, q["X2"], N)
        d["fresh"] = g.integers(0, q["X2"], (m, N))
        d["chan"] = g.random((m, N))
        per.append(d)

    def stack(get):
        return np.stack([get(d) for d in per])

    return FrameRandomness(
        frozen={L: stack(lambda d: d["frozen"][L]) for L in LAYERS},
        special={L: stack(lambda d: d["special"][L]) for L in LAYERS},
        msg={L: stack(lambda d: d["msg"][L]) for L in LAYERS},
        unif={L: stack(lambda d: d["unif"][L]) for L in LAYERS},
        seed=stack(lambda d: d["seed"]),
        w=stack(lambda d: d["w"]),
        fresh=stack(lambda d: d["fresh"]),
        chan=stack(lambda d: d["chan"]),
    )


def layer_prior(instance, target, given, values, shape=None):
    """``P(target^i | given^i)`` per position as a (B, N, q) array.

    ``values`` maps each name in ``given`` to a (B, N) symbol array;
    ``shape`` gives (B, N) when ``given`` is empty.
    """
    c = instance.full.conditional([target], list(given))
    if not given:
        return np.broadcast_to(c, tuple(shape) + (c.shape[-1],))
    return c[tuple(values[g] for g in given)]


def _sample_from(post, u):
    cdf = np.cumsum(post, axis=-1)
    idx = (cdf < u[:, None] * cdf[:, -1:]).sum(axis=-1)
    return np.minimum(idx, post.shape[-1] - 1)


def sc_encode_layer(prior, known_mask, known_vals, uniforms):
    """Fill known positions, sample the rest from their SC conditionals.

    Returns ``(u, x)``, each (B, N).
    """
    def decide(j, post):
        if known_mask[j]:
            return known_vals[:, j]
        return _sample_from(post, uniforms[:, j])

    return sc_pass(prior, decide)


def sc_decode_layer(prior, known_mask, known_vals):
    """Copy known positions; elsewhere take the most likely symbol
    (ties toward the smaller symbol)."""
    def decide(j, post):
        if known_mask[j]:
            return known_vals[:, j]
        return np.argmax(post, axis=-1)

    return sc_pass(prior, decide)


def _fixed_values(plan, rnd, layer, b, u_src, receiver=None):
    """Values of every non-sampled position of (layer, block b)."""
    k = plan.kinds[layer][b]
    B = rnd.seed.shape[0]
    vals = np.zeros((B, plan.N), dtype=np.int64)
    sel = k == MSG
    vals[:, sel] = rnd.msg[layer][:, b, sel]
    sel = k == FROZEN
    vals[:, sel] = rnd.frozen[layer][:, sel]
    sel = k == SPECIAL
    vals[:, sel] = rnd.special[layer][:, b, sel]
    sel = k == SEED
    vals[:, sel] = rnd.seed[:, sel]
    sel = k == W
    vals[:, sel] = rnd.w[:, sel]
    sel = k == FRESH
    vals[:, sel] = rnd.fresh[:, b, sel]
    for ln in plan.links:
        if ln.dst_layer == layer and ln.dst_block == b:
            vals[:, ln.dst_pos] = u_src[ln.src_layer][:, ln.src_block][:, ln.src_pos]
    return vals


def encode_frames(instance, plan, rnd):
    """Run both transmitters for a batch.

    Returns ``(u, x)``: dicts layer -> (B, m, N) arrays in the u and x domains.
    Transmitter 2 sees every x1 block in advance; the common layers are
    produced in the weak receiver's decoding order so chained values exist
    before they are copied.
    """
    B = rnd.seed.shape[0]
    m, N = plan.m, plan.N
    u = {L: np.zeros((B, m, N), dtype=np.int64) for L in LAYERS}
    x = {L: np.zeros((B, m, N), dtype=np.int64) for L in LAYERS}

    def run(layer, b):
        given = ENC_SIDE[layer]
        prior = layer_prior(instance, layer, given, {g: x[g][:, b] for g in given}, (B, N))
        mask = plan.kinds[layer][b] != DET
        vals = _fixed_values(plan, rnd, layer, b, u)
        u[layer][:, b], x[layer][:, b] = sc_encode_layer(prior, mask, vals, rnd.unif[layer][:, b])

    for b in plan.block_order(plan.weak):
        run("X1", b)
        run("U", b)
    for b in range(m):
        run("V", b)
        run("X2", b)
    return u, x


def transmit(instance, x, chan_uniforms):
    """Pass (x1, x2) through the channel; returns (y1, y2)."""
    ch = instance.channel
    ny2 = ch.shape[3]
    cdf = np.cumsum(ch.reshape(ch.shape[0], ch.shape[1], -1), axis=-1)
    c = cdf[x["X1"], x["X2"]]
    idx = (c < chan_uniforms[..., None] * c[..., -1:]).sum(axis=-1)
    idx = np.minimum(idx, c.shape[-1] - 1)
    return idx // ny2, idx % ny2


def decode_rx(instance, plan, rnd, u_true, y, receiver, layers=None):
    """Decode the frame at ``receiver`` (1 or 2).

    ``u_true`` supplies the genie side transmissions (almost-deterministic
    indices unreliable for this receiver).  Receiver 1 decodes X1 then U;
    receiver 2 additionally decodes V.  Returns dicts layer -> (B, m, N) of
    u- and x-domain estimates.
    """
    if layers is None:
        layers = ("X1", "U") if receiver == 1 else ("X1", "U", "V")
    B = rnd.seed.shape[0]
    m, N = plan.m, plan.N
    du = {L: np.zeros((B, m, N), dtype=np.int64) for L in layers}
    dx = {L: np.zeros((B, m, N), dtype=np.int64) for L in layers}
    yname = "Y%d" % receiver
    for b in plan.block_order(receiver):
        for layer in layers:
            k = plan.kinds[layer][b]
            mask = plan.known_mask(receiver, layer, b)
            vals = np.zeros((B, N), dtype=np.int64)
            sel = k == FROZEN
            vals[:, sel] = rnd.frozen[layer][:, sel]
            sel = k == SPECIAL
            vals[:, sel] = rnd.special[layer][:, b, sel]
            if receiver == 2:
                sel = k == SEED
                vals[:, sel] = rnd.seed[:, sel]
            side = sorted(plan.side.get((layer, receiver), ()))
            if side:
                vals[:, side] = u_true[layer][:, b][:, side]
            for dst, sl, sb, sp in plan.known_from_chain(receiver, layer, b):
                vals[:, dst] = du[sl][:, sb][:, sp]
            given = _dec_side(layer, receiver)
            obs = {yname: y[:, b]}
            for g in given:
                if g != yname:
                    obs[g] = dx[g][:, b]
            prior = layer_prior(instance, layer, given, obs)
            du[layer][:, b], dx[layer][:, b] = sc_decode_layer(prior, mask, vals)
    return du, dx


def message_errors(plan, u_true, du, receiver):
    """Per-frame error flags for the messages ``receiver`` must recover.

    Receiver 1 must recover every common-layer message symbol; receiver 2
    every message symbol of the frame.
    """
    layers = ("X1", "U") if receiver == 1 else ("X1", "U", "V")
    B = next(iter(u_true.values())).shape[0]
    err = np.zeros(B, dtype=bool)
    for L in layers:
        sel = plan.kinds[L] == MSG
        if sel.any():
            err |= (u_true[L][:, sel] != du[L][:, sel]).any(axis=1)
    return err


def randomness_consumed(plan):
    """Fresh uniform prefix symbols drawn per frame, counted from the block roles."""
    k = plan.kinds["X2"]
    return int((k[0] == W).sum() + (k == FRESH).sum())


@dataclass
class FrameTranscript:
    """Everything exchanged in a batch of frames, for replay and auditing."""

    u: dict
    x: dict
    y1: np.ndarray
    y2: np.ndarray
    frames: np.ndarray
    decoded: dict = field(default_factory=dict)

    def to_bytes(self):
        arrs = {"version": np.array([TRANSCRIPT_VERSION]), "frames": self.frames,
                "y1": self.y1, "y2": self.y2}
        for L, a in self.u.items():
            arrs["u_" + L] = a
        for L, a in self.x.items():
            arrs["x_" + L] = a
        for (r, L), a in self.decoded.items():
            arrs[f"d{r}_{L}"] = a
        buf = io.BytesIO()
        np.savez(buf, **arrs)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data):
        z = np.load(io.BytesIO(data))
        v = int(z["version"][0])
        if v != TRANSCRIPT_VERSION:
            raise ValueError(f"unsupported transcript version {v}")
        u = {k[2:]: z[k] for k in z.files if k.startswith("u_")}
        x = {k[2:]: z[k] for k in z.files if k.startswith("x_")}
        dec = {(int(k[1]), k[3:]): z[k] for k in z.files if k.startswith("d")}
        return cls(u=u, x=x, y1=z["y1"], y2=z["y2"], frames=z["frames"], decoded=dec)
