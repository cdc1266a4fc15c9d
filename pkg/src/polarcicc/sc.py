"""q-ary successive-cancellation machinery shared by construction, encoding
and decoding.

``sc_pass`` walks the polar tree once.  At every leaf ``j`` (natural order) it
hands the posterior ``P(U^j | side^{1:N}, u^{1:j-1})`` to a ``decide``
callback, which returns the symbol that is then fixed for position ``j``.
What the callback does (record, sample, argmax, copy) is up to the caller.
"""

import numpy as np

from .field import bit_reversal_permutation, log2_exact

__all__ = ["sc_pass", "posterior_entropy", "synthetic_entropies", "MERGE_TOL"]

MERGE_TOL = 1e-12


def _normalize(P):
    s = P.sum(axis=-1, keepdims=True)
    q = P.shape[-1]
    return np.where(s > 0, P / np.where(s > 0, s, 1.0), 1.0 / q)


def _check_node(PL, PR, q):
    # P(s = c) with s = a_L + a_R mod q
    if q == 2:
        out = np.empty_like(PL)
        out[..., 0] = PL[..., 0] * PR[..., 0] + PL[..., 1] * PR[..., 1]
        out[..., 1] = PL[..., 1] * PR[..., 0] + PL[..., 0] * PR[..., 1]
        return out
    out = np.zeros_like(PL)
    for b in range(q):
        out += PL[..., (np.arange(q) - b) % q] * PR[..., b:b + 1]
    return out


def _var_node(PL, PR, s, q):
    # P(a_R = b | s) proportional to P_L(s - b) P_R(b)
    idx = (s[..., None] - np.arange(q)) % q
    return np.take_along_axis(PL, idx, axis=-1) * PR


def _recurse(P, q, decide, offset):
    size = P.shape[1]
    if size == 1:
        v = np.asarray(decide(offset, P[:, 0, :]), dtype=np.int64)
        return v[:, None]
    h = size // 2
    PL, PR = P[:, :h], P[:, h:]
    s = _recurse(_normalize(_check_node(PL, PR, q)), q, decide, offset)
    aR = _recurse(_normalize(_var_node(PL, PR, s, q)), q, decide, offset + h)
    return np.concatenate([(s - aR) % q, aR], axis=1)


def sc_pass(prior, decide):
    """Run one SC pass.

    Parameters
    ----------
    prior : ndarray, shape (B, N, q)
        ``prior[b, i, a] = P(X^i = a | side^i)`` for each batch row, natural
        (un-permuted) x order.
    decide : callable
        ``decide(j, post) -> ndarray (B,)`` where ``post`` has shape (B, q).

    Returns
    -------
    u : ndarray, shape (B, N)
        The decided u-domain symbols.
    x : ndarray, shape (B, N)
        The matching x-domain sequence, ``u = x G_N``.
    """
    prior = np.asarray(prior, dtype=float)
    if prior.ndim == 2:
        prior = prior[None]
    B, N, q = prior.shape
    n = log2_exact(N)
    perm = bit_reversal_permutation(n)
    u = np.zeros((B, N), dtype=np.int64)

    def record(j, post):
        v = decide(j, post)
        u[:, j] = v
        return v

    a = _recurse(_normalize(prior[:, perm, :]), q, record, 0)
    x = np.empty_like(a)
    x[:, perm] = a
    return u, x


def posterior_entropy(post, q):
    """Entropy of each row of ``post`` in base-q units."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(post > 0, post * np.log(post), 0.0)
    return np.maximum(-t.sum(axis=-1) / np.log(q), 0.0)


def _merge(w, post, tol):
    keep = w > 0
    w, post = w[keep], post[keep]
    key = np.round(post / tol).astype(np.int64) if tol > 0 else post
    _, inv = np.unique(key, axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    K = inv.max() + 1
    wm = np.bincount(inv, weights=w, minlength=K)
    pm = np.zeros((K, post.shape[1]))
    np.add.at(pm, inv, post * w[:, None])
    return wm, pm / wm[:, None]


def _minus(w, post, q):
    K = len(w)
    A = np.repeat(post, K, axis=0)
    Bm = np.tile(post, (K, 1))
    return np.outer(w, w).ravel(), _normalize(_check_node(A, Bm, q))


def _plus(w, post, q):
    K = len(w)
    A = np.repeat(post, K, axis=0)
    Bm = np.tile(post, (K, 1))
    ww = np.outer(w, w).ravel()
    ps = _check_node(A, Bm, q)
    ws, posts = [], []
    for s in range(q):
        sv = np.full(len(ww), s)
        ws.append(ww * ps[:, s])
        posts.append(_normalize(_var_node(A, Bm, sv, q)))
    return np.concatenate(ws), np.concatenate(posts)


def synthetic_entropies(weights, posts, n, q, merge_tol=MERGE_TOL, max_support=2_000_000):
    """Exact ``H_q(U^j | side^{1:N}, U^{1:j-1})`` for every j.

    The source/side pair is described by the law of the posterior vector
    ``P(X | side)``: support points ``posts`` (K, q) with masses ``weights``.
    Each tree level squares the support (times q on the plus branch); equal
    posteriors are merged.
    """
    out = np.zeros(1 << n)

    def walk(w, p, depth, index):
        if depth == n:
            out[index] = float(np.dot(w, posterior_entropy(p, q)))
            return
        if len(w) ** 2 * q > max_support:
            raise MemoryError(
                f"posterior support {len(w)} too large for exact recursion at depth {depth}")
        bit = n - depth - 1
        wm, pm = _merge(*_minus(w, p, q), merge_tol)
        walk(wm, pm, depth + 1, index)
        wp, pp = _merge(*_plus(w, p, q), merge_tol)
        walk(wp, pp, depth + 1, index | (1 << bit))

    w0, p0 = _merge(np.asarray(weights, float), np.asarray(posts, float), merge_tol)
    walk(w0, p0, 0, 0)
    return out
