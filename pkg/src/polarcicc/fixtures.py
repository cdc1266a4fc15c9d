"""Programmatic builders for the small instances used in tests and demos."""

import numpy as np

from .dist import CiccInstance, JointDist

__all__ = [
    "bsc",
    "symmetric_channel",
    "layered_design",
    "split_channel",
    "case_fixture",
    "identity_fixture",
    "same_output_fixture",
    "constant_y1_fixture",
    "near_degraded_fixture",
    "bsc_pair_fixture",
    "skewed_common_fixture",
    "CASE_PARAMS",
]


def symmetric_channel(q, eps):
    """q-ary symmetric channel: keep the input with prob ``1 - eps``."""
    W = np.full((q, q), eps / (q - 1) if q > 1 else 0.0)
    np.fill_diagonal(W, 1.0 - eps)
    return W


def bsc(eps):
    return symmetric_channel(2, eps)


def layered_design(q=2, rho=0.1, tau=0.05, p_x1=None, p_u=None):
    """X1 and U independent, V = U + noise(rho), X2 = V + noise(tau) over Z_q."""
    p_x1 = np.full(q, 1.0 / q) if p_x1 is None else np.asarray(p_x1, float)
    p_u = np.full(q, 1.0 / q) if p_u is None else np.asarray(p_u, float)
    Wv = symmetric_channel(q, rho)
    Wx = symmetric_channel(q, tau)
    p = np.einsum("u,uv,x,vw->uvxw", p_u, Wv, p_x1, Wx)
    return JointDist([("U", q), ("V", q), ("X1", q), ("X2", q)], p)


def split_channel(W1a, W1b, W2a, W2b):
    """Y_k = (X1 through W_ka, X2 through W_kb), flattened to one symbol."""
    y1 = np.einsum("ai,bj->abij", W1a, W1b)
    y2 = np.einsum("ai,bj->abij", W2a, W2b)
    q1, q2, i1, j1 = y1.shape
    i2, j2 = y2.shape[2:]
    y1 = y1.reshape(q1, q2, i1 * j1)
    y2 = y2.reshape(q1, q2, i2 * j2)
    return y1[:, :, :, None] * y2[:, :, None, :]


# (a1, b1, a2, b2): crossover of X1 and X2 toward receiver 1 and 2
CASE_PARAMS = {
    "1": (0.03, 0.2, 0.01, 0.01),
    "2": (0.01, 0.01, 0.03, 0.04),
    "3": (0.03, 0.005, 0.005, 0.03),
    "4": (0.005, 0.2, 0.03, 0.005),
}


def case_fixture(case, rho=0.2, tau=0.02):
    """Binary instance whose mutual-information ordering lands in ``case``."""
    a1, b1, a2, b2 = CASE_PARAMS[str(case)]
    ch = split_channel(bsc(a1), bsc(b1), bsc(a2), bsc(b2))
    return CiccInstance(ch, layered_design(2, rho, tau), name=f"case-{case}")


def identity_fixture(q=2):
    """Both receivers see (X1, X2) noiselessly and the design is deterministic in U."""
    I = np.eye(q)
    ch = split_channel(I, I, I, I)
    return CiccInstance(ch, layered_design(q, 0.0, 0.0), name=f"identity-q{q}")


def same_output_fixture(eps=0.05, rho=0.1, tau=0.05):
    """Y1 = Y2 almost surely."""
    y = split_channel(bsc(eps), bsc(eps), np.eye(2), np.eye(2)).sum(axis=3)
    y = np.einsum("abi,ij->abij", y, np.eye(y.shape[2]))
    return CiccInstance(y, layered_design(2, rho, tau), name="same-output")


def constant_y1_fixture(eps=0.05, rho=0.1, tau=0.05):
    """Receiver 1 sees a constant symbol."""
    y2 = split_channel(bsc(eps), bsc(eps), np.eye(2), np.eye(2)).sum(axis=3)
    ch = np.zeros((2, 2, 1, y2.shape[2]))
    ch[:, :, 0, :] = y2
    return CiccInstance(ch, layered_design(2, rho, tau), name="constant-y1")


def near_degraded_fixture(b1=0.35, b2=0.03, tau=0.05):
    """Constant X1 and U; receiver 1 is a noisier view of X2 than receiver 2.

    The common layers carry nothing, so secrecy analysis reduces to the
    V and X2 layers.
    """
    p1 = np.array([1.0, 0.0])
    des = layered_design(2, 0.5, tau, p_x1=p1, p_u=p1)
    y1 = np.einsum("a,bi->abi", np.ones(2), bsc(b1))
    y2 = np.einsum("a,bi->abi", np.ones(2), bsc(b2))
    ch = y1[:, :, :, None] * y2[:, :, None, :]
    return CiccInstance(ch, des, name="near-degraded")


def bsc_pair_fixture():
    """Bundled reference instance: mild noise toward both receivers."""
    ch = split_channel(bsc(0.05), bsc(0.08), bsc(0.04), bsc(0.03))
    return CiccInstance(ch, layered_design(2, 0.1, 0.05), name="bsc-pair")


def skewed_common_fixture():
    """Biased X1 and U with V = U and X2 = V; only the common layers are random."""
    ch = split_channel(bsc(0.05), bsc(0.08), bsc(0.04), bsc(0.03))
    des = layered_design(2, 0.0, 0.0, p_x1=[0.8, 0.2], p_u=[0.7, 0.3])
    return CiccInstance(ch, des, name="skewed-common")
