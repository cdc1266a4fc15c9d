"""Prime-field symbols and the polar transform over Z_q.

Index convention: the math is written with 1-based indices; everything in this
package is 0-based.  Vectors are rows and multiply the generator on the right,
``u = x @ G_N`` with ``G_N = B_N F^{(x)n}`` and ``F = [[1, 0], [1, 1]]``.
The bit-reversal ``B_N`` is applied first, then the Kronecker butterflies, so
that successive-cancellation recursions run in natural index order.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PrimeAlphabet",
    "SymbolVec",
    "is_prime",
    "log2_exact",
    "bit_reversal_permutation",
    "polar_transform",
    "polar_inverse",
    "generator_matrix",
]


def is_prime(q):
    """Trial-division primality test."""
    q = int(q)
    if q < 2:
        return False
    d = 2
    while d * d <= q:
        if q % d == 0:
            return False
        d += 1
    return True


def symbol_dtype(q):
    """Smallest unsigned integer dtype holding ``q - 1``."""
    for dt in (np.uint8, np.uint16, np.uint32):
        if q - 1 <= np.iinfo(dt).max:
            return np.dtype(dt)
    return np.dtype(np.uint64)


@dataclass(frozen=True)
class PrimeAlphabet:
    """The field Z_q for a prime ``q``; symbols are ``0 .. q-1``."""

    q: int

    def __post_init__(self):
        if not is_prime(self.q):
            raise ValueError(f"alphabet size {self.q} is not prime")

    @property
    def dtype(self):
        return symbol_dtype(self.q)

    def add(self, a, b):
        return (np.asarray(a, dtype=np.int64) + b) % self.q

    def mul(self, a, b):
        return (np.asarray(a, dtype=np.int64) * b) % self.q

    def neg(self, a):
        return (-np.asarray(a, dtype=np.int64)) % self.q

    def inv(self, a):
        a = int(a) % self.q
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return pow(a, self.q - 2, self.q)


@dataclass(frozen=True)
class SymbolVec:
    """A length-2^n vector over a prime alphabet."""

    alphabet: PrimeAlphabet
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 1:
            raise ValueError("SymbolVec data must be one-dimensional")
        log2_exact(len(data))
        if data.size and (data.min() < 0 or data.max() >= self.alphabet.q):
            raise ValueError(f"symbols out of range for q={self.alphabet.q}")
        object.__setattr__(self, "data", data.astype(self.alphabet.dtype))

    def __len__(self):
        return len(self.data)

    def __eq__(self, other):
        return (isinstance(other, SymbolVec) and self.alphabet == other.alphabet
                and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.alphabet.q, self.data.tobytes()))


def log2_exact(N):
    """Return n with ``N == 2**n``; raise ValueError otherwise."""
    N = int(N)
    if N < 1 or N & (N - 1):
        raise ValueError(f"length {N} is not a power of two")
    return N.bit_length() - 1


def bit_reversal_permutation(n):
    """Permutation of ``range(2**n)`` reversing n-bit binary representations."""
    N = 1 << n
    perm = np.zeros(N, dtype=np.int64)
    idx = np.arange(N)
    for b in range(n):
        perm |= ((idx >> b) & 1) << (n - 1 - b)
    return perm


def _butterflies(a, q, sign):
    # a: (..., N) int64, modified in place
    N = a.shape[-1]
    lead = a.shape[:-1]
    h = N // 2
    while h >= 1:
        blocks = a.reshape(lead + (N // (2 * h), 2, h))
        blocks[..., 0, :] += sign * blocks[..., 1, :]
        blocks[..., 0, :] %= q
        h //= 2
    return a


def _apply(x, q, sign):
    if isinstance(x, SymbolVec):
        q = x.alphabet.q
        out = _apply(x.data, q, sign)
        return SymbolVec(x.alphabet, out)
    if q is None:
        raise TypeError("q is required for raw arrays")
    arr = np.asarray(x)
    n = log2_exact(arr.shape[-1])
    a = arr[..., bit_reversal_permutation(n)].astype(np.int64)
    a = _butterflies(np.ascontiguousarray(a), q, sign)
    return a.astype(symbol_dtype(q))


def polar_transform(x, q=None):
    """Compute ``u = x @ G_N`` over Z_q in O(N log N).

    ``x`` is either a :class:`SymbolVec` or an integer array whose last axis has
    length 2^n (leading axes are batch axes, in which case ``q`` is required).
    """
    return _apply(x, q, +1)


def polar_inverse(u, q=None):
    """Invert :func:`polar_transform` using the kernel ``[[1, 0], [q-1, 1]]``."""
    return _apply(u, q, -1)


def generator_matrix(n, q):
    """Explicit ``B_N F^{(x)n}`` over Z_q (reference for small N)."""
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.ones((1, 1), dtype=np.int64)
    for _ in range(n):
        G = np.kron(G, F)
    B = np.eye(1 << n, dtype=np.int64)[bit_reversal_permutation(n)]
    return (B @ G) % q
