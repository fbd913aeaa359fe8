"""Table-driven GF(2^16) arithmetic on numpy arrays, plus a Vandermonde
encoder and an O(n^2) Bjorck-Pereyra solver used by the file-broadcast MDS
delivery."""
from __future__ import annotations

import numpy as np

POLY = 0x1100B  # x^16 + x^12 + x^3 + x + 1, primitive
ORDER = 0xFFFF


def _tables():
    exp = np.zeros(2 * ORDER, dtype=np.int64)
    log = np.zeros(ORDER + 1, dtype=np.int64)
    x = 1
    for i in range(ORDER):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x10000:
            x ^= POLY
    exp[ORDER:] = exp[:ORDER]
    return exp, log


EXP, LOG = _tables()


def mul(a, b):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    out = EXP[LOG[a] + LOG[b]]
    return np.where((a == 0) | (b == 0), 0, out)


def div(a, b):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if np.any(b == 0):
        raise ZeroDivisionError("division by zero in GF(2^16)")
    out = EXP[(LOG[a] - LOG[b]) % ORDER]
    return np.where(a == 0, 0, out)


def vandermonde_encode(nodes: np.ndarray, symbols: np.ndarray, n_rows: int) -> np.ndarray:
    """Rows j = 0..n_rows-1 of  sum_i nodes[i]^j * symbols[i]  (symbols: (P, s)).

    Nodes must be nonzero.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    symbols = np.asarray(symbols, dtype=np.int64)
    n_sym, width = symbols.shape
    out = np.zeros((n_rows, width), dtype=np.int64)
    if n_sym == 0 or n_rows == 0:
        return out
    log_nodes = LOG[nodes]
    log_sym = LOG[symbols]
    nonzero = symbols != 0
    block = max(1, 4_000_000 // max(1, n_sym * width))
    for start in range(0, n_rows, block):
        j = np.arange(start, min(n_rows, start + block), dtype=np.int64)
        log_pow = (j[:, None] * log_nodes[None, :]) % ORDER
        terms = EXP[log_pow[:, :, None] + log_sym[None, :, :]]
        terms = np.where(nonzero[None, :, :], terms, 0)
        out[j] = np.bitwise_xor.reduce(terms, axis=1)
    return out


def vandermonde_solve(nodes: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve sum_i nodes[i]^j z_i = rhs_j, j = 0..n-1, for distinct nodes.

    Bjorck-Pereyra elimination; subtraction is XOR in characteristic 2.
    """
    x = np.asarray(nodes, dtype=np.int64)
    b = np.array(rhs, dtype=np.int64, copy=True)
    n = x.size
    if b.shape[0] != n:
        raise ValueError("need one right-hand side row per node")
    for k in range(n - 1):
        b[k + 1:] ^= mul(x[k], b[k:n - 1].copy())
    for k in range(n - 2, -1, -1):
        b[k + 1:] = div(b[k + 1:], (x[k + 1:] ^ x[:n - k - 1])[:, None])
        b[k:n - 1] ^= b[k + 1:].copy()
    return b


def bits_to_symbols(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 vector (length multiple of 16) into 16-bit big-endian symbols."""
    packed = np.packbits(bits.astype(np.uint8))
    return packed.view(">u2").astype(np.int64)


def symbols_to_bits(symbols: np.ndarray) -> np.ndarray:
    raw = np.asarray(symbols, dtype=">u2").ravel().view(np.uint8)
    return np.unpackbits(raw)
