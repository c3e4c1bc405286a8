"""Arithmetic in GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).

Scalars are ints in 0..255; vectors and matrices are ``numpy.uint8`` arrays.
Multiplication goes through a full 256x256 product table so that matrix
products vectorise as a single fancy-indexing step.
"""

import numpy as np

from .errors import SingularMatrixError

POLY = 0x11D
GENERATOR = 2

EXP = np.zeros(512, dtype=np.uint8)
LOG = np.zeros(256, dtype=np.int32)


def _build_tables():
    x = 1
    for i in range(255):
        EXP[i] = x
        LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= POLY
    EXP[255:510] = EXP[0:255]
    log = LOG[1:].astype(np.int64)
    table = np.zeros((256, 256), dtype=np.uint8)
    table[1:, 1:] = EXP[(log[:, None] + log[None, :]) % 255]
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = EXP[(255 - log) % 255]
    return table, inv


MUL, INV = _build_tables()


def mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def inverse(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(INV[a])


def power(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return int(EXP[(int(LOG[a]) * e) % 255])


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of an (m, k) and a (k, L) matrix over the field."""
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    return np.bitwise_xor.reduce(MUL[a[:, :, None], b[None, :, :]], axis=1)


def mat_inverse(m: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse of a square matrix over the field."""
    size = m.shape[0]
    work = np.concatenate([m.astype(np.uint8), np.eye(size, dtype=np.uint8)], axis=1)
    for col in range(size):
        nonzero = np.nonzero(work[col:, col])[0]
        if nonzero.size == 0:
            raise SingularMatrixError(f"matrix is singular (column {col})")
        pivot = col + int(nonzero[0])
        if pivot != col:
            work[[col, pivot]] = work[[pivot, col]]
        work[col] = MUL[INV[work[col, col]], work[col]]
        factors = work[:, col].copy()
        factors[col] = 0
        work ^= MUL[factors[:, None], work[col][None, :]]
    return work[:, size:]


def vandermonde(points, columns: int) -> np.ndarray:
    """Rows [x^0, x^1, ..., x^(columns-1)] for each evaluation point x (with 0^0 = 1)."""
    return np.array([[power(x, j) for j in range(columns)] for x in points], dtype=np.uint8)
