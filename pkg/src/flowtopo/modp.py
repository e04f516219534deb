"""Dense linear algebra over the prime field Z/p."""

from __future__ import annotations

import numpy as np

MAX_PRIME = 2**31


class InvalidPrime(ValueError):
    pass


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def check_prime(p) -> int:
    if int(p) != p or not (2 <= p < MAX_PRIME) or not is_prime(int(p)):
        raise InvalidPrime(f"{p!r} is not a prime below 2^31")
    return int(p)


def _as_int(A, p):
    return np.mod(np.asarray(A, dtype=object if p > 3037000499 else np.int64), p)


def row_echelon(A, p: int):
    """Reduced row echelon form of ``A`` mod p.

    Returns ``(R, pivots)`` with ``pivots`` the pivot column of each nonzero
    row of ``R``.
    """
    R = _as_int(A, p).copy()
    if R.ndim != 2:
        raise ValueError("expected a matrix")
    rows, cols = R.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(R[r:, c])
        if len(nz) == 0:
            continue
        k = r + nz[0]
        if k != r:
            R[[r, k]] = R[[k, r]]
        R[r] = (R[r] * pow(int(R[r, c]), p - 2, p)) % p
        col = R[:, c].copy()
        col[r] = 0
        nzr = np.flatnonzero(col)
        if len(nzr):
            R[nzr] = (R[nzr] - np.outer(col[nzr], R[r])) % p
        pivots.append(c)
        r += 1
    return R, pivots


def rank(A, p: int) -> int:
    A = np.asarray(A)
    if A.size == 0:
        return 0
    return len(row_echelon(A, p)[1])


def nullspace(A, p: int) -> np.ndarray:
    """Basis of {x : A x = 0 mod p}, as the columns of the returned matrix."""
    A = np.asarray(A)
    n = A.shape[1]
    if A.shape[0] == 0 or A.size == 0:
        return np.eye(n, dtype=np.int64)
    R, pivots = row_echelon(A, p)
    free = [c for c in range(n) if c not in set(pivots)]
    N = np.zeros((n, len(free)), dtype=R.dtype)
    for j, f in enumerate(free):
        N[f, j] = 1
        for i, pc in enumerate(pivots):
            N[pc, j] = (-R[i, f]) % p
    return N


def solve(A, b, p: int):
    """One solution x of A x = b mod p, or None if the system is inconsistent."""
    A = _as_int(A, p)
    b = _as_int(b, p).reshape(-1, 1)
    R, pivots = row_echelon(np.hstack([A, b]), p)
    n = A.shape[1]
    if n in pivots:
        return None
    x = np.zeros(n, dtype=R.dtype)
    for i, pc in enumerate(pivots):
        x[pc] = R[i, n]
    return x
