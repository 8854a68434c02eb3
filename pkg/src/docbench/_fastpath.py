"""Compiled inner loops for edit-distance work.

The kernels here implement the same two-row Wagner-Fischer recurrence as the
pure-Python path in metrics.py; numba only compiles it. When numba cannot be
imported the module still loads and HAVE_NUMBA is False, so callers can fall
back to the interpreted implementation.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True, nogil=True)
def distance_kernel(a: np.ndarray, b: np.ndarray, substitution_cost: int) -> int:
    """Edit distance between two code-point arrays."""
    la = a.shape[0]
    lb = b.shape[0]
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev = np.empty(lb + 1, np.int64)
    cur = np.empty(lb + 1, np.int64)
    for j in range(lb + 1):
        prev[j] = j
    for i in range(1, la + 1):
        cur[0] = i
        ca = a[i - 1]
        for j in range(1, lb + 1):
            best = prev[j - 1]
            if ca != b[j - 1]:
                best += substitution_cost
            up = prev[j] + 1
            if up < best:
                best = up
            left = cur[j - 1] + 1
            if left < best:
                best = left
            cur[j] = best
        prev, cur = cur, prev
    return prev[lb]


@njit(cache=True, nogil=True)
def matrix_kernel(
    ea: np.ndarray,
    el: np.ndarray,
    ga: np.ndarray,
    gl: np.ndarray,
    substitution_cost: int,
) -> np.ndarray:
    """Pairwise Levenshtein ratios: extracted rows x ground-truth columns.

    ea/ga hold zero-padded code points, el/gl the true lengths. The only
    shortcut is exact token equality, which cannot change any entry.
    """
    m = el.shape[0]
    n = gl.shape[0]
    out = np.empty((m, n), np.float64)
    width = ga.shape[1] + 1
    prev = np.empty(width, np.int64)
    cur = np.empty(width, np.int64)
    for i in range(m):
        la = el[i]
        for j in range(n):
            lb = gl[j]
            if la == 0 and lb == 0:
                out[i, j] = 1.0
                continue
            if la == lb:
                equal = True
                for k in range(la):
                    if ea[i, k] != ga[j, k]:
                        equal = False
                        break
                if equal:
                    out[i, j] = 1.0
                    continue
            for jj in range(lb + 1):
                prev[jj] = jj
            for ii in range(1, la + 1):
                cur[0] = ii
                ca = ea[i, ii - 1]
                for jj in range(1, lb + 1):
                    best = prev[jj - 1]
                    if ca != ga[j, jj - 1]:
                        best += substitution_cost
                    up = prev[jj] + 1
                    if up < best:
                        best = up
                    left = cur[jj - 1] + 1
                    if left < best:
                        best = left
                    cur[jj] = best
                tmp = prev
                prev = cur
                cur = tmp
            out[i, j] = 1.0 - prev[lb] / (la + lb)
    return out


def encode_string(text: str) -> np.ndarray:
    """Code points of a string as an array the kernels accept."""
    return np.array([ord(c) for c in text], dtype=np.uint32)


def encode_tokens(tokens) -> tuple[np.ndarray, np.ndarray]:
    """Pad token code points into one matrix; returns (matrix, lengths)."""
    lengths = np.array([len(t) for t in tokens], dtype=np.int64)
    width = max(1, int(lengths.max()) if len(tokens) else 1)
    out = np.zeros((len(tokens), width), dtype=np.uint32)
    for row, token in enumerate(tokens):
        for col, char in enumerate(token):
            out[row, col] = ord(char)
    return out, lengths


def warmup() -> None:
    """Trigger JIT compilation so later calls pay no compile cost."""
    if not HAVE_NUMBA:
        return
    a = encode_string("ab")
    b = encode_string("ba")
    distance_kernel(a, b, 2)
    ea, el = encode_tokens(("ab", "c"))
    ga, gl = encode_tokens(("ab", "d"))
    matrix_kernel(ea, el, ga, gl, 2)
