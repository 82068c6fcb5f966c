"""Numpy implementation of the match kernels.

Mirrors ``_kernels.pyx`` operation for operation so both produce identical
results; see ``semjoin.kernels`` for the selection logic.
"""
import numpy as np

PHI = 0.6180339887498949  # fractional part of the golden ratio

_K1 = np.uint64(0x9E3779B97F4A7C15)
_K2 = np.uint64(0xC2B2AE3D27D4EB4F)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def lattice_pairs(ids1, ids2, sigma, phase1, phase2):
    """Row-major local positions ``(rows, cols)`` of matching pairs.

    A pair matches when ``frac(frac(id1*PHI + phase1) + frac(id2*sigma + phase2)) < sigma``.
    For a fixed first id, matches recur every ``1/sigma`` second ids, and the
    golden-ratio offsets spread rows evenly, so any rectangle of consecutive
    ids holds close to ``sigma`` times its area in matches.
    """
    ids1 = np.asarray(ids1, dtype=np.int64)
    ids2 = np.asarray(ids2, dtype=np.int64)
    a = ids1.astype(np.float64) * PHI + phase1
    a -= np.floor(a)
    b = ids2.astype(np.float64) * sigma + phase2
    b -= np.floor(b)
    c = a[:, None] + b[None, :]
    c[c >= 1.0] -= 1.0
    rows, cols = np.nonzero(c < sigma)
    return rows.astype(np.int64), cols.astype(np.int64)


def hash_pairs(ids1, ids2, sigma, seed):
    """Independent pseudo-random matches, each with probability ``sigma``."""
    u1 = np.asarray(ids1, dtype=np.int64).astype(np.uint64)
    u2 = np.asarray(ids2, dtype=np.int64).astype(np.uint64)
    x = (u1 * _K1)[:, None] + (u2 * _K2)[None, :] + np.uint64(seed)
    x ^= x >> np.uint64(30)
    x *= _M1
    x ^= x >> np.uint64(27)
    x *= _M2
    x ^= x >> np.uint64(31)
    u = (x >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    rows, cols = np.nonzero(u < sigma)
    return rows.astype(np.int64), cols.astype(np.int64)


def emitted_prefix(n_matches, pair_tokens, max_output_tokens, sentinel_tokens=1):
    """Number of pairs that fit in an answer, and whether the end marker fits too."""
    if n_matches * pair_tokens + sentinel_tokens <= max_output_tokens:
        return n_matches, True
    return min(n_matches, max(0, max_output_tokens) // pair_tokens), False
