"""Counter-based random streams (Philox4x32-10).

Every random number used by an ensemble is a pure function of
``(seed, stream, path, block)``: the 128-bit counter is
``(block, stream, path_lo, path_hi)`` and the 64-bit key is the master seed.
That makes results independent of how paths are split across workers.

One block yields four 32-bit words, i.e. two 53-bit uniforms, i.e. two
standard normals through Box-Muller.

``philox4x32`` / ``block_normals`` are plain-numpy reference versions; the
``nb_*`` functions are the same arithmetic compiled for the simulation kernels.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
ROUNDS = 10

# stream ids (second counter word)
STREAM_DYNAMICS = 0
STREAM_INIT = 1
STREAM_FEYNMAN_KAC = 2
STREAM_DECAY = 3
STREAM_AUTOCORR = 4
STREAM_PERMUTATION = 5

_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
_INV53 = 1.0 / 9007199254740992.0


def split_seed(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def philox4x32(c0, c1, c2, c3, k0: int, k1: int):
    """Philox4x32-10 on (broadcastable) counter words; returns four uint64 arrays of 32-bit words."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in (c0, c1, c2, c3))
    m0, m1 = np.uint64(PHILOX_M0), np.uint64(PHILOX_M1)
    for r in range(ROUNDS):
        kk0 = np.uint64((k0 + r * PHILOX_W0) & 0xFFFFFFFF)
        kk1 = np.uint64((k1 + r * PHILOX_W1) & 0xFFFFFFFF)
        p0 = m0 * c0
        p1 = m1 * c2
        c0, c1, c2, c3 = (p1 >> _SHIFT) ^ c1 ^ kk0, p1 & _MASK32, (p0 >> _SHIFT) ^ c3 ^ kk1, p0 & _MASK32
    return c0, c1, c2, c3


def _words_to_uniforms(w0, w1, w2, w3):
    u1 = ((w0 >> np.uint64(5)).astype(np.float64) * 67108864.0 + (w1 >> np.uint64(6)).astype(np.float64)) * _INV53
    u2 = ((w2 >> np.uint64(5)).astype(np.float64) * 67108864.0 + (w3 >> np.uint64(6)).astype(np.float64)) * _INV53
    return u1, u2


def block_uniforms(seed: int, stream: int, paths, block: int):
    """Two uniforms on ``[0, 1)`` per path for counter block ``block``."""
    k0, k1 = split_seed(seed)
    paths = np.asarray(paths, dtype=np.uint64)
    w = philox4x32(np.uint64(block), np.uint64(stream), paths & _MASK32, paths >> _SHIFT, k0, k1)
    return _words_to_uniforms(*w)


def block_normals(seed: int, stream: int, paths, block: int) -> np.ndarray:
    """Two standard normals per path for counter block ``block``; shape ``(n, 2)``."""
    u1, u2 = block_uniforms(seed, stream, paths, block)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    ang = 2.0 * math.pi * u2
    return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)


@nb.njit(inline="always")
def nb_philox(c0, c1, c2, c3, k0, k1):
    mask = np.uint64(0xFFFFFFFF)
    sh = np.uint64(32)
    m0 = np.uint64(PHILOX_M0)
    m1 = np.uint64(PHILOX_M1)
    for _ in range(ROUNDS):
        p0 = m0 * c0
        p1 = m1 * c2
        n0 = ((p1 >> sh) ^ c1 ^ k0) & mask
        n1 = p1 & mask
        n2 = ((p0 >> sh) ^ c3 ^ k1) & mask
        n3 = p0 & mask
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + np.uint64(PHILOX_W0)) & mask
        k1 = (k1 + np.uint64(PHILOX_W1)) & mask
    return c0, c1, c2, c3


@nb.njit(inline="always")
def nb_normal_pair(k0, k1, stream, path, block):
    mask = np.uint64(0xFFFFFFFF)
    p = np.uint64(path)
    w0, w1, w2, w3 = nb_philox(np.uint64(block) & mask, np.uint64(stream), p & mask, p >> np.uint64(32), k0, k1)
    u1 = (float(w0 >> np.uint64(5)) * 67108864.0 + float(w1 >> np.uint64(6))) * _INV53
    u2 = (float(w2 >> np.uint64(5)) * 67108864.0 + float(w3 >> np.uint64(6))) * _INV53
    r = math.sqrt(-2.0 * math.log1p(-u1))
    ang = 2.0 * math.pi * u2
    return r * math.cos(ang), r * math.sin(ang)


@nb.njit(nogil=True, cache=True)
def nb_block_normals(k0, k1, stream, paths, block):
    out = np.empty((paths.size, 2))
    for i in range(paths.size):
        z1, z2 = nb_normal_pair(k0, k1, stream, paths[i], block)
        out[i, 0] = z1
        out[i, 1] = z2
    return out


def block_normals_compiled(seed: int, stream: int, paths, block: int) -> np.ndarray:
    """Compiled twin of :func:`block_normals` (used to cross-check the kernels)."""
    k0, k1 = split_seed(seed)
    return nb_block_normals(np.uint64(k0), np.uint64(k1), np.uint64(stream), np.asarray(paths, dtype=np.int64), block)


def equilibrium_init(seed: int, paths, alpha: float):
    """Per-path draw of ``(theta0, kappa0)`` from ``mu`` on the init stream."""
    paths = np.asarray(paths, dtype=np.uint64)
    z = block_normals(seed, STREAM_INIT, paths, 0)
    u, _ = block_uniforms(seed, STREAM_INIT, paths, 1)
    return 2.0 * math.pi * u, alpha * z[:, 0]


def box_init(seed: int, paths, theta_range, kappa_range):
    """Per-path uniform draw on a compact box ``theta_range x kappa_range``."""
    paths = np.asarray(paths, dtype=np.uint64)
    u, v = block_uniforms(seed, STREAM_INIT, paths, 0)
    th = theta_range[0] + (theta_range[1] - theta_range[0]) * u
    ka = kappa_range[0] + (kappa_range[1] - kappa_range[0]) * v
    return th, ka
