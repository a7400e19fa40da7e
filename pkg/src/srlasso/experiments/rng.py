"""Counter-based random streams for the experiment data.

Every instance is identified by a 64-bit ``seed``; its three random draws
come from disjoint substreams of the Philox-4x64 generator:

========  ==========  ===========================================
id        name        use
========  ==========  ===========================================
0         ``SIGNAL``  ``W`` in the nonzero entries of ``x_sharp``
1         ``MATRIX``  entries of ``A`` in row-major order
2         ``NOISE``   the noise vector ``w``
========  ==========  ===========================================

Substream ``k`` of seed ``s`` is Philox with the 128-bit key
``s + 2**64 k`` and a zero counter.  A raw 64-bit word ``u`` becomes the
uniform ``((u >> 11) + 0.5) / 2**53``, which lies strictly inside (0, 1),
and a standard normal is ``Phi^{-1}`` of that uniform.  The recipe only
needs Philox and an inverse normal CDF, so it can be replayed in other
languages.
"""

from __future__ import annotations

from statistics import NormalDist

import numpy as np

SIGNAL = 0
MATRIX = 1
NOISE = 2

_MASK64 = (1 << 64) - 1
_PHI = NormalDist()


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def raw_words(seed: int, substream: int, count: int) -> np.ndarray:
    """The first ``count`` 64-bit outputs of substream ``substream``."""
    key = _check_seed(seed) + (int(substream) << 64)
    bg = np.random.Philox(key=key)
    return bg.random_raw(int(count)).astype(np.uint64)


def uniforms(seed: int, substream: int, count: int) -> np.ndarray:
    """Uniforms in the open interval (0, 1) with 53 random bits each."""
    words = raw_words(seed, substream, count)
    return ((words >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


def normals(seed: int, substream: int, count: int) -> np.ndarray:
    """Standard normals by the inverse-CDF transform of :func:`uniforms`."""
    inv = _PHI.inv_cdf
    return np.fromiter((inv(u) for u in uniforms(seed, substream, count).tolist()),
                       dtype=float, count=int(count))


def normal_quantile(p: float) -> float:
    """``Phi^{-1}(p)`` for the standard normal distribution."""
    return _PHI.inv_cdf(p)
