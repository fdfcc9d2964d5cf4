"""Forward-difference gradient, its negative adjoint, and total variation."""
from __future__ import annotations

import numpy as np


def gradient(I, out=None):
    """``(N, N, 2)`` forward differences; channel 0 vertical, channel 1 horizontal."""
    I = np.asarray(I, dtype=float)
    if out is None:
        out = np.empty(I.shape + (2,))
    out[:-1, :, 0] = I[1:] - I[:-1]
    out[-1, :, 0] = 0.0
    out[:, :-1, 1] = I[:, 1:] - I[:, :-1]
    out[:, -1, 1] = 0.0
    return out


def divergence(z, out=None):
    """Negative adjoint of :func:`gradient`."""
    z = np.asarray(z, dtype=float)
    z1, z2 = z[..., 0], z[..., 1]
    if out is None:
        out = np.empty(z.shape[:2])
    out[0] = z1[0]
    out[1:-1] = z1[1:-1] - z1[:-2]
    out[-1] = -z1[-2]
    out[:, 0] += z2[:, 0]
    out[:, 1:-1] += z2[:, 1:-1] - z2[:, :-2]
    out[:, -1] -= z2[:, -2]
    return out


def edge_mask(mask):
    """Difference terms whose two endpoints both lie inside ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    e = np.zeros(mask.shape + (2,), dtype=bool)
    e[:-1, :, 0] = mask[1:] & mask[:-1]
    e[:, :-1, 1] = mask[:, 1:] & mask[:, :-1]
    return e


def gradient_magnitude(I, edges=None):
    g = gradient(I)
    if edges is not None:
        g = g * edges
    return np.sqrt(g[..., 0] ** 2 + g[..., 1] ** 2)


def tv(I, g=None, mask=None) -> float:
    """Isotropic total variation in grid units, optionally weighted by ``g``.

    With ``mask`` the differences crossing out of the mask are dropped, so the
    mask border costs nothing.
    """
    mag = gradient_magnitude(I, None if mask is None else edge_mask(mask))
    if g is not None:
        g = np.broadcast_to(np.asarray(g, dtype=float), mag.shape)
        if np.any(g <= 0):
            raise ValueError("TV weight g must be positive")
        mag = g * mag
    return float(np.sum(mag))
