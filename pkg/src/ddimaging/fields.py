"""Pixel fields, norms, and pointwise projections.

An image on an M x N pixel grid is a float64 array of shape (M, N), indexed
u[i, j] with i the row and j the column.  Vector fields (two channels) and
tensor fields (four channels) carry their channels along the last axis, so
their shapes are (M, N, 2) and (M, N, 4).  All functions here are pure: they
never modify their arguments.
"""

import math

import numpy as np


def magnitude(x):
    """Pointwise magnitude of a field.

    Scalars give |x|; multi-channel fields give the root-sum-square over
    the trailing channel axis.  Returns an (M, N) array.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return np.abs(x)
    if x.ndim == 3:
        return np.sqrt(np.sum(x * x, axis=-1))
    raise ValueError(f"expected a 2-D or 3-D field, got shape {x.shape}")


def inner(u, v):
    """Euclidean inner product of two fields of identical shape.

    Summation is numpy's pairwise reduction over the flattened product,
    which is deterministic for a fixed shape and exactly symmetric in the
    two arguments.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    return float(np.sum(u * v))


def norm2(x):
    """Euclidean norm of a field (all entries, any shape)."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.sum(x * x)))


def pnorm(x, p):
    """Field p-norm built on the pointwise magnitude.

    Parameters
    ----------
    x : array
        Scalar, vector, or tensor field.
    p : int
        1 or 2.  p=1 sums pointwise magnitudes; p=2 is the Euclidean norm
        of the magnitude field, i.e. the usual 2-norm over all channels.
    """
    m = magnitude(x)
    if p == 1:
        return float(np.sum(m))
    if p == 2:
        return float(np.sqrt(np.sum(m * m)))
    raise ValueError(f"p must be 1 or 2, got {p!r}")


def project_box01(u):
    """Clamp a scalar field to [0, 1] pointwise."""
    return np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)


def project_ball(x, r):
    """Pointwise Euclidean projection onto the ball of radius r.

    Each pixel's channel vector (or scalar value) is rescaled onto the
    radius-r ball; pixels already inside are returned unchanged, bit for
    bit, since their scale factor is exactly 1.
    """
    if not r > 0:
        raise ValueError(f"ball radius must be positive, got {r!r}")
    x = np.asarray(x, dtype=np.float64)
    scale = np.maximum(1.0, magnitude(x) / r)
    if x.ndim == 3:
        scale = scale[..., None]
    return x / scale


def psnr(u, ref):
    """Peak signal-to-noise ratio in dB against a reference in [0, 1].

    Peak value is 1.0, so psnr = 10*log10(1/mse).  A zero mean squared
    error returns math.inf.
    """
    u = np.asarray(u, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if u.shape != ref.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {ref.shape}")
    mse = float(np.mean((u - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)
