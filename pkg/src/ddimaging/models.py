"""Variational imaging models: energies, integrands, and corruption synthesis.

Three convex models over images u in [0,1]^(M x N):

* ChanVese:   alpha*<u, g> + box indicator + ||grad u||_1 with
              g = (f - c1)^2 - (f - c2)^2 (two-phase segmentation with
              fixed region values, minimized by a relaxed mask).
* TVL1Deblur: alpha*||A u - f||_1 + ||grad u||_1 with A a uniform blur.
* HessianL1:  alpha*||u - f||_1 + ||H u||_1 with H the backward-of-forward
              second differences (denoising; the data map is the identity).

energy() evaluates the objective; integrand() returns the pointwise energy
density T(u) whose sum equals energy(u), with +inf marking box violations
for ChanVese.  Each model's integrand at a pixel reads u only inside a fixed
stencil footprint of that pixel, which is what stencil_of() reports and what
the subdomain enlargement in the decomposition relies on.
"""

from dataclasses import dataclass

import numpy as np

from .decomposition import Stencil
from .fields import inner, magnitude
from .operators import BlurKernel, blur, grad_plus, hessian


@dataclass(frozen=True, eq=False)
class ChanVese:
    f: np.ndarray
    alpha: float
    c1: float
    c2: float

    def __post_init__(self):
        _check_image(self.f)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.c1 == self.c2:
            raise ValueError("region values c1 and c2 must differ")
        g = (self.f - self.c1) ** 2 - (self.f - self.c2) ** 2
        object.__setattr__(self, "g", g)


@dataclass(frozen=True, eq=False)
class TVL1Deblur:
    f: np.ndarray
    alpha: float
    kernel: BlurKernel

    def __post_init__(self):
        _check_image(self.f)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True, eq=False)
class HessianL1:
    f: np.ndarray
    alpha: float

    def __post_init__(self):
        _check_image(self.f)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


MODELS = (ChanVese, TVL1Deblur, HessianL1)


def _check_image(f):
    f = np.asarray(f)
    if f.ndim != 2 or f.size == 0:
        raise ValueError(f"data image must be a nonempty 2-D array, got shape {f.shape}")
    if not np.isfinite(f).all():
        raise ValueError("data image must be finite")


def _box_ok(u):
    return bool((u >= 0.0).all() and (u <= 1.0).all())


def energy(model, u):
    """Objective value at u.  ChanVese returns +inf outside the box."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != model.f.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {model.f.shape}")
    if isinstance(model, ChanVese):
        if not _box_ok(u):
            return float("inf")
        return model.alpha * inner(u, model.g) + float(np.sum(magnitude(grad_plus(u))))
    if isinstance(model, TVL1Deblur):
        fid = float(np.sum(np.abs(blur(u, model.kernel) - model.f)))
        return model.alpha * fid + float(np.sum(magnitude(grad_plus(u))))
    if isinstance(model, HessianL1):
        fid = float(np.sum(np.abs(u - model.f)))
        return model.alpha * fid + float(np.sum(magnitude(hessian(u))))
    raise TypeError(f"unknown model {type(model).__name__}")


def integrand(model, u):
    """Pointwise energy density T(u) with sum(T) == energy(model, u).

    The fidelity weight alpha is folded into the density.  For ChanVese,
    pixels violating the box constraint carry +inf.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != model.f.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {model.f.shape}")
    if isinstance(model, ChanVese):
        t = model.alpha * (u * model.g) + magnitude(grad_plus(u))
        bad = (u < 0.0) | (u > 1.0)
        if bad.any():
            t = np.where(bad, np.inf, t)
        return t
    if isinstance(model, TVL1Deblur):
        return model.alpha * np.abs(blur(u, model.kernel) - model.f) + magnitude(grad_plus(u))
    if isinstance(model, HessianL1):
        return model.alpha * np.abs(u - model.f) + magnitude(hessian(u))
    raise TypeError(f"unknown model {type(model).__name__}")


def local_energy(model, layout, s, u_s):
    """Sum of the integrand over subdomain s's core tile.

    u_s is a full-size field supported on the enlarged mask; because the
    enlargement contains the integrand's stencil footprint, the value does
    not depend on how u_s is extended outside that mask.
    """
    t = integrand(model, u_s)
    core = layout.core[s]
    if np.isinf(t[core]).any():
        return float("inf")
    return float(np.sum(np.where(core, t, 0.0)))


def stencil_of(model):
    """The enlargement rule matching the model's integrand footprint."""
    if isinstance(model, ChanVese):
        return Stencil("forward1")
    if isinstance(model, TVL1Deblur):
        return Stencil("band", model.kernel.halfwidth)
    if isinstance(model, HessianL1):
        return Stencil("backfwd")
    raise TypeError(f"unknown model {type(model).__name__}")


def salt_pepper(u, p, seed):
    """Salt-and-pepper corruption with per-pixel probability p.

    Corrupted pixels become 0 or 1 with equal probability.  Randomness comes
    from a counter-based (Philox) generator keyed by the seed, with the
    pixel's row-major index selecting its draw, so the result is independent
    of any traversal order and reproducible bit for bit.
    """
    u = np.asarray(u, dtype=np.float64)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"corruption probability must be in [0, 1], got {p!r}")
    gen = np.random.Generator(np.random.Philox(seed))
    hit = gen.random(u.shape) < p
    value = (gen.random(u.shape) < 0.5).astype(np.float64)
    return np.where(hit, value, u)


def threshold_half(u):
    """Binary mask u >= 1/2, ties mapping to 1."""
    return np.where(np.asarray(u, dtype=np.float64) >= 0.5, 1.0, 0.0)
