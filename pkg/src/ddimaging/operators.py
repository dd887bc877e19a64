"""Discrete difference operators, uniform blur, and their exact adjoints.

Forward differences use the homogeneous Neumann convention: the difference is
zero at the last row/column.  Backward differences are zero at the first
row/column.  Adjoints are built by scatter-adding the transposed stencil, so
each adjoint is the exact matrix transpose of its forward operator including
the boundary rows; the identity <K u, w> == <u, K* w> then holds to round-off
with no boundary-case exceptions.

Vector fields stack (row-difference, column-difference) along the last axis.
The composed second-order operator hessian() stacks its four channels in the
order (xx, xy, yx, yy) where "x" means the row direction.
"""

from dataclasses import dataclass

import numpy as np

from .fields import norm2


# ---------------------------------------------------------------------------
# first differences
# ---------------------------------------------------------------------------


def dxp(u):
    """Forward row difference, zero at the last row."""
    out = np.zeros_like(u, dtype=np.float64)
    out[:-1, :] = u[1:, :] - u[:-1, :]
    return out


def dxm(u):
    """Backward row difference, zero at the first row."""
    out = np.zeros_like(u, dtype=np.float64)
    out[1:, :] = u[1:, :] - u[:-1, :]
    return out


def dyp(u):
    """Forward column difference, zero at the last column."""
    out = np.zeros_like(u, dtype=np.float64)
    out[:, :-1] = u[:, 1:] - u[:, :-1]
    return out


def dym(u):
    """Backward column difference, zero at the first column."""
    out = np.zeros_like(u, dtype=np.float64)
    out[:, 1:] = u[:, 1:] - u[:, :-1]
    return out


def adjoint_dxp(p):
    out = np.zeros_like(p, dtype=np.float64)
    out[1:, :] += p[:-1, :]
    out[:-1, :] -= p[:-1, :]
    return out


def adjoint_dxm(p):
    out = np.zeros_like(p, dtype=np.float64)
    out[1:, :] += p[1:, :]
    out[:-1, :] -= p[1:, :]
    return out


def adjoint_dyp(p):
    out = np.zeros_like(p, dtype=np.float64)
    out[:, 1:] += p[:, :-1]
    out[:, :-1] -= p[:, :-1]
    return out


def adjoint_dym(p):
    out = np.zeros_like(p, dtype=np.float64)
    out[:, 1:] += p[:, 1:]
    out[:, :-1] -= p[:, 1:]
    return out


# ---------------------------------------------------------------------------
# gradients and the second-order composition
# ---------------------------------------------------------------------------


def grad_plus(u):
    """Forward gradient: (M, N) -> (M, N, 2)."""
    return np.stack((dxp(u), dyp(u)), axis=-1)


def grad_minus(u):
    """Backward gradient: (M, N) -> (M, N, 2)."""
    return np.stack((dxm(u), dym(u)), axis=-1)


def adjoint_grad_plus(p):
    """Adjoint of grad_plus: (M, N, 2) -> (M, N)."""
    return adjoint_dxp(p[..., 0]) + adjoint_dyp(p[..., 1])


def adjoint_grad_minus(p):
    """Adjoint of grad_minus: (M, N, 2) -> (M, N)."""
    return adjoint_dxm(p[..., 0]) + adjoint_dym(p[..., 1])


def hessian(u):
    """Backward-of-forward second differences: (M, N) -> (M, N, 4).

    Channel order (xx, xy, yx, yy): the backward x/y differences of the
    forward x derivative, then of the forward y derivative.
    """
    wx = dxp(u)
    wy = dyp(u)
    return np.stack((dxm(wx), dym(wx), dxm(wy), dym(wy)), axis=-1)


def adjoint_hessian(t):
    """Adjoint of hessian: (M, N, 4) -> (M, N)."""
    wx = adjoint_dxm(t[..., 0]) + adjoint_dym(t[..., 1])
    wy = adjoint_dxm(t[..., 2]) + adjoint_dym(t[..., 3])
    return adjoint_dxp(wx) + adjoint_dyp(wy)


# ---------------------------------------------------------------------------
# uniform blur
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlurKernel:
    """Uniform square kernel of side 2*halfwidth + 1 with zero padding."""

    halfwidth: int

    def __post_init__(self):
        if int(self.halfwidth) != self.halfwidth or self.halfwidth < 1:
            raise ValueError(f"halfwidth must be an integer >= 1, got {self.halfwidth!r}")

    @property
    def size(self):
        return 2 * self.halfwidth + 1


def blur(u, kernel):
    """Mean over the (2l+1)^2 window, pixels outside the grid read as zero.

    The kernel is symmetric, so the operator is self-adjoint; the window sum
    always divides by the full tap count, which pulls values toward zero at
    the image border.

    Computed by shift-and-add over the window offsets in a fixed order, so
    each output reads exactly its own window pixels.  A running-sum filter
    would be faster but lets roundoff from far-away pixels leak into every
    output, which would spoil the exact locality the subdomain enlargements
    are built on.
    """
    u = np.asarray(u, dtype=np.float64)
    m, n = u.shape
    l = kernel.halfwidth
    acc = np.zeros_like(u)
    for di in range(-l, l + 1):
        for dj in range(-l, l + 1):
            a0, a1 = max(0, -di), m - max(di, 0)
            b0, b1 = max(0, -dj), n - max(dj, 0)
            if a0 < a1 and b0 < b1:
                acc[a0:a1, b0:b1] += u[a0 + di:a1 + di, b0 + dj:b1 + dj]
    return acc / float(kernel.size ** 2)


def adjoint_blur(u, kernel):
    """Adjoint of blur (equal to blur: the kernel is symmetric)."""
    return blur(u, kernel)


# ---------------------------------------------------------------------------
# operator norm estimation
# ---------------------------------------------------------------------------


def op_norm_sq_estimate(op, adjoint, shape, iters=100, seed=0):
    """Power-iteration estimate of the squared operator norm.

    Iterates x <- op*(op(x)) from a seeded random start and returns the last
    Rayleigh quotient <x, op*(op(x))> = ||op(x)||^2 for unit x, which is a
    lower bound on the true squared norm and increases toward it.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    n = norm2(x)
    if n == 0.0:
        raise ValueError("degenerate start vector")
    x = x / n
    est = 0.0
    for _ in range(iters):
        y = adjoint(op(x))
        est = float(np.sum(x * y))
        n = norm2(y)
        if n == 0.0:
            return 0.0
        x = y / n
    return est


# ---------------------------------------------------------------------------
# subdomain-restricted application
# ---------------------------------------------------------------------------


class RestrictedOp:
    """An operator confined to one subdomain of an overlapping layout.

    The forward map restricts its argument to the enlarged patch of
    subdomain s and masks the result to the core tile; the adjoint restricts
    to the core and masks back to the enlarged patch, so it is the exact
    dense transpose of the forward map on all of pixel space.  Because the
    enlarged patch contains the full stencil footprint of the core tile,
    the input restriction never changes values on the core: the forward map
    agrees with the unrestricted operator there for any extension.

    kind is one of "grad_plus", "hessian", "blur", "identity"; "blur" needs
    a BlurKernel.
    """

    KINDS = ("grad_plus", "hessian", "blur", "identity")

    def __init__(self, kind, layout, s, kernel=None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown restricted operator kind {kind!r}")
        if kind == "blur" and kernel is None:
            raise ValueError("blur restriction needs a kernel")
        self.kind = kind
        self.layout = layout
        self.s = s
        self.kernel = kernel

    def __call__(self, u):
        core = self.layout.core_f[self.s]
        u = np.asarray(u, dtype=np.float64) * self.layout.tilde_f[self.s]
        if self.kind == "grad_plus":
            return grad_plus(u) * core[..., None]
        if self.kind == "hessian":
            return hessian(u) * core[..., None]
        if self.kind == "blur":
            return blur(u, self.kernel) * core
        return u * core

    def adjoint(self, w):
        core = self.layout.core_f[self.s]
        tilde = self.layout.tilde_f[self.s]
        if self.kind == "grad_plus":
            return adjoint_grad_plus(w * core[..., None]) * tilde
        if self.kind == "hessian":
            return adjoint_hessian(w * core[..., None]) * tilde
        if self.kind == "blur":
            return blur(w * core, self.kernel) * tilde
        return np.asarray(w, dtype=np.float64) * core * tilde
