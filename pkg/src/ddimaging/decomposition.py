"""Rectangular partitions, enlarged subdomains, and the consensus projection.

The image grid is split into a P x Q grid of disjoint rectangular tiles.
Each tile is enlarged to the minimal pixel set whose values determine the
model integrand on the tile; the enlargement rule is a Stencil, one of

* forward1: the tile plus its one-pixel forward (down and right) shifts,
* band(l):  all pixels within Chebyshev distance l of the tile,
* backfwd:  the reads of second differences (backward of forward) at the
  tile, a plus shape with the two anti-diagonal corners in the interior.

A stacked field is an (S, M, N) float64 array holding one per-subdomain copy
of the image; entries outside subdomain s's enlarged mask are identically
zero.  The consensus projection replaces every copy of a shared pixel by the
mean over the subdomains whose enlarged mask contains it, which is the
orthogonal projection onto the subspace of copies that agree on overlaps.
Per-pixel sums always run over ascending subdomain index in a single pass,
so results are reproducible bit for bit regardless of how local work is
scheduled.
"""

from dataclasses import dataclass

import numpy as np

from .fields import norm2


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stencil:
    """Enlargement rule for a subdomain: kind in {forward1, band, backfwd}."""

    kind: str
    halfwidth: int = 0

    def __post_init__(self):
        if self.kind not in ("forward1", "band", "backfwd"):
            raise ValueError(f"unknown stencil kind {self.kind!r}")
        if self.kind == "band" and self.halfwidth < 1:
            raise ValueError("band stencil needs halfwidth >= 1")


def _shifted(mask, di, dj):
    """Shift a boolean mask by (di, dj), filling with False."""
    out = np.zeros_like(mask)
    r0, r1 = max(di, 0), mask.shape[0] + min(di, 0)
    c0, c1 = max(dj, 0), mask.shape[1] + min(dj, 0)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = mask[r0 - di:r1 - di, c0 - dj:c1 - dj]
    return out


def _forward_one(mask):
    return mask | _shifted(mask, 1, 0) | _shifted(mask, 0, 1)


def _backfwd(mask):
    """Reads of the second-difference stencil at the masked pixels.

    In the interior this is the plus shape with the two anti-diagonal
    corners, i.e. the forward-one enlargement of the backward-one
    enlargement.  Backward differences are zero on the first row / column,
    which annihilates the channels read through them, so contributions are
    only collected where the corresponding channel survives; without this
    pruning a tile pinned to the top-left corner would claim neighbors that
    can never reach it.
    """
    below_top = mask.copy()
    below_top[0, :] = False
    right_of_edge = mask.copy()
    right_of_edge[:, 0] = False
    out = mask.copy()
    for di, dj in ((-1, 0), (1, 0), (-1, 1), (0, 1)):
        out |= _shifted(below_top, di, dj)
    for di, dj in ((0, -1), (1, -1), (1, 0), (0, 1)):
        out |= _shifted(right_of_edge, di, dj)
    return out


def essential_domain(mask, stencil):
    """Enlarge a subdomain mask by the given stencil, clipped to the grid."""
    mask = np.asarray(mask, dtype=bool)
    if stencil.kind == "forward1":
        return _forward_one(mask)
    if stencil.kind == "backfwd":
        return _backfwd(mask)
    out = mask.copy()
    l = stencil.halfwidth
    for di in range(-l, l + 1):
        for dj in range(-l, l + 1):
            if di == 0 and dj == 0:
                continue
            out |= _shifted(mask, di, dj)
    return out


# ---------------------------------------------------------------------------
# partitions and layouts
# ---------------------------------------------------------------------------


def partition_rect(shape, p, q):
    """Split an M x N grid into p x q rectangular tiles.

    Rows (and columns) are divided as evenly as possible with the larger
    bands first, e.g. 5 rows over 2 bands gives heights 3, 2.  Returns the
    tiles in row-major order as half-open index boxes (i0, i1, j0, j1).
    """
    m, n = shape
    if not (1 <= p <= m and 1 <= q <= n):
        raise ValueError(f"cannot split {m}x{n} into {p}x{q} nonempty tiles")

    def edges(total, parts):
        base, rem = divmod(total, parts)
        sizes = [base + 1] * rem + [base] * (parts - rem)
        e = [0]
        for sz in sizes:
            e.append(e[-1] + sz)
        return e

    re = edges(m, p)
    ce = edges(n, q)
    return [
        (re[a], re[a + 1], ce[b], ce[b + 1])
        for a in range(p)
        for b in range(q)
    ]


class OverlapLayout:
    """Masks and counts for one overlapping decomposition.

    Attributes
    ----------
    shape : (M, N)
    tiles : list of half-open boxes, row-major
    core, tilde : (S, M, N) bool
        Tile masks and their stencil enlargements.
    core_f, tilde_f : (S, M, N) float64
        The same masks as 0/1 floats, for arithmetic.
    counts : (M, N) float64
        How many enlarged masks contain each pixel (>= 1 everywhere).
    """

    def __init__(self, shape, tiles, stencil):
        m, n = shape
        s_count = len(tiles)
        core = np.zeros((s_count, m, n), dtype=bool)
        for s, (i0, i1, j0, j1) in enumerate(tiles):
            core[s, i0:i1, j0:j1] = True
        if not core.any(axis=0).all():
            raise ValueError("tiles do not cover the grid")
        if core.sum(axis=0).max() > 1:
            raise ValueError("tiles overlap")
        tilde = np.zeros_like(core)
        for s in range(s_count):
            tilde[s] = essential_domain(core[s], stencil)
            if not (core[s] <= tilde[s]).all():
                raise RuntimeError("enlargement lost core pixels")
        self.shape = (m, n)
        self.stencil = stencil
        self.tiles = list(tiles)
        self.core = core
        self.tilde = tilde
        self.core_f = core.astype(np.float64)
        self.tilde_f = tilde.astype(np.float64)
        self.counts = self.tilde_f.sum(axis=0)
        self.interface = self.counts >= 2.0

    @classmethod
    def from_grid(cls, shape, p, q, stencil):
        return cls(shape, partition_rect(shape, p, q), stencil)

    @property
    def count(self):
        return self.core.shape[0]


def restrict_global(u, layout):
    """Stack a global field into per-subdomain copies on the enlarged masks."""
    u = np.asarray(u, dtype=np.float64)
    return u[None, :, :] * layout.tilde_f


def stack_sum(stacked, layout):
    """Ascending-index single-pass sum of the per-subdomain copies."""
    total = np.zeros(layout.shape, dtype=np.float64)
    for s in range(layout.count):
        total += stacked[s]
    return total


def assemble_global(stacked, layout):
    """Membership average of a stacked field: one global (M, N) image."""
    return stack_sum(stacked, layout) / layout.counts


def project_consensus(stacked, layout):
    """Orthogonal projection onto consistent stacked fields.

    Every pixel copy becomes the mean over the subdomains sharing that
    pixel; pixels owned by a single subdomain are returned unchanged.
    """
    return assemble_global(stacked, layout)[None, :, :] * layout.tilde_f


def consensus_norm_sq(avg, layout):
    """Squared stacked norm of the consistent field with average avg."""
    return float(np.sum(avg * avg * layout.counts))


def consensus_residual(stacked, layout):
    """Norm of the inconsistency: distance from the consensus subspace."""
    return norm2(stacked - project_consensus(stacked, layout))


def pair_jumps(stacked, layout):
    """Pairwise disagreement fields on shared pixels.

    Yields (s, t, mask, diff) for s < t with overlapping enlarged masks,
    where diff = copy_s - copy_t on the shared mask and zero elsewhere.
    Shared pixels can belong to more than two subdomains; these fields are
    diagnostics and carry no weighting.
    """
    out = []
    for s in range(layout.count):
        for t in range(s + 1, layout.count):
            shared = layout.tilde[s] & layout.tilde[t]
            if not shared.any():
                continue
            diff = (stacked[s] - stacked[t]) * shared
            out.append((s, t, shared, diff))
    return out
