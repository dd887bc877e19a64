import numpy as np

from ddimaging.decomposition import OverlapLayout, Stencil
from ddimaging.fields import inner
from ddimaging.operators import (
    BlurKernel,
    RestrictedOp,
    adjoint_dxm,
    adjoint_dxp,
    adjoint_dym,
    adjoint_dyp,
    adjoint_grad_minus,
    adjoint_grad_plus,
    adjoint_hessian,
    blur,
    dxm,
    dxp,
    dym,
    dyp,
    grad_minus,
    grad_plus,
    hessian,
    op_norm_sq_estimate,
)


def dense_matrix(op, in_shape, out_of):
    """Materialize a linear map as a dense matrix, columns from unit inputs."""
    size = int(np.prod(in_shape))
    cols = []
    for k in range(size):
        e = np.zeros(size)
        e[k] = 1.0
        cols.append(np.asarray(op(e.reshape(in_shape))).ravel())
    del out_of
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def test_dxp_example():
    u = np.array([[1.0, 3.0], [2.0, 4.0]])
    assert np.array_equal(dxp(u), [[1.0, 1.0], [0.0, 0.0]])


def test_dyp_example():
    u = np.array([[1.0, 3.0], [2.0, 4.0]])
    assert np.array_equal(dyp(u), [[2.0, 0.0], [2.0, 0.0]])


def test_backward_differences_drop_first_row_col():
    u = np.array([[1.0, 3.0], [2.0, 4.0]])
    assert np.array_equal(dxm(u), [[0.0, 0.0], [1.0, 1.0]])
    assert np.array_equal(dym(u), [[0.0, 2.0], [0.0, 2.0]])


def test_grad_plus_stacks_row_then_col():
    rng = np.random.default_rng(0)
    u = rng.standard_normal((6, 5))
    g = grad_plus(u)
    assert g.shape == (6, 5, 2)
    assert np.array_equal(g[..., 0], dxp(u))
    assert np.array_equal(g[..., 1], dyp(u))
    h = grad_minus(u)
    assert np.array_equal(h[..., 0], dxm(u))
    assert np.array_equal(h[..., 1], dym(u))


def test_difference_adjoints_are_dense_transposes():
    shape = (4, 5)
    pairs = [
        (dxp, adjoint_dxp),
        (dxm, adjoint_dxm),
        (dyp, adjoint_dyp),
        (dym, adjoint_dym),
    ]
    for fwd, adj in pairs:
        a = dense_matrix(fwd, shape, shape)
        b = dense_matrix(adj, shape, shape)
        assert np.array_equal(b, a.T)


def test_grad_and_hessian_adjoint_identity():
    rng = np.random.default_rng(42)
    for _ in range(200):
        m = int(rng.integers(2, 9))
        n = int(rng.integers(2, 9))
        u = rng.standard_normal((m, n))
        p = rng.standard_normal((m, n, 2))
        lhs = inner(grad_plus(u), p)
        rhs = inner(u, adjoint_grad_plus(p))
        scale = max(1.0, abs(lhs))
        assert abs(lhs - rhs) <= 1e-12 * scale
        lhs = inner(grad_minus(u), p)
        rhs = inner(u, adjoint_grad_minus(p))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
        q = rng.standard_normal((m, n, 4))
        lhs = inner(hessian(u), q)
        rhs = inner(u, adjoint_hessian(q))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_hessian_frozen_column():
    u = np.arange(3, dtype=np.float64).reshape(3, 1)
    h = hessian(u)
    assert np.array_equal(h[..., 0].ravel(), [0.0, 0.0, -1.0])
    assert np.array_equal(h[..., 1], np.zeros((3, 1)))


def test_hessian_channels_match_composed_differences():
    rng = np.random.default_rng(1)
    u = rng.standard_normal((7, 6))
    h = hessian(u)
    assert np.array_equal(h[..., 0], dxm(dxp(u)))
    assert np.array_equal(h[..., 1], dym(dxp(u)))
    assert np.array_equal(h[..., 2], dxm(dyp(u)))
    assert np.array_equal(h[..., 3], dym(dyp(u)))


def test_hessian_annihilates_affine_interior():
    i = np.arange(8, dtype=np.float64)[:, None]
    j = np.arange(9, dtype=np.float64)[None, :]
    u = 3.0 + 2.0 * i + np.zeros_like(j) - 5.0 * j
    h = hessian(u)
    # second differences of an affine field vanish away from the border rows;
    # integer values keep the cancellation exact
    assert np.abs(h[1:-1, 1:-1]).max() == 0.0


# ---------------------------------------------------------------------------
# blur
# ---------------------------------------------------------------------------


def test_blur_center_impulse_example():
    u = np.zeros((3, 3))
    u[1, 1] = 9.0
    out = blur(u, BlurKernel(1))
    assert np.allclose(out, np.ones((3, 3)), rtol=0, atol=1e-14)


def test_blur_constant_corner_example():
    u = np.ones((5, 5))
    out = blur(u, BlurKernel(1))
    assert abs(out[0, 0] - 4.0 / 9.0) <= 1e-14
    assert abs(out[2, 2] - 1.0) <= 1e-14


def test_blur_matches_direct_window_sum():
    rng = np.random.default_rng(2)
    u = rng.standard_normal((9, 8))
    l = 2
    k = BlurKernel(l)
    out = blur(u, k)
    m, n = u.shape
    want = np.zeros_like(u)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for a in range(i - l, i + l + 1):
                for b in range(j - l, j + l + 1):
                    if 0 <= a < m and 0 <= b < n:
                        acc += u[a, b]
            want[i, j] = acc / (2 * l + 1) ** 2
    assert np.allclose(out, want, rtol=0, atol=1e-12)


def test_blur_is_self_adjoint():
    rng = np.random.default_rng(3)
    k = BlurKernel(3)
    for _ in range(50):
        u = rng.standard_normal((11, 13))
        v = rng.standard_normal((11, 13))
        lhs = inner(blur(u, k), v)
        rhs = inner(u, blur(v, k))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_blur_kernel_validation():
    try:
        BlurKernel(0)
    except ValueError:
        pass
    else:
        raise AssertionError("halfwidth 0 accepted")
    assert BlurKernel(4).size == 9


# ---------------------------------------------------------------------------
# operator norms
# ---------------------------------------------------------------------------


def test_norm_estimate_identity():
    est = op_norm_sq_estimate(lambda x: x, lambda x: x, (16, 16), iters=5)
    assert abs(est - 1.0) <= 1e-12


def test_norm_estimate_grad_bounds():
    est = op_norm_sq_estimate(grad_plus, adjoint_grad_plus, (64, 64), iters=100)
    assert 7.5 < est <= 8.0 * (1.0 + 1e-12)


def test_norm_estimate_hessian_bound():
    est = op_norm_sq_estimate(hessian, adjoint_hessian, (64, 64), iters=100)
    assert est <= 64.0 * (1.0 + 1e-12)
    assert est > 40.0


def test_norm_estimate_blur_bound():
    k = BlurKernel(4)
    est = op_norm_sq_estimate(
        lambda x: blur(x, k), lambda x: blur(x, k), (64, 64), iters=100
    )
    assert 0.5 < est <= 1.0 * (1.0 + 1e-12)


def test_norm_estimate_scaling():
    est = op_norm_sq_estimate(lambda x: 3.0 * x, lambda x: 3.0 * x, (8, 8), iters=3)
    assert abs(est - 9.0) <= 1e-10


# ---------------------------------------------------------------------------
# restricted operators
# ---------------------------------------------------------------------------


def _layouts_for_kinds():
    shape = (6, 7)
    return [
        ("grad_plus", OverlapLayout.from_grid(shape, 2, 2, Stencil("forward1")), None),
        ("hessian", OverlapLayout.from_grid(shape, 2, 2, Stencil("backfwd")), None),
        ("blur", OverlapLayout.from_grid(shape, 2, 2, Stencil("band", 2)), BlurKernel(2)),
        ("identity", OverlapLayout.from_grid(shape, 2, 2, Stencil("forward1")), None),
    ]


def test_restricted_adjoint_is_dense_transpose():
    for kind, layout, kernel in _layouts_for_kinds():
        for s in range(layout.count):
            op = RestrictedOp(kind, layout, s, kernel=kernel)
            fwd = dense_matrix(op, layout.shape, None)
            adj_in_shape = op(np.zeros(layout.shape)).shape
            adj = dense_matrix(op.adjoint, adj_in_shape, None)
            assert np.allclose(adj, fwd.T, rtol=0, atol=1e-14), (kind, s)


def test_restricted_matches_global_on_core():
    rng = np.random.default_rng(8)
    for kind, layout, kernel in _layouts_for_kinds():
        full = {
            "grad_plus": grad_plus,
            "hessian": hessian,
            "blur": lambda x: blur(x, kernel),
            "identity": lambda x: x,
        }[kind]
        u = rng.standard_normal(layout.shape)
        for s in range(layout.count):
            op = RestrictedOp(kind, layout, s, kernel=kernel)
            got = op(u * layout.tilde_f[s])
            want = full(u)
            core = layout.core_f[s]
            if want.ndim == 3:
                want = want * core[..., None]
            else:
                want = want * core
            assert np.array_equal(got, want), (kind, s)


def test_core_values_ignore_extension_outside_patch():
    # the enlargement is big enough: junk outside it cannot reach the core
    rng = np.random.default_rng(9)
    for kind, layout, kernel in _layouts_for_kinds():
        full = {
            "grad_plus": grad_plus,
            "hessian": hessian,
            "blur": lambda x: blur(x, kernel),
            "identity": lambda x: x,
        }[kind]
        u = rng.standard_normal(layout.shape)
        for s in range(layout.count):
            inside = u * layout.tilde_f[s]
            junk = inside + 1e6 * rng.standard_normal(layout.shape) * (
                1.0 - layout.tilde_f[s]
            )
            a = full(inside)
            b = full(junk)
            core = layout.core_f[s]
            mask = core[..., None] if a.ndim == 3 else core
            assert np.array_equal(a * mask, b * mask), (kind, s)


def test_restricted_rejects_unknown_kind():
    layout = OverlapLayout.from_grid((4, 4), 1, 1, Stencil("forward1"))
    try:
        RestrictedOp("laplace", layout, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("bad kind accepted")
