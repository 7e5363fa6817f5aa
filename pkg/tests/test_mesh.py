import numpy as np
import pytest

from kfplab.kolgeom import KCylinder, KPoint
from kfplab.mesh import (
    BoxDomain,
    EmptyRegionError,
    Field,
    Tag,
    VectorField,
    build_grid,
    classify_boundary,
    div_x,
    grad_matrices,
    grad_x,
    hminus1_norm,
    inner,
    integrate,
    laplace_y,
    transport,
)

UNIT = BoxDomain.cube(1, (0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
SYM = BoxDomain.cube(1, (-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0))


def test_build_grid_basics():
    g = build_grid(UNIT, 3, 3, 3)
    assert g.size == 27 and g.hx == (0.5,) and g.hy == (0.5,) and g.ht == 0.5
    fine = build_grid(UNIT, 5, 3, 3)
    assert fine.hx == (0.25,) and fine.hy == g.hy and fine.ht == g.ht
    p = g.node((0, 0, 0))
    assert p.x[0] == 0.0 and p.y[0] == 0.0 and p.t == 0.0
    assert build_grid(SYM, 5, 5, 3).x_nodes(0)[2] == 0.0
    with pytest.raises(ValueError):
        build_grid(UNIT, 2, 3, 3)


def test_boundary_tags():
    g = build_grid(SYM, 5, 5, 3)
    tags = classify_boundary(g).tags
    # axes: (t, y, x); x nodes -1, -.5, 0, .5, 1
    assert np.all(tags[0, 1:-1, 1:-1] == Tag.SIGMA_MINUS)
    assert tags[1, -1, 3] == Tag.SIGMA_PLUS
    assert tags[1, -1, 1] == Tag.SIGMA_MINUS
    assert tags[1, -1, 2] == Tag.SIGMA_ZERO
    assert np.all(tags[..., 0] == Tag.GAMMA) and np.all(tags[..., -1] == Tag.GAMMA)
    assert tags[1, 2, 2] == Tag.INTERIOR
    bc = classify_boundary(g)
    assert bc.kolmogorov.sum() + bc.free.sum() == g.size


def test_grad_x_exact_on_linears_and_constants():
    g = build_grid(SYM, 9, 5, 3)
    gx = grad_x(Field.from_function(g, lambda x, y, t: x[..., 0]))
    assert np.all(gx.values[0] == pytest.approx(1.0, abs=1e-14))
    assert np.all(grad_x(Field.from_function(g, lambda x, y, t: 3.0 + 0 * t)).values == 0.0)


def test_grad_x_on_quadratic():
    errs = []
    for n in (9, 17, 33):
        g = build_grid(SYM, n, 3, 2)
        x = g.coords()[0][..., 0]
        for order in (1, 2):
            err = np.abs(grad_x(Field(g, x**2), order).values[0] - 2 * x)
            assert np.max(err[..., 1:-1]) <= 1e-12
            if order == 1:
                errs.append(np.max(err[..., [0, -1]]))
            else:
                assert np.max(err) <= 1e-12
    # the first-order summation-by-parts closure is off by exactly h at the ends
    assert errs == pytest.approx([0.25, 0.125, 0.0625])


def test_div_x_examples():
    g = build_grid(BoxDomain.cube(2, (-1, 1), (-1, 1), (0, 1)), 5, 3, 2)
    x = g.coords()[0]
    assert np.allclose(div_x(VectorField(g, np.moveaxis(x, -1, 0))).values, 2.0, atol=1e-14)
    assert np.all(div_x(VectorField(g, np.ones((2,) + g.shape))).values == 0.0)


def test_summation_by_parts():
    g = build_grid(BoxDomain.cube(2, (-1, 1), (-1, 1), (0, 1)), 9, 5, 3)
    rng = np.random.default_rng(0)
    w = VectorField(g, rng.standard_normal((2,) + g.shape))
    phi = rng.standard_normal(g.shape)
    for k in range(2):
        ax = g.x_axis(k)
        sl = [slice(None)] * phi.ndim
        for i in (0, -1):
            sl[ax] = i
            phi[tuple(sl)] = 0.0
    phi = Field(g, phi)
    lhs = inner(div_x(w), phi, g)
    grads = np.stack([(d @ phi.flat).reshape(g.shape) for d in grad_matrices(g, 1)])
    rhs = -inner(w, grads, g)
    assert abs(lhs - rhs) <= 1e-12 * (abs(lhs) + abs(rhs))


def test_transport_exact_cases():
    dom = BoxDomain.cube(1, (-2.0, 2.0), (-1.0, 1.0), (0.0, 1.0))
    g = build_grid(dom, 5, 5, 5)
    tr = transport(Field.from_function(g, lambda x, y, t: y[..., 0])).values
    x = g.coords()[0][..., 0]
    assert np.allclose(tr, x, atol=1e-13)
    assert np.allclose(tr[:, :, -1], 2.0)
    assert np.allclose(transport(Field.from_function(g, lambda x, y, t: t)).values, 1.0)
    assert np.all(transport(Field.from_function(g, lambda x, y, t: 0 * t + 5)).values == 0.0)


def test_laplace_y():
    g = build_grid(SYM, 3, 9, 2)
    y = g.coords()[1][..., 0]
    assert np.allclose(laplace_y(Field(g, y**2)).values, 2.0)
    assert np.allclose(laplace_y(Field(g, 3 * y + 1)).values, 0.0, atol=1e-12)
    errs = []
    for n in (17, 33, 65):
        g = build_grid(SYM, 3, n, 2)
        y = g.coords()[1][..., 0]
        lap = laplace_y(Field(g, np.sin(np.pi * y))).values
        errs.append(np.max(np.abs(lap + np.pi**2 * np.sin(np.pi * y))[:, 1:-1]))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_integrate():
    g = build_grid(UNIT, 9, 9, 9)
    one = Field(g, np.ones(g.shape))
    assert integrate(one) == pytest.approx(1.0, abs=1e-14)
    rng = np.random.default_rng(1)
    u, v = Field(g, rng.random(g.shape)), Field(g, rng.random(g.shape))
    assert integrate(Field(g, 2 * u.values - 3 * v.values)) == pytest.approx(2 * integrate(u) - 3 * integrate(v))
    with pytest.raises(EmptyRegionError):
        integrate(one, lambda p: False)


def test_integrate_cylinder_volume_converges():
    dom = BoxDomain.cube(1, (-1, 1), (-1, 1), (-1, 0.5))
    cyl = KCylinder(KPoint([0.0], [0.0], 0.0), 0.5)
    errs = []
    for n in (33, 65, 129):
        g = build_grid(dom, n, n, n)
        err = abs(integrate(Field(g, np.ones(g.shape)), cyl) - 1 / 16)
        # node inclusion without cut cells: first order in the thin Y-extent
        assert err <= 0.5 * max(g.hy)
        errs.append(err)
    assert errs[0] > errs[1] > errs[2]


def test_hminus1_norm():
    dom = BoxDomain.cube(1, (0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    exact = np.pi / np.sqrt(2)
    errs = []
    for n in (17, 33, 65):
        g = build_grid(dom, n, 3, 2)
        x = g.x_nodes(0)
        w = -np.pi**2 * np.sin(np.pi * x)
        val = hminus1_norm(w, g)
        errs.append(abs(val - exact))
        assert hminus1_norm(-3 * w, g) == pytest.approx(3 * val, rel=1e-13)
        assert hminus1_norm(np.zeros(n), g) == 0.0
    assert errs[1] < errs[0] / 3 and errs[2] < errs[1] / 3
