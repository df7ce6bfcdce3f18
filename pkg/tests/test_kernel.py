import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from avgfield import (
    ContractViolation,
    ScalarField,
    SingularityError,
    VectorField,
    build_kernel,
    curl,
    exterior_field,
    make_grid,
    vector_potential,
)
from avgfield.kernel import potential_adjoint, potential_arrays
from avgfield.verify import smooth_bump


@pytest.fixture(scope="module")
def grid():
    return make_grid((2, 2), (64, 64), "free", centered=True)


def test_kernel_table_values(grid):
    k = build_kernel(grid)
    h = grid.spacing[0]
    # tabulated in physical units: (-y, x)/|r|^2 at offset (2h, 0) is (0, 1/(2h))
    assert k.value(2, 0) == pytest.approx((0.0, 0.5 / h))
    assert k.value(0, 0) == (0.0, 0.0)
    assert k.value(1, 1) == pytest.approx((-0.5 / h, 0.5 / h))


def test_kernel_in_grid_units():
    g = make_grid((16, 16), (16, 16), "free")  # h = 1
    k = build_kernel(g)
    assert k.value(2, 0) == pytest.approx((0.0, 0.5))
    assert k.value(1, 1) == pytest.approx((-0.5, 0.5))


def test_kernel_padding_and_oddness(grid):
    k = build_kernel(grid)
    assert k.padded[0] >= 2 * grid.nx - 1 and k.padded[1] >= 2 * grid.ny - 1
    for di, dj in [(1, 0), (3, -2), (-5, 7), (10, 10)]:
        a = k.value(di, dj)
        b = k.value(-di, -dj)
        assert a[0] == -b[0] and a[1] == -b[1]


def test_zero_density_gives_zero_field(grid):
    A = vector_potential(ScalarField(grid, np.zeros(grid.shape)), build_kernel(grid))
    assert not A.x.any() and not A.y.any()


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_linearity(a, b, seed):
    g = make_grid((1, 1), (24, 24), "free")
    r = np.random.default_rng(seed)
    p1, p2 = r.uniform(size=g.shape), r.uniform(size=g.shape)
    k = build_kernel(g)
    A = potential_arrays(a * p1 + b * p2, k)
    A1, A2 = potential_arrays(p1, k), potential_arrays(p2, k)
    scale = max(np.abs(A1[0]).max(), np.abs(A2[0]).max()) * (abs(a) + abs(b) + 1)
    for c in (0, 1):
        assert np.abs(A[c] - (a * A1[c] + b * A2[c])).max() <= 1e-13 * scale


def test_reflection_negates_field(rng):
    g = make_grid((1, 1), (20, 20), "free", centered=True)
    k = build_kernel(g)
    rho = rng.uniform(size=g.shape)
    A = potential_arrays(rho, k)
    B = potential_arrays(rho[::-1, ::-1], k)
    assert np.allclose(B[0], -A[0][::-1, ::-1], atol=1e-12)
    assert np.allclose(B[1], -A[1][::-1, ::-1], atol=1e-12)


def test_adjoint_identity(rng):
    g = make_grid((1, 2), (16, 20), "free")
    k = build_kernel(g)
    rho = rng.normal(size=g.shape)
    vx, vy = rng.normal(size=g.shape), rng.normal(size=g.shape)
    ax, ay = potential_arrays(rho, k)
    lhs = np.sum(ax * vx + ay * vy)
    rhs = np.sum(rho * potential_adjoint(vx, vy, k))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_direct_convolution_oracle(rng):
    g = make_grid((1, 1), (10, 10), "free")
    rho = rng.uniform(size=g.shape)
    A = vector_potential(ScalarField(g, rho), build_kernel(g))
    X, Y = g.mesh()
    ex = np.zeros(g.shape)
    ey = np.zeros(g.shape)
    for i in range(10):
        for j in range(10):
            dx = X[i, j] - X
            dy = Y[i, j] - Y
            r2 = dx * dx + dy * dy
            r2[i, j] = np.inf
            ex[i, j] = np.sum(-dy / r2 * rho) * g.cell_area
            ey[i, j] = np.sum(dx / r2 * rho) * g.cell_area
    assert np.allclose(A.x, ex, rtol=1e-12, atol=1e-12)
    assert np.allclose(A.y, ey, rtol=1e-12, atol=1e-12)


def test_grid_mismatch_is_contract_violation():
    g1 = make_grid((1, 1), (16, 16))
    g2 = make_grid((1, 1), (20, 20))
    with pytest.raises(ContractViolation):
        vector_potential(ScalarField(g1, np.ones(g1.shape)), build_kernel(g2))


def test_curl_of_simple_fields():
    g = make_grid((1, 1), (16, 16), "free")
    X, Y = g.mesh()
    c = curl(VectorField(g, np.full(g.shape, 2.0), np.full(g.shape, -1.0)))
    assert np.abs(c.values).max() == 0
    c = curl(VectorField(g, -Y / 2, X / 2))
    assert np.allclose(c.values, 1.0, atol=1e-12)


def _curl_error(n):
    g = make_grid((2, 2), (n, n), "free", centered=True)
    rho = smooth_bump(g, radius=0.5)
    c = curl(vector_potential(rho, build_kernel(g))).values
    t = 2 * math.pi * rho.values
    return np.linalg.norm((c - t)[2:-2, 2:-2]) / np.linalg.norm(t[2:-2, 2:-2])


def test_curl_identity_converges():
    e64, e128 = _curl_error(64), _curl_error(128)
    assert e128 <= 1e-2
    assert e64 / e128 > 3


def test_exterior_field_examples():
    assert exterior_field(1.0, (0, 0), (0, 3)) == pytest.approx((-1 / 3, 0))
    assert np.all(exterior_field(0.0, (1, 1), (2, 5)) == 0)
    with pytest.raises(SingularityError):
        exterior_field(1.0, (0.5, 0.5), (0.5, 0.5))


def test_exterior_field_is_gradient_of_angle():
    beta, c, q = 7.0, np.array([0.3, -0.2]), np.array([1.1, 0.4])
    d = q - c
    # grad arg(r - c) = (-dy, dx)/|d|^2
    grad_arg = np.array([-d[1], d[0]]) / (d @ d)
    assert exterior_field(1 / beta, c, q) == pytest.approx(grad_arg / beta)


def test_newton_exterior_match():
    g = make_grid((2, 2), (256, 256), "free", centered=True)
    a = 0.1
    rho = smooth_bump(g, center=(0.2, -0.1), radius=a)
    A = vector_potential(rho, build_kernel(g))
    X, Y = g.mesh()
    d = np.hypot(X - 0.2, Y + 0.1)
    sel = (d >= 2 * a) & (d <= 0.8)
    for x, y, ax, ay in zip(X[sel][::37], Y[sel][::37], A.x[sel][::37], A.y[sel][::37]):
        e = exterior_field(1.0, (0.2, -0.1), (x, y))
        assert math.hypot(ax - e[0], ay - e[1]) <= 1e-3 * math.hypot(*e)


def test_scaling_covariance(rng):
    g = make_grid((1, 1), (16, 16), "free")
    rho = rng.uniform(size=g.shape)
    mu = 2.5
    A = potential_arrays(rho, build_kernel(g))
    gd = g.dilate(mu)
    B = potential_arrays(rho, build_kernel(gd))
    # rho(r/mu) on the dilated grid: A scales by mu
    assert np.allclose(B[0], mu * A[0], rtol=1e-12, atol=1e-13)
    assert np.allclose(B[1], mu * A[1], rtol=1e-12, atol=1e-13)
