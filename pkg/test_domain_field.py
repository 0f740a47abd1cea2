"""
Tests for domains, vector fields, gradients and cofactors
"""
import numpy as np
import pytest
from loguru import logger

from domain_field import (
    VectorField,
    cofactor,
    determinant,
    gradient,
    make_domain,
    parse_domain_spec,
)
from errors import BoundaryProximityError, ConfigError, InvalidGeometryError, InvalidParameterError
from field_library import quadratic_field, trig_field, identity_field


def test_unit_square_quadrature(unit_square):
    logger.info("=" * 60)
    logger.info("Testing Domain - unit square")
    logger.info("=" * 60)

    assert len(unit_square.nodes) == 64 * 64
    assert unit_square.weights.sum() == pytest.approx(1.0, abs=1e-3)
    assert unit_square.volume() == pytest.approx(1.0)
    assert unit_square.perimeter() == pytest.approx(4.0)
    assert unit_square.boundary_weights.sum() == pytest.approx(4.0)


def test_unit_disk_quadrature(unit_disk):
    assert unit_disk.weights.sum() == pytest.approx(np.pi, abs=1e-2)
    assert unit_disk.boundary_weights.sum() == pytest.approx(2 * np.pi)
    assert np.allclose(np.linalg.norm(unit_disk.boundary_normals, axis=1), 1.0)


def test_degenerate_geometry():
    with pytest.raises(InvalidGeometryError):
        make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (0.0, 0.0)}, 16)
    with pytest.raises(InvalidGeometryError):
        make_domain("disk", {"center": (0.0, 0.0), "radius": 0.0}, 16)
    with pytest.raises(InvalidParameterError):
        make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (1.0, 1.0)}, 3)


def test_node_layout_is_deterministic_and_readonly():
    a = make_domain("disk", {"center": (0.5, 0.0), "radius": 2.0}, 16)
    b = make_domain("disk", {"center": (0.5, 0.0), "radius": 2.0}, 16)
    assert np.array_equal(a.nodes, b.nodes)
    with pytest.raises(ValueError):
        a.nodes[0, 0] = 1.0


def test_midpoint_rule_on_quadratics():
    """Exact for degree <= 1; x₁² carries the midpoint error -h²/12"""
    dom = make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (1.0, 1.0)}, 128)
    x = dom.nodes
    h = 1.0 / 128
    assert dom.integrate(x[:, 0]) == pytest.approx(0.5, rel=1e-12)
    assert dom.integrate(x[:, 0] * x[:, 1]) == pytest.approx(0.25, rel=1e-12)
    assert dom.integrate(x[:, 0] ** 2) == pytest.approx(1.0 / 3.0 - h * h / 12.0, rel=1e-10)
    assert dom.integrate(x[:, 0] ** 2) == pytest.approx(1.0 / 3.0, rel=1e-4)


def test_three_dimensional_box():
    box = parse_domain_spec("box:lo=0,0,0:hi=1,2,1:res=8")
    assert box.dimension == 3
    assert box.weights.sum() == pytest.approx(2.0)
    assert box.perimeter() == pytest.approx(2 * (2 + 1 + 2))


def test_parse_domain_spec():
    sq = parse_domain_spec("square:a=-1:b=1:res=16")
    assert sq.bounding_box() == ((-1.0, -1.0), (1.0, 1.0))
    disk = parse_domain_spec("disk:r=1:res=16")
    assert disk.kind == "disk"
    assert disk.volume() == pytest.approx(np.pi)
    with pytest.raises(ConfigError):
        parse_domain_spec("triangle:res=16")
    with pytest.raises(ConfigError):
        parse_domain_spec("square:side=2")


def test_contains_and_distance(unit_square, unit_disk):
    assert unit_square.contains([0.5, 0.5])
    assert not unit_square.contains([1.0, 0.5])
    assert unit_square.distance_to_boundary([0.2, 0.7]) == pytest.approx(0.2)
    assert unit_disk.distance_to_boundary([0.0, 0.25]) == pytest.approx(0.75)


def test_cofactor_examples():
    logger.info("Testing cofactor closed forms")
    assert np.allclose(cofactor(np.eye(2)), np.eye(2))
    a, b, c, d = 1.5, -2.0, 0.25, 3.0
    assert np.allclose(cofactor([[a, b], [c, d]]), [[d, -c], [-b, a]])
    assert np.allclose(cofactor(np.diag([2.0, 3.0, 4.0])), np.diag([12.0, 8.0, 6.0]))


def test_cofactor_properties(rng):
    for n in (2, 3, 4):
        M = rng.uniform(-10.0 / n, 10.0 / n, size=(50, n, n))
        cof = cofactor(M)
        assert np.allclose(cofactor(np.swapaxes(M, -1, -2)), np.swapaxes(cof, -1, -2), atol=1e-12)
        det = determinant(M)
        lu = np.linalg.det(M)
        assert np.allclose(det, lu, rtol=1e-10, atol=1e-10)
        adj = M @ np.swapaxes(cof, -1, -2)
        assert np.allclose(adj, det[:, None, None] * np.eye(n), atol=1e-9)


def test_cofactor_singular_matrix():
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert np.allclose(cofactor(M), [[4.0, -2.0], [-2.0, 1.0]])
    assert determinant(M) == pytest.approx(0.0)


def test_gradient_analytic():
    assert np.allclose(gradient(identity_field(), [0.3, -0.7]), np.eye(2))
    assert np.allclose(gradient(quadratic_field(), [1.0, 1.0]), [[2.0, 0.0], [0.0, 1.0]])


def test_gradient_fd_converges_quadratically():
    u = trig_field()
    x = np.array([[0.4, 0.3], [0.6, 0.55]])
    exact = gradient(u, x, mode="analytic")
    err_h = np.max(np.abs(gradient(u, x, mode="fd", h=1e-2) - exact))
    err_h2 = np.max(np.abs(gradient(u, x, mode="fd", h=5e-3) - exact))
    logger.info(f"fd errors {err_h:.3e} -> {err_h2:.3e}")
    assert err_h < 1e-4
    assert err_h / err_h2 == pytest.approx(4.0, rel=0.05)


def test_gradient_fd_boundary_proximity(unit_square):
    with pytest.raises(BoundaryProximityError):
        gradient(trig_field(), [0.001, 0.5], mode="fd", domain=unit_square)
    g = gradient(trig_field(), [0.5, 0.5], mode="fd", domain=unit_square)
    assert g.shape == (2, 2)


def test_gradient_requires_analytic_when_asked():
    sampled = VectorField("bare", 2, 2, lambda x: x.copy())
    with pytest.raises(InvalidParameterError):
        gradient(sampled, [0.5, 0.5], mode="analytic")
    assert np.allclose(gradient(sampled, [0.5, 0.5]), np.eye(2), atol=1e-8)


def test_field_algebra():
    u = quadratic_field()
    v = identity_field()
    x = np.array([[0.2, 0.3], [1.0, -1.0]])
    assert np.allclose((u + v)(x), u(x) + v(x))
    assert np.allclose(u.combine(v, 0.5)(x), u(x) + 0.5 * v(x))
    assert np.allclose(u.scaled(3.0).jacobian(x), 3.0 * u.jacobian(x))
    composed = u.compose(v)
    assert np.allclose(composed(x), u(x))
    assert np.allclose(gradient(composed, x), gradient(u, x))


def test_from_samples_interpolates_linear_fields():
    axes = [np.linspace(0.0, 1.0, 11), np.linspace(0.0, 1.0, 11)]
    X, Y = np.meshgrid(*axes, indexing="ij")
    values = np.stack([2 * X + Y, X - Y], axis=-1)
    field = VectorField.from_samples(axes, values)
    pts = np.array([[0.33, 0.71], [0.5, 0.05]])
    assert np.allclose(field(pts), np.stack([2 * pts[:, 0] + pts[:, 1], pts[:, 0] - pts[:, 1]], axis=1))


def test_gradient_fd_names_the_offending_point(unit_square):
    pts = np.array([[0.5, 0.5], [0.4, 0.6], [1.5, 0.5]])
    with pytest.raises(BoundaryProximityError, match=r"\[1\.5, 0\.5\]"):
        gradient(trig_field(), pts, mode="fd", h=1e-3, domain=unit_square)
    with pytest.raises(BoundaryProximityError, match=r"\[0\.4, 0\.9995\]"):
        gradient(trig_field(), [[0.5, 0.5], [0.4, 0.9995]], mode="fd", h=1e-3, domain=unit_square)
