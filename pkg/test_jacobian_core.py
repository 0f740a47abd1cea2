"""
Tests for j u, the Jacobian pairings, sphere projections and the mollified extension
"""
import numpy as np
import pytest
from loguru import logger

from degree import disk_set
from domain_field import VectorField, gradient, make_domain
from errors import (
    ConfigError,
    InvalidParameterError,
    SingularPointError,
    UnsupportedTestFunctionError,
)
from field_library import (
    affine_field,
    holder_field,
    identity_field,
    mixed_field,
    perturbation_field,
    quadratic_field,
    trig_field,
    winding_field,
)
from jacobian_core import (
    Mollifier,
    bump,
    bump_integral,
    check_scale,
    cofactor_identity_residual,
    indicator,
    j_field,
    jacobian_pairing,
    mollified_extension,
    mollify,
    pairing_both,
    parse_test_spec,
    plateau,
    sphere_pairing,
    sphere_projection,
    unit_ball_volume,
    zero_test,
)


def constant_field(c=(1.5, -0.5)):
    c = np.asarray(c, dtype=float)
    return VectorField("constant", 2, 2, lambda x: np.tile(c, (len(x), 1)),
                       lambda x: np.zeros((len(x), 2, 2)))


def test_j_field_examples():
    logger.info("=" * 60)
    logger.info("Testing Jacobian Core - j u")
    logger.info("=" * 60)

    assert np.allclose(j_field(identity_field(), [0.4, -1.2]), [0.2, -0.6])
    assert np.allclose(j_field(constant_field(), [0.3, 0.3]), [0.0, 0.0])
    assert np.allclose(j_field(quadratic_field(), [1.0, 2.0]), [0.5, 2.0])


def test_bump_integral_closed_form():
    assert bump_integral(0.3) == pytest.approx(np.pi * 0.09 / 4)
    assert bump_integral(0.5, height=2.0) == pytest.approx(2.0 * np.pi * 0.25 / 4)


def test_pairing_identity_equals_integral_of_psi(unit_square):
    psi = bump((0.5, 0.5), 0.3)
    expected = bump_integral(0.3)
    both = pairing_both(identity_field(), psi, unit_square)
    assert both["direct"] == pytest.approx(expected, rel=1e-3)
    assert both["divergence"] == pytest.approx(expected, rel=1e-3)


def test_pairing_winding_one_on_disk(unit_disk):
    psi = bump((0.1, -0.2), 0.4)
    assert jacobian_pairing(winding_field(1), psi, unit_disk) == pytest.approx(bump_integral(0.4), rel=1e-3)


def test_pairing_quadratic_modes_agree():
    dom = make_domain("rectangle", {"lo": (-1.0, -1.0), "hi": (1.0, 1.0)}, 128)
    psi = bump((0.3, 0.1), 0.4)
    both = pairing_both(quadratic_field(), psi, dom)
    expected = 2.0 * 0.3 * bump_integral(0.4)
    logger.info(f"quadratic pairing: {both}")
    assert both["gap"] <= 1e-3 * (1.0 + abs(both["direct"]))
    assert both["direct"] == pytest.approx(expected, rel=5e-3)


@pytest.mark.parametrize("u", [identity_field(), affine_field(), perturbation_field(0.1),
                               quadratic_field(), mixed_field(), trig_field()])
def test_pairing_mode_consistency(u):
    dom = make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (1.0, 1.0)}, 128)
    both = pairing_both(u, bump((0.45, 0.55), 0.35), dom)
    assert both["gap"] <= 1e-3 * (1.0 + abs(both["direct"]))


def test_indicator_needs_boundary_route(unit_disk):
    psi = indicator(disk_set((0.0, 0.0), 0.3))
    with pytest.raises(UnsupportedTestFunctionError):
        jacobian_pairing(identity_field(), psi, unit_disk)
    assert jacobian_pairing(identity_field(), psi, unit_disk, mode="direct") == pytest.approx(
        np.pi * 0.09, rel=0.05)


def test_zero_test_function(unit_square):
    assert jacobian_pairing(trig_field(), zero_test(), unit_square) == 0.0


def test_test_function_specs(unit_square):
    psi = parse_test_spec("bump:r=0.2", unit_square)
    assert psi.support == ((0.5, 0.5), 0.2)
    assert psi([0.5, 0.5]) == pytest.approx(1.0)
    box = parse_test_spec("plateau:lo=0.2,0.2:hi=0.8,0.8:ramp=0.1")
    assert box([0.5, 0.5]) == pytest.approx(1.0)
    assert box([0.1, 0.5]) == 0.0
    with pytest.raises(ConfigError):
        parse_test_spec("gauss:r=1")
    with pytest.raises(InvalidParameterError):
        plateau((0.0, 0.0), (0.1, 0.1), ramp=0.1)
    psi.check_support(unit_square)


def test_scaled_and_multiplied_test_functions(unit_square):
    psi = bump((0.5, 0.5), 0.3)
    x = np.array([[0.45, 0.52], [0.6, 0.4]])
    assert np.allclose(psi.scaled(2.5)(x), 2.5 * psi(x))
    prod = psi.multiply(lambda p: p[:, 0], lambda p: np.tile([1.0, 0.0], (len(p), 1)))
    assert np.allclose(prod(x), psi(x) * x[:, 0])
    fd = (prod(x + [1e-6, 0.0]) - prod(x - [1e-6, 0.0])) / 2e-6
    assert np.allclose(prod.gradient(x)[:, 0], fd, atol=1e-6)


def test_sphere_projection_normalization(rng):
    u = trig_field()
    ua = sphere_projection(u, [0.1, 0.2])
    pts = rng.uniform(-1, 1, size=(200, 2))
    assert np.allclose(np.linalg.norm(ua(pts), axis=1), 1.0, atol=1e-14)


def test_sphere_projection_of_identity():
    ua = sphere_projection(identity_field(), [0.0, 0.0])
    assert np.allclose(ua([1.0, 0.0]), [1.0, 0.0])
    r = 0.25
    g = gradient(ua, [r, 0.0])
    sv = np.linalg.svd(g, compute_uv=False)
    assert np.linalg.matrix_rank(g, tol=1e-10) == 1
    assert sv[0] == pytest.approx(1.0 / r)
    with pytest.raises(SingularPointError):
        ua([0.0, 0.0])


def test_sphere_projection_is_idempotent(rng):
    ua = sphere_projection(mixed_field(), [0.2, 0.1])
    again = sphere_projection(ua, [0.0, 0.0])
    pts = rng.uniform(-1, 1, size=(50, 2))
    assert np.allclose(again(pts), ua(pts), atol=1e-14)


def test_sphere_pairing_counts_excluded_nodes(unit_square):
    node = unit_square.nodes[100]
    value, excluded = sphere_pairing(identity_field(), node, bump((0.5, 0.5), 0.45), unit_square)
    assert excluded >= 1
    assert np.isfinite(value)


def test_cofactor_identity_residual(rng):
    logger.info("Testing cofactor identity residual")
    psi = bump((0.5, 0.5), 0.45)
    assert cofactor_identity_residual(identity_field(), psi, [0.4, 0.6]) == 0.0
    pts = rng.uniform(0.1, 0.9, size=(100, 2))
    for u in (mixed_field(), quadratic_field(), trig_field(), winding_field(2), perturbation_field(0.2)):
        assert cofactor_identity_residual(u, psi, pts) < 1e-10


def test_cofactor_identity_residual_three_dimensions(rng):
    A = rng.uniform(-1, 1, size=(3, 3))
    u = VectorField("affine3", 3, 3, lambda x: x @ A.T,
                    lambda x: np.broadcast_to(A, (len(x), 3, 3)).copy())
    psi = bump((0.0, 0.0, 0.0), 1.0)
    pts = rng.uniform(-0.5, 0.5, size=(20, 3))
    assert cofactor_identity_residual(u, psi, pts) < 1e-12


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(np.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * np.pi / 3.0)


@pytest.mark.parametrize("profile", ["exponential", "polynomial"])
def test_mollifier_normalization(profile):
    eta = Mollifier(2, profile)
    assert eta.mass(0.1) == pytest.approx(1.0, abs=1e-8)
    z, w, g, tau = eta.kernel_weights()
    assert w.sum() == pytest.approx(1.0)
    assert np.allclose(np.einsum("ki,kj->ij", g, z), -np.eye(2))
    assert eta.eta([2.0, 0.0]) == 0.0


def test_mollifier_scale_range():
    with pytest.raises(InvalidParameterError):
        check_scale(0.0)
    with pytest.raises(InvalidParameterError):
        check_scale(1.0)
    with pytest.raises(InvalidParameterError):
        Mollifier(2, "gaussian")


def test_extension_of_constant(unit_square, rng):
    ext = mollified_extension(constant_field(), Mollifier(2), unit_square)
    pts = rng.uniform(0, 1, size=(30, 2))
    for t in (0.05, 0.3, 0.9):
        assert np.allclose(ext.evaluate(pts, t), [1.5, -0.5], atol=1e-12)
    with pytest.raises(InvalidParameterError):
        ext.evaluate(pts, 1.0)


def test_extension_of_affine_away_from_boundary(unit_square):
    u = affine_field([[2.0, 1.0], [0.0, 1.0]], [0.5, -1.0])
    ext = mollified_extension(u, Mollifier(2), unit_square)
    x = np.array([[0.5, 0.5], [0.4, 0.62]])
    assert np.allclose(ext.evaluate(x, 0.2), u(x), atol=1e-10)
    joint = ext.joint_gradient(x, 0.2)
    assert joint.shape == (2, 2, 3)
    assert np.allclose(joint[:, :, :2], u.jacobian(x), atol=1e-8)
    assert np.allclose(joint[:, :, 2], 0.0, atol=1e-8)


def test_extension_slices_are_cached(unit_square):
    ext = mollified_extension(trig_field(), Mollifier(2), unit_square)
    assert ext.slice(0.1) is ext.slice(0.1)
    u_t = mollify(trig_field(), unit_square, 0.1)
    assert np.allclose(u_t([0.5, 0.5]), ext.evaluate([0.5, 0.5], 0.1))


def test_extension_gradient_blows_up_like_holder_exponent():
    dom = make_domain("rectangle", {"lo": (-1.0, -1.0), "hi": (1.0, 1.0)}, 16)
    u = holder_field(0.6, level=12, amplitude=1.0, base="zero")
    ext = mollified_extension(u, Mollifier(2), dom, points_per_axis=81)
    ts = np.array([0.02, 0.01, 0.005, 0.0025])
    sizes = [np.linalg.norm(ext.spatial_gradient([0.0, 0.0], t), 2) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(sizes), 1)[0]
    logger.info(f"|∇U(0, t)| slope in t: {slope:.3f}")
    assert slope == pytest.approx(-0.4, abs=0.1)
