"""
Tests for Brouwer degree by preimages, boundary integrals and change of variables
"""
import numpy as np
import pytest
from loguru import logger

from degree import (
    annulus_sector_set,
    check_regular,
    degree_all,
    degree_boundary,
    degree_boundary_many,
    degree_changevar,
    degree_preimage,
    degree_weighted_integral,
    disk_set,
    find_preimages,
    layer_cake_area,
    pair_Jua_indicator,
    parse_set_spec,
    polygon_set,
    sublevel_set,
)
from domain_field import make_domain
from errors import (
    BoundaryValueError,
    ConfigError,
    InvalidGeometryError,
    InvalidParameterError,
    SingularValueError,
)
from field_library import fold_field, identity_field, winding_field
from jacobian_core import bump, bump_integral


@pytest.fixture(scope="module")
def fine_disk():
    return make_domain("disk", {"center": (0.0, 0.0), "radius": 1.0}, 128)


@pytest.mark.parametrize("k", [-2, -1, 1, 2, 3])
def test_preimage_degree_of_winding_maps(k, unit_disk):
    logger.info("=" * 60)
    logger.info(f"Testing Degree - winding({k}) by preimages")
    logger.info("=" * 60)

    report = degree_preimage(winding_field(k), unit_disk, [0.5, 0.0])
    assert report.degree == k
    assert len(report.preimages) == abs(k)
    assert report.accepted
    assert np.allclose(np.linalg.norm(report.preimages, axis=1), 0.5)


@pytest.mark.parametrize("k", [-2, -1, 0, 1, 2, 3])
def test_boundary_degree_of_winding_maps(k, fine_disk):
    report = degree_boundary(winding_field(k), fine_disk, [0.5, 0.0])
    logger.info(f"winding({k}) boundary raw {report.raw:.6f}")
    assert report.raw == pytest.approx(k, abs=1e-3)
    assert report.degree == k


def test_degree_outside_the_image(unit_disk):
    assert degree_boundary(identity_field(), unit_disk, [2.0, 0.0]).degree == 0
    far = degree_preimage(identity_field(), unit_disk, [10.0, 10.0])
    assert far.degree == 0
    assert far.preimages == []
    assert far.min_abs_det is None


def test_target_on_boundary_image(unit_disk):
    with pytest.raises(BoundaryValueError):
        degree_boundary(identity_field(), unit_disk, [1.0, 0.0])
    with pytest.raises(BoundaryValueError):
        degree_preimage(identity_field(), unit_disk, [1.0, 0.0])


def test_singular_value_rejected():
    a = np.array([0.1, 0.0])
    with pytest.raises(SingularValueError):
        check_regular(np.array([0.7, -1e-10]), a)
    assert check_regular(np.array([0.7, -0.2]), a) == pytest.approx(0.2)
    assert check_regular(np.zeros(0), a) is None


def test_fold_field_has_degree_zero(unit_disk):
    report = degree_preimage(fold_field(), unit_disk, [0.2, 0.1])
    assert report.degree == 0
    assert len(report.preimages) == 2


def test_boundary_many_masks_close_targets(unit_disk):
    raw, clear = degree_boundary_many(identity_field(), unit_disk, [[0.2, 0.1], [1.0, 0.0], [3.0, 0.0]])
    assert clear.tolist() == [True, False, True]
    assert raw[0] == pytest.approx(1.0, abs=1e-3)
    assert np.isnan(raw[1])
    assert raw[2] == pytest.approx(0.0, abs=1e-3)


def test_change_of_variables(fine_disk):
    psi = bump((0.5, 0.0), 0.2)
    value = degree_changevar(winding_field(2), fine_disk, psi)
    logger.info(f"∫ψ(u) det∇u = {value:.6f}, 2∫ψ = {2 * bump_integral(0.2):.6f}")
    assert value == pytest.approx(2.0 * bump_integral(0.2), rel=0.01)


def test_weighted_integral_matches_change_of_variables(fine_disk):
    psi = bump((0.5, 0.0), 0.2)
    assert degree_weighted_integral(winding_field(2), fine_disk, psi) == pytest.approx(
        2.0 * bump_integral(0.2), rel=0.02)


def test_indicator_pairing_on_disk():
    region = disk_set((0.0, 0.0), 0.3)
    assert pair_Jua_indicator(identity_field(), region, [0.0, 0.0]) == pytest.approx(np.pi, rel=1e-6)
    assert pair_Jua_indicator(identity_field(), region, [0.8, 0.0]) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(BoundaryValueError):
        pair_Jua_indicator(identity_field(), region, [0.3, 0.0])


def test_indicator_pairing_on_sector():
    region = annulus_sector_set()
    value = pair_Jua_indicator(winding_field(2), region, [0.5, 0.0])
    assert value == pytest.approx(2.0 * np.pi, rel=0.01)
    points, dets = find_preimages(winding_field(2), region, [0.5, 0.0])
    assert len(points) == 2
    assert np.all(dets > 0)


def test_degree_all_agrees(fine_disk):
    summary = degree_all(winding_field(2), fine_disk, [0.5, 0.0])
    assert summary["agree"]
    assert summary["preimage"]["degree"] == 2
    assert summary["boundary"]["degree"] == 2
    assert summary["changevar"]["ratio"] == pytest.approx(2.0, rel=0.01)


@pytest.mark.parametrize("k", [-2, -1, 0, 1, 2, 3])
def test_degree_methods_agree_on_many_targets(k, fine_disk):
    rng = np.random.default_rng(np.random.SeedSequence(100 + k))
    radius = rng.uniform(0.2, 0.6, size=50)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=50)
    targets = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    field = winding_field(k)
    disagreements = []
    for a in targets:
        summary = degree_all(field, fine_disk, a, bump_radius=0.1)
        if not summary["agree"] or summary["preimage"]["degree"] != k:
            disagreements.append((a.tolist(), summary["preimage"]["degree"], summary["boundary"]["raw"],
                                  summary["changevar"]["ratio"]))
    logger.info(f"winding({k}): {len(disagreements)} of 50 targets disagree")
    assert disagreements == []


def test_set_specs():
    disk = parse_set_spec("disk:c=0.1,0:r=0.3")
    assert disk.area() == pytest.approx(np.pi * 0.09, rel=1e-3)
    assert disk.perimeter() == pytest.approx(2 * np.pi * 0.3)
    assert disk.contains([0.1, 0.0])
    assert not disk.contains([0.5, 0.0])
    tri = parse_set_spec("polygon:v=0,0,1,0,0,1")
    assert tri.area() == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        parse_set_spec("polygon:v=0,0,1,0")
    with pytest.raises(ConfigError):
        parse_set_spec("ellipse:r=1")
    with pytest.raises(InvalidGeometryError):
        polygon_set([[0, 0], [1, 1], [2, 2]])


def test_set_must_sit_inside_domain(unit_disk):
    disk_set((0.0, 0.0), 0.5).check_inside(unit_disk)
    with pytest.raises(InvalidGeometryError):
        disk_set((0.8, 0.0), 0.5).check_inside(unit_disk)


def test_sublevel_set_of_bump(unit_square):
    logger.info("Testing sublevel sets")
    psi = bump((0.5, 0.5), 0.3)
    region = sublevel_set(psi, 0.5, unit_square)
    radius = 0.3 * np.sqrt(1.0 - 0.5 ** (1.0 / 3.0))
    assert region.area() == pytest.approx(np.pi * radius ** 2, rel=0.01)
    assert region.contains([0.5, 0.5])
    assert sublevel_set(psi, 1.5, unit_square).is_empty
    with pytest.raises(InvalidParameterError):
        sublevel_set(psi, 0.0, unit_square)


def test_layer_cake_recovers_integral(unit_square):
    psi = bump((0.5, 0.5), 0.3)
    assert layer_cake_area(psi, unit_square, levels=50) == pytest.approx(bump_integral(0.3), rel=0.02)
