"""
Tests for L^p, fractional Sobolev and Hölder norms
"""
import itertools

import numpy as np
import pytest
from loguru import logger

from domain_field import VectorField, make_domain
from errors import InvalidParameterError
from field_library import field_library, holder_field, identity_field
from frac_norms import (
    NormParams,
    compute_norm,
    extrapolated_seminorm,
    fractional_seminorm,
    holder_norm,
    holder_seminorm,
    lp_norm,
    sobolev_norm,
)


def constant_field(c=(1.0, 0.0)):
    c = np.asarray(c, dtype=float)
    return VectorField("constant", 2, 2, lambda x: np.tile(c, (len(x), 1)),
                       lambda x: np.zeros((len(x), 2, 2)))


def square(res, side=1.0):
    return make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (side, side)}, res)


def test_lp_norm(unit_square):
    logger.info("=" * 60)
    logger.info("Testing Fractional Norms - L^p")
    logger.info("=" * 60)

    assert lp_norm(constant_field(), unit_square, 2) == pytest.approx(1.0, rel=1e-12)
    assert lp_norm(constant_field((0.0, 0.0)), unit_square, 2) == 0.0
    assert lp_norm(identity_field(), unit_square, 2) == pytest.approx(np.sqrt(2.0 / 3.0), rel=1e-4)
    with pytest.raises(InvalidParameterError):
        lp_norm(identity_field(), unit_square, 0.5)


def test_lp_norm_accepts_nodal_arrays(unit_square):
    values = identity_field()(unit_square.nodes)
    assert lp_norm(values, unit_square, 3) == pytest.approx(lp_norm(identity_field(), unit_square, 3))
    with pytest.raises(InvalidParameterError):
        lp_norm(values[:10], unit_square, 2)


def test_seminorm_of_constant_vanishes():
    assert fractional_seminorm(constant_field((2.0, -1.0)), square(16), 0.5, 2) == 0.0


def test_seminorm_parameter_checks():
    dom = square(8)
    with pytest.raises(InvalidParameterError):
        fractional_seminorm(identity_field(), dom, 1.0, 2)
    with pytest.raises(InvalidParameterError):
        fractional_seminorm(identity_field(), dom, 0.5, 0.9)
    with pytest.raises(InvalidParameterError):
        holder_norm(identity_field(), dom, 0.0)


def test_seminorm_of_identity_is_self_convergent():
    """[x]^2_{1/2,2} on the unit square is ∬ 1/|x-y| = 4 ln(1+√2) - 4(√2-1)/3"""
    exact = 4.0 * np.log(1.0 + np.sqrt(2.0)) - 4.0 * (np.sqrt(2.0) - 1.0) / 3.0
    coarse = extrapolated_seminorm(identity_field(), square(16), 0.5, 2)
    fine = extrapolated_seminorm(identity_field(), square(32), 0.5, 2)
    logger.info(f"extrapolated seminorm: {coarse:.4f} (16/32), {fine:.4f} (32/64)")
    assert coarse == pytest.approx(fine, rel=0.02)
    assert fine ** 2 == pytest.approx(exact, rel=0.02)


def test_seminorm_scaling_law():
    """[u(λ·)]^p on Ω/λ equals λ^{sp-n}[u]^p on Ω"""
    lam, s, p = 2.0, 0.6, 2.5
    u = identity_field()
    scaled = VectorField("scaled", 2, 2, lambda x: lam * x)
    base = fractional_seminorm(u, square(16), s, p) ** p
    rescaled = fractional_seminorm(scaled, square(16, 1.0 / lam), s, p) ** p
    assert rescaled == pytest.approx(lam ** (s * p - 2) * base, rel=1e-9)


def test_seminorm_is_monotone_in_s():
    dom = make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (0.7, 0.7)}, 12)
    values = [fractional_seminorm(identity_field(), dom, s, 2) for s in (0.3, 0.5, 0.7, 0.9)]
    assert values == sorted(values)


def test_seminorm_independent_of_workers():
    dom = square(24)
    u = holder_field(0.6, 6)
    assert fractional_seminorm(u, dom, 0.7, 3, workers=1) == fractional_seminorm(u, dom, 0.7, 3, workers=4)


def test_sobolev_norm_sums_parts():
    dom = square(12)
    u = identity_field()
    assert sobolev_norm(u, dom, 0.5, 2) == pytest.approx(
        lp_norm(u, dom, 2) + fractional_seminorm(u, dom, 0.5, 2))


def test_holder_norm_examples(unit_square):
    logger.info("Testing Hölder norms")
    h = 1.0 / 64
    corner = np.sqrt(2.0) * (1.0 - h / 2)
    assert holder_norm(identity_field(), unit_square, 1.0) == pytest.approx(corner + 1.0, rel=1e-12)
    assert holder_norm(identity_field(), unit_square, 1.0) == pytest.approx(np.sqrt(2.0) + 1.0, rel=1e-2)
    assert holder_norm(constant_field((-3.0, 4.0)), square(8), 0.5) == pytest.approx(5.0)


def test_holder_norm_resolution_sweep():
    u = holder_field(0.6, level=8)
    coarse = holder_norm(u, square(16), 0.6)
    fine = holder_norm(u, square(32), 0.6)
    assert fine == pytest.approx(coarse, rel=0.05)

    rough = holder_field(0.6, level=12, amplitude=1.0, base="zero")
    growth_06 = holder_seminorm(rough, square(64), 0.6) / holder_seminorm(rough, square(16), 0.6)
    growth_08 = holder_seminorm(rough, square(64), 0.8) / holder_seminorm(rough, square(16), 0.8)
    logger.info(f"Hölder quotient growth 16 -> 64: alpha=0.6 {growth_06:.3f}, alpha=0.8 {growth_08:.3f}")
    assert growth_08 > growth_06


def test_norm_params():
    assert NormParams(0.8, 3).in_weak_range(2)
    assert not NormParams(0.5, 2).in_weak_range(2)
    with pytest.raises(InvalidParameterError):
        NormParams(1.5, 2).validate()
    with pytest.raises(InvalidParameterError):
        NormParams(0.5, 2, alpha=1.5).validate()


def test_compute_norm_record():
    record = compute_norm(identity_field(), square(8), NormParams(0.5, 2, alpha=0.5))
    for key in ("s", "p", "resolution", "value", "lp", "alpha", "holder", "runtime_ms"):
        assert key in record
    assert record["resolution"] == 8
    assert record["value"] > 0


@pytest.mark.parametrize("s, p", [(0.5, 2.0), (0.8, 3.0)])
def test_seminorm_triangle_inequality(s, p):
    dom = square(10)
    library = field_library()
    names = ["identity", "quadratic", "mixed", "trig", "holder", "fold", "winding(2)"]
    values = {name: library[name](dom.nodes) for name in names}
    for first, second in itertools.combinations(names, 2):
        u, v = values[first], values[second]
        total = fractional_seminorm(u + v, dom, s, p)
        assert total <= fractional_seminorm(u, dom, s, p) + fractional_seminorm(v, dom, s, p) + 1e-12, \
            f"{first} + {second}"


@pytest.mark.parametrize("name", ["identity", "trig"])
def test_embedded_norms_stay_proportional(name):
    u = field_library()[name]
    embedded = [(0.5, 2.0), (0.5, 2.5), (0.6, 3.0)]
    ratios = {}
    for res in (16, 32):
        dom = square(res)
        reference = sobolev_norm(u, dom, 0.8, 4)
        assert np.isfinite(reference) and reference > 0
        ratios[res] = [sobolev_norm(u, dom, s, p) / reference for s, p in embedded]
        assert all(np.isfinite(r) and r > 0 for r in ratios[res])
        assert lp_norm(u, dom, 2) <= lp_norm(u, dom, 4) * (1 + 1e-12)
    logger.info(f"{name} embedding ratios: {ratios}")
    assert ratios[32] == pytest.approx(ratios[16], rel=0.1)
