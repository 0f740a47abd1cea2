"""
Tests for the field library, option strings and the worker pool
"""
import numpy as np
import pytest
from loguru import logger

from domain_field import determinant, gradient, make_domain
from errors import ConfigError, FieldLookupError, InvalidParameterError
from field_library import (
    field_library,
    fold_field,
    get_field,
    holder_field,
    parse_field_spec,
    winding_field,
)
from frac_norms import holder_seminorm
from options import parse_option_string, parse_value, parse_vector
from workers import ordered_map, resolve_workers


def test_library_members():
    logger.info("=" * 60)
    logger.info("Testing Field Library")
    logger.info("=" * 60)

    library = field_library()
    for name in ("identity", "affine", "perturbation", "quadratic", "mixed", "trig", "holder", "fold"):
        assert name in library
    for k in range(-2, 4):
        assert f"winding({k})" in library

    x = np.array([[0.3, -0.2], [0.1, 0.9]])
    assert np.allclose(gradient(library["identity"], x), np.eye(2))


def test_winding_evaluation():
    u = parse_field_spec("winding(2)")
    theta = np.pi / 4
    assert np.allclose(u([np.cos(theta), np.sin(theta)]), [0.0, 1.0], atol=1e-14)


@pytest.mark.parametrize("k", [-2, -1, 1, 2, 3])
def test_winding_determinant(k, rng):
    pts = rng.uniform(-1, 1, size=(20, 2))
    assert np.allclose(determinant(gradient(winding_field(k), pts)), k)


def test_winding_jacobian_matches_fd(rng):
    u = winding_field(3)
    pts = rng.uniform(0.2, 0.8, size=(10, 2))
    assert np.allclose(gradient(u, pts, mode="fd", h=1e-6), gradient(u, pts), atol=1e-6)


def test_field_specs():
    assert parse_field_spec("winding:k=2").name == "winding:k=2"
    assert parse_field_spec("holder(0.6, level=8)").smoothness.alpha == pytest.approx(0.6)
    assert parse_field_spec("perturbation:eps=0.2").name == "perturbation:eps=0.2"
    affine = parse_field_spec("affine:a=1,2,3,4:b=0,1")
    assert np.allclose(affine([1.0, 1.0]), [3.0, 8.0])
    with pytest.raises(FieldLookupError):
        parse_field_spec("spiral:k=2")
    with pytest.raises(ConfigError):
        parse_field_spec("winding:n=2")
    with pytest.raises(FieldLookupError):
        get_field("nothing")


def test_holder_field_validation():
    with pytest.raises(InvalidParameterError):
        holder_field(alpha=1.2)
    with pytest.raises(InvalidParameterError):
        holder_field(level=0)
    assert not holder_field(0.6).smoothness.is_smooth


def test_holder_quotient_stable_in_level():
    dom = make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (1.0, 1.0)}, 32)
    coarse = holder_seminorm(holder_field(0.6, level=8), dom, 0.6)
    fine = holder_seminorm(holder_field(0.6, level=12), dom, 0.6)
    logger.info(f"Hölder quotient level 8: {coarse:.4f}, level 12: {fine:.4f}")
    assert np.isfinite(fine)
    assert fine == pytest.approx(coarse, rel=0.1)


def test_fold_has_critical_circle():
    u = fold_field()
    r = 1.0 / np.sqrt(3.0)
    on_circle = np.array([[r, 0.0], [0.0, r]])
    assert np.allclose(determinant(gradient(u, on_circle)), 0.0, atol=1e-12)
    assert determinant(gradient(u, [0.1, 0.0])) > 0
    assert determinant(gradient(u, [0.9, 0.0])) < 0


def test_option_strings():
    name, opts = parse_option_string("disk:r=1:res=64:center=0.5,0")
    assert name == "disk"
    assert opts == {"r": 1, "res": 64, "center": (0.5, 0.0)}
    assert parse_value("abc") == "abc"
    assert parse_vector("0.5,0") == (0.5, 0.0)
    with pytest.raises(ConfigError) as exc:
        parse_option_string("disk:r")
    assert exc.value.key == "r"
    with pytest.raises(ConfigError):
        parse_vector("x,1", key="a")


def test_workers(monkeypatch):
    assert resolve_workers(3) == 3
    monkeypatch.setenv("FRACJAC_WORKERS", "2")
    assert resolve_workers() == 2
    monkeypatch.setenv("FRACJAC_WORKERS", "zero")
    with pytest.raises(ConfigError):
        resolve_workers()
    with pytest.raises(ConfigError):
        resolve_workers(0)
    assert ordered_map(lambda v: v * v, range(10), workers=4) == [v * v for v in range(10)]
