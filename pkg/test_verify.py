"""
Tests for the verification experiments and their reports
"""
import numpy as np
import pytest
from loguru import logger

from degree import disk_set
from domain_field import VectorField, make_domain
from errors import ConfigError, FieldLookupError, InvalidParameterError
from field_library import holder_field, identity_field, quadratic_field
from jacobian_core import bump, bump_integral, indicator
from levelset_trace import drifting_slab
from verify import (
    BRACKET,
    CHECKS,
    GAP,
    ASampler,
    ChangeOfVariables,
    ExperimentReport,
    ball_targets,
    cauchy_experiment,
    coarea_extension_experiment,
    get_change_of_variables,
    holder_chain_experiment,
    identity_change,
    layer_cake_experiment,
    linear_change,
    mc_integral,
    parse_change_of_variables,
    sine_change,
    stability_experiment,
    stability_sweep_experiment,
    strong_chain_experiment,
    strong_coarea_experiment,
    ua_continuity_experiment,
    weak_chain_experiment,
    weak_coarea_experiment,
)


def constant_field(c=(0.3, -0.2)):
    c = np.asarray(c, dtype=float)
    return VectorField("constant", 2, 2, lambda x: np.tile(c, (len(x), 1)),
                       lambda x: np.zeros((len(x), 2, 2)))


def small_square(res=8):
    return make_domain("rectangle", {"lo": (0.0, 0.0), "hi": (1.0, 1.0)}, res)


def test_report_gap_criterion():
    logger.info("=" * 60)
    logger.info("Testing Verify - experiment reports")
    logger.info("=" * 60)

    ok = ExperimentReport("demo", {}, 1.0, 1.01, 0.005, {"rel": 0.0, "sigmas": 3.0, "abs": 0.0})
    assert ok.passed
    assert ok.abs_gap == pytest.approx(0.01)
    assert ok.rel_gap == pytest.approx(0.01 / 1.01)
    bad = ExperimentReport("demo", {}, 1.0, 1.1, 0.005, {"rel": 0.0, "sigmas": 3.0, "abs": 0.0})
    assert not bad.passed
    unreliable = ExperimentReport("demo", {}, 1.0, 1.0, 0.0, {}, GAP, skip_fraction=0.2)
    assert unreliable.unreliable and not unreliable.passed


def test_report_bracket_and_checks():
    inside = ExperimentReport("b", {}, 0.9, 1.0, 0.0, {"rel": 0.0}, BRACKET, details={"lower": 0.9, "upper": 1.1})
    assert inside.passed
    above = ExperimentReport("b", {}, 0.9, 1.3, 0.0, {"rel": 0.05}, BRACKET, details={"lower": 0.9, "upper": 1.1})
    assert not above.passed
    checks = ExperimentReport("c", {}, 0.0, 0.0, None, {}, CHECKS, details={"checks": {"a": True, "b": False}})
    assert not checks.passed
    with pytest.raises(InvalidParameterError):
        ExperimentReport("x", {}, 0.0, 0.0, None, {}, "vibes")


def test_report_serialization():
    report = ExperimentReport("s", {"samples": 3}, 1.0, 1.0, None, {}, CHECKS, runtime_ms=12.5,
                              details={"checks": {"ok": True}, "sweep": [{"eps": 0.1, "gap": 0.5, "v": [1]}]})
    assert "runtime_ms" in report.to_dict()
    assert "runtime_ms" not in report.to_dict(include_runtime=False)
    rows = report.to_rows()
    assert rows[0]["row"] == "summary"
    assert rows[1] == {"experiment": "s", "row": "sweep[0]", "eps": 0.1, "gap": 0.5}


def test_change_of_variables_library():
    assert identity_change().is_identity
    F = linear_change(c=2.0)
    assert np.allclose(F.det([[0.3, 0.4], [1.0, 2.0]]), 2.0)
    assert parse_change_of_variables("linear:c=2").name == F.name
    assert parse_change_of_variables("sine:eps=0.1").lipschitz == pytest.approx(1.1)
    assert get_change_of_variables("cubic", eps=0.2).lipschitz == pytest.approx(1.0 + 0.2 * 9 / 8)
    with pytest.raises(FieldLookupError):
        parse_change_of_variables("spiral")
    with pytest.raises(ConfigError):
        parse_change_of_variables("sine:k=3")
    with pytest.raises(ConfigError):
        linear_change(A=[1.0, 2.0, 3.0])


@pytest.mark.parametrize("spec", ["identity", "linear:c=2", "sine:eps=0.1", "twist:eps=0.2", "cubic:eps=0.1"])
def test_change_of_variables_respects_lipschitz_bound(spec):
    F = parse_change_of_variables(spec)
    assert F.check_lipschitz(pairs=2000) <= F.lipschitz * (1.0 + 1e-12)


def test_understated_lipschitz_bound_is_caught():
    A = np.array([[3.0, 0.0], [0.0, 1.0]])
    F = ChangeOfVariables("bogus", lambda y: y @ A.T, lambda y: np.broadcast_to(A, (len(y), 2, 2)).copy(), 1.0)
    with pytest.raises(InvalidParameterError):
        F.check_lipschitz(pairs=500)


def test_samplers():
    sampler = ASampler((0.0, -1.0), (2.0, 1.0), seed=5)
    assert sampler.volume == pytest.approx(4.0)
    assert np.array_equal(sampler.draw(10), sampler.draw(10))
    pts = ball_targets(0.5, 200, seed=1)
    assert np.all(np.linalg.norm(pts, axis=1) <= 0.5)
    with pytest.raises(InvalidParameterError):
        ball_targets(0.5, 10, n=3)


def test_default_sampler_covers_support(unit_square):
    psi = bump((0.5, 0.5), 0.2)
    sampler = ASampler.default_for(identity_field(), psi, unit_square, seed=9)
    assert np.all(np.asarray(sampler.lo) < 0.3) and np.all(np.asarray(sampler.hi) > 0.7)
    assert sampler.seed == 9


def test_mc_integral():
    integral, se, skipped = mc_integral(np.array([1.0, 2.0, np.nan, 3.0]), 2.0)
    assert integral == pytest.approx(4.0)
    assert se == pytest.approx(2.0 * 1.0 / np.sqrt(3.0))
    assert skipped == pytest.approx(0.25)
    assert mc_integral(np.array([]), 1.0) == (0.0, 0.0, 0.0)


def test_weak_coarea_identity(unit_square):
    logger.info("Testing weak coarea and chain experiments")
    psi = bump((0.5, 0.5), 0.3)
    sampler = ASampler((0.2, 0.2), (0.8, 0.8), seed=11)
    report = weak_coarea_experiment(identity_field(), psi, unit_square, sampler, samples=2000)
    assert report.lhs == pytest.approx(bump_integral(0.3), rel=1e-3)
    assert report.passed
    assert report.runtime_ms > 0


def test_weak_chain_reduces_to_coarea(unit_square):
    psi = bump((0.5, 0.5), 0.3)
    sampler = ASampler((0.2, 0.2), (0.8, 0.8), seed=11)
    coarea = weak_coarea_experiment(identity_field(), psi, unit_square, sampler, samples=500)
    chain = weak_chain_experiment(identity_field(), identity_change(), psi, unit_square, sampler, samples=500)
    assert chain.lhs == coarea.lhs
    assert chain.rhs == coarea.rhs

    doubled = weak_chain_experiment(identity_field(), linear_change(c=2.0), psi, unit_square, sampler, samples=500)
    assert doubled.rhs == pytest.approx(2.0 * coarea.rhs, rel=1e-12)
    assert doubled.lhs == pytest.approx(2.0 * coarea.lhs, rel=2e-3)


def test_strong_chain(unit_square):
    report = strong_chain_experiment(identity_field(), sine_change(0.1), bump((0.5, 0.5), 0.3), unit_square)
    logger.info(f"strong chain: {report.lhs:.6f} vs {report.rhs:.6f}")
    assert report.passed
    assert report.stderr is None


def test_strong_coarea_identity(unit_square):
    sampler = ASampler((0.0, 0.0), (1.0, 1.0), seed=2)
    report = strong_coarea_experiment(identity_field(), unit_square, sampler, samples=200, family_size=85)
    assert report.rhs == pytest.approx(1.0)
    assert report.details["upper"] == pytest.approx(1.0)
    assert report.passed


def test_strong_coarea_counts_two_sheets(centered_square):
    sampler = ASampler((0.0, -1.0), (1.0, 1.0), seed=2)
    report = strong_coarea_experiment(quadratic_field(), centered_square, sampler, samples=300, family_size=85)
    logger.info(f"strong coarea quadratic: bracket [{report.details['lower']:.4f}, "
                f"{report.details['upper']:.4f}], integral {report.rhs:.4f}")
    assert report.details["upper"] == pytest.approx(4.0)
    assert report.rhs == pytest.approx(4.0, rel=0.05)
    assert report.passed


def test_layer_cake(unit_square):
    psi = bump((0.5, 0.5), 0.3)
    sampler = ASampler((0.15, 0.15), (0.85, 0.85), seed=4)
    report = layer_cake_experiment(identity_field(), psi, unit_square, sampler, samples=300, levels=50,
                                   tolerance={"rel": 0.05})
    assert report.passed
    assert report.details["pairing"] == pytest.approx(bump_integral(0.3), rel=1e-3)
    with pytest.raises(InvalidParameterError):
        layer_cake_experiment(identity_field(), indicator(disk_set((0.5, 0.5), 0.2)),
                              unit_square, sampler)


def test_holder_chain_on_smooth_field(unit_square):
    region = disk_set((0.5, 0.5), 0.2, nodes=256)
    sampler = ASampler((0.25, 0.25), (0.75, 0.75), seed=8)
    report = holder_chain_experiment(identity_field(), sine_change(0.1), region, unit_square, sampler,
                                     samples=500, scales=(0.04, 0.02), norm_resolution=8)
    assert report.criterion == CHECKS
    assert len(report.details["sweep"]) == 2
    assert report.details["checks"]["per_scale_gaps"]


def test_ua_continuity():
    dom = make_domain("rectangle", {"lo": (-1.0, -1.0), "hi": (1.0, 1.0)}, 8)
    report = ua_continuity_experiment(identity_field(), constant_field(), dom, scales=(0.2, 0.05),
                                      samples=4, seed=3)
    integrals = [entry["integral"] for entry in report.details["sweep"]]
    assert [entry["eps"] for entry in report.details["sweep"]] == [0.2, 0.05]
    assert integrals[1] < integrals[0]
    with pytest.raises(InvalidParameterError):
        ua_continuity_experiment(identity_field(), constant_field(), dom, s=0.4)


def test_holder_chain_on_rough_field(unit_square):
    region = disk_set((0.5, 0.5), 0.2, nodes=2048)
    sampler = ASampler((0.05, 0.05), (0.95, 0.95), seed=11)
    report = holder_chain_experiment(holder_field(0.6), sine_change(0.1), region, unit_square, sampler,
                                     samples=400, scales=(0.08, 0.04, 0.02, 0.01), norm_resolution=8)
    sweep = report.details["sweep"]
    logger.info(f"holder chain steps: {[entry.get('successive_diff') for entry in sweep]}")
    assert report.details["checks"]["per_scale_gaps"]
    assert sweep[-2]["successive_diff"] < sweep[0]["successive_diff"]
    assert len(report.details["constants"]) == 3
    assert all(np.isfinite(c) and c > 0 for c in report.details["constants"])
    assert report.lhs == sweep[-1]["lhs"]


def test_holder_chain_as_the_set_shrinks(unit_square):
    reports = []
    for radius in (0.2, 0.05):
        region = disk_set((0.5, 0.5), radius, nodes=256)
        half = 1.1 * radius
        sampler = ASampler((0.5 - half, 0.5 - half), (0.5 + half, 0.5 + half), seed=12)
        reports.append(holder_chain_experiment(identity_field(), identity_change(), region, unit_square,
                                               sampler, samples=400, scales=(0.04, 0.02), norm_resolution=8))
    big, small = reports
    assert small.lhs / big.lhs == pytest.approx(0.0625, rel=0.01)
    assert small.rhs / big.rhs == pytest.approx(0.0625, rel=0.15)
    assert small.lhs / small.details["perimeter"] < big.lhs / big.details["perimeter"]
    assert small.rhs / small.details["perimeter"] < big.rhs / big.details["perimeter"]


def test_ua_continuity_gap_is_measured_in_the_critical_norm(monkeypatch):
    import verify

    calls = []
    real = verify.sobolev_norm

    def recording(values, domain, s, p, workers=1):
        calls.append((s, p))
        return real(values, domain, s, p, workers=workers)

    monkeypatch.setattr(verify, "sobolev_norm", recording)
    dom = make_domain("rectangle", {"lo": (-1.0, -1.0), "hi": (1.0, 1.0)}, 8)
    ua_continuity_experiment(identity_field(), constant_field(), dom, scales=(0.2, 0.05), s=0.8, p=3.0,
                             samples=4, seed=3)
    assert calls
    assert set(calls) == {(0.5, 2.0)}


def test_ua_continuity_without_perturbation():
    dom = make_domain("rectangle", {"lo": (-1.0, -1.0), "hi": (1.0, 1.0)}, 8)
    report = ua_continuity_experiment(identity_field(), constant_field((0.0, 0.0)), dom, scales=(0.2, 0.05),
                                      samples=4, seed=3)
    assert [entry["integral"] for entry in report.details["sweep"]] == [0.0, 0.0]
    assert report.passed


def test_ua_continuity_shrinks_with_the_target_ball():
    dom = make_domain("rectangle", {"lo": (-1.0, -1.0), "hi": (1.0, 1.0)}, 8)
    wide, narrow = (ua_continuity_experiment(identity_field(), constant_field(), dom, scales=(0.2, 0.05),
                                             radius=radius, samples=8, seed=5) for radius in (0.5, 0.05))
    for outer, inner in zip(wide.details["sweep"], narrow.details["sweep"]):
        assert inner["integral"] < 0.1 * outer["integral"]


def test_stability_reports():
    logger.info("Testing stability experiments")
    dom = small_square()
    psi = bump((0.5, 0.5), 0.3)
    same = stability_experiment(identity_field(), identity_field(), psi, dom)
    assert same.lhs == 0.0
    assert all(r == 0.0 for r in same.details["ratios"].values())
    assert same.passed

    differ = stability_experiment(identity_field(), quadratic_field(), psi, dom)
    assert differ.lhs > 0
    assert all(p > 0 for p in differ.details["products"].values())
    assert differ.passed


def test_stability_sweep():
    dom = small_square()
    report = stability_sweep_experiment(identity_field(), quadratic_field(), bump((0.5, 0.5), 0.3), dom)
    logger.info(f"stability spreads: {report.details['spreads']}")
    assert len(report.details["sweep"]) == 3
    assert report.passed


def test_cauchy_experiment(unit_square):
    U = drifting_slab(unit_square, (1.0, 0.0))
    report = cauchy_experiment(U, np.array([[0.5, 0.5], [0.3, 0.4]]), 0.1, 0.9)
    rows = report.details["sweep"]
    assert len(rows) == 2
    assert rows[0]["lhs"] == pytest.approx(0.4 * np.pi, rel=1e-6)
    assert report.details["checks"] == {"bound": True, "sign_rules": True, "conservation": True}
    assert report.passed


def test_coarea_extension_experiment(unit_square):
    U = drifting_slab(unit_square, (1.0, 0.0))
    report = coarea_extension_experiment(U, (0.1, 0.3), ASampler((-0.3, 0.0), (0.9, 1.0), seed=3), samples=20)
    assert report.experiment == "coarea_extension"
    assert report.rhs == pytest.approx(0.2 * np.sqrt(2.0), rel=1e-9)
    assert not report.unreliable
