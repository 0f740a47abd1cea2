"""
Verification Experiments
Monte Carlo and quadrature drivers that check the coarea and chain-rule
identities for distributional Jacobians, the Hölder chain rule along
mollification sequences, continuity of u ↦ u^a and the pairing stability
estimates. Every driver returns an ExperimentReport.
"""
import functools
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

import config
from degree import (
    BoundaryData,
    LipschitzSet,
    SeedGrid,
    find_preimages_many,
    sublevel_set,
)
from domain_field import Domain, VectorField, determinant, gradient, make_domain
from errors import (
    ConfigError,
    FieldLookupError,
    IncompleteTraceError,
    InvalidParameterError,
    SingularCurveError,
    SingularPointError,
    SingularValueError,
)
from frac_norms import holder_norm, nodal_values, sobolev_norm
from jacobian_core import (
    Mollifier,
    TestFunction,
    field_range_diameter,
    j_field,
    jacobian_pairing,
    mollified_extension,
    unit_ball_volume,
)
from levelset_trace import audit_endpoints, coarea_extension_check, trace_family
from measures import flat_norm, tv_estimate
from options import parse_option_string, take
from workers import ordered_map

GAP = "gap"
BRACKET = "bracket"
CHECKS = "checks"
TARGET_CHUNK = 512


@dataclass
class ExperimentReport:
    """
    Outcome of one experiment.

    ``criterion`` says how ``passed`` follows from the stored numbers:
    "gap" compares |lhs - rhs| with sigmas·stderr + rel·|lhs| + abs,
    "bracket" asks the [lower, upper] bracket in ``details`` to overlap
    rhs ± sigmas·stderr within rel, and "checks" requires every boolean in
    ``details["checks"]``. Unreliable reports (too many skipped samples) fail.
    """
    experiment: str
    inputs: Dict[str, Any]
    lhs: float
    rhs: float
    stderr: Optional[float] = None
    tolerance: Dict[str, float] = field(default_factory=dict)
    criterion: str = GAP
    skip_fraction: float = 0.0
    runtime_ms: float = 0.0
    details: Dict[str, Any] = field(default_factory=dict)
    passed: bool = False

    def __post_init__(self):
        self.passed = self.recompute_passed()

    @property
    def abs_gap(self) -> float:
        return float(abs(self.lhs - self.rhs))

    @property
    def rel_gap(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return float(self.abs_gap / scale) if scale > 0 else 0.0

    @property
    def unreliable(self) -> bool:
        return self.skip_fraction > config.UNRELIABLE_SKIP_FRACTION

    def recompute_passed(self) -> bool:
        rel = self.tolerance.get("rel", config.STOCHASTIC_REL_TOL)
        sigmas = self.tolerance.get("sigmas", config.STOCHASTIC_SIGMAS)
        absolute = self.tolerance.get("abs", 1e-12)
        se = self.stderr or 0.0
        if self.unreliable:
            return False
        if self.criterion == GAP:
            return bool(self.abs_gap <= sigmas * se + rel * abs(self.lhs) + absolute)
        if self.criterion == BRACKET:
            lower = self.details["lower"]
            upper = self.details["upper"]
            return bool(self.rhs + sigmas * se >= lower * (1.0 - rel) - absolute
                        and self.rhs - sigmas * se <= upper * (1.0 + rel) + absolute)
        if self.criterion == CHECKS:
            return bool(all(self.details.get("checks", {}).values()))
        raise InvalidParameterError(f"Unknown pass criterion '{self.criterion}'")

    def to_dict(self, include_runtime: bool = True) -> dict:
        out = {
            "experiment": self.experiment,
            "inputs": self.inputs,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "abs_gap": self.abs_gap,
            "rel_gap": self.rel_gap,
            "stderr": self.stderr,
            "tolerance": self.tolerance,
            "criterion": self.criterion,
            "skip_fraction": self.skip_fraction,
            "unreliable": self.unreliable,
            "details": self.details,
            "passed": self.passed,
        }
        if include_runtime:
            out["runtime_ms"] = self.runtime_ms
        return out

    def to_rows(self) -> List[dict]:
        """Flat rows: one summary row plus one per sweep entry"""
        base = {
            "experiment": self.experiment,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "abs_gap": self.abs_gap,
            "rel_gap": self.rel_gap,
            "stderr": self.stderr,
            "skip_fraction": self.skip_fraction,
            "passed": self.passed,
        }
        rows = [dict(base, row="summary")]
        for i, entry in enumerate(self.details.get("sweep", [])):
            row = {"experiment": self.experiment, "row": f"sweep[{i}]"}
            row.update({k: v for k, v in entry.items() if not isinstance(v, (list, dict))})
            rows.append(row)
        return rows


# ---------------------------------------------------------------------------
# Changes of variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChangeOfVariables:
    """
    Globally Lipschitz F: ℝⁿ → ℝⁿ with gradient.

    Args:
        name: option-string form
        evaluator: (N, n) -> (N, n)
        jacobian: (N, n) -> (N, n, n)
        lipschitz: global Lipschitz bound
    """
    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    dimension: int = 2

    @property
    def is_identity(self) -> bool:
        return self.name == "identity"

    def __call__(self, a) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(a, dtype=float))
        return self.evaluator(pts)

    def gradient(self, a) -> np.ndarray:
        return self.jacobian(np.atleast_2d(np.asarray(a, dtype=float)))

    def det(self, a) -> np.ndarray:
        """det ∇F at each row of a"""
        return determinant(self.gradient(a))

    def as_field(self) -> VectorField:
        return VectorField(self.name, self.dimension, self.dimension, self.evaluator,
                           self.jacobian, lipschitz=self.lipschitz)

    def check_lipschitz(self, pairs: int = 10000, seed: int = config.DEFAULT_SEED,
                        box: Tuple[float, float] = (-3.0, 3.0)) -> float:
        """
        Largest |F(x) - F(y)| / |x - y| over random pairs

        Raises:
            InvalidParameterError: the ratio exceeds the declared bound
        """
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        x = rng.uniform(box[0], box[1], size=(pairs, self.dimension))
        y = rng.uniform(box[0], box[1], size=(pairs, self.dimension))
        dist = np.linalg.norm(x - y, axis=1)
        keep = dist > 0
        ratio = np.linalg.norm(self(x) - self(y), axis=1)[keep] / dist[keep]
        worst = float(ratio.max()) if len(ratio) else 0.0
        if worst > self.lipschitz * (1.0 + 1e-12):
            raise InvalidParameterError(
                f"{self.name}: sampled Lipschitz ratio {worst:.6g} exceeds bound {self.lipschitz:.6g}")
        return worst


def identity_change(n: int = 2) -> ChangeOfVariables:
    return ChangeOfVariables("identity", lambda a: a.copy(),
                             lambda a: np.broadcast_to(np.eye(n), (len(a), n, n)).copy(), 1.0, n)


def linear_change(A=None, c: float = None) -> ChangeOfVariables:
    """F(y) = A y; ``c`` alone gives A = diag(c, 1)"""
    if A is None:
        A = [[float(c), 0.0], [0.0, 1.0]] if c is not None else [[2.0, 0.5], [0.0, 1.5]]
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        side = int(round(np.sqrt(A.size)))
        if side * side != A.size:
            raise ConfigError(f"linear change needs a square matrix, got {A.size} entries", key="a")
        A = A.reshape(side, side)
    n = A.shape[0]
    name = "linear:a=" + ",".join(f"{v:g}" for v in A.ravel())
    return ChangeOfVariables(name, lambda y: y @ A.T,
                             lambda y: np.broadcast_to(A, (len(y), n, n)).copy(),
                             float(np.linalg.norm(A, 2)), n)


def _swapped_change(kind: str, eps: float, g: Callable, dg: Callable, slope: float) -> ChangeOfVariables:
    """F(y) = y + eps·(g(y₂), g(y₁))"""
    eps = float(eps)

    def evaluate(y):
        return y + eps * np.stack([g(y[:, 1]), g(y[:, 0])], axis=1)

    def jac(y):
        out = np.zeros((len(y), 2, 2))
        out[:, 0, 0] = 1.0
        out[:, 1, 1] = 1.0
        out[:, 0, 1] = eps * dg(y[:, 1])
        out[:, 1, 0] = eps * dg(y[:, 0])
        return out

    return ChangeOfVariables(f"{kind}:eps={eps:g}", evaluate, jac, 1.0 + abs(eps) * slope)


def sine_change(eps: float = 0.1) -> ChangeOfVariables:
    return _swapped_change("sine", eps, np.sin, np.cos, 1.0)


def twist_change(eps: float = 0.2) -> ChangeOfVariables:
    return _swapped_change("twist", eps, np.tanh, lambda s: 1.0 / np.cosh(s) ** 2, 1.0)


def cubic_change(eps: float = 0.1) -> ChangeOfVariables:
    """g(s) = s³/(1+s²), whose slope peaks at 9/8"""
    return _swapped_change("cubic", eps, lambda s: s ** 3 / (1 + s ** 2),
                           lambda s: (s ** 4 + 3 * s ** 2) / (1 + s ** 2) ** 2, 9.0 / 8.0)


_CHANGES = {
    "identity": (identity_change, set()),
    "linear": (linear_change, {"a", "c"}),
    "sine": (sine_change, {"eps"}),
    "twist": (twist_change, {"eps"}),
    "cubic": (cubic_change, {"eps"}),
}


def get_change_of_variables(name: str, **options) -> ChangeOfVariables:
    """
    Raises:
        FieldLookupError: unknown name
        ConfigError: unknown option
    """
    key = name.strip().lower()
    if key not in _CHANGES:
        raise FieldLookupError(f"Unknown change of variables '{name}'. Available: {', '.join(sorted(_CHANGES))}")
    builder, allowed = _CHANGES[key]
    for opt in options:
        if opt not in allowed:
            raise ConfigError(f"Unknown option '{opt}' for change of variables '{key}'", key=opt)
    kwargs = dict(options)
    if "a" in kwargs:
        kwargs["A"] = kwargs.pop("a")
    return builder(**kwargs)


def parse_change_of_variables(spec: str) -> ChangeOfVariables:
    """Parse ``sine:eps=0.1``, ``linear:c=2`` or ``identity``"""
    name, options = parse_option_string(spec)
    if name not in _CHANGES:
        raise FieldLookupError(f"Unknown change of variables '{name}' in {spec!r}")
    take(options, spec, _CHANGES[name][1])
    return get_change_of_variables(name, **options)


# ---------------------------------------------------------------------------
# Target sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ASampler:
    """Uniform targets on a box, reproducible from the seed"""
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    seed: int = config.DEFAULT_SEED

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def draw(self, count: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed))
        return rng.uniform(self.lo, self.hi, size=(int(count), len(self.lo)))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "seed": self.seed}

    @classmethod
    def default_for(cls, u: VectorField, psi: Optional[TestFunction], domain: Domain,
                    seed: int = config.DEFAULT_SEED,
                    inflation: float = config.SAMPLER_INFLATION) -> "ASampler":
        """Bounding box of u(supp ψ) over the domain nodes, inflated by a fraction of its diameter"""
        nodes = domain.nodes
        if psi is None:
            mask = np.ones(len(nodes), dtype=bool)
        elif psi.is_smooth:
            mask = (psi(nodes) != 0) | (np.linalg.norm(psi.gradient(nodes), axis=1) > 0)
        else:
            mask = psi.region.contains(nodes)
        pts = nodes[mask] if np.any(mask) else nodes
        values = u(pts)
        lo, hi = values.min(axis=0), values.max(axis=0)
        pad = inflation * (float(np.linalg.norm(hi - lo)) or 1.0)
        return cls(tuple((lo - pad).tolist()), tuple((hi + pad).tolist()), int(seed))


def ball_targets(radius: float, count: int, seed: int = config.DEFAULT_SEED, n: int = 2) -> np.ndarray:
    """Uniform targets in B(0, radius) ⊂ ℝ²"""
    if n != 2:
        raise InvalidParameterError("ball_targets supports n = 2 only")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    r = radius * np.sqrt(rng.uniform(size=count))
    theta = 2.0 * np.pi * rng.uniform(size=count)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


# ---------------------------------------------------------------------------
# Shared numerics
# ---------------------------------------------------------------------------

def experiment(name: str):
    """Log, time and error-report an experiment driver"""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            logger.info(f"Running experiment {name}")
            start = time.perf_counter()
            try:
                report = fn(*args, **kwargs)
            except Exception as e:
                logger.error(f"Error in experiment {name}: {e}")
                raise
            report.runtime_ms = round(1000 * (time.perf_counter() - start), 3)
            if report.unreliable:
                logger.warning(f"{name}: unreliable estimate, {report.skip_fraction:.1%} of samples skipped")
            logger.info(f"{name}: lhs={report.lhs:.6g} rhs={report.rhs:.6g} passed={report.passed}")
            return report
        return run
    return wrap


def _tolerance(overrides: Optional[Dict[str, float]], rel: float, sigmas: float = None) -> Dict[str, float]:
    tol = {"rel": rel, "sigmas": config.STOCHASTIC_SIGMAS if sigmas is None else sigmas, "abs": 1e-12}
    tol.update(overrides or {})
    return tol


def _chunks(targets: np.ndarray) -> List[np.ndarray]:
    return [targets[i:i + TARGET_CHUNK] for i in range(0, len(targets), TARGET_CHUNK)]


def mc_integral(values: np.ndarray, volume: float) -> Tuple[float, float, float]:
    """
    volume·mean over finite values

    Returns:
        (integral, standard error, skipped fraction)
    """
    values = np.asarray(values, dtype=float)
    kept = values[np.isfinite(values)]
    skipped = 1.0 - len(kept) / len(values) if len(values) else 0.0
    if len(kept) == 0:
        return 0.0, 0.0, skipped
    se = float(volume * kept.std(ddof=1) / np.sqrt(len(kept))) if len(kept) > 1 else 0.0
    return float(volume * kept.mean()), se, float(skipped)


def atomic_values(u: VectorField, psi: TestFunction, domain: Domain, targets: np.ndarray,
                  weight: Optional[np.ndarray] = None, workers: int = 1) -> np.ndarray:
    """
    <Ju^a, ψ>·weight(a) for every target; NaN for singular values

    Atoms come from one batched Newton run per chunk of targets. Test
    functions vanish near ∂Ω, so only regularity is required here.
    """
    grid = SeedGrid.for_region(u, domain)
    omega = unit_ball_volume(domain.dimension)

    def chunk_values(chunk):
        out = np.full(len(chunk), np.nan)
        for i, (points, dets) in enumerate(find_preimages_many(u, domain, chunk, grid)):
            if len(dets) == 0:
                out[i] = 0.0
            elif np.min(np.abs(dets)) > config.REGULAR_DET_FLOOR:
                out[i] = omega * float(np.sum(np.sign(dets) * psi(points)))
        return out

    values = np.concatenate(ordered_map(chunk_values, _chunks(targets), workers)) if len(targets) else np.zeros(0)
    if weight is not None:
        values = values * weight
    return values


def preimage_counts(u: VectorField, domain: Domain, targets: np.ndarray, workers: int = 1) -> np.ndarray:
    """#u^{-1}(a) ∩ Ω per target; NaN for singular values"""
    grid = SeedGrid.for_region(u, domain)

    def chunk_counts(chunk):
        out = np.full(len(chunk), np.nan)
        for i, (points, dets) in enumerate(find_preimages_many(u, domain, chunk, grid)):
            if len(dets) == 0 or np.min(np.abs(dets)) > config.REGULAR_DET_FLOOR:
                out[i] = float(len(points))
        return out

    return np.concatenate(ordered_map(chunk_counts, _chunks(targets), workers)) if len(targets) else np.zeros(0)


def set_degrees(u: VectorField, region: LipschitzSet, targets: np.ndarray) -> np.ndarray:
    """
    deg(u, E, a) per target; NaN where no method gives a regular answer

    Boundary integrals are used where a clears u(∂E) and the raw value is
    near an integer; the remaining targets count signed preimages in E.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    deg = np.full(len(targets), np.nan)
    if region.is_empty:
        return np.zeros(len(targets))
    data = BoundaryData.for_set(u, region)
    raw = data.flux(targets) / unit_ball_volume(u.dim_in)
    good = (data.distances(targets) >= data.tolerance) & (np.abs(raw - np.round(raw)) < config.DEGREE_ACCEPT_GAP)
    deg[good] = np.round(raw[good])
    rest = np.flatnonzero(~good)
    if len(rest):
        grid = SeedGrid.for_region(u, region)
        for idx, (points, dets) in zip(rest, find_preimages_many(u, region, targets[rest], grid)):
            if len(dets) == 0:
                deg[idx] = 0.0
            elif np.min(np.abs(dets)) > config.REGULAR_DET_FLOOR:
                deg[idx] = float(np.sum(np.sign(dets)))
    return deg


def indicator_pairing(v: VectorField, region: LipschitzSet) -> float:
    """<Jv, χ_E> = ∫_{∂E} j v · ν for smooth v"""
    if region.is_empty:
        return 0.0
    j = j_field(v, region.boundary_nodes)
    return float(np.sum(region.boundary_weights * np.einsum("ki,ki->k", j, region.boundary_normals)))


def _composed(u: VectorField, F: ChangeOfVariables) -> VectorField:
    return u if F.is_identity else u.compose(F.as_field())


def _inputs(**items) -> Dict[str, Any]:
    return {k: v for k, v in items.items() if v is not None}


# ---------------------------------------------------------------------------
# Coarea and chain rule
# ---------------------------------------------------------------------------

def _weak_route(u, F, psi, domain, sampler, samples, workers, scales, profile):
    """(lhs, values per target, details) for the weak coarea / chain identities"""
    targets = sampler.draw(samples)
    weight = None if F.is_identity else F.det(targets)
    if u.smoothness.is_smooth:
        lhs = jacobian_pairing(_composed(u, F), psi, domain)
        return lhs, atomic_values(u, psi, domain, targets, weight, workers), {}

    ext = mollified_extension(u, Mollifier(domain.dimension, profile), domain)
    t_large, t_small = sorted(scales, reverse=True)[:2]
    vals, pairs = [], []
    for t in (t_large, t_small):
        u_t = ext.slice(t)
        vals.append(atomic_values(u_t, psi, domain, targets, weight, workers))
        pairs.append(jacobian_pairing(_composed(u_t, F), psi, domain))
    factor = t_small / (t_large - t_small)
    values = vals[1] + (vals[1] - vals[0]) * factor
    if u.has_gradient:
        lhs = jacobian_pairing(_composed(u, F), psi, domain)
    else:
        lhs = pairs[1] + (pairs[1] - pairs[0]) * factor
    return lhs, values, {"scales": [t_large, t_small], "slice_pairings": pairs}


@experiment("weak_coarea")
def weak_coarea_experiment(u: VectorField, psi: TestFunction, domain: Domain, sampler: ASampler,
                           samples: int = 5000, workers: int = 1, scales: Sequence[float] = (0.04, 0.02),
                           profile: str = "exponential", tolerance: Dict[str, float] = None) -> ExperimentReport:
    """
    <Ju, ψ> against (1/ω_n)∫<Ju^a, ψ> da

    Smooth fields use atoms of u directly; other fields use the two finest
    mollified slices, extrapolated linearly in the scale.
    """
    F = identity_change(domain.dimension)
    lhs, values, details = _weak_route(u, F, psi, domain, sampler, samples, workers, scales, profile)
    integral, se, skipped = mc_integral(values, sampler.volume)
    omega = unit_ball_volume(domain.dimension)
    return ExperimentReport(
        "weak_coarea",
        _inputs(field=u.name, test=psi.name, domain=domain.describe(), sampler=sampler.to_dict(), samples=samples),
        float(lhs), integral / omega, se / omega,
        _tolerance(tolerance, config.STOCHASTIC_REL_TOL), GAP, skipped, details=details)


@experiment("weak_chain")
def weak_chain_experiment(u: VectorField, F: ChangeOfVariables, psi: TestFunction, domain: Domain,
                          sampler: ASampler, samples: int = 5000, workers: int = 1,
                          scales: Sequence[float] = (0.04, 0.02), profile: str = "exponential",
                          tolerance: Dict[str, float] = None) -> ExperimentReport:
    """<J(F∘u), ψ> against (1/ω_n)∫ det∇F(a)<Ju^a, ψ> da"""
    lhs, values, details = _weak_route(u, F, psi, domain, sampler, samples, workers, scales, profile)
    integral, se, skipped = mc_integral(values, sampler.volume)
    omega = unit_ball_volume(domain.dimension)
    return ExperimentReport(
        "weak_chain",
        _inputs(field=u.name, F=F.name, test=psi.name, domain=domain.describe(),
                sampler=sampler.to_dict(), samples=samples),
        float(lhs), integral / omega, se / omega,
        _tolerance(tolerance, config.STOCHASTIC_REL_TOL), GAP, skipped, details=details)


def det_of_change_along(u: VectorField, F: ChangeOfVariables, h: float = 1e-6) -> Tuple[Callable, Callable]:
    """g = det∇F(u(x)) and its x-gradient by central differences"""
    def g(x):
        return F.det(u(x))

    def grad_g(x):
        out = np.empty_like(x)
        for i in range(x.shape[1]):
            step = np.zeros(x.shape[1])
            step[i] = h
            out[:, i] = (g(x + step) - g(x - step)) / (2 * h)
        return out

    return g, grad_g


@experiment("strong_chain")
def strong_chain_experiment(u: VectorField, F: ChangeOfVariables, psi: TestFunction, domain: Domain,
                            tolerance: Dict[str, float] = None) -> ExperimentReport:
    """<J(F∘u), ψ> (divergence form) against <Ju, ψ·(det∇F)∘u> (direct form)"""
    lhs = jacobian_pairing(_composed(u, F), psi, domain)
    g, grad_g = det_of_change_along(u, F)
    weighted = psi.multiply(g, grad_g, name=f"{psi.name}*det({F.name})")
    rhs = jacobian_pairing(u, weighted, domain, mode="direct")
    return ExperimentReport(
        "strong_chain",
        _inputs(field=u.name, F=F.name, test=psi.name, domain=domain.describe()),
        float(lhs), float(rhs), None,
        _tolerance(tolerance, config.DETERMINISTIC_REL_TOL, 0.0), GAP)


@experiment("strong_coarea")
def strong_coarea_experiment(u: VectorField, domain: Domain, sampler: ASampler, samples: int = 5000,
                             family_size: int = 256, workers: int = 1,
                             tolerance: Dict[str, float] = None) -> ExperimentReport:
    """
    |Ju|_TV bracket against ∫ #u^{-1}(a) da

    The bracket is [dictionary lower bound, ∫|det ∇u|]; it must overlap the
    Monte Carlo preimage-count integral within the relative tolerance.
    """
    tv = tv_estimate(lambda psi: jacobian_pairing(u, psi, domain, mode="direct"), domain, family_size)
    upper = domain.integrate(np.abs(determinant(gradient(u, domain.nodes))))
    counts = preimage_counts(u, domain, sampler.draw(samples), workers)
    integral, se, skipped = mc_integral(counts, sampler.volume)
    details = {"lower": tv["value"], "upper": float(upper), "family_size": tv["family_size"],
               "level": tv["level"]}
    return ExperimentReport(
        "strong_coarea",
        _inputs(field=u.name, domain=domain.describe(), sampler=sampler.to_dict(), samples=samples,
                family_size=family_size),
        float(tv["value"]), integral, se,
        _tolerance(tolerance, config.BRACKET_OVERLAP_TOL), BRACKET, skipped, details=details)


@experiment("layer_cake")
def layer_cake_experiment(u: VectorField, psi: TestFunction, domain: Domain, sampler: ASampler,
                          samples: int = 2000, levels: int = 20, workers: int = 1,
                          tolerance: Dict[str, float] = None) -> ExperimentReport:
    """
    Atomic route (1/ω_n)∫<Ju^a, ψ> da against the layer-cake route
    ∫∫_0^{sup ψ} deg(u, {ψ > t}, a) dt da on the same targets
    """
    if not psi.is_smooth:
        raise InvalidParameterError("layer_cake needs a smooth nonnegative test function")
    targets = sampler.draw(samples)
    omega = unit_ball_volume(domain.dimension)
    atomic = atomic_values(u, psi, domain, targets, workers=workers) / omega
    dt = psi.sup_bound / levels
    layered = np.zeros(len(targets))
    for k in range(levels):
        region = sublevel_set(psi, (k + 0.5) * dt, domain)
        layered += dt * set_degrees(u, region, targets)
    diff = atomic - layered
    lhs, _, skip_a = mc_integral(atomic, sampler.volume)
    rhs, _, skip_l = mc_integral(np.where(np.isfinite(atomic), layered, np.nan), sampler.volume)
    _, se, _ = mc_integral(diff, sampler.volume)
    details = {"pairing": jacobian_pairing(u, psi, domain), "levels": levels}
    return ExperimentReport(
        "layer_cake",
        _inputs(field=u.name, test=psi.name, domain=domain.describe(), sampler=sampler.to_dict(),
                samples=samples),
        lhs, rhs, se, _tolerance(tolerance, config.STOCHASTIC_REL_TOL), GAP,
        float(np.mean(~np.isfinite(diff))), details=details)


@experiment("holder_chain")
def holder_chain_experiment(u: VectorField, F: ChangeOfVariables, region: LipschitzSet, domain: Domain,
                            sampler: ASampler, samples: int = 2000,
                            scales: Sequence[float] = (0.08, 0.04, 0.02, 0.01),
                            profile: str = "exponential", holder_alpha: float = 0.55,
                            norm_resolution: int = 32, tolerance: Dict[str, float] = None) -> ExperimentReport:
    """
    Hölder chain rule along the mollification sequence u_ε

    For each ε: lhs_ε = <J(F∘u_ε), χ_E> by the boundary integral over ∂E,
    rhs_ε = ∫ det∇F(a) deg(u_ε, E, a) da by Monte Carlo. Successive
    differences of lhs_ε are compared with ‖u_ε - u_ε'‖_{C^{0,α}}·Per(E);
    the fitted constants must stay within a factor of two.
    """
    region.check_inside(domain)
    tol = _tolerance(tolerance, 0.03)
    ext = mollified_extension(u, Mollifier(domain.dimension, profile), domain)
    targets = sampler.draw(samples)
    weight = F.det(targets)
    norm_domain = make_domain(domain.kind, domain.params, norm_resolution)
    perimeter = region.perimeter()

    sweep = []
    worst_skip = 0.0
    slices = [ext.slice(eps) for eps in scales]
    for eps, u_eps in zip(scales, slices):
        lhs_eps = indicator_pairing(_composed(u_eps, F), region)
        values = weight * set_degrees(u_eps, region, targets)
        rhs_eps, se, skipped = mc_integral(values, sampler.volume)
        worst_skip = max(worst_skip, skipped)
        gap_ok = abs(lhs_eps - rhs_eps) <= tol["sigmas"] * se + tol["rel"] * abs(lhs_eps) + tol["abs"]
        sweep.append({"eps": eps, "lhs": lhs_eps, "rhs": rhs_eps, "stderr": se,
                      "skip_fraction": skipped, "gap_ok": bool(gap_ok)})

    constants = []
    for k in range(len(slices) - 1):
        diff = nodal_values(slices[k], norm_domain) - nodal_values(slices[k + 1], norm_domain)
        bound = holder_norm(diff, norm_domain, holder_alpha) * perimeter
        step = abs(sweep[k]["lhs"] - sweep[k + 1]["lhs"])
        sweep[k]["successive_diff"] = step
        sweep[k]["holder_bound"] = bound
        if bound > 0 and step > 0:
            constants.append(step / bound)
    spread = float(max(constants) / min(constants)) if constants else 1.0
    checks = {"per_scale_gaps": all(entry["gap_ok"] for entry in sweep), "cauchy_constant_stable": spread <= 2.0}
    finest = sweep[-1]
    return ExperimentReport(
        "holder_chain",
        _inputs(field=u.name, F=F.name, set=region.name, domain=domain.describe(),
                sampler=sampler.to_dict(), samples=samples, scales=list(scales), profile=profile),
        finest["lhs"], finest["rhs"], finest["stderr"], tol, CHECKS, worst_skip,
        details={"sweep": sweep, "constants": constants, "constant_spread": spread,
                 "perimeter": perimeter, "checks": checks})


# ---------------------------------------------------------------------------
# Continuity and stability
# ---------------------------------------------------------------------------

@experiment("ua_continuity")
def ua_continuity_experiment(u: VectorField, w: VectorField, domain: Domain,
                             scales: Sequence[float] = (0.2, 0.1, 0.05, 0.025), s: float = 0.8,
                             p: float = 3.0, radius: float = 0.5, samples: int = 32,
                             seed: int = config.DEFAULT_SEED, workers: int = 1) -> ExperimentReport:
    """
    I(ε) = ∫_{B(0,R)} ‖(u + εw)^a - u^a‖_{W^{(n-1)/n, n}}^n da for a decreasing ε sequence

    (s, p) only states the regularity assumed of u and w; the gap itself is
    always measured in the full W^{(n-1)/n, n} norm. Passes when I decreases
    with ε and the log-log slope is positive (or I ≡ 0).

    Raises:
        InvalidParameterError: s <= (n-1)/n or sp <= n-1
    """
    n = domain.dimension
    if not (s > (n - 1) / n and s * p > n - 1):
        raise InvalidParameterError(f"Need s > (n-1)/n and sp > n-1, got s={s}, p={p}")
    gap_s, gap_p = (n - 1) / n, float(n)
    scales = sorted((float(e) for e in scales), reverse=True)
    targets = ball_targets(radius, samples, seed, n)
    area = np.pi * radius ** 2
    base_values = u(domain.nodes)
    diameter = field_range_diameter(u, domain)

    def sphere_values(field_values, a):
        v = field_values - a
        r = np.linalg.norm(v, axis=1)
        if np.any(r < config.SINGULAR_FIBER_FACTOR * diameter):
            raise SingularPointError(f"node on the fiber of a = {a.tolist()}")
        return v / r[:, None]

    sweep = []
    skipped = 0
    for eps in scales:
        moved = u.combine(w, eps)(domain.nodes)

        def one(a):
            try:
                diff = sphere_values(moved, a) - sphere_values(base_values, a)
            except SingularPointError:
                return np.nan
            return sobolev_norm(diff, domain, gap_s, gap_p) ** n

        values = np.array(ordered_map(one, list(targets), workers))
        skipped = max(skipped, int(np.sum(~np.isfinite(values))))
        kept = values[np.isfinite(values)]
        integral = float(area * kept.mean()) if len(kept) else 0.0
        sweep.append({"eps": eps, "integral": integral})

    integrals = np.array([entry["integral"] for entry in sweep])
    if np.all(integrals == 0):
        decreasing, rate = True, 0.0
        rate_ok = True
    else:
        decreasing = bool(np.all(np.diff(integrals) < 0))
        positive = integrals > 0
        rate = float(np.polyfit(np.log(np.array(scales)[positive]), np.log(integrals[positive]), 1)[0]) \
            if positive.sum() >= 2 else 0.0
        rate_ok = rate > 0
    checks = {"decreasing": decreasing, "positive_rate": bool(rate_ok)}
    return ExperimentReport(
        "ua_continuity",
        _inputs(field=u.name, perturbation=w.name, domain=domain.describe(), s=s, p=p, radius=radius,
                samples=samples, seed=seed, scales=scales),
        float(integrals[-1]), 0.0, None, {}, CHECKS, skipped / samples if samples else 0.0,
        details={"sweep": sweep, "rate": rate, "checks": checks})


def stability_products(u: VectorField, v: VectorField, psi: TestFunction, domain: Domain,
                       alpha: float = 0.75, workers: int = 1) -> Dict[str, float]:
    """
    The three right-hand products bounding |<Ju - Jv, ψ>|

    fractional: ‖u-v‖ (‖u‖+‖v‖)^{n-1} ‖∇ψ‖_∞ in W^{(n-1)/n, n}
    sobolev:    ‖u-v‖ (‖u‖+‖v‖)^{n-1} ‖ψ‖ in W^{n/(n+1), n+1}
    holder:     ‖u-v‖ (‖u‖+‖v‖)^{n-1} ‖∇ψ‖_{L¹} in C^{0,α}
    """
    n = domain.dimension
    uu = nodal_values(u, domain)
    vv = nodal_values(v, domain)
    grads = np.linalg.norm(psi.gradient(domain.nodes), axis=1)
    psi_vals = psi(domain.nodes)

    s1, p1 = (n - 1) / n, float(n)
    s2, p2 = n / (n + 1), float(n + 1)

    def sob(values, s, p):
        return sobolev_norm(values, domain, s, p, workers)

    return {
        "fractional": sob(uu - vv, s1, p1) * (sob(uu, s1, p1) + sob(vv, s1, p1)) ** (n - 1) * float(grads.max()),
        "sobolev": sob(uu - vv, s2, p2) * (sob(uu, s2, p2) + sob(vv, s2, p2)) ** (n - 1) * sob(psi_vals, s2, p2),
        "holder": holder_norm(uu - vv, domain, alpha, workers)
        * (holder_norm(uu, domain, alpha, workers) + holder_norm(vv, domain, alpha, workers)) ** (n - 1)
        * domain.integrate(grads),
    }


def _ratio(gap: float, product: float) -> float:
    if gap == 0:
        return 0.0
    return float(gap / product) if product > 0 else float("inf")


@experiment("stability")
def stability_experiment(u: VectorField, v: VectorField, psi: TestFunction, domain: Domain,
                         alpha: float = 0.75, workers: int = 1) -> ExperimentReport:
    """Pairing gap |<Ju - Jv, ψ>| with its three norm products and ratios"""
    gap = abs(jacobian_pairing(u, psi, domain) - jacobian_pairing(v, psi, domain))
    products = stability_products(u, v, psi, domain, alpha, workers)
    ratios = {k: _ratio(gap, prod) for k, prod in products.items()}
    checks = {f"{k}_finite": bool(np.isfinite(r)) for k, r in ratios.items()}
    return ExperimentReport(
        "stability",
        _inputs(field=u.name, other=v.name, test=psi.name, domain=domain.describe(), alpha=alpha),
        float(gap), float(min(products.values())), None, {}, CHECKS,
        details={"products": products, "ratios": ratios, "checks": checks})


@experiment("stability_sweep")
def stability_sweep_experiment(u: VectorField, w: VectorField, psi: TestFunction, domain: Domain,
                               scales: Sequence[float] = (1e-1, 1e-2, 1e-3), alpha: float = 0.75,
                               workers: int = 1) -> ExperimentReport:
    """Ratios of the stability estimates for v = u + εw must stay within a factor of two"""
    sweep = []
    for eps in scales:
        report = stability_experiment(u, u.combine(w, eps), psi, domain, alpha, workers)
        sweep.append(dict({"eps": eps, "gap": report.lhs},
                          **{f"ratio_{k}": r for k, r in report.details["ratios"].items()}))
    checks = {}
    spreads = {}
    for kind in ("fractional", "sobolev", "holder"):
        values = np.array([entry[f"ratio_{kind}"] for entry in sweep])
        positive = values[values > 0]
        spread = float(positive.max() / positive.min()) if len(positive) else 1.0
        spreads[kind] = spread
        checks[f"{kind}_bounded"] = bool(np.all(np.isfinite(values)) and spread <= 2.0)
    return ExperimentReport(
        "stability_sweep",
        _inputs(field=u.name, perturbation=w.name, test=psi.name, domain=domain.describe(),
                scales=list(scales), alpha=alpha),
        float(sweep[-1]["gap"]), 0.0, None, {}, CHECKS,
        details={"sweep": sweep, "spreads": spreads, "checks": checks})


# ---------------------------------------------------------------------------
# Slab experiments
# ---------------------------------------------------------------------------

@experiment("cauchy")
def cauchy_experiment(U, targets: np.ndarray, t_k: float, t_l: float,
                      tolerance: Dict[str, float] = None) -> ExperimentReport:
    """
    Flat norm of the slice difference against ω_n·(traced length) per target,
    with the endpoint audit of every traced family
    """
    tol = _tolerance(tolerance, config.STOCHASTIC_REL_TOL)
    rows = []
    skipped = 0
    for a in np.atleast_2d(targets):
        try:
            family = trace_family(U, a, t_k, t_l, strict=True)
        except (SingularValueError, SingularCurveError, IncompleteTraceError) as e:
            logger.warning(f"cauchy: skipping a={np.round(a, 6).tolist()}: {e}")
            skipped += 1
            continue
        lhs = flat_norm(family.bottom.difference(family.top), U.domain).value
        rhs = unit_ball_volume(U.dimension) * family.total_length
        audit = audit_endpoints(family.curves, family.bottom, family.top, t_k, t_l)
        rows.append({"a": list(map(float, a)), "lhs": lhs, "rhs": rhs, "curves": len(family.curves),
                     "bound_ok": bool(lhs <= rhs * (1.0 + tol["rel"]) + tol["abs"]),
                     "signs_ok": not audit["sign_violations"], "conserved": audit["conserved"]})
    checks = {
        "bound": all(r["bound_ok"] for r in rows),
        "sign_rules": all(r["signs_ok"] for r in rows),
        "conservation": all(r["conserved"] for r in rows),
    }
    count = len(np.atleast_2d(targets))
    return ExperimentReport(
        "cauchy",
        _inputs(field=U.name, slab=[t_k, t_l], targets=count),
        float(sum(r["lhs"] for r in rows)), float(sum(r["rhs"] for r in rows)), None, tol, CHECKS,
        skipped / count if count else 0.0, details={"sweep": rows, "checks": checks})


@experiment("coarea_extension")
def coarea_extension_experiment(U, slab: Tuple[float, float], sampler: ASampler, samples: int = 2000,
                                workers: int = 1, tolerance: Dict[str, float] = None) -> ExperimentReport:
    """Monte Carlo ∫ H¹(U^{-1}(a)) da against ∫|JU| over the slab"""
    result = coarea_extension_check(U, slab, sampler, samples, workers)
    return ExperimentReport(
        "coarea_extension",
        _inputs(field=U.name, slab=list(slab), sampler=sampler.to_dict(), samples=samples),
        result.lhs, result.rhs, result.stderr, _tolerance(tolerance, 0.05), GAP, result.skip_fraction)
