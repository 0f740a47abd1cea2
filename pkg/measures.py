"""
Atomic Measures
Signed point-mass measures, their flat (W^{-1,1}) norm by min-cost matching
with a boundary sink, and dictionary lower bounds of total variation.
"""
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial.distance import cdist

from domain_field import Domain, VectorField
from degree import (
    BoundaryData,
    SeedGrid,
    check_boundary_clearance,
    check_regular,
    find_preimages,
)
from errors import InvalidGeometryError, InvalidParameterError
from jacobian_core import TestFunction, plateau, unit_ball_volume

BOUNDARY = "BOUNDARY"


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """
    scale·Σ_k σ_k δ_{x_k}

    Args:
        locations: (k, n) atom positions
        signs: (k,) entries ±1
        scale: common mass (ω_n for Ju^a)
    """
    locations: np.ndarray
    signs: np.ndarray
    scale: float = float(np.pi)

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        if locs.ndim == 1:
            locs = locs.reshape(-1, 2) if locs.size else np.zeros((0, 2))
        signs = np.asarray(self.signs, dtype=float).ravel()
        if len(signs) != len(locs):
            raise InvalidParameterError("Atom locations and signs differ in length")
        if not np.all(np.isin(signs, (-1.0, 1.0))):
            raise InvalidParameterError("Atom signs must be +1 or -1")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "signs", signs)

    def __len__(self) -> int:
        return len(self.signs)

    @property
    def dimension(self) -> int:
        return self.locations.shape[1]

    @property
    def total_sign(self) -> float:
        return float(np.sum(self.signs))

    def positives(self) -> np.ndarray:
        return np.flatnonzero(self.signs > 0)

    def negatives(self) -> np.ndarray:
        return np.flatnonzero(self.signs < 0)

    def difference(self, other: "AtomicMeasure") -> "AtomicMeasure":
        """self - other (scales must match)"""
        if not np.isclose(self.scale, other.scale):
            raise InvalidParameterError("Cannot subtract measures with different scales")
        locs = np.concatenate([self.locations, other.locations.reshape(-1, self.dimension)])
        return AtomicMeasure(locs, np.concatenate([self.signs, -other.signs]), self.scale)

    def scaled(self, factor: float) -> "AtomicMeasure":
        return AtomicMeasure(self.locations, self.signs, self.scale * float(factor))

    def check_inside(self, domain: Domain):
        """
        Raises:
            InvalidGeometryError: an atom outside the open domain
        """
        if len(self) and not np.all(domain.contains(self.locations)):
            raise InvalidGeometryError("Atoms must lie in the open domain")

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "atoms": [{"x": loc.tolist(), "sign": int(s)} for loc, s in zip(self.locations, self.signs)],
        }

    @classmethod
    def from_records(cls, records: Sequence[dict], scale: float = None, dimension: int = 2) -> "AtomicMeasure":
        """Atoms from [{"x": [...], "sign": ±1}, ...]"""
        locs = np.array([r["x"] for r in records], dtype=float).reshape(-1, dimension)
        signs = np.array([r["sign"] for r in records], dtype=float)
        return cls(locs, signs, float(np.pi if scale is None else scale))

    @classmethod
    def empty(cls, dimension: int = 2, scale: float = None) -> "AtomicMeasure":
        return cls(np.zeros((0, dimension)), np.zeros(0), float(unit_ball_volume(dimension) if scale is None else scale))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def atomic_from_regular_value(u: VectorField, domain: Domain, a, seed_grid: SeedGrid = None,
                              boundary: BoundaryData = None) -> AtomicMeasure:
    """
    Ju^a = ω_n Σ sgn det ∇u(x) δ_x over the preimages of a

    Raises:
        BoundaryValueError: a too close to u(∂Ω)
        SingularValueError: a singular value
    """
    a = np.asarray(a, dtype=float).ravel()
    data = boundary or BoundaryData.for_domain(u, domain)
    check_boundary_clearance(data, a)
    points, dets = find_preimages(u, domain, a, seed_grid)
    check_regular(dets, a)
    return AtomicMeasure(points.reshape(-1, domain.dimension), np.sign(dets),
                         unit_ball_volume(domain.dimension))


@dataclass(frozen=True)
class MatchedPair:
    """One edge of a flat-norm matching; None stands for the boundary"""
    positive: Optional[int]
    negative: Optional[int]
    cost: float

    def to_list(self) -> list:
        return [BOUNDARY if self.positive is None else self.positive,
                BOUNDARY if self.negative is None else self.negative,
                self.cost]


@dataclass
class FlatNormResult:
    """Flat norm value, its matching and the optional LP certificate gap"""
    value: float
    matching: List[MatchedPair] = field(default_factory=list)
    scale: float = 1.0
    certificate_gap: Optional[float] = None

    def recompute(self) -> float:
        """scale·Σ matching costs"""
        return float(self.scale * sum(p.cost for p in self.matching))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "scale": self.scale,
            "matching": [p.to_list() for p in self.matching],
            "certificate_gap": self.certificate_gap,
        }


def flat_norm(mu: AtomicMeasure, domain: Domain, with_oracle: bool = False) -> FlatNormResult:
    """
    ‖μ‖_{W^{-1,1}(Ω)} by min-cost assignment

    Rows are positives followed by one boundary slot per negative; columns are
    negatives followed by one boundary slot per positive. Atom-to-boundary
    costs are dist(·, ∂Ω); slot-to-slot costs are zero.
    """
    pos = mu.positives()
    neg = mu.negatives()
    P, Q = len(pos), len(neg)
    if P + Q == 0:
        result = FlatNormResult(0.0, [], mu.scale)
        if with_oracle:
            result.certificate_gap = 0.0
        return result

    x = mu.locations[pos]
    y = mu.locations[neg]
    dx = domain.distance_to_boundary(x) if P else np.zeros(0)
    dy = domain.distance_to_boundary(y) if Q else np.zeros(0)
    pair = cdist(x, y) if P and Q else np.zeros((P, Q))
    big = 1e6 * (1.0 + max(pair.max(initial=0.0), dx.max(initial=0.0), dy.max(initial=0.0)))

    cost = np.zeros((P + Q, Q + P))
    cost[:P, :Q] = pair
    cost[:P, Q:] = big
    cost[:P, Q:][np.arange(P), np.arange(P)] = dx
    cost[P:, :Q] = big
    cost[P:, :Q][np.arange(Q), np.arange(Q)] = dy
    rows, cols = linear_sum_assignment(cost)

    matching = []
    for r, c in zip(rows, cols):
        if r < P and c < Q:
            matching.append(MatchedPair(int(pos[r]), int(neg[c]), float(pair[r, c])))
        elif r < P:
            matching.append(MatchedPair(int(pos[r]), None, float(dx[r])))
        elif c < Q:
            matching.append(MatchedPair(None, int(neg[c]), float(dy[c])))
    result = FlatNormResult(0.0, matching, mu.scale)
    result.value = result.recompute()
    if with_oracle:
        result.certificate_gap = abs(result.value - flat_norm_lp_oracle(mu, domain))
    return result


def flat_norm_lp_oracle(mu: AtomicMeasure, domain: Domain, grid: np.ndarray = None) -> float:
    """
    sup{<μ, ψ> : Lip ψ <= 1, ψ = 0 on ∂Ω} as a linear program

    Variables are the values of ψ at the atoms (and at optional extra grid
    nodes); constraints are the pairwise Lipschitz bounds and |ψ| <= dist(·, ∂Ω).
    """
    if len(mu) == 0:
        return 0.0
    points = mu.locations
    if grid is not None and len(grid):
        points = np.concatenate([points, np.asarray(grid, dtype=float)])
    m = len(points)
    dist = cdist(points, points)
    cap = domain.distance_to_boundary(points)

    c = np.zeros(m)
    np.add.at(c, np.arange(len(mu)), -mu.signs)
    ii, jj = np.nonzero(~np.eye(m, dtype=bool))
    A = np.zeros((len(ii), m))
    A[np.arange(len(ii)), ii] = 1.0
    A[np.arange(len(ii)), jj] = -1.0
    b = dist[ii, jj]
    res = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(-cap, cap)), method="highs")
    if not res.success:
        logger.error(f"Flat-norm LP oracle failed: {res.message}")
        raise InvalidParameterError(f"LP oracle failed: {res.message}")
    return float(-res.fun * mu.scale)


def pair_atomic(mu: AtomicMeasure, psi: TestFunction) -> float:
    """scale·Σ σ_k ψ(x_k)"""
    if len(mu) == 0:
        return 0.0
    return float(mu.scale * np.sum(mu.signs * psi(mu.locations)))


def dyadic_plateaus(domain: Domain, level: int, ramp_fraction: float = 0.02) -> List[TestFunction]:
    """Smoothed indicators of the level-``level`` dyadic cells lying inside Ω"""
    lo, hi = (np.asarray(v, dtype=float) for v in domain.bounding_box())
    cells = 2 ** level
    side = (hi - lo) / cells
    out = []
    n = domain.dimension
    for index in np.ndindex(*([cells] * n)):
        c_lo = lo + np.asarray(index) * side
        c_hi = c_lo + side
        corners = np.array([np.where(np.asarray(bits) == 1, c_hi, c_lo)
                            for bits in np.ndindex(*([2] * n))])
        if domain.kind != "rectangle" and not np.all(domain.contains(corners, margin=-1e-12)):
            continue
        out.append(plateau(c_lo, c_hi, ramp_fraction * float(np.min(side))))
    return out


def tv_estimate(pairing: Callable[[TestFunction], float], domain: Domain, family_size: int = 256,
                ramp_fraction: float = 0.02) -> Dict:
    """
    Certified lower bound of |T|_TV over dyadic plateau dictionaries

    Each level's plateaus have disjoint supports, so ψ = Σ_c sign(<T, ψ_c>) ψ_c
    satisfies |ψ| <= 1 and <T, ψ> = Σ_c |<T, ψ_c>|. Levels are nested and the
    best level is reported, so the bound is nondecreasing in the family size.

    Returns:
        {"value", "family_size", "level", "per_level"}
    """
    n = domain.dimension
    levels = []
    used = 0
    level = 0
    while True:
        count = (2 ** level) ** n
        if used + count > max(family_size, 1) and level > 0:
            break
        levels.append(level)
        used += count
        level += 1
    per_level = []
    for lvl in levels:
        values = [pairing(psi) for psi in dyadic_plateaus(domain, lvl, ramp_fraction)]
        per_level.append(float(np.sum(np.abs(values))))
    best = int(np.argmax(per_level))
    logger.debug(f"tv_estimate: levels {levels}, values {per_level}")
    return {"value": per_level[best], "family_size": used, "level": levels[best],
            "per_level": per_level}
