"""Threat-aware deployment design.

The design vector is a density and a range per layer. The cost is

    c(lambda, r) = sum_m lambda_m (w_m + p r_m^eta)

(the battlefield area is a common factor and is dropped). Spreading targets
enter through a surrogate: a strand with threshold T' > 0 requires its mean
degree to reach 1 / (alpha (1 - T')), i.e. the degree-E[K] devices of that
strand are informed with density at least T' under the closed-form
equilibrium bound. The constraints are linear in the densities for fixed
ranges and linear in s = r^2 for fixed densities, so the program is
biconvex and is solved by alternating exact block solves:

* density block: a small LP (dense simplex from :mod:`spreadnet.lp`);
* range block: per-layer lower bounds plus water-filling on the global
  constraint;
* joint step: a local SLSQP move in (lambda, s) from the current point,
  followed by an exact range block. Without it the alternation stalls as
  soon as a bilinear constraint is tight, because each of the first two
  blocks can only reproduce the current point.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .degree import LayerSpec, StrandId, all_strands, strand_model
from .epidemic import effective_rate, solve_theta_exact
from .errors import InfeasibleError, InvalidParameterError, ThreatInfeasibleError
from .lp import linprog

SLACK = 1e-6
REL_TOL = 1e-6
MAX_ITER = 200


@dataclass(frozen=True)
class Thresholds:
    """Spreading targets: per layer, per ordered layer pair, and global.

    ``inter[m-1][n-1]`` is the target of strand (m, n); the diagonal is unused.
    """

    intra: tuple[float, ...]
    inter: tuple[tuple[float, ...], ...]
    global_: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "intra", tuple(float(x) for x in self.intra))
        object.__setattr__(self, "inter", tuple(tuple(float(x) for x in row) for row in self.inter))
        M = len(self.intra)
        if len(self.inter) != M or any(len(row) != M for row in self.inter):
            raise InvalidParameterError(f"inter thresholds must be a {M}x{M} matrix")
        values = list(self.intra) + [x for row in self.inter for x in row] + [self.global_]
        if any(not 0.0 <= x < 1.0 for x in values):
            raise InvalidParameterError(f"thresholds must lie in [0, 1), got {values}")
        if any(self.inter[m][m] != 0.0 for m in range(M)):
            raise InvalidParameterError("diagonal of the inter threshold matrix must be 0")

    @classmethod
    def zeros(cls, num_layers: int) -> Thresholds:
        return cls((0.0,) * num_layers, ((0.0,) * num_layers,) * num_layers, 0.0)

    def value(self, strand: StrandId) -> float:
        if strand.kind == "intra":
            return self.intra[strand.m - 1]
        if strand.kind == "inter":
            return self.inter[strand.m - 1][strand.n - 1]
        return self.global_

    def items(self) -> list[tuple[StrandId, float]]:
        return [(s, self.value(s)) for s in all_strands(len(self.intra))]

    def active(self) -> list[tuple[StrandId, float]]:
        """Strands with a positive target; a zero target imposes nothing."""
        return [(s, t) for s, t in self.items() if t > 0.0]


@dataclass(frozen=True)
class MissionSpec:
    """Everything the design problem needs. Ranges in km, densities in km^-2.

    ``thresholds`` feed the surrogate constraints directly; ``original`` are
    the targets checked afterwards against the exact equilibrium (defaults to
    ``thresholds``).
    """

    name: str
    weights: tuple[float, ...]
    power_price: float
    path_loss: float
    density_bounds: tuple[tuple[float, float], ...]
    range_bounds: tuple[tuple[float, float], ...]
    thresholds: Thresholds
    original: Thresholds | None = None
    gamma: float = 1.0
    delta: float = 0.0
    area_km2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "density_bounds", tuple((float(a), float(b)) for a, b in self.density_bounds))
        object.__setattr__(self, "range_bounds", tuple((float(a), float(b)) for a, b in self.range_bounds))
        if self.original is None:
            object.__setattr__(self, "original", self.thresholds)
        M = len(self.weights)
        if M == 0:
            raise InvalidParameterError("weights: need at least one layer")
        for name, seq in (("density_bounds", self.density_bounds), ("range_bounds", self.range_bounds)):
            if len(seq) != M:
                raise InvalidParameterError(f"{name}: expected {M} entries, got {len(seq)}")
            for lo, hi in seq:
                if not 0.0 <= lo <= hi < math.inf:
                    raise InvalidParameterError(f"{name}: need 0 <= lo <= hi < inf, got ({lo}, {hi})")
        if len(self.thresholds.intra) != M or len(self.original.intra) != M:
            raise InvalidParameterError(f"thresholds: expected {M} layers")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise InvalidParameterError(f"weights: must be >= 0 and sum to 1, got {self.weights}")
        if not self.power_price >= 0:
            raise InvalidParameterError(f"power_price: must be >= 0, got {self.power_price}")
        if not self.path_loss >= 2:
            raise InvalidParameterError(f"path_loss: must be >= 2, got {self.path_loss}")
        if not self.gamma > 0:
            raise InvalidParameterError(f"gamma: must be > 0, got {self.gamma}")
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidParameterError(f"delta: must lie in [0, 1], got {self.delta}")
        if not self.area_km2 > 0:
            raise InvalidParameterError(f"area_km2: must be > 0, got {self.area_km2}")

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def alpha(self) -> float:
        return effective_rate(self.gamma, self.delta)

    def with_delta(self, delta: float) -> MissionSpec:
        return replace(self, delta=float(delta))

    def bounds_arrays(self):
        lam = np.array(self.density_bounds)
        r = np.array(self.range_bounds)
        return lam[:, 0], lam[:, 1], r[:, 0], r[:, 1]


@dataclass(frozen=True)
class NetworkDesign:
    densities: tuple[float, ...]
    ranges_km: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "densities", tuple(float(x) for x in self.densities))
        object.__setattr__(self, "ranges_km", tuple(float(x) for x in self.ranges_km))
        if len(self.densities) != len(self.ranges_km):
            raise InvalidParameterError("densities and ranges must have equal length")

    @property
    def num_layers(self) -> int:
        return len(self.densities)

    def layers(self) -> list[LayerSpec]:
        return [LayerSpec(lam, r) for lam, r in zip(self.densities, self.ranges_km)]

    def in_box(self, mission: MissionSpec, tol: float = 1e-9) -> bool:
        lam_lo, lam_hi, r_lo, r_hi = mission.bounds_arrays()
        lam, r = np.array(self.densities), np.array(self.ranges_km)
        return bool(
            np.all(lam >= lam_lo - tol) and np.all(lam <= lam_hi + tol)
            and np.all(r >= r_lo - tol) and np.all(r <= r_hi + tol)
        )


@dataclass(frozen=True)
class VerificationRow:
    strand: StrandId
    threshold: float
    theta: float
    average_informed: float

    @property
    def passed(self) -> bool:
        return self.average_informed >= self.threshold


@dataclass(frozen=True)
class VerificationReport:
    alpha: float
    rows: tuple[VerificationRow, ...]

    @property
    def all_passed(self) -> bool:
        return all(row.passed for row in self.rows)


@dataclass(frozen=True)
class OptimizationResult:
    design: NetworkDesign
    cost: float
    feasible_surrogate: bool
    residuals: dict
    acs_iterations: int
    cost_trace: tuple[float, ...]
    start_index: int = 0
    infeasible_starts: tuple[int, ...] = ()
    original_report: VerificationReport | None = field(default=None, compare=False)


def cost(design: NetworkDesign, mission: MissionSpec) -> float:
    """sum_m lambda_m (w_m + p r_m^eta), ranges in km."""
    lam = np.asarray(design.densities)
    r = np.asarray(design.ranges_km)
    return float(np.sum(lam * (np.asarray(mission.weights) + mission.power_price * r**mission.path_loss)))


def _cost(lam: np.ndarray, r: np.ndarray, mission: MissionSpec) -> float:
    return float(np.sum(lam * (np.asarray(mission.weights) + mission.power_price * r**mission.path_loss)))


def required_degree(alpha: float, threshold: float) -> float:
    """Mean degree needed for threshold T': 1 / (alpha (1 - T'))."""
    return 1.0 / (alpha * (1.0 - threshold))


def surrogate_constraints(mission: MissionSpec, alpha: float | None = None) -> list[tuple[StrandId, float]]:
    """Active (strand, required mean degree) pairs for the mission's alpha."""
    alpha = mission.alpha if alpha is None else alpha
    active = mission.thresholds.active()
    if active and alpha <= 0.0:
        raise ThreatInfeasibleError(
            "spreading rate is zero while thresholds are active",
            [s for s, _ in active],
        )
    return [(s, required_degree(alpha, t)) for s, t in active]


def mean_degree(densities: Sequence[float], ranges_km: Sequence[float], strand: StrandId) -> float:
    lam = np.asarray(densities, float)
    cover = math.pi * np.asarray(ranges_km, float) ** 2
    if strand.kind == "intra":
        return float(lam[strand.m - 1] * cover[strand.m - 1])
    if strand.kind == "inter":
        return float((lam[strand.m - 1] + lam[strand.n - 1]) * cover[strand.m - 1])
    return float(np.dot(lam, cover))


def surrogate_residuals(design: NetworkDesign, mission: MissionSpec) -> dict[StrandId, float]:
    """Mean degree minus required mean degree, one entry per active strand."""
    return {
        s: mean_degree(design.densities, design.ranges_km, s) - rhs
        for s, rhs in surrogate_constraints(mission)
    }


def _density_rows(ranges: np.ndarray, cons) -> np.ndarray:
    """Row i gives the coefficients of lambda in constraint i's mean degree."""
    cover = math.pi * ranges**2
    A = np.zeros((len(cons), len(ranges)))
    for i, (s, _) in enumerate(cons):
        if s.kind == "intra":
            A[i, s.m - 1] = cover[s.m - 1]
        elif s.kind == "inter":
            A[i, s.m - 1] += cover[s.m - 1]
            A[i, s.n - 1] += cover[s.m - 1]
        else:
            A[i] = cover
    return A


def solve_density_block(ranges_km: Sequence[float], mission: MissionSpec, alpha: float | None = None) -> np.ndarray:
    """Cheapest densities for fixed ranges (an LP).

    Raises:
        InfeasibleError: even the maximal densities miss some constraint; the
            certificate lists those strands.
    """
    r = np.asarray(ranges_km, float)
    cons = surrogate_constraints(mission, alpha)
    lam_lo, lam_hi, _, _ = mission.bounds_arrays()
    c = np.asarray(mission.weights) + mission.power_price * r**mission.path_loss
    if not cons:
        # positive-cost variables sit at their lower bound; zero-cost ones are free
        return lam_lo.copy()
    A = _density_rows(r, cons)
    b = np.array([rhs for _, rhs in cons])
    # all coefficients are >= 0, so the top corner is the most favourable point
    short = A @ lam_hi < b - SLACK
    if short.any():
        raise InfeasibleError(
            "no densities within bounds meet the constraints for these ranges",
            [cons[i][0] for i in np.nonzero(short)[0]],
        )
    # pivoting round-off can leave a row a hair short; aim slightly high
    target = np.minimum(b * (1 + 1e-10) + 1e-12, A @ lam_hi)
    res = linprog(c, -A, -target, list(zip(lam_lo, lam_hi)))
    return res.x


def _level_fill(coef: np.ndarray, lower: np.ndarray, upper: np.ndarray, target: float) -> np.ndarray:
    """Smallest common level S with sum coef * clip(S, lower, upper) = target.

    Every layer shares the same marginal cost curve in s, so the optimum
    raises the lowest s values first until the target is met.
    """
    live = coef > 0
    knots = np.unique(np.concatenate([lower[live], upper[live]]))

    def filled(level):
        return float(np.dot(coef, np.clip(level, lower, upper) * live))

    prev_level, prev_val = knots[0], filled(knots[0])
    s = lower.copy()
    for level in knots[1:]:
        val = filled(level)
        if val >= target:
            frac = (target - prev_val) / (val - prev_val) if val > prev_val else 1.0
            level = prev_level + frac * (level - prev_level)
            break
        prev_level, prev_val = level, val
    s[live] = np.clip(level, lower[live], upper[live])
    return s


def solve_range_block(densities: Sequence[float], mission: MissionSpec, alpha: float | None = None) -> np.ndarray:
    """Cheapest ranges for fixed densities.

    Works in s = r^2: single-layer constraints give lower bounds on s_m, and
    the global constraint, if still short, is met by water-filling.

    Raises:
        InfeasibleError: some constraint fails even at the maximal ranges.
    """
    lam = np.asarray(densities, float)
    cons = surrogate_constraints(mission, alpha)
    _, _, r_lo, r_hi = mission.bounds_arrays()
    lower, upper = r_lo**2, r_hi**2
    s = lower.copy()
    failed = []
    global_rhs = None
    for strand, rhs in cons:
        if strand.kind == "combined":
            global_rhs = rhs
            continue
        m = strand.m - 1
        coef = math.pi * (lam[m] if strand.kind == "intra" else lam[m] + lam[strand.n - 1])
        if coef * upper[m] < rhs - SLACK:
            failed.append(strand)
        elif coef > 0:
            s[m] = max(s[m], rhs / coef)
    s = np.minimum(s, upper)
    if global_rhs is not None:
        coef = math.pi * lam
        if np.dot(coef, upper) < global_rhs - SLACK:
            failed.append(StrandId.combined())
        elif np.dot(coef, s) < global_rhs:
            s = _level_fill(coef, s, upper, global_rhs)
    if failed:
        raise InfeasibleError("no ranges within bounds meet the constraints for these densities", failed)
    return np.sqrt(s)


def _joint_block(lam: np.ndarray, r: np.ndarray, mission: MissionSpec, cons) -> np.ndarray | None:
    """Local step in (lambda, s) jointly, s = r^2.

    The two exact blocks stop at partial optima once a bilinear constraint is
    tight: neither can trade density in one layer against range in another.
    A few SLSQP iterations on the joint problem, started at the current point,
    find such trades. Only the densities are returned; the caller recomputes
    exact ranges for them. Returns None when the step fails.
    """
    M = len(lam)
    lam_lo, lam_hi, r_lo, r_hi = mission.bounds_arrays()
    s_lo, s_hi = r_lo**2, r_hi**2
    w = np.asarray(mission.weights)
    p, q = mission.power_price, mission.path_loss / 2.0
    lam_scale = np.maximum(lam_hi, 1e-12)
    s_scale = np.maximum(s_hi, 1e-12)

    def split(x):
        return x[:M] * lam_scale, x[M:] * s_scale

    def fun(x):
        v, s = split(x)
        return float(np.sum(v * (w + p * s**q)))

    def jac(x):
        v, s = split(x)
        d_lam = w + p * s**q
        d_s = p * q * v * np.maximum(s, 1e-300) ** (q - 1)
        return np.concatenate([d_lam * lam_scale, d_s * s_scale])

    rows = []
    for i, (strand, c) in enumerate(cons):
        if strand.kind == "intra":
            pairs = [(strand.m - 1, strand.m - 1)]
        elif strand.kind == "inter":
            pairs = [(strand.m - 1, strand.m - 1), (strand.n - 1, strand.m - 1)]
        else:
            pairs = [(k, k) for k in range(M)]

        def g(x, pairs=pairs, c=c):
            v, s = split(x)
            return sum(math.pi * v[a] * s[b] for a, b in pairs) / c - 1.0

        def g_jac(x, pairs=pairs, c=c):
            v, s = split(x)
            out = np.zeros(2 * M)
            for a, b in pairs:
                out[a] += math.pi * s[b] * lam_scale[a] / c
                out[M + b] += math.pi * v[a] * s_scale[b] / c
            return out

        rows.append({"type": "ineq", "fun": g, "jac": g_jac})

    x0 = np.concatenate([lam / lam_scale, r**2 / s_scale])
    bounds = list(zip(np.concatenate([lam_lo / lam_scale, s_lo / s_scale]),
                      np.concatenate([lam_hi / lam_scale, s_hi / s_scale])))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(fun, x0, jac=jac, bounds=bounds, constraints=rows, method="SLSQP",
                       options={"ftol": 1e-12, "maxiter": 200})
    if not np.all(np.isfinite(res.x)):
        return None
    v, _ = split(res.x)
    return np.clip(v, lam_lo, lam_hi)


@dataclass
class _Run:
    lam: np.ndarray
    r: np.ndarray
    cost: float
    trace: list
    iterations: int


def _alternate(mission, alpha, cons, lam0, r0, max_iter, rel_tol, joint) -> _Run:
    try:
        r = solve_range_block(lam0, mission, alpha)
        lam = np.asarray(lam0, float).copy()
    except InfeasibleError:
        lam = solve_density_block(r0, mission, alpha)
        r = solve_range_block(lam, mission, alpha)
    current = _cost(lam, r, mission)
    trace = [current]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        start = current
        new_lam = solve_density_block(r, mission, alpha)
        c = _cost(new_lam, r, mission)
        if c <= current:
            lam, current = new_lam, c
        new_r = solve_range_block(lam, mission, alpha)
        c = _cost(lam, new_r, mission)
        if c <= current:
            r, current = new_r, c
        if joint and cons:
            cand = _joint_block(lam, r, mission, cons)
            if cand is not None:
                try:
                    # exact blocks at the new point remove SLSQP's constraint slop
                    cand_r = solve_range_block(cand, mission, alpha)
                    cand = solve_density_block(cand_r, mission, alpha)
                except InfeasibleError:
                    cand_r = None
                if cand_r is not None:
                    c = _cost(cand, cand_r, mission)
                    if c < current:
                        lam, r, current = cand, cand_r, c
        trace.append(current)
        if start - current <= rel_tol * abs(start):
            break
    return _Run(lam, r, current, trace, iterations)


def default_starts(mission: MissionSpec) -> list[NetworkDesign]:
    """Low corner, high corner, centre, and the two mixed corners of the box."""
    lam_lo, lam_hi, r_lo, r_hi = mission.bounds_arrays()
    mid_lam, mid_r = (lam_lo + lam_hi) / 2, (r_lo + r_hi) / 2
    pairs = [(lam_lo, r_lo), (lam_hi, r_hi), (mid_lam, mid_r), (lam_hi, r_lo), (lam_lo, r_hi)]
    return [NetworkDesign(tuple(a), tuple(b)) for a, b in pairs]


def optimize(
    mission: MissionSpec,
    start: NetworkDesign | Sequence[NetworkDesign] | None = None,
    max_iter: int = MAX_ITER,
    rel_tol: float = REL_TOL,
    joint: bool = True,
    verify: bool = True,
) -> OptimizationResult:
    """Minimise the cost under the surrogate constraints by alternating block solves.

    Each start runs (density block, range block, joint step) rounds until
    the relative cost decrease of a round falls below ``rel_tol`` or
    ``max_iter`` rounds have run. The cheapest feasible run is returned, with
    the exact-equilibrium check against ``mission.original`` attached when
    ``verify`` is set.

    Raises:
        InfeasibleError: no start reached a feasible design.
    """
    alpha = mission.alpha
    cons = surrogate_constraints(mission, alpha)
    if start is None:
        starts = default_starts(mission)
    elif isinstance(start, NetworkDesign):
        starts = [start]
    else:
        starts = list(start)
    best, best_idx, failed, certificate = None, -1, [], set()
    for i, st in enumerate(starts):
        try:
            run = _alternate(mission, alpha, cons, np.array(st.densities), np.array(st.ranges_km),
                             max_iter, rel_tol, joint)
        except InfeasibleError as exc:
            failed.append(i)
            certificate.update(exc.certificate)
            continue
        if best is None or run.cost < best.cost:
            best, best_idx = run, i
    if best is None:
        raise InfeasibleError(
            f"all {len(starts)} starts are infeasible for mission {mission.name!r}",
            sorted(certificate, key=str),
        )
    design = NetworkDesign(tuple(best.lam), tuple(best.r))
    residuals = surrogate_residuals(design, mission)
    feasible = all(v >= -SLACK for v in residuals.values()) and design.in_box(mission)
    result = OptimizationResult(
        design,
        best.cost,
        feasible,
        residuals,
        best.iterations,
        tuple(best.trace),
        best_idx,
        tuple(failed),
    )
    if verify:
        result = replace(result, original_report=verify_original(result, mission))
    return result


def verify_original(result: OptimizationResult, mission: MissionSpec, thresholds: Thresholds | None = None) -> VerificationReport:
    """Exact average informed density of every strand against its target."""
    thresholds = mission.original if thresholds is None else thresholds
    alpha = mission.alpha
    layers = result.design.layers()
    rows = []
    for strand, target in thresholds.items():
        if strand.kind == "combined" and sum(result.design.densities) <= 0:
            theta = avg = 0.0
        else:
            eq = solve_theta_exact(strand_model(layers, strand), alpha)
            theta, avg = eq.theta, eq.average_informed
        rows.append(VerificationRow(strand, target, theta, avg))
    return VerificationReport(alpha, tuple(rows))


@dataclass(frozen=True)
class SweepRow:
    delta: float
    alpha: float
    result: OptimizationResult | None
    error: str = ""

    @property
    def feasible(self) -> bool:
        return self.result is not None and self.result.feasible_surrogate


def _sweep_one(mission: MissionSpec, delta: float) -> SweepRow:
    m = mission.with_delta(delta)
    try:
        return SweepRow(delta, m.alpha, optimize(m, verify=False))
    except InfeasibleError as exc:
        return SweepRow(delta, m.alpha, None, str(exc))


def sweep_threat(mission: MissionSpec, deltas: Sequence[float], jobs: int = 1) -> list[SweepRow]:
    """Optimise independently at every threat level; rows sorted by delta."""
    deltas = sorted(float(d) for d in deltas)
    for d in deltas:
        if not 0.0 <= d < 1.0:
            raise InvalidParameterError(f"threat levels must lie in [0, 1), got {d}")
    if jobs > 1 and len(deltas) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, [mission] * len(deltas), deltas))
    else:
        rows = [_sweep_one(mission, d) for d in deltas]
    return sorted(rows, key=lambda row: row.delta)
