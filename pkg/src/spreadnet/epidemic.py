"""Degree-based mean-field SIS dynamics of one information strand.

A device of degree k is informed with density I_k. Informed devices forget at
unit rate and uninformed ones are informed at rate alpha * k * Theta, where
Theta is the probability that a neighbour reached along a random edge is
informed. The stationary state solves Theta = F(Theta) with

    F(Theta) = (1 / E[K]) * sum_k k P(k) * alpha k Theta / (1 + alpha k Theta).

All series run over k = 0..k_max of the degree model (tail mass < 1e-12).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .degree import DegreeModel, LayerSpec, StrandId, all_strands, strand_model
from .errors import ConvergenceError, InvalidParameterError, StepSizeError, UndefinedThresholdError

# alphas this close above the threshold are treated as subcritical
NEAR_THRESHOLD = 1e-8


@dataclass(frozen=True)
class ThreatParams:
    """Contact rate and threat level; ``alpha`` is the effective spreading rate."""

    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidParameterError(f"contact rate must be > 0, got {self.gamma}")
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidParameterError(f"threat level must lie in [0, 1], got {self.delta}")

    @property
    def alpha(self) -> float:
        return effective_rate(self.gamma, self.delta)


@dataclass(frozen=True)
class EquilibriumResult:
    strand: StrandId
    alpha: float
    theta: float
    informed_by_degree: np.ndarray
    average_informed: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class DynamicsState:
    time: float
    informed: np.ndarray
    theta: float


def effective_rate(gamma: float, delta: float) -> float:
    """alpha = gamma * (1 - delta)."""
    if not gamma > 0:
        raise InvalidParameterError(f"contact rate must be > 0, got {gamma}")
    if not 0.0 <= delta <= 1.0:
        raise InvalidParameterError(f"threat level must lie in [0, 1], got {delta}")
    return gamma * (1.0 - delta)


def epidemic_threshold(model: DegreeModel) -> float:
    """Spreading rate E[K] / E[K^2] below which only Theta = 0 exists."""
    mean, second = model.mean, model.second_moment
    if mean <= 0.0:
        raise UndefinedThresholdError(f"threshold undefined for {model.strand}: E[K] = 0")
    return mean / second


def _weighted_degrees(model: DegreeModel) -> tuple[np.ndarray, np.ndarray]:
    k = model.support.astype(float)
    return k, k * model.pmf_table() / model.mean


def theta_map(model: DegreeModel, alpha: float, theta: float) -> float:
    """Right-hand side F(Theta) of the self-consistency equation."""
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameterError(f"theta must lie in [0, 1], got {theta}")
    if model.mean <= 0.0 or theta == 0.0:
        return 0.0
    k, edge_weight = _weighted_degrees(model)
    x = alpha * k * theta
    return float(np.dot(edge_weight, x / (1.0 + x)))


def stationary_informed(alpha: float, theta: float, k) -> np.ndarray | float:
    """Stationary informed density of degree-k devices, alpha k Theta / (1 + alpha k Theta)."""
    x = alpha * np.asarray(k, dtype=float) * theta
    out = x / (1.0 + x)
    return float(out) if np.ndim(out) == 0 else out


def average_informed(model: DegreeModel, alpha: float, theta: float) -> float:
    """Average informed density sum_k I_k P(k)."""
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameterError(f"theta must lie in [0, 1], got {theta}")
    if theta == 0.0:
        return 0.0
    return float(np.dot(model.pmf_table(), stationary_informed(alpha, theta, model.support)))


def theta_approx(model: DegreeModel, alpha: float) -> float:
    """Closed-form lower bound max(0, 1 - 1 / (alpha E[K]))."""
    x = alpha * model.mean
    if x <= 1.0:
        return 0.0
    return 1.0 - 1.0 / x


def _iterate(f, theta0: float, tol: float, max_iter: int, accelerate: bool) -> tuple[float, int]:
    """Fixed-point iteration theta <- f(theta), two plain steps per round.

    A round stops the run when its second step is below ``tol * (1 - rho)``,
    rho being the observed contraction ratio, which bounds the distance to the
    fixed point by ``tol`` even when rho is close to one; steps at round-off
    level (below 1e-15) also stop it. With ``accelerate``
    each round ends with an Aitken extrapolation (Steffensen's method).
    """
    x = theta0
    it = 0
    while it < max_iter:
        x1 = f(x)
        x2 = f(x1)
        it += 2
        d1, d2 = x1 - x, x2 - x1
        rho = min(abs(d2 / d1), 1.0 - 1e-12) if d1 != 0.0 else 0.0
        # the floor catches round-off noise, where rho is meaningless
        if abs(d2) < max(tol * (1.0 - rho), 1e-15):
            return x2, it
        x = x2
        if accelerate and d2 != d1:
            cand = x - d2 * d2 / (d2 - d1)
            # any point of (0, 1] still converges, so only the range is guarded
            if 0.0 < cand <= 1.0:
                x = cand
    raise ConvergenceError(f"fixed-point iteration did not converge in {max_iter} steps", x, it)


def solve_theta_exact(
    model: DegreeModel,
    alpha: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    theta0: float = 1.0,
    accelerate: bool = True,
) -> EquilibriumResult:
    """Solve Theta = F(Theta) for the non-trivial branch.

    Below the threshold (or within 1e-8 above it) the only equilibrium is
    Theta = 0. Otherwise F is increasing with F(1) < 1 and h(Theta) = F/Theta
    is decreasing, so every start in (0, 1] converges to the unique positive
    fixed point. ``accelerate`` interleaves Aitken steps, which matters close
    to the bifurcation where the plain contraction ratio approaches one.

    Raises:
        ConvergenceError: ``max_iter`` exceeded; carries the last iterate.
    """
    if alpha < 0:
        raise InvalidParameterError(f"alpha must be >= 0, got {alpha}")
    if not 0.0 < theta0 <= 1.0:
        raise InvalidParameterError(f"theta0 must lie in (0, 1], got {theta0}")
    k = model.support
    if model.mean <= 0.0 or alpha <= epidemic_threshold(model) + NEAR_THRESHOLD:
        return EquilibriumResult(model.strand, alpha, 0.0, np.zeros(k.size), 0.0, True, 0)

    _, edge_weight = _weighted_degrees(model)
    ak = alpha * k.astype(float)

    def f(theta: float) -> float:
        x = ak * theta
        return float(np.dot(edge_weight, x / (1.0 + x)))

    theta, iterations = _iterate(f, theta0, tol, max_iter, accelerate)
    informed = stationary_informed(alpha, theta, k)
    return EquilibriumResult(
        model.strand,
        alpha,
        theta,
        informed,
        float(np.dot(model.pmf_table(), informed)),
        True,
        iterations,
    )


def integrate_dynamics(
    model: DegreeModel,
    alpha: float,
    initial=0.01,
    t_end: float | None = None,
    step: float = 0.01,
    save_every: float = 1.0,
    deriv_tol: float = 1e-9,
    max_time: float = 1e4,
) -> list[DynamicsState]:
    """Classic RK4 integration of dI_k/dt = -I_k + alpha k (1 - I_k) Theta(t).

    ``initial`` is a scalar (same density for every degree) or an array of
    length k_max + 1. With ``t_end=None`` the run stops once
    max_k |dI_k/dt| < ``deriv_tol`` (or at ``max_time``). States are kept
    every ``save_every`` time units plus the terminal one.

    Raises:
        StepSizeError: some I_k left [0, 1] by more than 1e-6.
    """
    if step <= 0:
        raise InvalidParameterError(f"step must be > 0, got {step}")
    k = model.support.astype(float)
    state = np.broadcast_to(np.asarray(initial, dtype=float), k.shape).copy()
    if np.any(state < 0) or np.any(state > 1):
        raise InvalidParameterError("initial densities must lie in [0, 1]")
    if model.mean > 0:
        edge_weight = k * model.pmf_table() / model.mean
    else:
        edge_weight = np.zeros_like(k)
    ak = alpha * k

    def rhs(y: np.ndarray) -> np.ndarray:
        theta = float(np.dot(edge_weight, y))
        return -y + ak * (1.0 - y) * theta

    horizon = max_time if t_end is None else t_end
    n_steps = int(math.ceil(horizon / step - 1e-9))
    save_stride = max(1, int(round(save_every / step)))
    states = [DynamicsState(0.0, state.copy(), float(np.dot(edge_weight, state)))]
    t = 0.0
    for i in range(1, n_steps + 1):
        k1 = rhs(state)
        if t_end is None and np.max(np.abs(k1)) < deriv_tol:
            break
        k2 = rhs(state + 0.5 * step * k1)
        k3 = rhs(state + 0.5 * step * k2)
        k4 = rhs(state + step * k3)
        state = state + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = i * step
        if np.any(state < -1e-6) or np.any(state > 1 + 1e-6):
            raise StepSizeError(f"step {step} too large: densities left [0, 1] at t={t:.3f}")
        if i % save_stride == 0:
            states.append(DynamicsState(t, state.copy(), float(np.dot(edge_weight, state))))
    if states[-1].time != t:
        states.append(DynamicsState(t, state.copy(), float(np.dot(edge_weight, state))))
    return states


def evaluate_strands(
    layers: Sequence[LayerSpec],
    alpha: float,
    strands: Sequence[StrandId] | None = None,
) -> dict[StrandId, EquilibriumResult]:
    """Exact equilibrium of every strand (default: all strands) of a design.

    Strands whose degree model is degenerate (E[K] = 0) get Theta = 0.
    """
    if strands is None:
        strands = all_strands(len(layers))
    out = {}
    for strand in strands:
        if strand.kind == "combined" and sum(layer.density for layer in layers) <= 0:
            out[strand] = EquilibriumResult(strand, alpha, 0.0, np.zeros(1), 0.0, True, 0)
            continue
        out[strand] = solve_theta_exact(strand_model(layers, strand), alpha)
    return out
