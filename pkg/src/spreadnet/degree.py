"""Analytic degree laws for the intra-layer, inter-layer and combined strands.

Every law is stored as a finite Poisson mixture. Intra- and inter-layer degrees
are single-component mixtures; the combined degree has one component per layer,
weighted by the share of devices in that layer.

Units: densities in devices per km^2, ranges in km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError

TAIL_MASS = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    """One device type: its current density/range and the tunable box."""

    density: float
    range_km: float
    density_bounds: tuple[float, float] = (0.0, math.inf)
    range_bounds: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        lo, hi = self.density_bounds
        if not 0.0 <= lo <= self.density <= hi:
            raise InvalidParameterError(
                f"density {self.density} outside bounds [{lo}, {hi}]"
            )
        lo, hi = self.range_bounds
        if not 0.0 <= lo <= self.range_km <= hi:
            raise InvalidParameterError(
                f"range {self.range_km} km outside bounds [{lo}, {hi}]"
            )

    @property
    def coverage(self) -> float:
        """Disk area of one device, pi r^2 (km^2)."""
        return math.pi * self.range_km**2


@dataclass(frozen=True)
class StrandId:
    """Which class of message a degree law describes.

    ``intra`` (layer m), ``inter`` (ordered pair m, n with m != n) or
    ``combined``. Layer indices are 1-based.
    """

    kind: str
    m: int | None = None
    n: int | None = None

    def __post_init__(self):
        if self.kind == "intra":
            ok = self.m is not None and self.m >= 1 and self.n is None
        elif self.kind == "inter":
            ok = (
                self.m is not None
                and self.n is not None
                and self.m >= 1
                and self.n >= 1
                and self.m != self.n
            )
        elif self.kind == "combined":
            ok = self.m is None and self.n is None
        else:
            ok = False
        if not ok:
            raise InvalidParameterError(f"invalid strand {self!r}")

    @classmethod
    def intra(cls, m: int) -> StrandId:
        return cls("intra", m)

    @classmethod
    def inter(cls, m: int, n: int) -> StrandId:
        return cls("inter", m, n)

    @classmethod
    def combined(cls) -> StrandId:
        return cls("combined")

    @classmethod
    def parse(cls, text: str) -> StrandId:
        """Parse ``intra:1``, ``inter:1:2`` or ``combined``."""
        parts = text.strip().lower().split(":")
        try:
            if parts[0] == "intra" and len(parts) == 2:
                return cls.intra(int(parts[1]))
            if parts[0] == "inter" and len(parts) == 3:
                return cls.inter(int(parts[1]), int(parts[2]))
            if parts[0] in ("combined", "o") and len(parts) == 1:
                return cls.combined()
        except ValueError:
            pass
        raise InvalidParameterError(f"cannot parse strand {text!r}")

    def check_layers(self, num_layers: int) -> None:
        for idx in (self.m, self.n):
            if idx is not None and idx > num_layers:
                raise InvalidParameterError(
                    f"strand {self} refers to layer {idx} but only {num_layers} exist"
                )

    def __str__(self) -> str:
        if self.kind == "intra":
            return f"intra:{self.m}"
        if self.kind == "inter":
            return f"inter:{self.m}:{self.n}"
        return "combined"


def all_strands(num_layers: int) -> list[StrandId]:
    """Every strand of an M-layer network: intra m, ordered inter (m, n), combined."""
    strands = [StrandId.intra(m) for m in range(1, num_layers + 1)]
    strands += [
        StrandId.inter(m, n)
        for m in range(1, num_layers + 1)
        for n in range(1, num_layers + 1)
        if m != n
    ]
    strands.append(StrandId.combined())
    return strands


def truncation_point(mu_max: float) -> int:
    """Largest degree kept in truncated series; the Poisson tail beyond it is < 1e-12."""
    return int(math.ceil(mu_max + 12.0 * math.sqrt(mu_max) + 20.0))


def poisson_logpmf(k: np.ndarray, mu: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if mu == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    return k * math.log(mu) - mu - gammaln(k + 1.0)


@dataclass(frozen=True)
class DegreeModel:
    """Poisson mixture sum_j w_j Poisson(mu_j)."""

    strand: StrandId
    weights: tuple[float, ...]
    means: tuple[float, ...]
    _table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(x) for x in self.weights))
        object.__setattr__(self, "means", tuple(float(x) for x in self.means))
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        if w.ndim != 1 or w.shape != mu.shape or w.size == 0:
            raise InvalidParameterError("weights and means must be equal-length vectors")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError(f"mixture weights {self.weights} must be >= 0 and sum to 1")
        if np.any(mu < 0) or not np.all(np.isfinite(mu)):
            raise InvalidParameterError(f"Poisson means {self.means} must be finite and >= 0")
        k = np.arange(self.k_max + 1)
        table = np.zeros(k.size)
        for wj, mj in zip(w, mu):
            table += wj * np.exp(poisson_logpmf(k, float(mj)))
        table.setflags(write=False)
        object.__setattr__(self, "_table", table)

    @property
    def mean(self) -> float:
        return float(sum(w * m for w, m in zip(self.weights, self.means)))

    @property
    def second_moment(self) -> float:
        return float(sum(w * (m + m * m) for w, m in zip(self.weights, self.means)))

    @property
    def k_max(self) -> int:
        return truncation_point(max(self.means))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.k_max + 1)

    def pmf_table(self) -> np.ndarray:
        """pmf(k) for k = 0..k_max (read-only)."""
        return self._table

    def pmf(self, k: int) -> float:
        if k < 0:
            raise InvalidParameterError(f"degree must be >= 0, got {k}")
        if k <= self.k_max:
            return float(self._table[k])
        return float(
            sum(w * math.exp(poisson_logpmf(np.array([k]), m)[0])
                for w, m in zip(self.weights, self.means))
        )


def intra_model(layer: LayerSpec, m: int = 1) -> DegreeModel:
    """Degree law of a layer-m device counting same-layer neighbours within r_m."""
    mu = layer.density * layer.coverage
    return DegreeModel(StrandId.intra(m), (1.0,), (mu,))


def inter_model(layer_m: LayerSpec, layer_n: LayerSpec, m: int = 1, n: int = 2) -> DegreeModel:
    """Degree law of a layer-m device counting layer-m and layer-n devices within r_m.

    Only the range of the first layer enters, so the law is not symmetric in
    its arguments.
    """
    mu = (layer_m.density + layer_n.density) * layer_m.coverage
    return DegreeModel(StrandId.inter(m, n), (1.0,), (mu,))


def combined_model(layers: Sequence[LayerSpec]) -> DegreeModel:
    """Degree law of a device of unknown type in the superposed network.

    A device belongs to layer m with probability lambda_m / Lambda and then sees
    Poisson(Lambda pi r_m^2) neighbours, Lambda being the total density.
    """
    total = sum(layer.density for layer in layers)
    if not layers or total <= 0.0:
        raise InvalidParameterError("combined degree needs at least one layer with positive density")
    weights = [layer.density / total for layer in layers]
    # renormalise the rounding residue so the mixture check stays exact
    weights[-1] = 1.0 - sum(weights[:-1])
    means = [total * layer.coverage for layer in layers]
    return DegreeModel(StrandId.combined(), tuple(weights), tuple(means))


def strand_model(layers: Sequence[LayerSpec], strand: StrandId) -> DegreeModel:
    """Dispatch to the right law for ``strand`` over an M-layer network."""
    strand.check_layers(len(layers))
    if strand.kind == "intra":
        return intra_model(layers[strand.m - 1], strand.m)
    if strand.kind == "inter":
        return inter_model(layers[strand.m - 1], layers[strand.n - 1], strand.m, strand.n)
    return combined_model(layers)


def moments(model: DegreeModel) -> tuple[float, float]:
    """Exact (E[K], E[K^2]) of the mixture, without truncation."""
    return model.mean, model.second_moment


def pmf(model: DegreeModel, k: int) -> float:
    return model.pmf(k)
