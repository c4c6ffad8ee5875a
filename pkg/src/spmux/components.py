"""Detector, channel, and switch models.

Everything between pair generation and counting is classical and lossy:
channels thin photon counts, threshold detectors click with a probability
set by the incident count plus an independent dark-count chance, and a
tree of 2x1 switches routes the chosen source to the common output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidParameterError
from .photon_stats import Pmf

PRIORITY_ORDER = "priority_order"


def _check_prob(value: float, name: str, *, upper_open: bool = False) -> float:
    hi_ok = value < 1.0 if upper_open else value <= 1.0
    if not (isinstance(value, (int, float)) and math.isfinite(value)
            and 0.0 <= value and hi_ok):
        bound = "[0, 1)" if upper_open else "[0, 1]"
        raise InvalidParameterError(f"{name} must be in {bound}, got {value}")
    return float(value)


@dataclass(frozen=True)
class DetectorSpec:
    """Non-photon-number-resolving threshold detector.

    ``efficiency`` is the probability a single incident photon causes a
    click; ``dark_prob`` the chance of a spurious click per pulse gate.
    """

    efficiency: float
    dark_prob: float = 0.0

    def __post_init__(self):
        _check_prob(self.efficiency, "efficiency")
        _check_prob(self.dark_prob, "dark_prob", upper_open=True)


@dataclass(frozen=True)
class ChannelSpec:
    """Lumped transmission of one optical path (coupling, filtering, fiber)."""

    transmission: float

    def __post_init__(self):
        _check_prob(self.transmission, "transmission")


@dataclass(frozen=True)
class SwitchSpec:
    """One 2x1 routing switch with per-input transmissions."""

    input_transmissions: Tuple[float, float]

    def __post_init__(self):
        t = tuple(float(x) for x in self.input_transmissions)
        if len(t) != 2:
            raise InvalidParameterError(
                f"a 2x1 switch has exactly two input transmissions, got {len(t)}")
        for x in t:
            _check_prob(x, "switch input transmission")
        object.__setattr__(self, "input_transmissions", t)


@dataclass(frozen=True)
class RoutingPolicy:
    """Feed-forward arbitration: first heralding source in ``order`` wins."""

    order: Tuple[int, ...]
    kind: str = PRIORITY_ORDER

    def __post_init__(self):
        if self.kind != PRIORITY_ORDER:
            raise InvalidParameterError(f"unknown routing kind {self.kind!r}")
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(order))):
            raise InvalidParameterError(
                f"routing order {order} is not a permutation of source indices")
        object.__setattr__(self, "order", order)


def click_given_n(n, det: DetectorSpec, transmission: float = 1.0):
    """Click probability for ``n`` photons entering a lossy path + detector.

    A photon survives the path with probability ``transmission`` and then
    fires the detector with probability ``efficiency``; dark counts are
    independent. Thinning followed by threshold detection collapses to
    1 - (1 - dark) (1 - transmission * efficiency)^n, which is what this
    returns (``n`` scalar or array).
    """
    eff = transmission * det.efficiency
    return 1.0 - (1.0 - det.dark_prob) * (1.0 - eff) ** np.asarray(n, dtype=float)


def click_sample(n_incident: int, det: DetectorSpec, rng: np.random.Generator) -> bool:
    """Sample whether the detector clicks on ``n_incident`` photons."""
    if n_incident < 0:
        raise InvalidParameterError("photon number must be >= 0")
    p = 1.0 - (1.0 - det.dark_prob) * (1.0 - det.efficiency) ** n_incident
    return bool(rng.random() < p)


def click_probability(pmf: Pmf, det: DetectorSpec) -> float:
    """Expected click probability when the incident count follows ``pmf``."""
    ns = np.arange(pmf.probabilities.size)
    no_fire = float(pmf.probabilities @ (1.0 - det.efficiency) ** ns)
    # truncated tail counts as "never fires", biasing low by < the tail mass
    no_fire += 1.0 - pmf.total()
    return 1.0 - (1.0 - det.dark_prob) * no_fire


def route_select(herald_flags: Sequence[bool], policy: RoutingPolicy) -> Optional[int]:
    """Index of the routed source, or None when nothing heralded."""
    if len(herald_flags) != len(policy.order):
        raise InvalidParameterError(
            f"got {len(herald_flags)} herald flags for "
            f"{len(policy.order)} sources")
    for idx in policy.order:
        if herald_flags[idx]:
            return idx
    return None


def tree_stage_widths(n_sources: int) -> Tuple[int, ...]:
    """Number of 2x1 switches per stage of the balanced routing tree."""
    if n_sources < 1:
        raise InvalidParameterError("need at least one source")
    stages = math.ceil(math.log2(n_sources)) if n_sources > 1 else 0
    return tuple(-(-n_sources // (2 ** (g + 1))) for g in range(stages))


def switch_path_transmissions(
    switch_tree: Sequence[Sequence[SwitchSpec]], n_sources: int
) -> np.ndarray:
    """Per-source product of switch-input transmissions along its route.

    Source k enters stage g at position k >> g, i.e. switch (k >> g) >> 1
    on input port (k >> g) & 1. An empty tree (single source) gives 1.0.
    """
    widths = tree_stage_widths(n_sources)
    if tuple(len(stage) for stage in switch_tree) != widths:
        raise InvalidParameterError(
            f"switch tree stages have widths "
            f"{tuple(len(s) for s in switch_tree)}, expected {widths} "
            f"for {n_sources} sources")
    out = np.ones(n_sources)
    for k in range(n_sources):
        for g, stage in enumerate(switch_tree):
            pos = k >> g
            out[k] *= stage[pos >> 1].input_transmissions[pos & 1]
    return out


def uniform_switch_tree(
    n_sources: int, input_transmissions: Tuple[float, float]
) -> Tuple[Tuple[SwitchSpec, ...], ...]:
    """Tree in which every switch has the same per-input transmissions."""
    spec = SwitchSpec(tuple(input_transmissions))
    return tuple(
        tuple(spec for _ in range(width)) for width in tree_stage_widths(n_sources)
    )
