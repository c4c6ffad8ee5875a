"""Exact truncated-sum model of single-source and multiplexed observables.

For a source with pair-number law P(n), herald-arm click probability
a(n) and output-arm click probability b(n) given n pairs, the per-pulse
event probabilities are plain expectations over P(n):

    p_herald      = sum_n P(n) a(n)
    p_output      = sum_n P(n) b(n)          (no switch gating)
    p_coincidence = sum_n P(n) a(n) b(n)

with a(n) = 1 - (1 - d_s)(1 - eta_s e_s)^n and b(n) defined likewise
using the idler transmission, the switch-path transmission, and the
output detector. Multiplexed quantities compose these per-source terms
in routing-priority order. The CAR follows as
p_coincidence / (p_herald * p_output), the +1-pulse-offset accidental
being the product of independent-pulse marginals.

Truncation: the tail mass above each distribution's n_max (validated to
be below 1e-10) is collapsed onto n_max, matching the Monte Carlo
engine's sampled law exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .components import DetectorSpec
from .errors import FitError, InvalidParameterError, NoSolutionError
from .mux_engine import SystemConfig
from .photon_stats import PairNumberDistribution, tail_mass

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AnalyticParams:
    """Operating point of one source viewed from its two detection arms."""

    dist: PairNumberDistribution
    eta_s: float
    eta_i: float
    det_s: DetectorSpec
    det_i: DetectorSpec
    switch_path_transmission: float = 1.0

    def __post_init__(self):
        for name in ("eta_s", "eta_i", "switch_path_transmission"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must be in [0, 1], got {v}")

    @staticmethod
    def from_system_config(cfg: SystemConfig, source: int) -> "AnalyticParams":
        """View one source of a system config as analytic parameters.

        With the two-detector output tap enabled, the tap is folded into
        an effective output detector: per-photon detection probability
        (e_a + e_b) / 2 and dark probability 1 - (1-d_a)(1-d_b), which
        reproduces the click law of "either tap detector fires".
        """
        if cfg.hbt_enabled:
            det_a, det_b = cfg.hbt_detectors
            det_out = DetectorSpec(
                efficiency=(det_a.efficiency + det_b.efficiency) / 2.0,
                dark_prob=1.0 - (1.0 - det_a.dark_prob) * (1.0 - det_b.dark_prob),
            )
        else:
            det_out = cfg.output_detector
        return AnalyticParams(
            dist=cfg.sources[source],
            eta_s=cfg.signal_channels[source].transmission,
            eta_i=cfg.idler_channels[source].transmission,
            det_s=cfg.herald_detectors[source],
            det_i=det_out,
            switch_path_transmission=float(cfg.path_transmissions()[source]),
        )


@dataclass(frozen=True)
class ClickProbs:
    p_herald: float
    p_output: float
    p_coincidence: float


@dataclass(frozen=True)
class MuxProbs:
    p_output: float
    p_coincidence: float
    p_herald: float


def _lumped_pmf(dist: PairNumberDistribution) -> np.ndarray:
    p = dist.pmf().probabilities.copy()
    p[-1] += 1.0 - p.sum()
    return p


def _arm_probs(p: AnalyticParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ns = np.arange(p.dist.n_max + 1, dtype=float)
    pmf = _lumped_pmf(p.dist)
    a = 1.0 - (1.0 - p.det_s.dark_prob) * (
        1.0 - p.eta_s * p.det_s.efficiency) ** ns
    eff_i = p.eta_i * p.switch_path_transmission * p.det_i.efficiency
    b = 1.0 - (1.0 - p.det_i.dark_prob) * (1.0 - eff_i) ** ns
    return pmf, a, b


def analytic_click_probs(p: AnalyticParams) -> ClickProbs:
    """Per-pulse herald, output and coincidence probabilities (one source)."""
    pmf, a, b = _arm_probs(p)
    return ClickProbs(
        p_herald=float(pmf @ a),
        p_output=float(pmf @ b),
        p_coincidence=float(pmf @ (a * b)),
    )


def analytic_car(p: AnalyticParams) -> float:
    """CAR of a single source measured without switch gating."""
    c = analytic_click_probs(p)
    denom = c.p_herald * c.p_output
    if denom <= 0.0:
        raise NoSolutionError("CAR undefined: herald or output probability is zero")
    return c.p_coincidence / denom


def analytic_mux_rate(
    params: Sequence[AnalyticParams],
    order: Optional[Sequence[int]] = None,
) -> MuxProbs:
    """Multiplexed per-pulse probabilities under priority routing.

    The first heralding source in ``order`` is routed to the output;
    output clicks on no-herald pulses come from the output detector's
    dark counts alone. A single source degenerates to
    `analytic_click_probs` (no switch in the path).
    """
    if len(params) == 0:
        raise InvalidParameterError("need at least one source")
    if order is None:
        order = range(len(params))
    singles = [analytic_click_probs(p) for p in params]
    if len(params) == 1:
        c = singles[0]
        return MuxProbs(p_output=c.p_output, p_coincidence=c.p_coincidence,
                        p_herald=c.p_herald)
    p_coinc = 0.0
    no_herald = 1.0
    for idx in order:
        p_coinc += no_herald * singles[idx].p_coincidence
        no_herald *= 1.0 - singles[idx].p_herald
    d_out = params[0].det_i.dark_prob
    return MuxProbs(
        p_output=p_coinc + no_herald * d_out,
        p_coincidence=p_coinc,
        p_herald=1.0 - no_herald,
    )


def mux_car(m: MuxProbs) -> float:
    denom = m.p_herald * m.p_output
    if denom <= 0.0:
        raise NoSolutionError("CAR undefined: herald or output probability is zero")
    return m.p_coincidence / denom


def enhancement_factor(single: AnalyticParams, mux: MuxProbs) -> float:
    """Fractional gain in coincidence probability over one bare source."""
    ref = analytic_click_probs(single).p_coincidence
    if ref <= 0.0:
        raise NoSolutionError("single-source coincidence probability is zero")
    return mux.p_coincidence / ref - 1.0


# ---------------------------------------------------------------------------
# pump-scaled operating curves


def _scaled_dist(dist: PairNumberDistribution, factor: float) -> PairNumberDistribution:
    mu = dist.mu * factor
    n_max = dist.n_max
    while tail_mass(dist.kind, mu, n_max) >= 1e-10:
        n_max *= 2
    return replace(dist, mu=mu, n_max=n_max)


def _scaled(p: AnalyticParams, factor: float) -> AnalyticParams:
    return replace(p, dist=_scaled_dist(p.dist, factor))


def fixed_car_enhancement(
    single: AnalyticParams,
    mux_params: Sequence[AnalyticParams],
    target_car: float,
    order: Optional[Sequence[int]] = None,
    scale_hi: Optional[float] = None,
) -> float:
    """Rate gain at equal CAR: scale each model's pump to hit ``target_car``
    on the multi-pair-limited (decreasing) branch and compare coincidence
    probabilities. Raises `NoSolutionError` when the target is unreachable.
    """
    mus = [single.dist.mu] + [p.dist.mu for p in mux_params]
    if max(mus) <= 0.0:
        raise NoSolutionError("cannot scale sources with zero mean pair rate")
    if scale_hi is None:
        scale_hi = 50.0 / max(mus)

    def solve(curve) -> float:
        xs = np.geomspace(1e-6, scale_hi, 160)
        cars = np.array([curve(x) for x in xs])
        i_peak = int(np.argmax(cars))
        if target_car > cars[i_peak] or target_car < cars[-1]:
            raise NoSolutionError(
                f"target CAR {target_car} outside reachable range "
                f"[{cars[-1]:.4g}, {cars[i_peak]:.4g}]")
        return float(optimize.brentq(
            lambda x: curve(x) - target_car, xs[i_peak], scale_hi,
            xtol=1e-12, rtol=1e-12))

    x_single = solve(lambda x: analytic_car(_scaled(single, x)))
    x_mux = solve(lambda x: mux_car(
        analytic_mux_rate([_scaled(p, x) for p in mux_params], order)))
    rate_single = analytic_click_probs(_scaled(single, x_single)).p_coincidence
    rate_mux = analytic_mux_rate(
        [_scaled(p, x_mux) for p in mux_params], order).p_coincidence
    return rate_mux / rate_single - 1.0


# ---------------------------------------------------------------------------
# N-source scaling projections


@dataclass(frozen=True)
class ScalingParams:
    """Idealized N-source projection: identical sources with herald
    probability ``herald_prob_per_source`` behind a balanced tree whose
    switches all transmit ``per_stage_transmission``."""

    n_sources: int
    per_stage_transmission: float
    herald_prob_per_source: float = 0.0

    def __post_init__(self):
        if self.n_sources < 1:
            raise InvalidParameterError("n_sources must be >= 1")
        if not 0.0 <= self.per_stage_transmission <= 1.0:
            raise InvalidParameterError("per_stage_transmission must be in [0, 1]")
        if not 0.0 <= self.herald_prob_per_source <= 1.0:
            raise InvalidParameterError("herald_prob_per_source must be in [0, 1]")

    @property
    def stages(self) -> int:
        return math.ceil(math.log2(self.n_sources)) if self.n_sources > 1 else 0


@dataclass(frozen=True)
class ScalingResult:
    rate_factor: float
    two_photon_gain: float
    stages: int


def scaling_with_n(sp: ScalingParams) -> ScalingResult:
    """Heralded-rate factor R(N) over a single source, and its square.

    R(N) = [1 - (1-p)^N] / p * t_s^stages, with the p -> 0 limit N used
    when p = 0. Pairs of heralded photons from independent runs scale as
    R(N)^2. Break-even for N = 2 at p -> 0 sits exactly at t_s = 1/2.
    """
    p = sp.herald_prob_per_source
    yield_factor = float(sp.n_sources) if p == 0.0 else (1.0 - (1.0 - p) ** sp.n_sources) / p
    r = yield_factor * sp.per_stage_transmission ** sp.stages
    return ScalingResult(rate_factor=r, two_photon_gain=r * r, stages=sp.stages)


# ---------------------------------------------------------------------------
# switch-transmission fit


@dataclass(frozen=True)
class FitResult:
    transmission: float
    sse: float
    at_bound: bool
    residuals: Tuple[float, ...]


def _point_xy(point) -> Tuple[float, float]:
    if hasattr(point, "heralded_rate"):
        return float(point.heralded_rate.value), float(point.car.value)
    rate, car = point
    return float(rate), float(car)


def car_at_rate(template: AnalyticParams, rate: float,
                repetition_period_s: float, transmission: float,
                scale_hi: float = 1e4) -> float:
    """Model CAR at a given heralded rate for a candidate switch
    transmission, found by scaling the pump until the coincidence rate
    matches."""
    p = replace(template, switch_path_transmission=transmission)
    target = rate * repetition_period_s

    def excess(x):
        return analytic_click_probs(_scaled(p, x)).p_coincidence - target

    if excess(scale_hi) < 0.0:
        raise NoSolutionError(
            f"rate {rate} unreachable at transmission {transmission}")
    x = optimize.brentq(excess, 1e-9, scale_hi, xtol=1e-12, rtol=1e-12)
    return analytic_car(_scaled(p, x))


def fit_switch_transmission(
    points: Sequence,
    template: AnalyticParams,
    repetition_period_s: float,
    bounds: Tuple[float, float] = (0.0, 1.0),
    tol: float = 1e-4,
) -> FitResult:
    """Least-squares fit of the switch transmission to (rate, CAR) data.

    Scans a coarse grid over ``bounds`` and refines the best cell by
    golden-section search down to ``tol``. Points may be (rate, car)
    pairs or sweep rows carrying ``heralded_rate``/``car`` estimates.
    ``at_bound`` flags a minimum pinned at either end of ``bounds``.
    """
    xy = [_point_xy(p) for p in points]
    if len(xy) < 3:
        raise FitError(f"need at least 3 points to fit, got {len(xy)}")
    rates = [r for r, _ in xy]
    if max(rates) - min(rates) <= 0.0:
        raise FitError("ill-posed fit: all points share the same rate")

    def sse(t: float) -> float:
        total = 0.0
        for rate, car in xy:
            try:
                model = car_at_rate(template, rate, repetition_period_s, t)
            except NoSolutionError:
                return math.inf
            total += (model - car) ** 2
        return total

    lo, hi = bounds
    grid = np.linspace(lo, hi, 41)
    values = [sse(t) for t in grid]
    i_best = int(np.argmin(values))
    if not math.isfinite(values[i_best]):
        raise FitError("no candidate transmission reproduces the observed rates")

    a = grid[max(i_best - 1, 0)]
    b = grid[min(i_best + 1, len(grid) - 1)]
    while b - a > tol:
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
        if sse(c) <= sse(d):
            b = d
        else:
            a = c
    t_fit = float(a + b) / 2.0
    at_bound = bool(t_fit <= lo + tol or t_fit >= hi - tol)
    if at_bound:
        t_fit = lo if t_fit <= lo + tol else hi
    residuals = tuple(
        car_at_rate(template, rate, repetition_period_s, t_fit) - car
        for rate, car in xy)
    return FitResult(transmission=float(t_fit), sse=float(sse(t_fit)),
                     at_bound=at_bound, residuals=residuals)
