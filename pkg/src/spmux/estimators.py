"""Observables with Poissonian error bars, computed from raw tallies.

All counts are treated as independent Poisson variables for error
propagation; estimators are pure functions of `TallyCounters`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError, UndefinedEstimateError
from .mux_engine import TallyCounters


@dataclass(frozen=True)
class Estimate:
    value: float
    std_err: float

    def __post_init__(self):
        if self.std_err < 0.0:
            raise InvalidParameterError("std_err must be >= 0")


def estimate_heralded_rate(t: TallyCounters, repetition_period_s: float) -> Estimate:
    """Heralded single-photon rate in counts per second.

    One heralded photon detection is a same-pulse herald/output
    coincidence, so the rate is coincidences / (pulses * T).
    """
    if t.pulses <= 0:
        raise UndefinedEstimateError("no pulses recorded")
    if repetition_period_s <= 0.0:
        raise InvalidParameterError("repetition period must be positive")
    denom = t.pulses * repetition_period_s
    return Estimate(t.coincidences / denom, math.sqrt(t.coincidences) / denom)


def estimate_car(t: TallyCounters) -> Estimate:
    """Coincidence-to-accidental ratio.

    Accidentals pair the herald of pulse k with the output click of pulse
    k+1; the ratio is taken on raw counts, with no dark-count
    subtraction.
    """
    if t.accidentals <= 0:
        raise UndefinedEstimateError(
            "CAR undefined: no accidental coincidences recorded "
            "(increase the pulse count)")
    value = t.coincidences / t.accidentals
    rel_var = 1.0 / t.accidentals
    if t.coincidences > 0:
        rel_var += 1.0 / t.coincidences
    return Estimate(value, value * math.sqrt(rel_var))


def estimate_g2(t: TallyCounters, offset: int, heralded: bool) -> Estimate:
    """Second-order correlation at a delay of ``offset`` pulse periods.

    Heralded form (triggered on a herald at the anchor pulse):

        g2(offset) = herald_norm * herald_ab / (herald_a * herald_b)

    Unheralded form:

        g2(offset) = pair_norm * pairs_ab / (a_singles * b_singles)

    where the ``_b`` member of each pairing is taken ``offset`` pulses
    after the anchor. The ``*_norm`` counters hold the number of pairings
    actually examined (equal to the pulse count at offset 0; smaller by
    one per simulation block otherwise).
    """
    i = t.offset_index(offset)
    if heralded:
        norm, num = t.hbt_herald_norm[i], t.hbt_herald_ab[i]
        d1, d2 = t.hbt_herald_a[i], t.hbt_herald_b[i]
    else:
        norm, num = t.hbt_pair_norm[i], t.hbt_pairs_ab[i]
        d1, d2 = t.hbt_a_singles, t.hbt_b_singles
    if d1 <= 0 or d2 <= 0 or norm <= 0:
        raise UndefinedEstimateError(
            f"g2 undefined at offset {offset}: zero denominator counts")
    value = norm * num / (d1 * d2)
    if num == 0:
        return Estimate(0.0, 0.0)
    rel_var = 1.0 / num + 1.0 / d1 + 1.0 / d2 + 1.0 / norm
    return Estimate(value, value * math.sqrt(rel_var))
