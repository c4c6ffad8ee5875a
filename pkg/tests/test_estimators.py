import math

import pytest

from conftest import make_config
from enumeration_oracle import enumerate_pulse_probs, heralded_g2_zero, unheralded_g2_zero

from spmux import (
    AnalyticParams,
    Estimate,
    TallyCounters,
    UndefinedEstimateError,
    analytic_mux_rate,
    estimate_car,
    estimate_g2,
    estimate_heralded_rate,
    mux_car,
    run_experiment,
)


def test_zero_coincidences_give_zero_rate():
    t = TallyCounters(pulses=1000)
    est = estimate_heralded_rate(t, 1e-8)
    assert est == Estimate(0.0, 0.0)


def test_heralded_rate_arithmetic():
    t = TallyCounters(pulses=10_000_000, coincidences=400)
    est = estimate_heralded_rate(t, 2e-8)
    assert est.value == pytest.approx(2000.0)
    assert est.std_err == pytest.approx(100.0)


def test_heralded_rate_requires_pulses():
    with pytest.raises(UndefinedEstimateError):
        estimate_heralded_rate(TallyCounters(), 1e-8)


def test_car_arithmetic():
    t = TallyCounters(pulses=100, coincidences=100, accidentals=10,
                      accidental_pairs=99)
    est = estimate_car(t)
    assert est.value == pytest.approx(10.0)
    assert est.std_err == pytest.approx(10.0 * math.sqrt(1 / 100 + 1 / 10))


def test_car_at_noise_floor_is_one():
    t = TallyCounters(pulses=100, coincidences=7, accidentals=7,
                      accidental_pairs=99)
    est = estimate_car(t)
    assert est.value == pytest.approx(1.0)
    assert est.std_err == pytest.approx(math.sqrt(2.0 / 7.0))


def test_car_undefined_without_accidentals():
    t = TallyCounters(pulses=100, coincidences=5)
    with pytest.raises(UndefinedEstimateError):
        estimate_car(t)


def _synth_hbt_tallies(probs, pulses=10 ** 15):
    """Tallies a run of the given per-pulse law would produce on average."""
    triple = lambda p: (round(p * pulses),) * 3
    return TallyCounters(
        pulses=pulses,
        heralds=round(probs["p_herald"] * pulses),
        hbt_a_singles=round(probs["p_a"] * pulses),
        hbt_b_singles=round(probs["p_b"] * pulses),
        hbt_pair_norm=(pulses,) * 3,
        hbt_pairs_ab=triple(probs["p_ab"]),
        hbt_herald_norm=triple(probs["p_herald"]),
        hbt_herald_a=triple(probs["p_h_a"]),
        hbt_herald_b=triple(probs["p_h_b"]),
        hbt_herald_ab=triple(probs["p_h_ab"]),
    )


def test_no_doubles_give_zero_g2():
    t = TallyCounters(pulses=1000, hbt_a_singles=50, hbt_b_singles=50,
                      hbt_pair_norm=(999, 1000, 999),
                      hbt_herald_norm=(100, 100, 100),
                      hbt_herald_a=(10, 10, 10), hbt_herald_b=(10, 10, 10))
    est = estimate_g2(t, 0, heralded=True)
    assert est == Estimate(0.0, 0.0)


def test_g2_rejects_unknown_offset():
    t = TallyCounters(pulses=10)
    with pytest.raises(Exception):
        estimate_g2(t, 2, heralded=True)


def test_g2_undefined_on_zero_denominators():
    with pytest.raises(UndefinedEstimateError):
        estimate_g2(TallyCounters(pulses=10), 0, heralded=False)


def test_unheralded_g2_is_unity_for_poissonian_source():
    # independent thinning of a Poisson stream leaves both arms independent
    cfg = make_config(n_sources=1, kind="poissonian", mu=0.05, eta_i=0.1,
                      switch_inputs=(1.0, 1.0), hbt=True, hbt_eff=0.1)
    value = unheralded_g2_zero(cfg)
    assert value == pytest.approx(1.0, abs=1e-6)
    est = estimate_g2(_synth_hbt_tallies(enumerate_pulse_probs(cfg)), 0,
                      heralded=False)
    assert est.value == pytest.approx(1.0, abs=1e-6)


def test_unheralded_g2_shows_thermal_bunching():
    cfg = make_config(n_sources=1, kind="thermal", mu=0.05, eta_i=0.1,
                      switch_inputs=(1.0, 1.0), hbt=True, hbt_eff=0.1)
    value = unheralded_g2_zero(cfg)
    assert value == pytest.approx(2.0, abs=1e-3)
    est = estimate_g2(_synth_hbt_tallies(enumerate_pulse_probs(cfg)), 0,
                      heralded=False)
    assert est.value == pytest.approx(2.0, abs=1e-3)


def test_heralded_g2_vanishes_with_multi_pair_probability():
    cfg = make_config(n_sources=1, mu=1e-3, hbt=True, switch_inputs=(1.0, 1.0))
    assert heralded_g2_zero(cfg) < 1e-2


def test_g2_at_neighboring_pulses_is_unity(rng):
    cfg = make_config(mu=0.15, hbt=True, pulses=10_000_000)
    t = run_experiment(cfg, seed=2024)
    for offset in (-1, +1):
        est = estimate_g2(t, offset, heralded=True)
        assert abs(est.value - 1.0) < 3 * est.std_err
        est = estimate_g2(t, offset, heralded=False)
        assert abs(est.value - 1.0) < 3 * est.std_err


def test_monte_carlo_rate_matches_analytic_model():
    cfg = make_config(mu=0.1, herald_dark=1e-5, output_dark=1e-5,
                      pulses=10_000_000)
    t = run_experiment(cfg, seed=99)
    params = [AnalyticParams.from_system_config(cfg, k) for k in range(2)]
    probs = analytic_mux_rate(params, cfg.routing.order)

    rate = estimate_heralded_rate(t, cfg.repetition_period_s)
    assert abs(rate.value - probs.p_coincidence / cfg.repetition_period_s) \
        < 3 * rate.std_err

    car = estimate_car(t)
    assert abs(car.value - mux_car(probs)) < 3 * car.std_err


def test_estimators_are_pure():
    cfg = make_config(mu=0.2, hbt=True, pulses=200_000)
    t = run_experiment(cfg, seed=6)
    first = (estimate_car(t), estimate_heralded_rate(t, 1e-8),
             estimate_g2(t, 0, heralded=True))
    second = (estimate_car(t), estimate_heralded_rate(t, 1e-8),
              estimate_g2(t, 0, heralded=True))
    assert first == second
