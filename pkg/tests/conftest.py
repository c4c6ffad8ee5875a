"""Shared configuration builders for the test suite."""

import numpy as np
import pytest

from spmux import (
    ChannelSpec,
    DetectorSpec,
    PairNumberDistribution,
    RoutingPolicy,
    SystemConfig,
    uniform_switch_tree,
)


def make_config(
    n_sources=2,
    kind="poissonian",
    mu=0.1,
    n_max=16,
    eta_s=0.5,
    herald_eff=0.2,
    herald_dark=0.0,
    eta_i=0.4,
    output_eff=0.25,
    output_dark=0.0,
    switch_inputs=(0.851, 0.794),
    hbt=False,
    hbt_eff=0.25,
    hbt_dark=0.0,
    repetition_period_s=2e-8,
    pulses=1_000_000,
    order=None,
):
    n = n_sources
    mus = mu if isinstance(mu, (list, tuple)) else [mu] * n
    return SystemConfig(
        sources=tuple(PairNumberDistribution(kind, m, n_max) for m in mus),
        signal_channels=(ChannelSpec(eta_s),) * n,
        idler_channels=(ChannelSpec(eta_i),) * n,
        herald_detectors=(DetectorSpec(herald_eff, herald_dark),) * n,
        switch_tree=uniform_switch_tree(n, switch_inputs),
        routing=RoutingPolicy(order=tuple(order) if order else tuple(range(n))),
        output_detector=DetectorSpec(output_eff, output_dark),
        repetition_period_s=repetition_period_s,
        pulses=pulses,
        hbt_enabled=hbt,
        hbt_detectors=(DetectorSpec(hbt_eff, hbt_dark),
                       DetectorSpec(hbt_eff, hbt_dark)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
