"""NumPy fallback block kernel.

Consumes pre-drawn uniforms and per-photon-number probability tables and
accumulates integer tallies for one contiguous block of pulses. The
compiled kernel in ``_core.pyx`` implements the same contract; both must
produce bit-identical tallies from the same inputs.

Tally vector layout (int64), offsets ordered (-1, 0, +1):

  0 pulses            4 accidentals        8+6i  hbt pair_norm[i]
  1 heralds           5 accidental_pairs   9+6i  hbt pairs_ab[i]
  2 output_singles    6 hbt_a_singles     10+6i  hbt herald_norm[i]
  3 coincidences      7 hbt_b_singles     11+6i  hbt herald_a[i]
                                          12+6i  hbt herald_b[i]
                                          13+6i  hbt herald_ab[i]
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

IDX_PULSES = 0
IDX_HERALDS = 1
IDX_OUTPUT_SINGLES = 2
IDX_COINCIDENCES = 3
IDX_ACCIDENTALS = 4
IDX_ACCIDENTAL_PAIRS = 5
IDX_HBT_A_SINGLES = 6
IDX_HBT_B_SINGLES = 7
IDX_HBT_BASE = 8
HBT_STRIDE = 6
HBT_PAIR_NORM = 0
HBT_PAIRS_AB = 1
HBT_HERALD_NORM = 2
HBT_HERALD_A = 3
HBT_HERALD_B = 4
HBT_HERALD_AB = 5
OFFSETS = (-1, 0, 1)
TALLY_SLOTS = IDX_HBT_BASE + HBT_STRIDE * len(OFFSETS)


def block_tallies(pair_u, herald_u, out_u, cdf, herald_click, priority,
                  gated, hbt, out_click_tab, hbt_cum, tallies):
    """Accumulate one block of pulses into ``tallies`` (in place).

    pair_u, herald_u : (n_sources, B) uniforms
    out_u            : (B,) uniforms
    cdf              : (n_sources, K) pair-count CDF, last column 1.0
    herald_click     : (n_sources, K) herald click prob given n
    priority         : (n_sources,) routing order
    gated            : idlers blocked unless their source is selected
    hbt              : output tap split onto two detectors
    out_click_tab    : (n_sources + 1, K) output click prob given n;
                       row n_sources is the no-source-selected row
    hbt_cum          : (n_sources + 1, K, 3) cumulative joint-outcome
                       bounds (no-click, b-only, a-only | both above)
    """
    n_src, b = pair_u.shape
    idx = np.arange(b)

    counts = np.empty((n_src, b), dtype=np.int64)
    herald = np.empty((n_src, b), dtype=bool)
    for s in range(n_src):
        counts[s] = np.searchsorted(cdf[s], pair_u[s], side="right")
        herald[s] = herald_u[s] < herald_click[s, counts[s]]

    ordered = herald[priority]
    any_h = ordered.any(axis=0)
    sel = priority[ordered.argmax(axis=0)]

    if gated:
        row = np.where(any_h, sel, n_src)
        n_out = np.where(any_h, counts[sel, idx], 0)
    else:
        row = np.zeros(b, dtype=np.int64)
        n_out = counts[0]

    if hbt:
        cum = hbt_cum[row, n_out]
        out_click = out_u >= cum[:, 0]
        a_click = out_u >= cum[:, 1]
        b_click = (out_click & ~a_click) | (out_u >= cum[:, 2])
    else:
        out_click = out_u < out_click_tab[row, n_out]

    tallies[IDX_PULSES] += b
    tallies[IDX_HERALDS] += int(any_h.sum())
    tallies[IDX_OUTPUT_SINGLES] += int(out_click.sum())
    tallies[IDX_COINCIDENCES] += int((any_h & out_click).sum())
    tallies[IDX_ACCIDENTALS] += int((any_h[:-1] & out_click[1:]).sum())
    tallies[IDX_ACCIDENTAL_PAIRS] += b - 1

    if hbt:
        tallies[IDX_HBT_A_SINGLES] += int(a_click.sum())
        tallies[IDX_HBT_B_SINGLES] += int(b_click.sum())
        for i, off in enumerate(OFFSETS):
            if off < 0:
                k, kb = slice(1, b), slice(0, b - 1)
            elif off == 0:
                k, kb = slice(0, b), slice(0, b)
            else:
                k, kb = slice(0, b - 1), slice(1, b)
            hk, ak, bk = any_h[k], a_click[k], b_click[kb]
            base = IDX_HBT_BASE + HBT_STRIDE * i
            tallies[base + HBT_PAIR_NORM] += b if off == 0 else b - 1
            tallies[base + HBT_PAIRS_AB] += int((ak & bk).sum())
            tallies[base + HBT_HERALD_NORM] += int(hk.sum())
            tallies[base + HBT_HERALD_A] += int((hk & ak).sum())
            tallies[base + HBT_HERALD_B] += int((hk & bk).sum())
            tallies[base + HBT_HERALD_AB] += int((hk & ak & bk).sum())
