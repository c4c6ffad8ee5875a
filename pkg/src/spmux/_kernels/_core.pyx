# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled block kernel; contract and tally layout match ``pure.py``.

One fused pass per pulse replaces the ~15 array passes of the NumPy
kernel. All random-stream consumption happens in the caller, so both
kernels produce bit-identical tallies.
"""

from libc.stdint cimport int64_t

NAME = "compiled"


def block_tallies(double[:, ::1] pair_u, double[:, ::1] herald_u,
                  double[::1] out_u, double[:, ::1] cdf,
                  double[:, ::1] herald_click, int64_t[::1] priority,
                  bint gated, bint hbt, double[:, ::1] out_click_tab,
                  double[:, :, ::1] hbt_cum, int64_t[::1] tallies):
    cdef Py_ssize_t n_src = pair_u.shape[0]
    cdef Py_ssize_t b = pair_u.shape[1]
    cdef Py_ssize_t i, s, k, r, rank
    cdef Py_ssize_t n_out, sel
    cdef bint any_h, out_click, a_click, b_click
    cdef bint prev_h = 0, prev_a = 0, prev_b = 0, prev_out = 0
    cdef double u, c0, c1, c2
    # herald flags and pair counts for the current pulse (n_src is small)
    cdef int64_t[64] counts_buf
    cdef bint[64] herald_buf
    if n_src > 64:
        raise ValueError("compiled kernel supports at most 64 sources")

    cdef int64_t heralds = 0, out_singles = 0, coinc = 0, acc = 0
    cdef int64_t a_singles = 0, b_singles = 0
    cdef int64_t pab_m1 = 0, pab_0 = 0, pab_p1 = 0
    cdef int64_t hn_m1 = 0, hn_0 = 0, hn_p1 = 0
    cdef int64_t ha_m1 = 0, ha_0 = 0, ha_p1 = 0
    cdef int64_t hb_m1 = 0, hb_0 = 0, hb_p1 = 0
    cdef int64_t hab_m1 = 0, hab_0 = 0, hab_p1 = 0

    with nogil:
        for i in range(b):
            any_h = 0
            sel = 0
            for s in range(n_src):
                u = pair_u[s, i]
                k = 0
                while u >= cdf[s, k]:
                    k += 1
                counts_buf[s] = k
                herald_buf[s] = herald_u[s, i] < herald_click[s, k]
            for rank in range(n_src):
                s = priority[rank]
                if herald_buf[s]:
                    any_h = 1
                    sel = s
                    break
            if gated:
                if any_h:
                    r = sel
                    n_out = counts_buf[sel]
                else:
                    r = n_src
                    n_out = 0
            else:
                r = 0
                n_out = counts_buf[0]

            u = out_u[i]
            if hbt:
                c0 = hbt_cum[r, n_out, 0]
                c1 = hbt_cum[r, n_out, 1]
                c2 = hbt_cum[r, n_out, 2]
                out_click = u >= c0
                a_click = u >= c1
                b_click = (out_click and not a_click) or u >= c2
            else:
                out_click = u < out_click_tab[r, n_out]
                a_click = 0
                b_click = 0

            heralds += any_h
            out_singles += out_click
            if any_h and out_click:
                coinc += 1
            if i > 0 and prev_h and out_click:
                acc += 1

            if hbt:
                a_singles += a_click
                b_singles += b_click
                # offset 0: pairs on the same pulse
                if a_click and b_click:
                    pab_0 += 1
                hn_0 += any_h
                if any_h:
                    if a_click:
                        ha_0 += 1
                    if b_click:
                        hb_0 += 1
                    if a_click and b_click:
                        hab_0 += 1
                if i > 0:
                    # offset -1 anchored at pulse i: partner is b(i-1)
                    if a_click and prev_b:
                        pab_m1 += 1
                    hn_m1 += any_h
                    if any_h:
                        if a_click:
                            ha_m1 += 1
                        if prev_b:
                            hb_m1 += 1
                        if a_click and prev_b:
                            hab_m1 += 1
                    # offset +1 anchored at pulse i-1: partner is b(i)
                    if prev_a and b_click:
                        pab_p1 += 1
                    hn_p1 += prev_h
                    if prev_h:
                        if prev_a:
                            ha_p1 += 1
                        if b_click:
                            hb_p1 += 1
                        if prev_a and b_click:
                            hab_p1 += 1

            prev_h = any_h
            prev_a = a_click
            prev_b = b_click
            prev_out = out_click

    tallies[0] += b
    tallies[1] += heralds
    tallies[2] += out_singles
    tallies[3] += coinc
    tallies[4] += acc
    tallies[5] += b - 1
    if hbt:
        tallies[6] += a_singles
        tallies[7] += b_singles
        tallies[8] += b - 1      # pair_norm, offset -1
        tallies[9] += pab_m1
        tallies[10] += hn_m1
        tallies[11] += ha_m1
        tallies[12] += hb_m1
        tallies[13] += hab_m1
        tallies[14] += b         # pair_norm, offset 0
        tallies[15] += pab_0
        tallies[16] += hn_0
        tallies[17] += ha_0
        tallies[18] += hb_0
        tallies[19] += hab_0
        tallies[20] += b - 1     # pair_norm, offset +1
        tallies[21] += pab_p1
        tallies[22] += hn_p1
        tallies[23] += ha_p1
        tallies[24] += hb_p1
        tallies[25] += hab_p1
