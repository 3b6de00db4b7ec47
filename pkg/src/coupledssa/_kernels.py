"""Jitted event loops behind the path simulators.

Three loops cover every coupling:

* time_change_path: one process driven by one unit-rate Poisson stream per
  channel, firing channel k when its integrated intensity reaches the
  stream's next epoch. Handles the plain single process, each side of the
  independent and shared-reaction-path couplings, and the locally restarted
  variant (per-subinterval fresh streams selected through the counter word).
* crn_path: one process in the embedded-chain representation: a single
  Poisson stream of holding epochs consumed against the integrated total
  intensity, plus index-addressed uniforms for channel selection.
* split_pair_path: the coupled pair as one chain with three channels per
  reaction (shared / X-only / Z-only), rates recomputed after every event.

All loops draw through the counter-based generator in _philox, so a stream
observed here is bit-identical to the same stream read through the Python
objects in streams. Floating-point evaluation order (intensity factor order,
internal-time updates, strictly sequential epoch accumulation) is part of
that contract and is mirrored by the pure-Python fallbacks in couplings.

State lives in caller-provided arrays so a loop can return mid-path when its
event buffer fills (STATUS_FULL), be drained, and resume exactly where it
stopped. Callers re-enter with the same arrays; results are identical to an
unbounded buffer.
"""

import numpy as np
from numba import njit

from ._philox import U64, buffered_word, philox_block, to_unit

STATUS_DONE = 0
STATUS_FULL = 1
STATUS_EXPLODED = 2

_Z = U64(0)

# st_i slot names, time_change_path: 0 grid cursor, 1 interval, 2 primed,
# 3 total events, 4 events in buffer. crn_path: 0 grid cursor, 1 primed,
# 2 total, 3 in buffer, 4 holding-epoch index, 5 jump count.
# split_pair_path: 0 grid cursor, 1 primed, 2 total, 3 in buffer.


@njit(cache=True, nogil=True, inline="always")
def _lam_one(ck, reac, k, x):
    """Mass-action intensity of channel k at state x; factor order fixed,
    matching model.intensity bit for bit."""
    v = ck
    for i in range(x.shape[0]):
        mi = reac[k, i]
        if mi > 0:
            xi = x[i]
            if xi < mi:
                return 0.0
            for j in range(mi):
                v = v * (xi - j)
    return v


@njit(cache=True, nogil=True)
def time_change_path(
    k0s,
    k1s,
    c2s,
    c3s,
    use_interval_c3,
    reac,
    nu,
    c,
    bounds,
    grid,
    out_grid,
    record,
    ev_t,
    ev_k,
    x,
    tk,
    e_next,
    idx,
    buf,
    st_i,
    st_f,
    total_cap,
):
    """Next-reaction evolution of one process over the subintervals of
    `bounds`; channel k of subinterval m draws from counter (c2s[k], m) when
    use_interval_c3, else (c2s[k], c3s[k]). Internal times reset to zero at
    every subinterval start and each channel consumes its epochs in order.

    Fires only strictly inside a subinterval: an epoch landing exactly on a
    boundary (measure zero, but floats) is abandoned, as the next subinterval
    owns that instant.
    """
    K = c.shape[0]
    d = nu.shape[1]
    M = bounds.shape[0] - 1
    G = grid.shape[0]
    ev_cap = ev_t.shape[0]
    lam = np.empty(K, dtype=np.float64)

    gi = st_i[0]
    m = st_i[1]
    primed = st_i[2]
    total = st_i[3]
    n_ev = 0
    t = st_f[0]

    while m < M:
        t_end = bounds[m + 1]
        c3m = U64(m)
        if primed == 0:
            for k in range(K):
                c3 = c3m if use_interval_c3 != 0 else c3s[k]
                b0, b1, b2, b3 = philox_block(k0s[k], k1s[k], _Z, _Z, c2s[k], c3)
                buf[k, 0] = b0
                buf[k, 1] = b1
                buf[k, 2] = b2
                buf[k, 3] = b3
                e_next[k] = -np.log1p(-to_unit(b0))
                idx[k] = 1
                tk[k] = 0.0
            primed = 1
        while True:
            best = -1
            best_dt = np.inf
            for k in range(K):
                v = _lam_one(c[k], reac, k, x)
                lam[k] = v
                if v > 0.0:
                    dt = (e_next[k] - tk[k]) / v
                    if dt < best_dt:
                        best_dt = dt
                        best = k
            if best < 0:
                t = t_end  # absorbing: coast to the subinterval end
                break
            t_new = t + best_dt
            if not (t_new < t_end):
                dt_end = t_end - t
                for k in range(K):
                    if lam[k] > 0.0:
                        tk[k] += lam[k] * dt_end
                t = t_end
                break
            if total >= total_cap:
                st_i[0] = gi
                st_i[1] = m
                st_i[2] = primed
                st_i[3] = total
                st_i[4] = n_ev
                st_f[0] = t
                return STATUS_EXPLODED
            if record != 0 and n_ev >= ev_cap:
                st_i[0] = gi
                st_i[1] = m
                st_i[2] = primed
                st_i[3] = total
                st_i[4] = n_ev
                st_f[0] = t
                return STATUS_FULL
            while gi < G and grid[gi] < t_new:
                for i in range(d):
                    out_grid[gi, i] = x[i]
                gi += 1
            for k in range(K):
                if lam[k] > 0.0:
                    tk[k] += lam[k] * best_dt
            tk[best] = e_next[best]  # exact: kills accumulated drift
            t = t_new
            for i in range(d):
                x[i] += nu[best, i]
            c3 = c3m if use_interval_c3 != 0 else c3s[best]
            u = to_unit(buffered_word(k0s[best], k1s[best], c2s[best], c3, U64(idx[best]), buf[best]))
            e_next[best] = e_next[best] + (-np.log1p(-u))
            idx[best] += 1
            total += 1
            if record != 0:
                ev_t[n_ev] = t
                ev_k[n_ev] = best
                n_ev += 1
        m += 1
        primed = 0

    while gi < G:
        for i in range(d):
            out_grid[gi, i] = x[i]
        gi += 1
    st_i[0] = gi
    st_i[1] = m
    st_i[2] = primed
    st_i[3] = total
    st_i[4] = n_ev
    st_f[0] = t
    return STATUS_DONE


@njit(cache=True, nogil=True)
def crn_path(
    k0h,
    k1h,
    k0u,
    k1u,
    reac,
    nu,
    c,
    T,
    grid,
    out_grid,
    record,
    ev_t,
    ev_k,
    x,
    hbuf,
    ubuf,
    st_i,
    st_f,
    total_cap,
):
    """Embedded-chain evolution of one process: jump j lands where the
    integrated total intensity reaches holding epoch j, and selects its
    channel with uniform draw number j (this process's own jump count), so
    two processes fed the same stream keys share holding times and selection
    uniforms index-for-index."""
    K = c.shape[0]
    d = nu.shape[1]
    G = grid.shape[0]
    ev_cap = ev_t.shape[0]
    lam = np.empty(K, dtype=np.float64)

    gi = st_i[0]
    primed = st_i[1]
    total = st_i[2]
    n_ev = 0
    hidx = st_i[4]
    jcount = st_i[5]
    t = st_f[0]
    r_int = st_f[1]
    e_next = st_f[2]

    if primed == 0:
        b0, b1, b2, b3 = philox_block(k0h, k1h, _Z, _Z, _Z, _Z)
        hbuf[0] = b0
        hbuf[1] = b1
        hbuf[2] = b2
        hbuf[3] = b3
        e_next = -np.log1p(-to_unit(b0))
        hidx = 1
        r_int = 0.0
        primed = 1

    while True:
        lam0 = 0.0
        for k in range(K):
            v = _lam_one(c[k], reac, k, x)
            lam[k] = v
            lam0 += v
        if lam0 <= 0.0:
            t = T
            break
        dt = (e_next - r_int) / lam0
        t_new = t + dt
        if not (t_new < T):
            r_int += lam0 * (T - t)
            t = T
            break
        if total >= total_cap:
            st_i[0] = gi
            st_i[1] = primed
            st_i[2] = total
            st_i[3] = n_ev
            st_i[4] = hidx
            st_i[5] = jcount
            st_f[0] = t
            st_f[1] = r_int
            st_f[2] = e_next
            return STATUS_EXPLODED
        if record != 0 and n_ev >= ev_cap:
            st_i[0] = gi
            st_i[1] = primed
            st_i[2] = total
            st_i[3] = n_ev
            st_i[4] = hidx
            st_i[5] = jcount
            st_f[0] = t
            st_f[1] = r_int
            st_f[2] = e_next
            return STATUS_FULL
        while gi < G and grid[gi] < t_new:
            for i in range(d):
                out_grid[gi, i] = x[i]
            gi += 1
        t = t_new
        r_int = e_next
        u = to_unit(buffered_word(k0u, k1u, _Z, _Z, U64(jcount), ubuf))
        jcount += 1
        # half-open cumulative intervals; duplicate of categorical_select,
        # kept inline and branch-for-branch identical
        target = u * lam0
        chosen = -1
        last_pos = -1
        cum = 0.0
        for k in range(K):
            w = lam[k]
            if w > 0.0:
                last_pos = k
            cum_next = cum + w
            if chosen < 0 and cum <= target and target < cum_next:
                chosen = k
            cum = cum_next
        if chosen < 0:
            chosen = last_pos
        for i in range(d):
            x[i] += nu[chosen, i]
        u2 = to_unit(buffered_word(k0h, k1h, _Z, _Z, U64(hidx), hbuf))
        e_next = e_next + (-np.log1p(-u2))
        hidx += 1
        total += 1
        if record != 0:
            ev_t[n_ev] = t
            ev_k[n_ev] = chosen
            n_ev += 1

    while gi < G:
        for i in range(d):
            out_grid[gi, i] = x[i]
        gi += 1
    st_i[0] = gi
    st_i[1] = primed
    st_i[2] = total
    st_i[3] = n_ev
    st_i[4] = hidx
    st_i[5] = jcount
    st_f[0] = t
    st_f[1] = r_int
    st_f[2] = e_next
    return STATUS_DONE


@njit(cache=True, nogil=True)
def split_pair_path(
    k0a,
    k1a,
    k0b,
    k1b,
    k0c,
    k1c,
    reac_x,
    reac_z,
    nu,
    cx,
    cz,
    T,
    grid,
    out_gx,
    out_gz,
    record,
    ev_t,
    ev_k,
    ev_w,
    x,
    z,
    tkp,
    e_nextp,
    idxp,
    bufp,
    st_i,
    st_f,
    total_cap,
):
    """The coupled pair as one chain. Channel k splits into rates
    (min(lx,lz), lx-min, lz-min) driving (both, X alone, Z alone); each of
    the 3K subchannels owns a Poisson stream (key a/b/c by kind, counter
    word c2 = k). Ties break channel-major, then shared before X-only
    before Z-only. ev_w records 2 both / 0 X / 1 Z."""
    K = cx.shape[0]
    d = nu.shape[1]
    G = grid.shape[0]
    ev_cap = ev_t.shape[0]
    rates = np.empty((3, K), dtype=np.float64)

    gi = st_i[0]
    primed = st_i[1]
    total = st_i[2]
    n_ev = 0
    t = st_f[0]

    if primed == 0:
        for k in range(K):
            c2 = U64(k)
            for i3 in range(3):
                if i3 == 0:
                    b0, b1, b2, b3 = philox_block(k0a, k1a, _Z, _Z, c2, _Z)
                elif i3 == 1:
                    b0, b1, b2, b3 = philox_block(k0b, k1b, _Z, _Z, c2, _Z)
                else:
                    b0, b1, b2, b3 = philox_block(k0c, k1c, _Z, _Z, c2, _Z)
                bufp[i3, k, 0] = b0
                bufp[i3, k, 1] = b1
                bufp[i3, k, 2] = b2
                bufp[i3, k, 3] = b3
                e_nextp[i3, k] = -np.log1p(-to_unit(b0))
                idxp[i3, k] = 1
                tkp[i3, k] = 0.0
        primed = 1

    while True:
        best_i = -1
        best_k = -1
        best_dt = np.inf
        for k in range(K):
            lx = _lam_one(cx[k], reac_x, k, x)
            lz = _lam_one(cz[k], reac_z, k, z)
            r1 = lx if lx < lz else lz
            rates[0, k] = r1
            rates[1, k] = lx - r1
            rates[2, k] = lz - r1
            for i3 in range(3):
                w = rates[i3, k]
                if w > 0.0:
                    dt = (e_nextp[i3, k] - tkp[i3, k]) / w
                    if dt < best_dt:
                        best_dt = dt
                        best_i = i3
                        best_k = k
        if best_k < 0:
            t = T
            break
        t_new = t + best_dt
        if not (t_new < T):
            dt_end = T - t
            for k in range(K):
                for i3 in range(3):
                    if rates[i3, k] > 0.0:
                        tkp[i3, k] += rates[i3, k] * dt_end
            t = T
            break
        if total >= total_cap:
            st_i[0] = gi
            st_i[1] = primed
            st_i[2] = total
            st_i[3] = n_ev
            st_f[0] = t
            return STATUS_EXPLODED
        if record != 0 and n_ev >= ev_cap:
            st_i[0] = gi
            st_i[1] = primed
            st_i[2] = total
            st_i[3] = n_ev
            st_f[0] = t
            return STATUS_FULL
        while gi < G and grid[gi] < t_new:
            for i in range(d):
                out_gx[gi, i] = x[i]
                out_gz[gi, i] = z[i]
            gi += 1
        for k in range(K):
            for i3 in range(3):
                if rates[i3, k] > 0.0:
                    tkp[i3, k] += rates[i3, k] * best_dt
        tkp[best_i, best_k] = e_nextp[best_i, best_k]
        t = t_new
        if best_i != 2:
            for i in range(d):
                x[i] += nu[best_k, i]
        if best_i != 1:
            for i in range(d):
                z[i] += nu[best_k, i]
        c2 = U64(best_k)
        j = U64(idxp[best_i, best_k])
        if best_i == 0:
            u = to_unit(buffered_word(k0a, k1a, c2, _Z, j, bufp[best_i, best_k]))
        elif best_i == 1:
            u = to_unit(buffered_word(k0b, k1b, c2, _Z, j, bufp[best_i, best_k]))
        else:
            u = to_unit(buffered_word(k0c, k1c, c2, _Z, j, bufp[best_i, best_k]))
        e_nextp[best_i, best_k] = e_nextp[best_i, best_k] + (-np.log1p(-u))
        idxp[best_i, best_k] += 1
        total += 1
        if record != 0:
            ev_t[n_ev] = t
            ev_k[n_ev] = best_k
            if best_i == 0:
                ev_w[n_ev] = 2
            elif best_i == 1:
                ev_w[n_ev] = 0
            else:
                ev_w[n_ev] = 1
            n_ev += 1

    while gi < G:
        for i in range(d):
            out_gx[gi, i] = x[i]
            out_gz[gi, i] = z[i]
        gi += 1
    st_i[0] = gi
    st_i[1] = primed
    st_i[2] = total
    st_i[3] = n_ev
    st_f[0] = t
    return STATUS_DONE


@njit(cache=True, nogil=True)
def merge_pair_events(tx, kx, tz, kz, out_t, out_k, out_w):
    """Merge the two sides' event lists into one pair record. Equal time and
    equal channel coalesce into a single both-sides event; equal time with
    different channels emits the X event first. Returns the merged count."""
    nx = tx.shape[0]
    nz = tz.shape[0]
    i = 0
    j = 0
    n = 0
    while i < nx or j < nz:
        if i >= nx:
            out_t[n] = tz[j]
            out_k[n] = kz[j]
            out_w[n] = 1
            j += 1
        elif j >= nz:
            out_t[n] = tx[i]
            out_k[n] = kx[i]
            out_w[n] = 0
            i += 1
        elif tx[i] < tz[j]:
            out_t[n] = tx[i]
            out_k[n] = kx[i]
            out_w[n] = 0
            i += 1
        elif tz[j] < tx[i]:
            out_t[n] = tz[j]
            out_k[n] = kz[j]
            out_w[n] = 1
            j += 1
        elif kx[i] == kz[j]:
            out_t[n] = tx[i]
            out_k[n] = kx[i]
            out_w[n] = 2
            i += 1
            j += 1
        else:
            out_t[n] = tx[i]
            out_k[n] = kx[i]
            out_w[n] = 0
            i += 1
        n += 1
    return n
