"""Event-driven kernel.

K configurations share one lattice geometry and one clock field and are
updated in lockstep; K = 1 is a plain run.  Lattice arrays are indexed
0..L-1; index i is site ``base + i`` and edge i joins sites i and i+1.
Site value 3 marks a wall (outside a segment or a half-line).
"""
from __future__ import annotations

import numba as nb
import numpy as np

from .rng import clock_draw

WALL = 3
GROW_BLOCK = 256
GROW_TRIGGER = 8

OK, WINDOW_ABORT, LOG_OVERFLOW = 0, 1, 2
ACT_NOOP, ACT_SWAP, ACT_BLOCKED = 0, 1, 2

_RANK = np.array([0, 2, 1, 0], dtype=np.int8)


@nb.njit(cache=True, inline="always")
def _less(ta, ea, tb, eb):
    return ta < tb or (ta == tb and ea < eb)


@nb.njit(cache=True)
def _sift_down(ht, he, size, j):
    while True:
        l = 2 * j + 1
        if l >= size:
            return
        m = l
        r = l + 1
        if r < size and _less(ht[r], he[r], ht[l], he[l]):
            m = r
        if _less(ht[m], he[m], ht[j], he[j]):
            ht[j], ht[m] = ht[m], ht[j]
            he[j], he[m] = he[m], he[j]
            j = m
        else:
            return


@nb.njit(cache=True)
def _push(ht, he, size, t, e):
    j = size
    ht[j] = t
    he[j] = e
    while j > 0:
        par = (j - 1) // 2
        if _less(ht[j], he[j], ht[par], he[par]):
            ht[j], ht[par] = ht[par], ht[j]
            he[j], he[par] = he[par], he[j]
            j = par
        else:
            break
    return size + 1


@nb.njit(cache=True)
def _activate(i, now, k0, k1, trial, sign, shift, base, rate, next_t, next_n, next_c,
              last_t):
    # first ring of edge i strictly after ``now``; the rings skipped since
    # ``last_t`` were no-ops
    z = sign * (base + i) + shift
    t = last_t[i]
    n = next_n[i]
    while True:
        dt, c = clock_draw(k0, k1, trial, z, n, rate)
        t += dt
        if t > now:
            break
        n += 1
    next_t[i] = t
    next_n[i] = n
    next_c[i] = c


@nb.njit(cache=True)
def _pop_top(ht, he, size):
    size -= 1
    ht[0] = ht[size]
    he[0] = he[size]
    _sift_down(ht, he, size, 0)
    return size


@nb.njit(cache=True, inline="always")
def _flat(lat, blocked, i):
    # every slot sees equal values (or a wall) across edge i
    for k in range(lat.shape[0]):
        if not blocked[k, i] and lat[k, i] != lat[k, i + 1]:
            return False
    return True


@nb.njit(cache=True)
def _scan_first(row, v):
    for i in range(row.size):
        if row[i] == v:
            return i
    return -1


@nb.njit(cache=True)
def _scan_last(row, v):
    for i in range(row.size - 1, -1, -1):
        if row[i] == v:
            return i
    return -1


@nb.njit(cache=True)
def run(lat, blocked, cens_times, cens_mask, censorable,
        k0, k1, trial, sign, shift, base, rate, rule, horizon,
        elo, ehi, emin, emax, grow,
        target, has_target, stop_on_hit,
        ck_times, flux_edges, snap_lo, tr_cfg, tr_pos,
        ot_cfg, ot_a, ot_b,
        hit_time, ck_lm1, ck_lm2, ck_rm0, ck_flux, ck_snap, ck_tr,
        tr_min, tr_max, ck_ot, ot_out,
        log_t, log_e, log_n, log_c, log_act,
        meta, tmeta, lazy):
    """Evolve ``lat`` in place.  With ``lazy`` set, edges that are flat in
    every slot leave the queue and rejoin when a neighbouring swap happens;
    their skipped rings are no-ops, so the trajectory is unchanged but those
    rings are neither counted nor logged."""
    K, L = lat.shape
    down, up_lo, up_hi = rule[0], rule[1], rule[2]
    C = ck_times.size
    T = tr_pos.size
    F = flux_edges.size
    W = ck_snap.shape[2]
    B = cens_times.size
    cap = log_t.size
    use_cens = B > 0 or cens_mask.shape[0] > 0

    flux = np.zeros((K, L), dtype=np.int64)

    defects = np.zeros(K, dtype=np.int64)
    n_open = 0
    for k in range(K):
        hit_time[k] = -1.0
        if has_target[k]:
            d = 0
            for i in range(L):
                if lat[k, i] != target[k, i]:
                    d += 1
            defects[k] = d
            if d == 0:
                hit_time[k] = 0.0
            else:
                n_open += 1

    for j in range(T):
        tr_min[j] = tr_pos[j]
        tr_max[j] = tr_pos[j]

    ot_pos = -1
    ot_cnt = 0
    if ot_cfg >= 0:
        ot_pos = _scan_first(lat[ot_cfg], ot_a)
        if ot_pos >= 0:
            for i in range(ot_pos + 1, L):
                if lat[ot_cfg, i] == ot_b:
                    ot_cnt += 1
        ot_out[0] = ot_cnt
        ot_out[1] = ot_cnt

    next_t = np.empty(L)
    next_n = np.zeros(L, dtype=np.int64)
    next_c = np.empty(L)
    last_t = np.zeros(L)
    dormant = np.zeros(L, dtype=np.bool_)
    ht = np.empty(L)
    he = np.empty(L, dtype=np.int64)
    size = 0
    for i in range(elo, ehi + 1):
        if lazy and _flat(lat, blocked, i):
            dormant[i] = True
            continue
        _activate(i, 0.0, k0, k1, trial, sign, shift, base, rate, next_t, next_n, next_c, last_t)
        size = _push(ht, he, size, next_t[i], i)

    status = OK
    n_events = 0
    n_logged = 0
    ci = 0          # checkpoint cursor
    bi = 0          # censor interval cursor
    now = 0.0
    stopped = False

    while size > 0:
        t = ht[0]
        i = he[0]
        if t > horizon:
            break
        while ci < C and ck_times[ci] < t:
            _checkpoint(lat, ci, flux, flux_edges, snap_lo, tr_pos, ot_cnt,
                        ck_lm1, ck_lm2, ck_rm0, ck_flux, ck_snap, ck_tr, ck_ot)
            ci += 1
        while bi < B and cens_times[bi] <= t:
            bi += 1
        now = t
        coin = next_c[i]
        n = next_n[i]
        n_events += 1
        swapped_any = False
        if cap > 0:
            if n_logged == cap:
                status = LOG_OVERFLOW
                break
            log_t[n_logged] = t
            log_e[n_logged] = base + i
            log_n[n_logged] = n
            log_c[n_logged] = coin
        for k in range(K):
            act = ACT_NOOP
            if blocked[k, i] or (use_cens and censorable[k] and cens_mask[bi, i]):
                act = ACT_BLOCKED
            else:
                u = lat[k, i]
                v = lat[k, i + 1]
                ru = _RANK[u]
                rv = _RANK[v]
                if (ru > rv and coin < down) or (ru < rv and up_lo <= coin < up_hi):
                    act = ACT_SWAP
                    lat[k, i] = v
                    lat[k, i + 1] = u
                    swapped_any = True
                    if u == 1:
                        flux[k, i] += 1
                    elif v == 1:
                        flux[k, i] -= 1
                    if has_target[k] and hit_time[k] < 0:
                        tg0 = target[k, i]
                        tg1 = target[k, i + 1]
                        defects[k] += (v != tg0) - (u != tg0) + (u != tg1) - (v != tg1)
                        if defects[k] == 0:
                            hit_time[k] = t
                            n_open -= 1
                    for j in range(T):
                        if tr_cfg[j] == k:
                            if tr_pos[j] == i:
                                tr_pos[j] = i + 1
                                if i + 1 > tr_max[j]:
                                    tr_max[j] = i + 1
                            elif tr_pos[j] == i + 1:
                                tr_pos[j] = i
                                if i < tr_min[j]:
                                    tr_min[j] = i
                    if k == ot_cfg:
                        if ot_pos == i + 1:
                            if u == ot_b:
                                ot_cnt += 1
                                if ot_cnt > ot_out[1]:
                                    ot_out[1] = ot_cnt
                            ot_pos = i
                        elif ot_pos == i:
                            if v == ot_b:
                                ot_cnt -= 1
                            ot_pos = i + 1
            if cap > 0:
                log_act[n_logged, k] = act
        if cap > 0:
            n_logged += 1

        if lazy and not swapped_any and _flat(lat, blocked, i):
            dormant[i] = True
            last_t[i] = t
            next_n[i] = n + 1
            size = _pop_top(ht, he, size)
        else:
            # next ring on this edge
            dt, c2 = clock_draw(k0, k1, trial, sign * (base + i) + shift, n + 1, rate)
            next_n[i] = n + 1
            next_t[i] = t + dt
            next_c[i] = c2
            ht[0] = next_t[i]
            _sift_down(ht, he, size, 0)
        if lazy and swapped_any:
            for j in (i - 1, i + 1):
                if elo <= j <= ehi and dormant[j]:
                    dormant[j] = False
                    _activate(j, now, k0, k1, trial, sign, shift, base, rate,
                              next_t, next_n, next_c, last_t)
                    size = _push(ht, he, size, next_t[j], j)

        if swapped_any and grow:
            if i + 1 > ehi + 1 - GROW_TRIGGER:
                if ehi >= emax:
                    status = WINDOW_ABORT
                    break
                new_hi = min(ehi + GROW_BLOCK, emax)
                for e in range(ehi + 1, new_hi + 1):
                    if lazy:
                        dormant[e] = True
                    else:
                        _activate(e, now, k0, k1, trial, sign, shift, base, rate,
                                  next_t, next_n, next_c, last_t)
                        size = _push(ht, he, size, next_t[e], e)
                ehi = new_hi
            if i < elo + GROW_TRIGGER:
                if elo <= emin:
                    status = WINDOW_ABORT
                    break
                new_lo = max(elo - GROW_BLOCK, emin)
                for e in range(new_lo, elo):
                    if lazy:
                        dormant[e] = True
                    else:
                        _activate(e, now, k0, k1, trial, sign, shift, base, rate,
                                  next_t, next_n, next_c, last_t)
                        size = _push(ht, he, size, next_t[e], e)
                elo = new_lo
        if stop_on_hit and n_open == 0:
            stopped = True
            break

    if status == OK and not stopped:
        # no further events before the horizon
        while ci < C and ck_times[ci] <= horizon:
            _checkpoint(lat, ci, flux, flux_edges, snap_lo, tr_pos, ot_cnt,
                        ck_lm1, ck_lm2, ck_rm0, ck_flux, ck_snap, ck_tr, ck_ot)
            ci += 1
    meta[0] = status
    meta[1] = n_events
    meta[2] = n_logged
    meta[3] = elo
    meta[4] = ehi
    meta[5] = 1 if stopped else 0
    meta[6] = ci
    tmeta[0] = now


@nb.njit(cache=True)
def _checkpoint(lat, c, flux, flux_edges, snap_lo, tr_pos, ot_cnt,
                ck_lm1, ck_lm2, ck_rm0, ck_flux, ck_snap, ck_tr, ck_ot):
    K = lat.shape[0]
    W = ck_snap.shape[2]
    for k in range(K):
        ck_lm1[c, k] = _scan_first(lat[k], 1)
        ck_lm2[c, k] = _scan_first(lat[k], 2)
        ck_rm0[c, k] = _scan_last(lat[k], 0)
        for f in range(flux_edges.size):
            ck_flux[c, k, f] = flux[k, flux_edges[f]]
        for w in range(W):
            ck_snap[c, k, w] = lat[k, snap_lo + w]
    for j in range(tr_pos.size):
        ck_tr[c, j] = tr_pos[j]
    ck_ot[c] = ot_cnt


@nb.njit(cache=True)
def run_batch(lat0, blocked, cens_times, cens_mask, censorable,
              k0, k1, trial0, sign, shift, base, rate, rule, horizon,
              elo, ehi, emin, emax, grow,
              target, has_target, stop_on_hit,
              ck_times, flux_edges, snap_lo, tr_cfg, tr_pos0,
              ot_cfg, ot_a, ot_b,
              hit_time, ck_lm1, ck_lm2, ck_rm0, ck_flux, ck_snap, ck_tr,
              tr_min, tr_max, ck_ot, ot_out, meta, tmeta, final, lazy):
    """Trials m = 0..M-1 with clock trial index trial0 + m.  ``lat0`` holds
    one initial lattice per trial or a single shared one; ``tr_pos0`` is
    indexed the same way."""
    M = hit_time.shape[0]
    Mi = lat0.shape[0]
    Mt = tr_pos0.shape[0]
    log_t = np.empty(0)
    log_e = np.empty(0, dtype=np.int64)
    log_n = np.empty(0, dtype=np.int64)
    log_c = np.empty(0)
    log_act = np.empty((0, lat0.shape[1]), dtype=np.int8)
    keep = final.shape[0] == M
    for m in range(M):
        lat = lat0[m % Mi].copy()
        tr_pos = tr_pos0[m % Mt].copy()
        run(lat, blocked, cens_times, cens_mask, censorable,
            k0, k1, trial0 + m, sign, shift, base, rate, rule, horizon,
            elo, ehi, emin, emax, grow,
            target, has_target, stop_on_hit,
            ck_times, flux_edges, snap_lo, tr_cfg, tr_pos,
            ot_cfg, ot_a, ot_b,
            hit_time[m], ck_lm1[m], ck_lm2[m], ck_rm0[m], ck_flux[m], ck_snap[m], ck_tr[m],
            tr_min[m], tr_max[m], ck_ot[m], ot_out[m],
            log_t, log_e, log_n, log_c, log_act,
            meta[m], tmeta[m], lazy)
        if keep:
            final[m] = lat


@nb.njit(cache=True)
def replay_states(lat0, log_e, log_act, base, k):
    """Row r = configuration k after the first r logged events."""
    n = log_e.size
    out = np.empty((n + 1, lat0.shape[1]), dtype=np.int8)
    cur = lat0[k].copy()
    out[0] = cur
    for r in range(n):
        if log_act[r, k] == ACT_SWAP:
            i = log_e[r] - base
            cur[i], cur[i + 1] = cur[i + 1], cur[i]
        out[r + 1] = cur
    return out
