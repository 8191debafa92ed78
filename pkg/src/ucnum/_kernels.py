"""Jitted slot loops for the simulation engines.

The engines pre-draw two uniforms per node per slot from independent
per-node streams (action draw first, satisfaction draw second) and these
kernels consume them.  Deterministic branches still consume their draw,
so a run is a pure function of the uniform block.

Payoff tables arrive flattened to shape (num_profiles, n_nodes) with a
mixed-radix joint index (node 0 most significant).
"""

from __future__ import annotations

import numpy as np
from numba import njit

# utility kind codes shared with games.UtilitySpec
KIND_LOG_OFFSET = 0
KIND_LOG1P = 1
KIND_AFFINE = 2
KIND_TABLE = 3

KIND_CODES = {"log_offset": 0, "log1p": 1, "affine": 2, "table": 3}


@njit(cache=True)
def _raw_utility(r, kind, delta, table, table_len):
    if kind == 0:
        return np.log(delta + r)
    if kind == 1:
        return np.log1p(r)
    if kind == 2:
        return r
    m = table_len - 1
    x = r * m
    j = int(x)
    if j >= m:
        j = m - 1
    frac = x - j
    return table[j] * (1.0 - frac) + table[j + 1] * frac


@njit(cache=True)
def _uniform_int(u, n):
    k = int(u * n)
    if k >= n:
        k = n - 1
    return k


@njit(cache=True)
def _alternative_action(u, p_repeat, old, n):
    # u >= p_repeat: spread the tail uniformly over the n-1 other actions
    v = (u - p_repeat) / (1.0 - p_repeat)
    k = _uniform_int(v, n - 1)
    if k >= old:
        k += 1
    return k


@njit(cache=True)
def gnum_run_chunk(
    pay,
    strides,
    sizes,
    kinds,
    deltas,
    tables,
    table_lens,
    u_lo,
    u_hi,
    eps,
    c,
    kwin,
    t0,
    uniforms,
    awin,
    pwin,
    win_prof,
    q,
    cum_pay,
    profile_counts,
    state_counts,
    record_stride,
    rec,
    rec_used,
):
    """Advance the per-node dynamics over one block of slots.

    State arrays (awin, pwin, win_prof, q, cum_pay, counts) are updated
    in place.  Slots t0..t0+m-1 are 1-based; slots <= kwin are warm-up
    (forced discontent, uniform actions).  Returns the updated record
    row count, the number of window-sum/single-comparison disagreements,
    and the number of slots where every node ended content.
    """
    n = sizes.shape[0]
    m = uniforms.shape[1]
    p_repeat = 1.0 - eps**c
    violations = 0
    all_content = 0
    n_states = state_counts.shape[0]
    a_new = np.empty(n, np.int64)
    r_new = np.empty(n, np.float64)
    q_new = np.empty(n, np.uint8)
    tmp_old = np.empty(kwin, np.float64)
    tmp_new = np.empty(kwin, np.float64)

    for j in range(m):
        t = t0 + j
        warm = t <= kwin

        for i in range(n):
            u = uniforms[i, j, 0]
            if warm or q[i] == 0:
                a_new[i] = _uniform_int(u, sizes[i])
            elif u < p_repeat:
                a_new[i] = awin[i, 0]
            else:
                a_new[i] = _alternative_action(u, p_repeat, awin[i, 0], sizes[i])

        pidx = 0
        for i in range(n):
            pidx += a_new[i] * strides[i]
        for i in range(n):
            r_new[i] = pay[pidx, i]

        for i in range(n):
            u = uniforms[i, j, 1]
            if warm:
                q_new[i] = 0
                continue
            repeated = a_new[i] == awin[i, 0]
            same_pay = r_new[i] == pwin[i, 0]
            if q[i] == 1 and repeated and same_pay:
                q_new[i] = 1
            else:
                mean = r_new[i]
                for w in range(1, kwin):
                    mean += pwin[i, w]
                mean /= kwin
                raw = _raw_utility(mean, kinds[i], deltas[i], tables[i], table_lens[i])
                expnt = 1.0 - (raw - u_lo[i]) / (u_hi[i] - u_lo[i])
                q_new[i] = 1 if u < eps**expnt else 0

        if not warm:
            # the K-window sum test must agree with the single comparison;
            # sort before summing so equal multisets sum identically
            for i in range(n):
                for w in range(kwin):
                    tmp_old[w] = pwin[i, w]
                for w in range(1, kwin):
                    tmp_new[w - 1] = pwin[i, w]
                tmp_new[kwin - 1] = r_new[i]
                tmp_old.sort()
                tmp_new.sort()
                s_old = 0.0
                s_new = 0.0
                for w in range(kwin):
                    s_old += tmp_old[w]
                    s_new += tmp_new[w]
                if (s_old == s_new) != (r_new[i] == pwin[i, 0]):
                    violations += 1

        # shift windows
        for i in range(n):
            for w in range(kwin - 1):
                awin[i, w] = awin[i, w + 1]
                pwin[i, w] = pwin[i, w + 1]
            awin[i, kwin - 1] = a_new[i]
            pwin[i, kwin - 1] = r_new[i]
            q[i] = q_new[i]
            cum_pay[i] += r_new[i]
        for w in range(kwin - 1):
            win_prof[w] = win_prof[w + 1]
        win_prof[kwin - 1] = pidx

        profile_counts[pidx] += 1
        content_all = True
        for i in range(n):
            if q[i] == 0:
                content_all = False
                break
        if content_all:
            all_content += 1

        if n_states > 0 and t > kwin:
            sidx = 0
            for w in range(kwin):
                sidx = sidx * pay.shape[0] + win_prof[w]
            for i in range(n):
                sidx = sidx * 2 + q[i]
            state_counts[sidx] += 1

        if (t - 1) % record_stride == 0:
            row = rec_used
            rec[row, 0] = t
            for i in range(n):
                rec[row, 1 + i] = a_new[i]
                rec[row, 1 + n + i] = r_new[i]
                rec[row, 1 + 2 * n + i] = q[i]
                rec[row, 1 + 3 * n + i] = cum_pay[i] / t
            rec_used += 1

    return rec_used, violations, all_content


@njit(cache=True)
def cnum_run_frame(
    pay,
    strides,
    sizes,
    eps,
    c,
    lam,
    lam_max,
    uniforms,
    a_prev,
    r_prev,
    q,
    started,
    profile_counts,
):
    """One frame of the price-driven dynamics at fixed per-node prices.

    ``started`` is 0 on the very first slot of a run (no previous profile
    exists yet; every node is discontent by initialization).  Returns the
    per-node payoff sums over the frame and the all-content slot count.
    """
    n = sizes.shape[0]
    m = uniforms.shape[1]
    p_repeat = 1.0 - eps**c
    pay_sums = np.zeros(n, np.float64)
    all_content = 0
    a_new = np.empty(n, np.int64)
    r_new = np.empty(n, np.float64)

    for j in range(m):
        for i in range(n):
            u = uniforms[i, j, 0]
            if q[i] == 0:
                a_new[i] = _uniform_int(u, sizes[i])
            elif u < p_repeat:
                a_new[i] = a_prev[i]
            else:
                a_new[i] = _alternative_action(u, p_repeat, a_prev[i], sizes[i])

        pidx = 0
        for i in range(n):
            pidx += a_new[i] * strides[i]
        for i in range(n):
            r_new[i] = pay[pidx, i]

        for i in range(n):
            u = uniforms[i, j, 1]
            if (
                started == 1
                and q[i] == 1
                and a_new[i] == a_prev[i]
                and r_new[i] == r_prev[i]
            ):
                q[i] = 1
            else:
                expnt = 1.0 - lam[i] * r_new[i] / lam_max
                q[i] = 1 if u < eps**expnt else 0

        content_all = True
        for i in range(n):
            a_prev[i] = a_new[i]
            r_prev[i] = r_new[i]
            pay_sums[i] += r_new[i]
            if q[i] == 0:
                content_all = False
        if content_all:
            all_content += 1
        profile_counts[pidx] += 1
        started = 1

    return pay_sums, all_content


@njit(cache=True)
def loglinear_run_chunk(
    pay,
    strides,
    sizes,
    lam,
    beta,
    uniforms,
    actions,
    profile_counts,
    pay_sums,
):
    """Single-site resampling: one node per slot redraws its action with
    probability proportional to exp(beta * lam_i * payoff_i)."""
    n = sizes.shape[0]
    m = uniforms.shape[0]
    weights = np.empty(np.max(sizes), np.float64)

    for j in range(m):
        i = _uniform_int(uniforms[j, 0], n)
        base = 0
        for w in range(n):
            if w != i:
                base += actions[w] * strides[w]
        peak = -1e300
        for k in range(sizes[i]):
            weights[k] = beta * lam[i] * pay[base + k * strides[i], i]
            if weights[k] > peak:
                peak = weights[k]
        total = 0.0
        for k in range(sizes[i]):
            weights[k] = np.exp(weights[k] - peak)
            total += weights[k]
        draw = uniforms[j, 1] * total
        acc = 0.0
        choice = sizes[i] - 1
        for k in range(sizes[i]):
            acc += weights[k]
            if draw < acc:
                choice = k
                break
        actions[i] = choice

        pidx = 0
        for w in range(n):
            pidx += actions[w] * strides[w]
        profile_counts[pidx] += 1
        for w in range(n):
            pay_sums[w] += pay[pidx, w]
