"""Compiled inner loops for the ODE and SSA engines.

Arrays follow :meth:`Network.channel_arrays` / :meth:`Network.reservoir_arrays`:
``cidx[j] = (excited, ground, boson)``, ``crate[j] = (alpha, beta_abs,
beta_em, gamma)``; reservoir mode ``ridx[i]`` has bath rate ``rkap[i]`` and
Boltzmann factor ``rbol[i]``.
"""
import numpy as np
from numba import njit

OK, EXHAUSTED, EXTINCT, LOG_FULL, CONSERVATION, NEGATIVE = range(6)


@njit(cache=True, nogil=True)
def _rhs(n, cidx, crate, ridx, rkap, rbol, out):
    out[:] = 0.0
    for j in range(cidx.shape[0]):
        ex, gr, bo = cidx[j, 0], cidx[j, 1], cidx[j, 2]
        a, babs, bem, g = crate[j, 0], crate[j, 1], crate[j, 2], crate[j, 3]
        net = a * n[ex] + bem * n[bo] * n[ex] + g * n[gr] * n[ex] - babs * n[bo] * n[gr]
        out[ex] -= net
        out[gr] += net
        out[bo] += net
    for i in range(ridx.shape[0]):
        k = ridx[i]
        out[k] += rkap[i] * (rbol[i] * (n[k] + 1.0) - n[k])


@njit(cache=True, nogil=True)
def rk4_run(n, dt, n_steps, sample_every, cidx, crate, ridx, rkap, rbol,
            conserv, cons_tol, neg_tol, samples, clamps):
    """Fixed-step RK4. Returns (status, steps_done, n_clamps)."""
    m = n.shape[0]
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    check = conserv.shape[0] > 0
    ref = conserv @ n
    scale = np.abs(conserv) @ np.abs(n) + 1.0
    n_clamp = 0
    samples[0, :] = n
    s = 1
    for step in range(1, n_steps + 1):
        _rhs(n, cidx, crate, ridx, rkap, rbol, k1)
        for i in range(m):
            tmp[i] = n[i] + 0.5 * dt * k1[i]
        _rhs(tmp, cidx, crate, ridx, rkap, rbol, k2)
        for i in range(m):
            tmp[i] = n[i] + 0.5 * dt * k2[i]
        _rhs(tmp, cidx, crate, ridx, rkap, rbol, k3)
        for i in range(m):
            tmp[i] = n[i] + dt * k3[i]
        _rhs(tmp, cidx, crate, ridx, rkap, rbol, k4)
        for i in range(m):
            n[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(m):
            if n[i] < 0.0:
                if n[i] < -neg_tol:
                    return NEGATIVE, step, n_clamp
                if n_clamp < clamps.shape[0]:
                    clamps[n_clamp, 0] = step
                    clamps[n_clamp, 1] = i
                n_clamp += 1
                n[i] = 0.0
        if check:
            now = conserv @ n
            for r in range(now.shape[0]):
                if abs(now[r] - ref[r]) > cons_tol * scale[r]:
                    return CONSERVATION, step, n_clamp
        if step % sample_every == 0 and s < samples.shape[0]:
            samples[s, :] = n
            s += 1
    return OK, n_steps, n_clamp


@njit(cache=True, nogil=True)
def _fill_props(n, cidx, crate, ridx, rkap, rbol, props):
    nc = cidx.shape[0]
    for j in range(nc):
        ex, gr, bo = cidx[j, 0], cidx[j, 1], cidx[j, 2]
        props[4 * j + 0] = crate[j, 1] * n[bo] * n[gr]
        props[4 * j + 1] = crate[j, 0] * n[ex]
        props[4 * j + 2] = crate[j, 2] * n[bo] * n[ex]
        props[4 * j + 3] = crate[j, 3] * n[gr] * n[ex]
    base = 4 * nc
    for i in range(ridx.shape[0]):
        k = ridx[i]
        props[base + 2 * i] = rkap[i] * rbol[i] * (n[k] + 1.0)
        props[base + 2 * i + 1] = rkap[i] * n[k]


@njit(cache=True, nogil=True)
def ssa_run(n, t, t_end, uniforms, u_pos, cidx, crate, ridx, rkap, rbol,
            sample_times, s_pos, samples, integral, counts, rcounts, expected,
            conserv, log_t, log_kind, log_idx, log_pos):
    """Direct-method SSA until ``t_end``, the uniforms run out, or extinction.

    State is carried in the mutable arrays; returns
    (status, t, u_pos, s_pos, log_pos, n_events).
    """
    nc = cidx.shape[0]
    nr = ridx.shape[0]
    size = 4 * nc + 2 * nr
    props = np.empty(size)
    check = conserv.shape[0] > 0
    ref = conserv @ n.astype(np.float64) if check else np.zeros(0)
    n_events = 0
    logging = log_t.shape[0] > 0
    while True:
        if u_pos + 2 > uniforms.shape[0]:
            return EXHAUSTED, t, u_pos, s_pos, log_pos, n_events
        _fill_props(n, cidx, crate, ridx, rkap, rbol, props)
        total = 0.0
        for q in range(size):
            total += props[q]
        if total <= 0.0:
            while s_pos < sample_times.shape[0] and sample_times[s_pos] <= t_end:
                samples[s_pos, :] = n
                s_pos += 1
            for i in range(n.shape[0]):
                integral[i] += n[i] * (t_end - t)
            return EXTINCT, t, u_pos, s_pos, log_pos, n_events
        u1 = uniforms[u_pos]
        u2 = uniforms[u_pos + 1]
        u_pos += 2
        tau = -np.log(1.0 - u1) / total
        t_next = t + tau
        # states strictly before t_next are the current one
        while s_pos < sample_times.shape[0] and sample_times[s_pos] < t_next and sample_times[s_pos] <= t_end:
            samples[s_pos, :] = n
            s_pos += 1
        if t_next > t_end:
            for i in range(n.shape[0]):
                integral[i] += n[i] * (t_end - t)
            return OK, t_end, u_pos, s_pos, log_pos, n_events
        for i in range(n.shape[0]):
            integral[i] += n[i] * tau
        t = t_next
        target = u2 * total
        acc = 0.0
        q = size - 1
        for r in range(size):
            acc += props[r]
            if target < acc and props[r] > 0.0:
                q = r
                break
        while props[q] <= 0.0 and q > 0:
            q -= 1
        if q < 4 * nc:
            j = q // 4
            kind = q % 4
            ex, gr, bo = cidx[j, 0], cidx[j, 1], cidx[j, 2]
            if kind == 0:
                n[ex] += 1
                n[gr] -= 1
                n[bo] -= 1
            else:
                n[ex] -= 1
                n[gr] += 1
                n[bo] += 1
                w_sp = crate[j, 0]
                w_ph = crate[j, 2] * (n[bo] - 1)
                w_at = crate[j, 3] * (n[gr] - 1)
                wsum = w_sp + w_ph + w_at
                expected[0] += w_sp / wsum
                expected[1] += w_ph / wsum
                expected[2] += w_at / wsum
            counts[j, kind] += 1
            if n[ex] < 0 or n[gr] < 0 or n[bo] < 0:
                return NEGATIVE, t, u_pos, s_pos, log_pos, n_events
            idx_logged = j
            kind_logged = kind
        else:
            r = q - 4 * nc
            i = r // 2
            k = ridx[i]
            if r % 2 == 0:
                n[k] += 1
                kind_logged = 4
            else:
                n[k] -= 1
                kind_logged = 5
            rcounts[k, r % 2] += 1
            idx_logged = k
        n_events += 1
        if check:
            now = conserv @ n.astype(np.float64)
            for c in range(now.shape[0]):
                if abs(now[c] - ref[c]) > 1e-6 * (1.0 + abs(ref[c])):
                    return CONSERVATION, t, u_pos, s_pos, log_pos, n_events
        if logging:
            if log_pos >= log_t.shape[0]:
                return LOG_FULL, t, u_pos, s_pos, log_pos, n_events
            log_t[log_pos] = t
            log_kind[log_pos] = kind_logged
            log_idx[log_pos] = idx_logged
            log_pos += 1
