"""Hot numeric loops.

The integrators here are plain scalar loops compiled with numba. Setting
DETPOND_NO_NUMBA=1 in the environment runs the same functions uncompiled
(pure Python/numpy slow path, useful for debugging and for checking parity;
scripts/benchmark_numba.py compares the two).

Conventions shared by both kernels:
  - time grid is t0 + i*dt computed by multiplication, never accumulated
  - rain is a right-continuous step function given as (switch_times, rates)
  - volume is clamped to [0, v_cap] after every sub-step; the derivative is
    zeroed exactly at the boundaries when the net flow pushes outward
  - observers accrue from the state at the sub-step start
"""

import os

import numpy as np

_flag = os.environ.get("DETPOND_NO_NUMBA", "")
NO_NUMBA = _flag not in ("", "0")

if not NO_NUMBA:
    try:
        from numba import njit
    except Exception:  # numba missing or broken: fall through to plain python
        NO_NUMBA = True

if NO_NUMBA:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco

USING_NUMBA = not NO_NUMBA


@njit(cache=True)
def integrate_period(V, S, o, c, t0, n_steps, dt, q_out,
                     ev_times, ev_rates, ev_idx,
                     beta, k, reservoir, v_cap,
                     out_V, out_S, out_rain, out_qin, out_o, out_c):
    """Forward-Euler over n_steps steps of size dt starting at t0.

    Steps are split exactly at rain switch times. out_* receive one entry
    per dt step (the state after that step). Returns the end state, the
    rain-segment cursor and the post-clamp volume peak over the span.
    """
    n_ev = ev_times.shape[0]
    peak = V
    for i in range(n_steps):
        tt = t0 + i * dt
        t_next = t0 + (i + 1) * dt
        while True:
            if ev_idx + 1 < n_ev and ev_times[ev_idx + 1] < t_next:
                t_stop = ev_times[ev_idx + 1]
            else:
                t_stop = t_next
            if t_stop > tt:
                h = t_stop - tt
                rain = ev_rates[ev_idx]
                if reservoir:
                    q_in = beta * k * S
                    dS = rain - k * S
                else:
                    q_in = beta * rain
                    dS = 0.0
                if V >= v_cap:
                    o += h
                c += h * (1.0 - V / v_cap)
                if V <= 0.0 and q_out >= q_in:
                    dV = 0.0
                elif V >= v_cap and q_in >= q_out:
                    dV = 0.0
                else:
                    dV = q_in - q_out
                V = V + dV * h
                if V < 0.0:
                    V = 0.0
                elif V > v_cap:
                    V = v_cap
                S = S + dS * h
                if S < 0.0:
                    S = 0.0
                if V > peak:
                    peak = V
                tt = t_stop
            if ev_idx + 1 < n_ev and ev_times[ev_idx + 1] <= tt:
                ev_idx += 1
            elif tt >= t_next:
                break
        out_V[i] = V
        out_S[i] = S
        out_rain[i] = ev_rates[ev_idx]
        if reservoir:
            out_qin[i] = beta * k * S
        else:
            out_qin[i] = beta * ev_rates[ev_idx]
        out_o[i] = o
        out_c[i] = c
    return V, S, o, c, ev_idx, peak


@njit(cache=True)
def scan_increments(q_first, q_rest, q_switch_t, ev_times, ev_rates,
                    span, dt, beta, k, reservoir,
                    anchor_win, out_D, out_E):
    """Unclamped volume-increment scan used by the safety certificates.

    Integrates catchment storage from 0 under the given rain segments
    (times relative to 0) and accumulates the running sum A of pond volume
    increments (inflow minus outflow, outflow q_first before q_switch_t and
    q_rest after). Returns (M1, M2, n_anchor) where

        M1 = max prefix sum of the increments   (>= 0)
        M2 = max windowed sum of the increments (>= 0)

    so that the clamped-at-zero volume trajectory started from V0 peaks at
    max(V0 + M1, M2). Both extremes are taken over the same sub-step
    boundaries the trajectory integrator uses, so the bound is exact for
    the discrete dynamics below the cap.

    A start may also carry reservoir storage whose discharge is not part of
    the rain segments. Its whole mass C belongs in V0 for the M1 side, but
    a window starting at boundary a only receives the undrained remainder
    C * exp(-k a). The scan therefore records, for every boundary a within
    anchor_win minutes (the remainder is negligible beyond that),

        out_D[j] = max over later boundaries b of (A(b) - A(a_j))
        out_E[j] = exp(-k * a_j)

    so the caller can form max windowed sum including the carried mass as
    max(M2, max_j(out_D[j] + C * out_E[j])) for any C >= 0 from one scan.
    Anchors with no later boundary get out_D[j] = -1e300.
    """
    n_ev = ev_times.shape[0]
    A = 0.0
    M1 = 0.0
    low = 0.0
    M2 = 0.0
    S = 0.0
    idx = 0
    cap_anchor = out_D.shape[0]
    n_anchor = 0
    if cap_anchor > 0:
        out_D[0] = 0.0
        out_E[0] = 1.0
        n_anchor = 1
    max_after = -1e300
    n_steps = int(round(span / dt))
    for i in range(n_steps):
        tt = i * dt
        t_next = (i + 1) * dt
        while True:
            if idx + 1 < n_ev and ev_times[idx + 1] < t_next:
                t_stop = ev_times[idx + 1]
            else:
                t_stop = t_next
            if t_stop > tt:
                h = t_stop - tt
                rain = ev_rates[idx]
                if reservoir:
                    q_in = beta * k * S
                    S = S + (rain - k * S) * h
                    if S < 0.0:
                        S = 0.0
                else:
                    q_in = beta * rain
                if tt < q_switch_t:
                    q = q_first
                else:
                    q = q_rest
                A += (q_in - q) * h
                if A > M1:
                    M1 = A
                if A < low:
                    low = A
                if A - low > M2:
                    M2 = A - low
                tt = t_stop
                if tt <= anchor_win and n_anchor < cap_anchor:
                    out_D[n_anchor] = A
                    out_E[n_anchor] = np.exp(-k * tt)
                    n_anchor += 1
                elif A > max_after:
                    max_after = A
            if idx + 1 < n_ev and ev_times[idx + 1] <= tt:
                idx += 1
            elif tt >= t_next:
                break
    # second pass: out_D currently holds A(a_j); turn it into D_j
    best = max_after
    for j in range(n_anchor - 1, -1, -1):
        a_j = out_D[j]
        if best <= -1e299:
            out_D[j] = -1e300
        else:
            out_D[j] = best - a_j
        if a_j > best:
            best = a_j
    return M1, M2, n_anchor
