"""Exhaustive min-max game analysis of the tiny tank fixture.

Independent of the synthesizer: the adversary's options at an observation
are recovered by brute force, by walking every realization of the choice
program and grouping the realizations by what the controller can see at
each decision instant. No elapsed-time windows, duration corners or
dominance prunings appear here; peaks come from a naive vectorized Euler
walk rather than the package's scan kernel.

The game is the discretized one the decision grid and phase table define:
the controller observes the weather phase bucket, its level cell and (in
rain) the rate cell; the within-cell positions resolve adversarially to
the cell's upper corner, so the running event's remaining span plays out
at the corner rate. A mode is allowed when holding it for one period and
then draining at the largest outflow keeps the volume strictly below
capacity against every consistent realization; in this monotone plant
that continuation is the safest, so the allowed sets are the min-max
game's own.
"""

import numpy as np

from tank_fixture import all_traces, rate_grid, suffix_peaks


def exhaustive_allowed(model, grid, phase_table):
    """allowed[n, pid, m, wc, sc], feasible[n, pid], realizable[n, pid, sc].

    Cells outside the realizable observation set (rain cells no consistent
    realization's rate falls in) carry no verdict; dry and exhausted
    phases ignore the rate axis, so their verdicts span every rate cell.
    """
    program = model.program
    traces = all_traces(program)
    dt = model.dt_min
    rows = np.stack([rate_grid(tr, model.horizon_min, dt) for tr in traces])
    N = model.n_periods
    n_modes = len(model.modes_m3_per_min)
    cap = model.v_cap_m3
    P = phase_table.n_phases
    feasible = np.zeros((N, P), dtype=bool)
    realizable = np.zeros((N, P, grid.n_s), dtype=bool)
    allowed = np.zeros((N, P, n_modes, grid.n_w, grid.n_s), dtype=bool)

    for n in range(N):
        t = n * model.period_min
        s0 = int(round(t / dt))
        span = model.horizon_min - t
        groups = {}
        for ti, tr in enumerate(traces):
            raining, interval, elapsed, rate = tr.phase_at(t)
            pid = phase_table.bucket_of(raining, interval, elapsed)
            if raining:
                seg = np.searchsorted(tr.times, t, side="right") - 1
                rem = float(tr.times[seg + 1]) - t
                groups.setdefault((pid, grid.s_cell(rate)), []).append((ti, rem))
            else:
                groups.setdefault((pid, None), []).append((ti, 0.0))
        for (pid, sc), members in groups.items():
            feasible[n, pid] = True
            idx = [ti for ti, _ in members]
            sub = rows[idx, s0:].copy()
            if sc is None:
                scs = np.arange(grid.n_s)
            else:
                scs = np.array([sc])
                pin = grid.s_corner(sc)
                for r, (_, rem) in enumerate(members):
                    sub[r, :int(round(rem / dt))] = pin
            realizable[n, pid, scs] = True
            for m in range(n_modes):
                for wc in range(grid.n_w):
                    pk = suffix_peaks(model, sub, grid.w_corner(wc), m, span)
                    ok = bool(np.all(pk < cap))
                    allowed[n, pid, m, wc, scs] = ok
    return allowed, feasible, realizable
