"""Brute-force optimal shielded policy for the tiny tank fixture.

Enumerates every policy table over the decision points reachable under
shield-compliant play and scores each one exactly over the full trace
support, reproducing the runtime override semantics: a table entry the
filter disallows at the actual volume is replaced by the largest allowed
mode. The minimum expected final cost is the yardstick the learner has
to approach.
"""

import numpy as np

from tank_fixture import all_traces, rate_grid


def _phase_ids(model, phase_table, traces):
    """pid[n, trace] at each decision instant."""
    N = model.n_periods
    pids = np.empty((N, len(traces)), dtype=np.int64)
    for n in range(N):
        t = n * model.period_min
        for ti, tr in enumerate(traces):
            raining, interval, elapsed, _ = tr.phase_at(t)
            pids[n, ti] = phase_table.bucket_of(raining, interval, elapsed)
    return pids


def reachable_points(model, strat, grid, w0):
    """Decision points any compliant policy can reach from w0.

    Returns (points, choice_points): all reachable (n, wc, sc) triples,
    and the subset where some reachable state offers more than one
    allowed mode. The walk is exact: the plant's arithmetic stays on a
    dyadic lattice, so visited volumes deduplicate by value.
    """
    program = model.program
    traces = all_traces(program)
    dt = model.dt_min
    rows = np.stack([rate_grid(tr, model.horizon_min, dt) for tr in traces])
    steps = int(round(model.period_min / dt))
    modes = model.modes_m3_per_min
    cap = model.v_cap_m3
    points = set()
    choice_points = set()
    frontier = {(0, ti, float(w0)) for ti in range(len(traces))}
    pids = _phase_ids(model, strat.phase_table, traces)
    while frontier:
        nxt = set()
        for n, ti, v in frontier:
            if n >= model.n_periods:
                continue
            rate = rows[ti, n * steps]
            wc = grid.w_cell(v)
            sc = grid.s_cell(rate)
            allowed = strat.allowed_at(n, int(pids[n, ti]), v, sc)
            points.add((n, wc, sc))
            if len(allowed) > 1:
                choice_points.add((n, wc, sc))
            if not allowed:
                allowed = [len(modes) - 1]
            for m in allowed:
                v2 = v
                for s in range(steps):
                    inflow = model.beta_m3_per_mm * rows[ti, n * steps + s]
                    dv = inflow - modes[m]
                    if v2 <= 0.0 and dv < 0.0:
                        dv = 0.0
                    if v2 >= cap and dv > 0.0:
                        dv = 0.0
                    v2 = min(max(v2 + dv * dt, 0.0), cap)
                nxt.add((n + 1, ti, v2))
        frontier = nxt
    return points, choice_points


def _batch_costs(model, strat, grid, w0, entry_fn):
    """Expected final cost rows under the runtime override semantics.

    entry_fn(n, wc, sc) -> table entries, vectorized over same-shape index
    arrays; its leading broadcast axis enumerates policies. A chosen entry
    the filter disallows at the actual volume falls back to the largest
    allowed mode, or the largest mode outright when nothing is allowed,
    exactly as the shielded controller behaves.
    """
    program = model.program
    traces = all_traces(program)
    T = len(traces)
    dt = model.dt_min
    rows = np.stack([rate_grid(tr, model.horizon_min, dt) for tr in traces])
    steps = int(round(model.period_min / dt))
    modes = np.asarray(model.modes_m3_per_min)
    cap = model.v_cap_m3
    pids = _phase_ids(model, strat.phase_table, traces)
    scs = np.empty((model.n_periods, T), dtype=np.int64)
    for n in range(model.n_periods):
        for ti in range(T):
            scs[n, ti] = grid.s_cell(rows[ti, n * steps])

    v = None
    c = None
    for n in range(model.n_periods):
        if v is None:
            probe = entry_fn(0, np.zeros(T, dtype=np.int64), scs[0])
            v = np.full(probe.shape[:-1] + (T,), float(w0))
            c = np.zeros(v.shape)
        wc = np.minimum((v / grid.dw).astype(np.int64), grid.n_w - 1)
        ent = entry_fn(n, wc, scs[n])
        th0 = strat.thresholds[n, pids[n], 0, scs[n]]
        th1 = strat.thresholds[n, pids[n], 1, scs[n]]
        al0 = v < th0
        al1 = v < th1
        m = np.where((ent == 0) & al0, 0, np.where(al1, 1, np.where(al0, 0, 1)))
        q = modes[m]
        for s in range(steps):
            inflow = model.beta_m3_per_mm * rows[:, n * steps + s]
            dv = inflow - q
            dv = np.where((v <= 0.0) & (dv < 0.0), 0.0, dv)
            dv = np.where((v >= cap) & (dv > 0.0), 0.0, dv)
            c += (1.0 - v / cap) * dt
            v = np.clip(v + dv * dt, 0.0, cap)
    return c.mean(axis=-1)


def brute_force_optimum(model, strat, grid, w0):
    """Exact optimum over every policy table on the reachable choice points.

    Enumerates all 2^B assignments at the B reachable points offering a
    real choice (entries elsewhere are immaterial: the override pins
    them), scoring each exactly over the uniform trace support. Returns
    (best expected cost, best full table, points, costs).
    """
    _, choice = reachable_points(model, strat, grid, w0)
    pts = sorted(choice)
    B = len(pts)
    if B > 24:
        raise RuntimeError(f"{B} choice points; enumeration would not fit")
    A = 1 << B
    bits = ((np.arange(A, dtype=np.uint32)[:, None]
             >> np.arange(B, dtype=np.uint32)) & 1).astype(np.int8)
    index = np.full((model.n_periods, grid.n_w, grid.n_s), -1, dtype=np.int64)
    for i, (n, wc, sc) in enumerate(pts):
        index[n, wc, sc] = i

    def entry_fn(n, wc, sc):
        pi = index[n, wc, sc]
        if pi.ndim == 1:
            pi = np.broadcast_to(pi, (A,) + pi.shape)
        picked = np.take_along_axis(bits, np.clip(pi, 0, None), axis=1)
        return np.where(pi >= 0, picked, np.int8(1))

    costs = _batch_costs(model, strat, grid, w0, entry_fn)
    a_best = int(np.argmin(costs))
    table = np.ones((model.n_periods, grid.n_w, grid.n_s), dtype=np.int8)
    for i, (n, wc, sc) in enumerate(pts):
        table[n, wc, sc] = bits[a_best, i]
    return float(costs[a_best]), table, pts, costs


def exact_table_cost(model, strat, grid, w0, table):
    """Exact expected final cost of one policy table under the override."""
    tab = np.where(np.asarray(table) < 0, 1, np.asarray(table)).astype(np.int8)

    def entry_fn(n, wc, sc):
        ent = tab[n][wc, sc]
        return ent if ent.ndim == 2 else ent[None, :]

    return float(_batch_costs(model, strat, grid, w0, entry_fn)[0])
