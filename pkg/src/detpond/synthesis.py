"""Conservative strategy synthesis against worst-case weather.

The synthesizer certifies, per decision period n and per weather phase,
which outflow modes are safe to hold for one period. A mode m is allowed
at a discretized state when the continuation "m for one period, then the
largest outflow forever" stays strictly below the capacity margin under
every corner of the remaining weather uncertainty. Because the plant is
monotone (more outflow never raises the level, more/earlier/stronger rain
never lowers it), that continuation is the best safe cover and the corner
weathers are the binding ones, so the filter is exactly the maximally
permissive overflow-avoiding supervisor on the discretized map.

Weather phases: the controller observes which event is active (or that the
program is exhausted), whether it is raining, and the elapsed time in the
segment. Elapsed time is bucketed; event index and onset/end windows
derived from the program bound what the remaining weather can still do.

Certificates reduce to two numbers per suffix weather: the running-sum
scan in kernels.scan_increments gives the peak of the zero-clamped volume
as max(V0 + M1, M2), so "safe for all starts below T" becomes the single
threshold T = cap - margin - M1 (invalid when M2 already reaches the
margin). Thresholds are stored per (period, phase, mode, axis2 cell) and
compared at run time against the exact anchored volume (pond volume plus
beta times catchment storage), not a grid corner, so the only slack left
in the filter is the weather bucketing itself.

Two cell-level couplings tighten the reservoir certificates. The storage
axis bounds how long the active event has already rained (storage cannot
exceed the steady response of the strongest admissible intensity), which
caps the worst-case remaining duration. And the storage still to drain
into the pond is charged to restart windows with its exponential decay,
closing the soundness hole a plain windowed scan would leave for starts
right after heavy rain.
"""

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigError, InfeasibleError, OutOfGrid, StrategyGap
from .rain import interval_windows, trace_from_segments, worst_case_envelope


@dataclass(frozen=True)
class DecisionGrid:
    """Uniform 2-axis grid over (level, second axis).

    Axis 1 is the display level in cm, axis 2 is catchment storage (mm)
    for the pond or the rain rate for the direct plant. Cells are
    half-open [lo, hi) except the top cell, which closes the range. A
    cell's certifying corner is its upper-right point.
    """
    w_max_cm: float
    n_w: int
    s_max: float
    n_s: int

    def __post_init__(self):
        if self.n_w < 1 or self.n_s < 1 or self.w_max_cm <= 0 or self.s_max <= 0:
            raise ConfigError("grid needs positive extents and cell counts")

    @property
    def dw(self):
        return self.w_max_cm / self.n_w

    @property
    def ds(self):
        return self.s_max / self.n_s

    def w_cell(self, w):
        if not (0.0 <= w <= self.w_max_cm):
            raise OutOfGrid(f"level {w} outside [0, {self.w_max_cm}]")
        return min(int(w / self.dw), self.n_w - 1)

    def s_cell(self, s):
        if not (0.0 <= s <= self.s_max):
            raise OutOfGrid(f"axis-2 value {s} outside [0, {self.s_max}]")
        return min(int(s / self.ds), self.n_s - 1)

    def w_corner(self, i):
        return self.w_max_cm if i == self.n_w - 1 else (i + 1) * self.dw

    def s_corner(self, j):
        return self.s_max if j == self.n_s - 1 else (j + 1) * self.ds


def default_grid(model, n_w=None, n_s=20):
    """2 cm level cells for the pond; 20 cells on the second axis."""
    if n_w is None:
        n_w = max(1, int(round(model.max_level_cm / 2.0)))
    return DecisionGrid(model.max_level_cm, n_w, model.axis2_max, n_s)


@dataclass(frozen=True)
class Phase:
    """One observable weather bucket: event, raining flag, elapsed range."""
    raining: bool
    interval: int
    d_lo: float
    d_hi: float
    exhausted: bool = False


class PhaseTable:
    """Enumerates weather phases and their time-feasibility windows."""

    def __init__(self, program, dry_bucket_min, rain_bucket_min):
        self.program = program
        self.dry_bucket_min = float(dry_bucket_min)
        self.rain_bucket_min = float(rain_bucket_min)
        ws = interval_windows(program)
        self.onset_min, self.onset_max, self.end_min, self.end_max = ws
        phases = []
        self._base = {}
        for i, iv in enumerate(program.intervals):
            n_b = max(1, int(np.ceil(iv.dry_max / self.dry_bucket_min - 1e-12)))
            self._base[(False, i)] = (len(phases), self.dry_bucket_min, n_b)
            for j in range(n_b):
                phases.append(Phase(False, i, j * self.dry_bucket_min,
                                    min((j + 1) * self.dry_bucket_min, iv.dry_max)))
            n_b = max(1, int(np.ceil(iv.rain_max / self.rain_bucket_min - 1e-12)))
            self._base[(True, i)] = (len(phases), self.rain_bucket_min, n_b)
            for j in range(n_b):
                phases.append(Phase(True, i, j * self.rain_bucket_min,
                                    min((j + 1) * self.rain_bucket_min, iv.rain_max)))
        self.exhausted_id = len(phases)
        phases.append(Phase(False, program.n_intervals, 0.0, np.inf, exhausted=True))
        self.phases = tuple(phases)
        # with pure choice-list programs every onset/end time lives on a
        # small finite set, so elapsed-time consistency can be resolved
        # exactly instead of by interval arithmetic
        self._choice_only = all(iv.dry_choices is not None
                                and iv.rain_choices is not None
                                for iv in program.intervals)
        self._onset_sets = []
        self._end_sets = []
        if self._choice_only:
            ends = (0.0,)
            for iv in program.intervals:
                onsets = tuple(sorted({e + ch for e in ends
                                       for ch in iv.dry_choices}))
                ends = tuple(sorted({o + ch for o in onsets
                                     for ch in iv.rain_choices}))
                self._onset_sets.append(onsets)
                self._end_sets.append(ends)

    @property
    def n_phases(self):
        return len(self.phases)

    def bucket_of(self, raining, interval, d_env):
        """Phase id for a runtime observation."""
        if interval >= self.program.n_intervals:
            return self.exhausted_id
        start, width, count = self._base[(bool(raining), int(interval))]
        j = int(d_env / width)
        if j >= count:
            j = count - 1  # exact upper edge of the last bucket
        if j < 0:
            raise StrategyGap(f"negative elapsed time {d_env}")
        return start + j

    def elapsed_values(self, phase_id, t):
        """Exact consistent elapsed times at t, or None for range programs.

        Only pure choice-list programs admit this: segment start times
        form a finite set, and an elapsed time d is consistent with still
        observing the phase exactly when some duration choice strictly
        exceeds d. Values are filtered to the phase's own bucket with the
        same mapping runtime observations use.
        """
        if not self._choice_only:
            return None
        ph = self.phases[phase_id]
        if ph.exhausted:
            return (0.0,)
        i = ph.interval
        iv = self.program.intervals[i]
        if ph.raining:
            starts = self._onset_sets[i]
            choices = iv.rain_choices
        else:
            starts = self._end_sets[i - 1] if i > 0 else (0.0,)
            choices = iv.dry_choices
        vals = set()
        for s0 in starts:
            d = t - s0
            if d < -1e-9:
                continue
            d = max(0.0, d)
            if not any(ch - d > 1e-9 for ch in choices):
                continue
            if self.bucket_of(ph.raining, i, d) == phase_id:
                vals.add(d)
        return tuple(sorted(vals))

    def feasible_window(self, phase_id, t):
        """Elapsed-time range consistent with being in this phase at t.

        Returns (d_lo, d_hi) intersected with the phase bucket, or None
        when no weather realization can be in this phase at time t. For
        choice-list programs the range spans the exact value set.
        """
        ph = self.phases[phase_id]
        if ph.exhausted:
            return (0.0, np.inf) if t >= self.end_min[-1] else None
        if self._choice_only:
            vals = self.elapsed_values(phase_id, t)
            return (vals[0], vals[-1]) if vals else None
        i = ph.interval
        if ph.raining:
            lo = max(0.0, t - self.onset_max[i])
            hi = min(t - self.onset_min[i], self.program.intervals[i].rain_max)
        else:
            prev_max = self.end_max[i - 1] if i > 0 else 0.0
            prev_min = self.end_min[i - 1] if i > 0 else 0.0
            lo = max(0.0, t - prev_max)
            hi = min(t - prev_min, self.program.intervals[i].dry_max)
        lo = max(lo, ph.d_lo)
        hi = min(hi, ph.d_hi)
        if hi < lo - 1e-12:
            return None
        return (lo, max(lo, hi))


def _duration_options(choices, lo, hi):
    """Duration branch values: the whole choice list, or the range corners."""
    if choices is not None:
        return sorted(set(choices))
    if lo == hi:
        return [lo]
    return [lo, hi]


def corner_traces(program, phase, d_lo, d_hi, current_rate=None,
                  elapsed_lb=None, d_values=None):
    """Binding suffix weathers consistent with a phase observation.

    Every branch starts the pending rain as early as possible, runs events
    at their strongest intensity and enumerates duration corners (or the
    full choice lists when the program is discrete). current_rate pins the
    intensity of an already-running event when the controller observes it
    (direct plant); otherwise the event's intensity bound is used.
    elapsed_lb, when given for a raining phase, is exogenous evidence that
    at least that much of the event has already passed and trims the
    remaining-duration corners accordingly. d_values, when given, is the
    exact set of consistent elapsed times; pairing it with the duration
    choices replaces the window-corner approximation.

    Returns a list of (times, rates) arrays, times starting at 0.
    """
    n_int = program.n_intervals
    if phase.interval >= n_int:
        return [(np.array([0.0]), np.array([0.0]))]

    per_branch_heads = []
    iv = program.intervals[phase.interval]
    if phase.raining:
        rate = current_rate if current_rate is not None else iv.intensity_bound(program.epsilon)
        d_min = d_lo if elapsed_lb is None else max(d_lo, min(elapsed_lb, d_hi))
        rem = set()
        if iv.rain_choices is not None:
            # only durations that have not already elapsed are consistent
            ds = d_values if d_values else (d_min, d_hi)
            for ch in iv.rain_choices:
                for d in ds:
                    if ch - d > 1e-9:
                        rem.add(ch - d)
            if not rem:
                rem.add(0.0)  # elapsed sits on the last possible end
        else:
            rem.add(max(0.0, iv.rain_min - d_hi))
            rem.add(max(0.0, iv.rain_max - d_min))
        for r in sorted(rem):
            per_branch_heads.append([(r, rate, True, phase.interval)])
        next_i = phase.interval + 1
    else:
        if iv.dry_choices is not None:
            # the pending event cannot start sooner than the smallest gap
            # choice still strictly ahead of a consistent elapsed time
            ds = d_values if d_values else (d_hi,)
            delays = sorted(ch - d for ch in iv.dry_choices for d in ds
                            if ch - d > 1e-9)
            onset = delays[0] if delays else 0.0
        else:
            onset = max(0.0, iv.dry_min - d_hi)
        rate = iv.intensity_bound(program.epsilon)
        for dur in _duration_options(iv.rain_choices, iv.rain_min, iv.rain_max):
            per_branch_heads.append([(onset, 0.0, False, phase.interval),
                                     (dur, rate, True, phase.interval)])
        next_i = phase.interval + 1

    tail_options = []
    for j in range(next_i, n_int):
        ivj = program.intervals[j]
        opts = []
        for dur in _duration_options(ivj.rain_choices, ivj.rain_min, ivj.rain_max):
            opts.append([(ivj.dry_min, 0.0, False, j),
                         (dur, ivj.intensity_bound(program.epsilon), True, j)])
        tail_options.append(opts)

    traces = []
    for head in per_branch_heads:
        for combo in itertools.product(*tail_options):
            segs = list(head)
            for part in combo:
                segs.extend(part)
            tr = trace_from_segments(segs, n_int)
            traces.append((tr.times, tr.rates))
    if len(traces) > 4096:
        raise ConfigError("weather branch explosion; coarsen the program")
    return traces


class PermissiveStrategy:
    """Maximally permissive safe mode filter over the decision grid.

    thresholds[n, phase, mode, s_cell] is the strict upper bound on the
    anchored volume (pond volume, plus beta * storage for the reservoir
    plant) below which the mode is allowed; the certificate quantified
    over every state of the storage cell, so comparing the exact anchored
    volume is sound. feasible[n, phase] marks phase/time combinations any
    weather can realize; looking up an infeasible one raises StrategyGap.
    """

    kind = "permissive"

    def __init__(self, model, grid, phase_table, feasible, thresholds,
                 margin_m3):
        self.model = model
        self.grid = grid
        self.phase_table = phase_table
        self.feasible = feasible
        self.thresholds = thresholds
        self.margin_m3 = margin_m3

    def cells_of(self, cfg):
        if self.model.reservoir:
            axis2 = cfg.x.s_mm
        else:
            axis2 = cfg.x.rain_mm_per_min
        return self.grid.w_cell(cfg.x.w_cm), self.grid.s_cell(axis2)

    def bucket_of(self, cfg):
        return self.phase_table.bucket_of(cfg.env.raining, cfg.env.interval,
                                          cfg.x.d_env_min)

    def anchor_volume(self, w_cm, axis2):
        v = self.model.level_to_volume(w_cm)
        if self.model.reservoir:
            v = v + self.model.beta_m3_per_mm * axis2
        return v

    def allowed_at(self, n, phase_id, v_anchor_m3, s_cell):
        """Mode ids allowed for an anchored volume (ascending)."""
        if not self.feasible[n, phase_id]:
            raise StrategyGap(
                f"no weather can be in phase {phase_id} at period {n}")
        th = self.thresholds[n, phase_id, :, s_cell]
        return [m for m in range(th.shape[0]) if v_anchor_m3 < th[m]]

    def allowed_modes(self, cfg, n):
        _, sc = self.cells_of(cfg)
        if self.model.reservoir:
            axis2 = cfg.x.s_mm
        else:
            axis2 = cfg.x.rain_mm_per_min
        v = self.anchor_volume(cfg.x.w_cm, axis2)
        return self.allowed_at(n, self.bucket_of(cfg), v, sc)

    def safe_modes(self, cfg, n):
        """Allowed modes, completed where the bucketized table runs dry.

        Every approved decision certifies the continuation "one period of
        the approved mode, then the largest outflow forever" against every
        weather still consistent with the observation, so a state reached
        under compliance always has the largest outflow as a safe cover
        even when elapsed-time bucketing rounds its own cell below the
        stored threshold. The completion keeps the filter total along
        compliant runs without weakening the certificates.
        """
        allowed = self.allowed_modes(cfg, n)
        if allowed:
            return allowed
        return [len(self.model.modes_m3_per_min) - 1]

    def decide(self, cfg, n):
        """Default tie-break when run standalone: the largest safe outflow."""
        return self.safe_modes(cfg, n)[-1]


def _elapsed_floor(s_lowers, i_max, k, d_lo, d_hi, dt):
    """Per-cell lower bound on elapsed rain time from the storage floor.

    While an event of intensity at most i_max is running, storage obeys
    S(d) <= resid + (i_max / k)(1 - exp(-k d)), so a storage at least the
    cell floor proves d is at least the inversion below. Quantized down to
    the integration step so equal bounds share one worst-case weather set.
    """
    resid = 1e-6  # storage surviving the shortest dry gap, plus float dust
    arg = 1.0 - k * np.maximum(0.0, s_lowers - resid) / i_max
    with np.errstate(divide="ignore"):
        d_s = np.where(arg <= 1e-9, np.inf,
                       -np.log(np.maximum(arg, 1e-12)) / k)
    d_s = np.floor(d_s / dt) * dt
    return np.clip(d_s, d_lo, d_hi)


def synthesize_safe(model, grid=None, margin_m3=None, dry_bucket_min=None,
                    rain_bucket_min=None):
    """Build the permissive safe filter for a model.

    margin_m3 shrinks the usable capacity to absorb numerical dust in the
    certificate comparisons; the pond default is 5 m^3, the direct test
    plant uses 0 so its filter matches exhaustive game analysis exactly.
    """
    if grid is None:
        grid = default_grid(model)
    if margin_m3 is None:
        margin_m3 = 5.0 if model.reservoir else 0.0
    if dry_bucket_min is None:
        dry_bucket_min = model.period_min
    if rain_bucket_min is None:
        rain_bucket_min = 0.5 if model.reservoir else model.period_min
    pt = PhaseTable(model.program, dry_bucket_min, rain_bucket_min)
    N = model.n_periods
    cap = model.v_cap_m3 - margin_m3
    n_modes = len(model.modes_m3_per_min)
    q_high = model.modes_m3_per_min[-1]
    feas = np.zeros((N, pt.n_phases), dtype=bool)
    th = np.full((N, pt.n_phases, n_modes, grid.n_s), -np.inf)

    dt = model.dt_min
    k = model.k_per_min
    # beyond this many minutes the undrained part of carried storage is
    # under a hundredth of a cubic metre for any admissible storage level
    anchor_win = 48.0
    n_anchor_cap = int(anchor_win / dt) + 16
    buf_d = np.empty(n_anchor_cap)
    buf_e = np.empty(n_anchor_cap)
    s_lowers = np.arange(grid.n_s) * grid.ds
    s_corners = np.array([grid.s_corner(j) for j in range(grid.n_s)])
    all_cells = np.arange(grid.n_s)

    for n in range(N):
        t = n * model.period_min
        span = model.horizon_min - t
        for pid in range(pt.n_phases):
            win = pt.feasible_window(pid, t)
            if win is None:
                continue
            feas[n, pid] = True
            ph = pt.phases[pid]
            dvals = pt.elapsed_values(pid, t)
            # storage cells sharing one worst-case weather set are grouped;
            # the direct plant pins the observed rate per cell instead
            if not model.reservoir and ph.raining:
                groups = [(np.array([j]), s_corners[j], None)
                          for j in range(grid.n_s)]
            elif model.reservoir and ph.raining:
                i_max = model.program.intervals[ph.interval].intensity_bound(
                    model.program.epsilon)
                bounds = _elapsed_floor(s_lowers, i_max, k, win[0], win[1], dt)
                groups = [(all_cells[bounds == e], None, float(e))
                          for e in np.unique(bounds)]
            else:
                groups = [(all_cells, None, None)]
            for cells, pin, elapsed_lb in groups:
                traces = corner_traces(model.program, ph, win[0], win[1],
                                       current_rate=pin, elapsed_lb=elapsed_lb,
                                       d_values=dvals)
                for m in range(n_modes):
                    t_m = np.inf
                    for times, rates in traces:
                        # nothing can raise the level once the last event
                        # has drained through; scanning further is idle
                        span_eff = min(span, float(times[-1]) + 80.0)
                        span_eff = np.ceil(span_eff / dt - 1e-9) * dt
                        m1, m2, n_a = kernels.scan_increments(
                            model.modes_m3_per_min[m], q_high,
                            model.period_min, times, rates, span_eff,
                            dt, model.beta_m3_per_mm, k, model.reservoir,
                            anchor_win, buf_d, buf_e)
                        if n_a >= n_anchor_cap:
                            raise ConfigError("restart-anchor buffer too small")
                        if m2 >= cap:
                            t_m = -np.inf
                            break
                        t_m = min(t_m, cap - m1)
                        if model.reservoir:
                            # carried storage beta*S0 <= anchored volume can
                            # top up a restart window with its decayed mass;
                            # cap the anchored volume so every window stays
                            # under the margin
                            t_m = min(t_m, float(
                                ((cap - buf_d[:n_a]) / buf_e[:n_a]).min()))
                    th[n, pid, m, cells] = t_m
    return PermissiveStrategy(model, grid, pt, feas, th, margin_m3)


@dataclass
class FeasibilityReport:
    feasible: bool
    allowed_at_start: list
    max_safe_level_cm: Optional[float]


def check_feasible(shield, w0_cm, s0_mm=0.0):
    """Can the synthesized filter keep this start safe at all?

    Also reports the largest level (at the same storage) from which some
    mode is still allowed at the first decision, as an exclusive bound.
    """
    pt = shield.phase_table
    n0 = pt.bucket_of(False, 0, 0.0)
    sc = shield.grid.s_cell(s0_mm)
    v0 = shield.anchor_volume(w0_cm, s0_mm)
    allowed = shield.allowed_at(0, n0, v0, sc)
    v_max = float(shield.thresholds[0, n0, :, sc].max())
    if shield.model.reservoir:
        v_max -= shield.model.beta_m3_per_mm * s0_mm
    if not np.isfinite(v_max) or v_max <= 0.0:
        max_safe = shield.model.max_level_cm if v_max > 0 else None
    else:
        max_safe = shield.model.volume_to_level(min(v_max, shield.model.v_cap_m3))
    return FeasibilityReport(bool(allowed), allowed, max_safe)


def period_upper_bound(model, v0_m3, s0_mm, t_min, mode):
    """Coarse one-period bound from the pointwise rain envelope.

    Integrates one period from (v0, s0) at time t_min under the given mode
    with the rain rate pinned to its pointwise worst-case envelope.
    Returns (peak_m3, v_end_m3, s_end_mm). Conservative but much weaker
    than the phase-aware certificates; kept as a quick sanity check.
    """
    times, rates = worst_case_envelope(model.program, model.horizon_min)
    spp = model.steps_per_period
    buf = [np.zeros(spp) for _ in range(6)]
    idx = max(0, int(np.searchsorted(times, t_min, side="right")) - 1)
    v, s, _, _, _, peak = kernels.integrate_period(
        v0_m3, s0_mm, 0.0, 0.0, t_min, spp, model.dt_min,
        model.modes_m3_per_min[mode], times, rates, idx,
        model.beta_m3_per_mm, model.k_per_min, model.reservoir,
        model.v_cap_m3, *buf)
    return peak, v, s


def assert_feasible(shield, w0_cm, s0_mm=0.0):
    rep = check_feasible(shield, w0_cm, s0_mm)
    if not rep.feasible:
        raise InfeasibleError(
            f"no safe mode from level {w0_cm} cm (largest certifiable start:"
            f" {rep.max_safe_level_cm} cm)")
    return rep
