"""Hybrid process core: configurations, integration, full-horizon runs.

The controller acts only at period boundaries t = 0, P, 2P, ...; between
decisions the continuous state evolves under a fixed outflow mode while
the weather switches on its own schedule. Integration is forward Euler
with step dt, split exactly at weather switch times, with the volume
clamped to [0, capacity] after every sub-step.

Observers, accrued from the state at each sub-step start:
  o (minutes at the rim)   do/dt = 1 when the pond sits exactly at its cap
  c (emptiness cost)       dc/dt = 1 - w/W
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import env as env_mod
from . import kernels
from .errors import ConfigError, ModelError
from .rain import sample_trace


@dataclass(frozen=True)
class EnvMode:
    """Weather mode: which event we are in and whether it is raining.

    interval == n_intervals (one past the last event) means the program is
    exhausted and the weather stays dry forever.
    """
    raining: bool
    interval: int


@dataclass
class ContinuousState:
    w_cm: float
    s_mm: float
    rain_mm_per_min: float
    o_min: float
    c: float
    d_env_min: float
    d_ctrl_min: float
    t_min: float


@dataclass
class Configuration:
    """One decision-point snapshot: active mode, weather mode, dense state."""
    control: int
    env: EnvMode
    x: ContinuousState


def flow_derivatives(cfg, model, params=None):
    """Reference derivative set at a configuration (per minute).

    Returns (dV, dS, do, dc) in internal units (volume m^3). The kernel
    implements exactly these laws; this form exists for documentation and
    for the single-step reference integrator below.
    """
    w = cfg.x.w_cm
    W = model.max_level_cm
    q_out = model.modes_m3_per_min[cfg.control]
    if model.reservoir:
        q_in = model.beta_m3_per_mm * model.k_per_min * cfg.x.s_mm
        dS = cfg.x.rain_mm_per_min - model.k_per_min * cfg.x.s_mm
    else:
        q_in = model.beta_m3_per_mm * cfg.x.rain_mm_per_min
        dS = 0.0
    if w <= 0.0 and q_out >= q_in:
        dV = 0.0
    elif w >= W and q_in >= q_out:
        dV = 0.0
    else:
        dV = q_in - q_out
    do = 1.0 if w >= W else 0.0
    dc = 1.0 - w / W
    return dV, dS, do, dc


def integrate_step(cfg, model, dt):
    """One forward-Euler step of size dt; returns a new Configuration.

    Reference implementation of a single step with no weather switch
    inside it. The production path runs the same arithmetic inside
    kernels.integrate_period.
    """
    dV, dS, do, dc = flow_derivatives(cfg, model)
    if not (np.isfinite(dV) and np.isfinite(dS)):
        raise ModelError("non-finite derivative")
    v = model.level_to_volume(cfg.x.w_cm) + dV * dt
    v = min(max(v, 0.0), model.v_cap_m3)
    s = max(cfg.x.s_mm + dS * dt, 0.0)
    x = ContinuousState(
        w_cm=model.volume_to_level(v),
        s_mm=s,
        rain_mm_per_min=cfg.x.rain_mm_per_min,
        o_min=cfg.x.o_min + do * dt,
        c=cfg.x.c + dc * dt,
        d_env_min=cfg.x.d_env_min + dt,
        d_ctrl_min=cfg.x.d_ctrl_min + dt,
        t_min=cfg.x.t_min + dt,
    )
    return Configuration(cfg.control, cfg.env, x)


@dataclass
class Trajectory:
    """Dense run record, one row per dt step (plus the initial row)."""
    t_min: np.ndarray
    w_cm: np.ndarray
    s_mm: np.ndarray
    rain_mm_per_min: np.ndarray
    q_in_m3_per_min: np.ndarray
    q_out_m3_per_min: np.ndarray
    mode: np.ndarray
    o_min: np.ndarray
    c: np.ndarray
    decisions: list = field(default_factory=list)
    peak_v_m3: float = 0.0
    seed: object = None

    @property
    def final_overflow_min(self):
        return float(self.o_min[-1])

    @property
    def final_cost(self):
        return float(self.c[-1])

    COLUMNS = ("t_min", "w_cm", "S_mm", "rain_mm_per_min", "Q_in_m3_per_min",
               "Q_out_m3_per_min", "mode", "o_min", "c")

    def to_csv(self, path):
        cols = (self.t_min, self.w_cm, self.s_mm, self.rain_mm_per_min,
                self.q_in_m3_per_min, self.q_out_m3_per_min, self.mode,
                self.o_min, self.c)
        with open(path, "w") as f:
            f.write(",".join(self.COLUMNS) + "\n")
            n = len(self.t_min)
            for i in range(n):
                f.write("%r,%r,%r,%r,%r,%r,%d,%r,%r\n" % (
                    float(cols[0][i]), float(cols[1][i]), float(cols[2][i]),
                    float(cols[3][i]), float(cols[4][i]), float(cols[5][i]),
                    int(cols[6][i]), float(cols[7][i]), float(cols[8][i])))


def run_trace(model, decide, trace, w0_cm, s0_mm=0.0, record=True):
    """Drive one run against a fixed weather trace.

    decide(cfg, n) -> mode id is called at every period boundary with the
    current configuration. Returns a Trajectory (dense arrays only when
    record is True; finals and decisions are always filled).
    """
    W = model.max_level_cm
    if not (0.0 <= w0_cm <= W):
        raise ConfigError(f"initial level {w0_cm} outside [0, {W}]")
    if s0_mm < 0.0:
        raise ConfigError("initial catchment storage must be nonnegative")
    n_per = model.n_periods
    spp = model.steps_per_period
    n_rows = n_per * spp + 1 if record else 1
    t_arr = np.zeros(n_rows)
    w_arr = np.zeros(n_rows)
    s_arr = np.zeros(n_rows)
    rain_arr = np.zeros(n_rows)
    qin_arr = np.zeros(n_rows)
    qout_arr = np.zeros(n_rows)
    mode_arr = np.zeros(n_rows, dtype=np.int64)
    o_arr = np.zeros(n_rows)
    c_arr = np.zeros(n_rows)

    V = model.level_to_volume(w0_cm)
    S = s0_mm
    o = 0.0
    c = 0.0
    ev_idx = 0
    peak = V
    decisions = []
    control = 0
    # scratch buffers for the non-recording path
    if not record:
        buf = [np.zeros(spp) for _ in range(6)]

    for n in range(n_per):
        t = n * model.period_min
        raining, interval, d_env, rate = trace.phase_at(t)
        x = ContinuousState(
            w_cm=model.volume_to_level(V), s_mm=S, rain_mm_per_min=rate,
            o_min=o, c=c, d_env_min=d_env, d_ctrl_min=0.0, t_min=t)
        cfg = Configuration(control, EnvMode(raining, interval), x)
        control = int(decide(cfg, n))
        if not (0 <= control < len(model.modes_m3_per_min)):
            raise ConfigError(f"strategy returned unknown mode {control}")
        q_out = model.modes_m3_per_min[control]
        if record:
            lo = 1 + n * spp
            hi = lo + spp
            views = (w_arr[lo:hi], s_arr[lo:hi], rain_arr[lo:hi],
                     qin_arr[lo:hi], o_arr[lo:hi], c_arr[lo:hi])
        else:
            views = tuple(buf)
        V, S, o, c, ev_idx, pk = kernels.integrate_period(
            V, S, o, c, t, spp, model.dt_min, q_out,
            trace.times, trace.rates, ev_idx,
            model.beta_m3_per_mm, model.k_per_min, model.reservoir,
            model.v_cap_m3, *views)
        if pk > peak:
            peak = pk
        decisions.append((n, t, control))
        if record:
            t_arr[lo:hi] = t + model.dt_min * np.arange(1, spp + 1)
            qout_arr[lo:hi] = q_out
            mode_arr[lo:hi] = control
            # kernel wrote volumes; convert rows to display level
            w_arr[lo:hi] = w_arr[lo:hi] * (100.0 / model.area_m2)

    if not (np.isfinite(V) and np.isfinite(S) and np.isfinite(o) and np.isfinite(c)):
        raise ModelError("run produced a non-finite state")

    # initial row
    w_arr[0] = w0_cm
    s_arr[0] = s0_mm
    rain_arr[0] = trace.rate_at(0.0)
    if model.reservoir:
        qin_arr[0] = model.beta_m3_per_mm * model.k_per_min * s0_mm
    else:
        qin_arr[0] = model.beta_m3_per_mm * rain_arr[0]
    mode_arr[0] = decisions[0][2]
    qout_arr[0] = model.modes_m3_per_min[decisions[0][2]]

    if not record:
        # keep only the initial row plus finals
        w_last = model.volume_to_level(V)
        traj = Trajectory(t_arr[:1], w_arr[:1], s_arr[:1], rain_arr[:1],
                          qin_arr[:1], qout_arr[:1], mode_arr[:1],
                          np.array([o]), np.array([c]),
                          decisions=decisions, peak_v_m3=peak)
        traj.final_w_cm = w_last
        return traj
    traj = Trajectory(t_arr, w_arr, s_arr, rain_arr, qin_arr, qout_arr,
                      mode_arr, o_arr, c_arr, decisions=decisions,
                      peak_v_m3=peak)
    traj.final_w_cm = float(w_arr[-1])
    return traj


def simulate(model, strategy, w0_cm, s0_mm=0.0, seed=0, record=True):
    """Sample a weather trace and drive one full run under a strategy."""
    trace = sample_trace(model.program, seed)
    traj = run_trace(model, strategy.decide, trace, w0_cm, s0_mm, record=record)
    traj.seed = seed
    return traj
