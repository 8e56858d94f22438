"""Control strategies and their on-disk format.

A strategy is anything with decide(cfg, n) -> mode id. The runtime
composition rule for learned controllers: the safe filter proposes the
allowed set (completed with the certified largest-outflow cover where the
bucketized table has no entry), the learned table proposes a mode, and
the largest allowed outflow covers table misses (unvisited cells or
unsafe proposals), so every decision stays certified.

Strategy files are line-oriented text: a header of `key value` lines, then
typed records. Thresholds and policies reference the grid and phase ids
defined by the header, so a file is loaded against the model it was built
for (the loader cross-checks the invariants it can).
"""

import numpy as np

from dataclasses import dataclass

from . import units
from .errors import ConfigError
from .synthesis import DecisionGrid, PermissiveStrategy, PhaseTable

FORMAT_TAG = "detpond-strategy"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ValveTable:
    """Selectable valve outflows (m^3/min, ascending) and switch period."""
    flows_m3_per_min: tuple
    period_min: float

    def __post_init__(self):
        object.__setattr__(self, "flows_m3_per_min",
                           tuple(float(q) for q in self.flows_m3_per_min))
        if not self.flows_m3_per_min:
            raise ConfigError("valve table needs at least one flow")
        if any(q <= 0.0 for q in self.flows_m3_per_min):
            raise ConfigError("valve flows must be positive")
        if list(self.flows_m3_per_min) != sorted(self.flows_m3_per_min):
            raise ConfigError("valve flows must be ascending")
        if self.period_min <= 0.0:
            raise ConfigError("switch period must be positive")


def default_valve_table(permitted_outflow_l_per_s, period_min=60.0):
    """Three settings around a permitted outflow: 25%, 100%, 150%."""
    if permitted_outflow_l_per_s <= 0.0:
        raise ConfigError("permitted outflow must be positive")
    q = units.l_per_s_to_m3_per_min(permitted_outflow_l_per_s)
    return ValveTable((0.25 * q, 1.0 * q, 1.5 * q), period_min)


class StaticStrategy:
    """Holds one valve mode for the whole horizon."""

    kind = "static"

    def __init__(self, mode):
        self.mode = int(mode)

    def decide(self, cfg, n):
        return self.mode


class RandomAllowedPolicy:
    """Uniformly random choice among the allowed modes (baseline)."""

    kind = "random-allowed"

    def __init__(self, shield, seed=0):
        self.shield = shield
        self.reset_run(seed)

    def reset_run(self, seed):
        self._rng = np.random.default_rng(seed)

    def decide(self, cfg, n):
        allowed = self.shield.safe_modes(cfg, n)
        return allowed[self._rng.integers(len(allowed))]


class ShieldedPolicy:
    """Learned mode table composed with the safe filter at runtime.

    table[n, w_cell, s_cell] holds a proposed mode or -1 for cells the
    learner never visited; proposals outside the allowed set fall back to
    the largest allowed outflow, so every decision stays certified.
    """

    kind = "shielded"

    def __init__(self, shield, table):
        self.shield = shield
        self.table = np.asarray(table, dtype=np.int8)
        N = shield.thresholds.shape[0]
        expect = (N, shield.grid.n_w, shield.grid.n_s)
        if self.table.shape != expect:
            raise ConfigError(f"policy table shape {self.table.shape}, expected {expect}")

    def decide(self, cfg, n):
        allowed = self.shield.safe_modes(cfg, n)
        wc, sc = self.shield.cells_of(cfg)
        m = int(self.table[n, wc, sc])
        if m in allowed:
            return m
        return allowed[-1]


def decide(strategy, cfg, n):
    """Single decision-point lookup (thin convenience wrapper)."""
    return strategy.decide(cfg, n)


def _feas_hex(row):
    val = 0
    for i, b in enumerate(row):
        if b:
            val |= 1 << i
    return format(val, "x")


def _feas_from_hex(s, n_phases):
    val = int(s, 16)
    return np.array([(val >> i) & 1 == 1 for i in range(n_phases)], dtype=bool)


def save_strategy(strategy, path):
    """Write a permissive filter or a shielded policy to a text file."""
    if strategy.kind == "shielded":
        shield = strategy.shield
    elif strategy.kind == "permissive":
        shield = strategy
    else:
        raise ConfigError(f"cannot serialize a {strategy.kind} strategy")
    model = shield.model
    grid = shield.grid
    pt = shield.phase_table
    N, n_ph, n_modes, n_s = shield.thresholds.shape
    lines = []
    lines.append(f"{FORMAT_TAG} {FORMAT_VERSION}")
    lines.append(f"kind {strategy.kind}")
    lines.append(f"plant {'reservoir' if model.reservoir else 'direct'}")
    lines.append(f"period {model.period_min!r}")
    lines.append(f"dt {model.dt_min!r}")
    lines.append(f"horizon {model.horizon_min!r}")
    lines.append(f"margin {shield.margin_m3!r}")
    lines.append(f"vcap {model.v_cap_m3!r}")
    lines.append(f"area {model.area_m2!r}")
    lines.append(f"beta {model.beta_m3_per_mm!r}")
    lines.append(f"k {model.k_per_min!r}")
    lines.append("modes " + " ".join(repr(q) for q in model.modes_m3_per_min))
    lines.append(f"grid {grid.w_max_cm!r} {grid.n_w} {grid.s_max!r} {grid.n_s}")
    lines.append(f"buckets {pt.dry_bucket_min!r} {pt.rain_bucket_min!r}")
    lines.append(f"phases {pt.n_phases}")
    for pid, ph in enumerate(pt.phases):
        tag = "exh" if ph.exhausted else ("rain" if ph.raining else "dry")
        lines.append(f"phase {pid} {tag} {ph.interval} {ph.d_lo!r} {ph.d_hi!r}")
    for n in range(N):
        lines.append(f"feas {n} {_feas_hex(shield.feasible[n])}")
    th = shield.thresholds
    for n in range(N):
        for pid in range(n_ph):
            if not shield.feasible[n, pid]:
                continue
            for m in range(n_modes):
                row = th[n, pid, m]
                if np.all(row == row[0]):
                    lines.append(f"tb {n} {pid} {m} {float(row[0])!r}")
                else:
                    lines.append(f"tc {n} {pid} {m} " +
                                 " ".join(repr(float(x)) for x in row))
    if strategy.kind == "shielded":
        tab = strategy.table
        for n in range(N):
            wcs, scs = np.nonzero(tab[n] >= 0)
            for wc, sc in zip(wcs, scs):
                lines.append(f"p {n} {wc} {sc} {int(tab[n, wc, sc])}")
        lines.append("fallback max-allowed")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_strategy(path, model):
    """Load a strategy file against the model it was synthesized for."""
    try:
        with open(path) as f:
            raw = [ln.rstrip("\n") for ln in f if ln.strip()]
    except OSError as e:
        raise ConfigError(f"cannot read strategy file {path}: {e}") from e
    if not raw or not raw[0].startswith(FORMAT_TAG):
        raise ConfigError(f"{path} is not a strategy file")
    header = {}
    records = []
    for ln in raw[1:]:
        key, _, rest = ln.partition(" ")
        if key in ("phase", "feas", "tb", "tc", "p", "fallback"):
            records.append((key, rest))
        else:
            header[key] = rest
    try:
        kind = header["kind"]
        period = float(header["period"])
        dt = float(header["dt"])
        horizon = float(header["horizon"])
        margin = float(header["margin"])
        modes = tuple(float(x) for x in header["modes"].split())
        gw, gnw, gs, gns = header["grid"].split()
        grid = DecisionGrid(float(gw), int(gnw), float(gs), int(gns))
        dry_b, rain_b = (float(x) for x in header["buckets"].split())
        n_phases = int(header["phases"])
    except (KeyError, ValueError) as e:
        raise ConfigError(f"bad strategy header in {path}: {e}") from e
    for got, want, name in ((period, model.period_min, "period"),
                            (dt, model.dt_min, "dt"),
                            (horizon, model.horizon_min, "horizon"),
                            (modes, model.modes_m3_per_min, "modes")):
        if got != want:
            raise ConfigError(f"strategy {name} {got} does not match model {want}")
    pt = PhaseTable(model.program, dry_b, rain_b)
    if pt.n_phases != n_phases:
        raise ConfigError("strategy phase layout does not match the model's program")
    N = model.n_periods
    feas = np.zeros((N, n_phases), dtype=bool)
    th = np.full((N, n_phases, len(modes), grid.n_s), -np.inf)
    table = np.full((N, grid.n_w, grid.n_s), -1, dtype=np.int8)
    try:
        for key, rest in records:
            parts = rest.split()
            if key == "feas":
                feas[int(parts[0])] = _feas_from_hex(parts[1], n_phases)
            elif key == "tb":
                n, pid, m = int(parts[0]), int(parts[1]), int(parts[2])
                th[n, pid, m, :] = float(parts[3])
            elif key == "tc":
                n, pid, m = int(parts[0]), int(parts[1]), int(parts[2])
                th[n, pid, m, :] = [float(x) for x in parts[3:]]
            elif key == "p":
                table[int(parts[0]), int(parts[1]), int(parts[2])] = int(parts[3])
    except (IndexError, ValueError) as e:
        raise ConfigError(f"bad strategy record in {path}: {e}") from e
    shield = PermissiveStrategy(model, grid, pt, feas, th, margin)
    if kind == "permissive":
        return shield
    if kind == "shielded":
        return ShieldedPolicy(shield, table)
    raise ConfigError(f"unknown strategy kind {kind!r} in {path}")
