"""Shielded tabular Q-learning over decision-period states.

Q[n, w_cell, s_cell, mode] estimates the remaining emptiness cost when
taking a mode at period n in a grid cell and acting greedily afterwards.
Exploration is epsilon-greedy restricted to the safe filter's allowed set.
Episodes are collected in generations; each generation is backed up in
reverse step order (one-step targets), the cheapest episodes are replayed
once more, and the greedy policy is scored on a fixed evaluation seed set
so scores are comparable across generations. Training keeps the best
scoring policy and stops early once improvement stalls.

Unvisited state-actions keep the optimistic zero initialization, which
drives exploration toward them; cells still unvisited at extraction time
stay -1 in the policy table and fall back to the largest allowed outflow
at runtime (see control.ShieldedPolicy).
"""

from dataclasses import dataclass, field

import numpy as np

from .control import ShieldedPolicy
from .hmdp import run_trace, simulate
from .rain import sample_trace
from .synthesis import assert_feasible

# seed stream tags: keep rng families disjoint
_COLLECT, _EXPLORE, _EVAL, _POLICY, _SCORE = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class LearnParams:
    successful_runs: int = 40      # episodes backed up per generation
    max_runs: int = 100            # attempts before giving up on a generation
    good_runs: int = 20            # cheapest episodes replayed once more
    eval_runs: int = 20            # greedy scoring runs per generation
    generations: int = 30
    epsilon_start: float = 0.5
    epsilon_end: float = 0.05
    min_improvement: float = 0.5   # score gain that counts as progress
    patience: int = 5              # stale generations before stopping


@dataclass
class LearnReport:
    scores: list = field(default_factory=list)
    episodes: list = field(default_factory=list)    # per generation
    epsilons: list = field(default_factory=list)    # per generation
    best_score: float = np.inf
    best_generation: int = -1
    episodes_run: int = 0


class QTable:
    """Dense action-value estimates plus visit counts.

    `init` sets the starting value for every entry. With a minimised,
    nonnegative cost-to-go the choice matters: starting at 0 makes the
    backup's min over successor actions chase untried entries, which keeps
    targets near the one-period cost and stalls learning, while starting at
    an upper bound on any episode's cost lets the estimates relax downward
    from a sound ceiling as experience accrues. q_learn uses the model's
    horizon length for that bound since the cost rate never exceeds 1.
    """

    def __init__(self, n_periods, n_w, n_s, n_modes, init=0.0):
        self.q = np.full((n_periods, n_w, n_s, n_modes), float(init))
        self.visits = np.zeros((n_periods, n_w, n_s, n_modes), dtype=np.int64)

    def greedy_mode(self, n, wc, sc, candidates):
        """Arg-min over candidates; ties go to the larger outflow."""
        best = None
        best_q = np.inf
        for m in candidates:
            qv = self.q[n, wc, sc, m]
            if qv <= best_q:
                best_q = qv
                best = m
        return best

    def policy_table(self):
        """Greedy mode per cell over visited actions; -1 when none visited."""
        masked = np.where(self.visits > 0, self.q, np.inf)
        rev = masked[..., ::-1]
        idx = self.q.shape[-1] - 1 - np.argmin(rev, axis=-1)
        idx = idx.astype(np.int8)
        idx[self.visits.sum(axis=-1) == 0] = -1
        return idx


class _Recorder:
    """Epsilon-greedy decision hook that logs one episode's steps."""

    def __init__(self, shield, qt, eps, rng):
        self.shield = shield
        self.qt = qt
        self.eps = eps
        self.rng = rng
        self.steps = []  # (n, wc, sc, allowed, action, c_at_decision)

    def decide(self, cfg, n):
        allowed = self.shield.safe_modes(cfg, n)
        wc, sc = self.shield.cells_of(cfg)
        if self.rng.random() < self.eps:
            a = allowed[self.rng.integers(len(allowed))]
        else:
            a = self.qt.greedy_mode(n, wc, sc, allowed)
        self.steps.append((n, wc, sc, tuple(allowed), a, cfg.x.c))
        return a


def _backup(qt, steps, final_cost):
    """One-step targets applied newest-first so values flow backwards."""
    for i in range(len(steps) - 1, -1, -1):
        n, wc, sc, _, a, c_here = steps[i]
        if i + 1 < len(steps):
            n2, wc2, sc2, allowed2, _, c_next = steps[i + 1]
            future = min(qt.q[n2, wc2, sc2, m] for m in allowed2)
        else:
            c_next = final_cost
            future = 0.0
        target = (c_next - c_here) + future
        alpha = 1.0 / (1.0 + qt.visits[n, wc, sc, a])
        qt.visits[n, wc, sc, a] += 1
        qt.q[n, wc, sc, a] += alpha * (target - qt.q[n, wc, sc, a])


def q_learn(model, shield, w0_cm, s0_mm=0.0, params=None, seed=0):
    """Train a shielded policy; returns (ShieldedPolicy, LearnReport).

    Fails fast with InfeasibleError when the filter cannot keep the start
    safe. Fully deterministic for a given integer seed.
    """
    if params is None:
        params = LearnParams()
    assert_feasible(shield, w0_cm, s0_mm)
    qt = QTable(model.n_periods, shield.grid.n_w, shield.grid.n_s,
                len(model.modes_m3_per_min), init=model.horizon_min)
    report = LearnReport()
    best_table = None
    stale = 0
    for gen in range(params.generations):
        if params.generations > 1:
            frac = gen / (params.generations - 1)
        else:
            frac = 0.0
        eps = params.epsilon_start + (params.epsilon_end - params.epsilon_start) * frac
        episodes = []
        attempts = 0
        while len(episodes) < params.successful_runs and attempts < params.max_runs:
            trace = sample_trace(model.program,
                                 np.random.SeedSequence([seed, _COLLECT, gen, attempts]))
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, _EXPLORE, gen, attempts]))
            rec = _Recorder(shield, qt, eps, rng)
            traj = run_trace(model, rec.decide, trace, w0_cm, s0_mm, record=False)
            attempts += 1
            if traj.final_overflow_min == 0.0:
                episodes.append((rec.steps, traj.final_cost))
        report.episodes_run += attempts
        report.episodes.append(attempts)
        report.epsilons.append(eps)
        for steps, cost in episodes:
            _backup(qt, steps, cost)
        for steps, cost in sorted(episodes, key=lambda e: e[1])[:params.good_runs]:
            _backup(qt, steps, cost)
        policy = ShieldedPolicy(shield, qt.policy_table())
        score = _score(model, policy, w0_cm, s0_mm, params.eval_runs, seed)
        report.scores.append(score)
        if score < report.best_score:
            if score < report.best_score - params.min_improvement:
                stale = 0
            else:
                stale += 1
            report.best_score = score
            report.best_generation = gen
            best_table = policy.table
        else:
            stale += 1
        if stale >= params.patience:
            break
    return ShieldedPolicy(shield, best_table), report


def _score(model, policy, w0_cm, s0_mm, n_runs, seed):
    """Mean final cost over a seed set shared by every generation."""
    total = 0.0
    for i in range(n_runs):
        traj = simulate(model, policy, w0_cm, s0_mm,
                        seed=np.random.SeedSequence([seed, _SCORE, i]),
                        record=False)
        total += traj.final_cost
    return total / n_runs


@dataclass
class EvalResult:
    observer: str
    mean: float
    half_width_95: float
    n_runs: int
    values: np.ndarray


def evaluate(model, strategy, w0_cm, s0_mm=0.0, n_runs=200, seed=0,
             observer="c"):
    """Monte Carlo estimate of a final observer with a 95% normal CI."""
    if observer not in ("c", "o"):
        raise ValueError("observer must be 'c' or 'o'")
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2 for a CI")
    vals = np.empty(n_runs)
    for i in range(n_runs):
        if hasattr(strategy, "reset_run"):
            strategy.reset_run(np.random.SeedSequence([seed, _POLICY, i]))
        traj = simulate(model, strategy, w0_cm, s0_mm,
                        seed=np.random.SeedSequence([seed, _EVAL, i]),
                        record=False)
        vals[i] = traj.final_cost if observer == "c" else traj.final_overflow_min
    mean = float(np.mean(vals))
    half = float(1.96 * np.std(vals, ddof=1) / np.sqrt(n_runs))
    return EvalResult(observer, mean, half, n_runs, vals)
