"""Empirical soundness sweep for the synthesized safe filter.

Runs the pond under shield-compliant policies across start levels and
seeds, and checks that no run overflows. Also reports how often the
bucketized threshold table came up empty and the certified
largest-outflow cover had to engage (a permissiveness metric, not a
safety one), and the worst peak volume seen relative to the basin cap.

Usage: python scripts/closure_check.py [--runs-per-cell 600] [--scale S]
"""

import argparse
import dataclasses
import sys
import time

import numpy as np

from detpond.config import build_model, default_config
from detpond.hmdp import run_trace
from detpond.rain import sample_trace
from detpond.synthesis import synthesize_safe


class CountingPolicy:
    """Max-allowed or random-allowed, counting empty-table fallbacks."""

    def __init__(self, shield, stats, rng=None):
        self.shield = shield
        self.stats = stats
        self.rng = rng

    def decide(self, cfg, n):
        allowed = self.shield.allowed_modes(cfg, n)
        if not allowed:
            self.stats["fallbacks"] += 1
            return len(self.shield.model.modes_m3_per_min) - 1
        if self.rng is None:
            return allowed[-1]
        return allowed[self.rng.integers(len(allowed))]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs-per-cell", type=int, default=600)
    ap.add_argument("--scale", type=float, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--rain-bucket", type=float, default=None)
    args = ap.parse_args(argv)

    cfg = default_config()
    if args.scale is not None:
        cfg = dataclasses.replace(
            cfg, pond=dataclasses.replace(cfg.pond, inflow_scale=args.scale))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.rain_bucket is not None:
        cfg = dataclasses.replace(cfg, rain_bucket_min=args.rain_bucket)
    model = build_model(cfg)

    t0 = time.perf_counter()
    shield = synthesize_safe(model, margin_m3=cfg.margin_m3,
                             dry_bucket_min=cfg.dry_bucket_min,
                             rain_bucket_min=cfg.rain_bucket_min)
    t1 = time.perf_counter()
    print(f"synthesis: {t1 - t0:.2f}s  scale={cfg.pond.inflow_scale}  "
          f"rain_bucket={cfg.rain_bucket_min}")

    stats = {"fallbacks": 0}
    overflows = 0
    peak = 0.0
    n_runs = 0
    t0 = time.perf_counter()
    for w0 in (0.0, 100.0, 147.0):
        for pol_name in ("max", "rand"):
            for i in range(args.runs_per_cell):
                ss = np.random.SeedSequence([cfg.seed, 99, int(w0), i])
                kids = ss.spawn(2)
                trace = sample_trace(model.program, kids[0])
                if pol_name == "max":
                    pol = CountingPolicy(shield, stats)
                else:
                    pol = CountingPolicy(shield, stats,
                                         np.random.default_rng(kids[1]))
                traj = run_trace(model, pol.decide, trace, w0_cm=w0,
                                 record=False)
                n_runs += 1
                peak = max(peak, traj.peak_v_m3)
                if traj.final_overflow_min > 0:
                    overflows += 1
    t1 = time.perf_counter()
    print(f"{n_runs} shielded runs in {t1 - t0:.1f}s: "
          f"overflows={overflows} fallback_decisions={stats['fallbacks']} "
          f"max_peak={peak:.1f} (cap {model.v_cap_m3})")
    return 1 if overflows else 0


if __name__ == "__main__":
    sys.exit(main())
