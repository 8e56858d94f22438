"""Uncertain rain programs: interval descriptions, sampling, envelopes.

A rain program is an ordered list of storm events. Event i is described by
a dry-spell duration range [dry_min, dry_max] (minutes before its rain
starts, counted from the end of the previous event), a rain duration range
[rain_min, rain_max] and a nominal intensity (mm/min) that is perturbed by
a relative factor in [1-epsilon, 1+epsilon]. After the last event the
weather stays dry forever.

Each quantity may instead carry a finite choice list (dry_choices etc.);
sampling then picks uniformly from the list. That variant is what the
small closed-form test fixtures use.
"""

from dataclasses import dataclass
from typing import Optional
import json

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class RainInterval:
    dry_min: float
    dry_max: float
    rain_min: float
    rain_max: float
    intensity: float  # nominal, mm/min
    dry_choices: Optional[tuple] = None
    rain_choices: Optional[tuple] = None
    intensity_choices: Optional[tuple] = None

    def __post_init__(self):
        if self.dry_choices is not None:
            object.__setattr__(self, "dry_choices", tuple(float(x) for x in self.dry_choices))
            object.__setattr__(self, "dry_min", min(self.dry_choices))
            object.__setattr__(self, "dry_max", max(self.dry_choices))
        if self.rain_choices is not None:
            object.__setattr__(self, "rain_choices", tuple(float(x) for x in self.rain_choices))
            object.__setattr__(self, "rain_min", min(self.rain_choices))
            object.__setattr__(self, "rain_max", max(self.rain_choices))
        if self.intensity_choices is not None:
            object.__setattr__(self, "intensity_choices",
                               tuple(float(x) for x in self.intensity_choices))
        if not (0.0 <= self.dry_min <= self.dry_max):
            raise ConfigError("dry duration bounds must satisfy 0 <= min <= max")
        if not (0.0 < self.rain_min <= self.rain_max):
            raise ConfigError("rain duration bounds must satisfy 0 < min <= max")
        if self.intensity <= 0.0:
            raise ConfigError("rain intensity must be positive")
        if self.intensity_choices is not None and min(self.intensity_choices) <= 0.0:
            raise ConfigError("rain intensity choices must be positive")

    def intensity_bound(self, epsilon):
        """Largest intensity this event can produce."""
        if self.intensity_choices is not None:
            return max(self.intensity_choices)
        return self.intensity * (1.0 + epsilon)


@dataclass(frozen=True)
class RainProgram:
    intervals: tuple
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        if not self.intervals:
            raise ConfigError("rain program needs at least one interval")
        if not (0.0 <= self.epsilon < 1.0):
            raise ConfigError("epsilon must lie in [0, 1)")

    @property
    def n_intervals(self):
        return len(self.intervals)

    def max_intensity(self):
        return max(iv.intensity_bound(self.epsilon) for iv in self.intervals)


def interval_windows(program):
    """Feasible onset/end time windows for every event.

    Returns four arrays (onset_min, onset_max, end_min, end_max); event i
    can start raining anywhere in [onset_min[i], onset_max[i]] and stop
    anywhere in [end_min[i], end_max[i]].
    """
    n = program.n_intervals
    onset_min = np.empty(n)
    onset_max = np.empty(n)
    end_min = np.empty(n)
    end_max = np.empty(n)
    lo = 0.0
    hi = 0.0
    for i, iv in enumerate(program.intervals):
        onset_min[i] = lo + iv.dry_min
        onset_max[i] = hi + iv.dry_max
        end_min[i] = onset_min[i] + iv.rain_min
        end_max[i] = onset_max[i] + iv.rain_max
        lo = end_min[i]
        hi = end_max[i]
    return onset_min, onset_max, end_min, end_max


@dataclass
class RainTrace:
    """One concrete weather realization as a right-continuous step function.

    times[0] == 0 and rates[j] applies on [times[j], times[j+1]); the last
    segment extends forever. seg_interval[j] is the 0-based event a segment
    belongs to (a dry segment belongs to the event it precedes);
    n_intervals marks the permanently dry tail.
    """
    times: np.ndarray
    rates: np.ndarray
    seg_raining: np.ndarray
    seg_interval: np.ndarray
    n_intervals: int

    def segment_at(self, t):
        if t < 0.0:
            raise ValueError("trace queried at negative time")
        return int(np.searchsorted(self.times, t, side="right") - 1)

    def phase_at(self, t):
        """(raining, interval, elapsed, rate) of the segment containing t."""
        j = self.segment_at(t)
        return (bool(self.seg_raining[j]), int(self.seg_interval[j]),
                float(t - self.times[j]), float(self.rates[j]))

    def rate_at(self, t):
        return float(self.rates[self.segment_at(t)])


def trace_from_segments(segments, n_intervals):
    """Build a RainTrace from (duration, rate, raining, interval) tuples.

    Zero-length segments are dropped. The list must cover the program;
    a permanently dry tail segment is appended automatically.
    """
    times, rates, raining, interval = [], [], [], []
    t = 0.0
    for dur, rate, is_rain, iv in segments:
        if dur < 0.0:
            raise ValueError("negative segment duration")
        if dur == 0.0:
            continue
        times.append(t)
        rates.append(rate)
        raining.append(is_rain)
        interval.append(iv)
        t += dur
    times.append(t)
    rates.append(0.0)
    raining.append(False)
    interval.append(n_intervals)
    return RainTrace(np.asarray(times), np.asarray(rates),
                     np.asarray(raining, dtype=bool),
                     np.asarray(interval, dtype=np.int64), n_intervals)


def sample_trace(program, seed):
    """Draw one weather realization.

    Per event, in order: dry duration, rain duration, intensity. Ranges are
    sampled uniformly; choice lists uniformly over the list. The intensity
    perturbation multiplies the nominal by U(1-eps, 1+eps).
    """
    rng = np.random.default_rng(seed)
    segments = []
    for i, iv in enumerate(program.intervals):
        if iv.dry_choices is not None:
            dry = iv.dry_choices[rng.integers(len(iv.dry_choices))]
        else:
            dry = rng.uniform(iv.dry_min, iv.dry_max)
        if iv.rain_choices is not None:
            dur = iv.rain_choices[rng.integers(len(iv.rain_choices))]
        else:
            dur = rng.uniform(iv.rain_min, iv.rain_max)
        if iv.intensity_choices is not None:
            rate = iv.intensity_choices[rng.integers(len(iv.intensity_choices))]
        else:
            rate = iv.intensity * rng.uniform(1.0 - program.epsilon, 1.0 + program.epsilon)
        segments.append((dry, 0.0, False, i))
        segments.append((dur, rate, True, i))
    return trace_from_segments(segments, program.n_intervals)


def worst_case_envelope(program, horizon):
    """Pointwise upper bound on the rain rate over [0, horizon].

    Event i can be active anywhere between its earliest onset and latest
    end, at up to its intensity bound; the envelope takes the max over
    events at every instant. Returns (times, rates) as a right-continuous
    step function with times[0] == 0 covering [0, horizon].
    """
    onset_min, _, _, end_max = interval_windows(program)
    cuts = {0.0, float(horizon)}
    for i in range(program.n_intervals):
        if onset_min[i] < horizon:
            cuts.add(float(onset_min[i]))
            cuts.add(float(min(end_max[i], horizon)))
    cuts = sorted(cuts)
    times, rates = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        r = 0.0
        for i, iv in enumerate(program.intervals):
            if onset_min[i] <= mid < end_max[i]:
                r = max(r, iv.intensity_bound(program.epsilon))
        if rates and rates[-1] == r:
            continue
        times.append(a)
        rates.append(r)
    if not times:
        times, rates = [0.0], [0.0]
    return np.asarray(times), np.asarray(rates)


def envelope_rate_at(times, rates, t):
    j = int(np.searchsorted(times, t, side="right") - 1)
    return float(rates[j]) if j >= 0 else 0.0


def program_to_dict(program):
    out = {"epsilon": program.epsilon, "intervals": []}
    for iv in program.intervals:
        d = {"dry_min": iv.dry_min, "dry_max": iv.dry_max,
             "rain_min": iv.rain_min, "rain_max": iv.rain_max,
             "intensity_mm_per_min": iv.intensity}
        if iv.dry_choices is not None:
            d["dry_choices"] = list(iv.dry_choices)
        if iv.rain_choices is not None:
            d["rain_choices"] = list(iv.rain_choices)
        if iv.intensity_choices is not None:
            d["intensity_choices"] = list(iv.intensity_choices)
        out["intervals"].append(d)
    return out


def program_from_dict(data):
    try:
        ivs = []
        for d in data["intervals"]:
            ivs.append(RainInterval(
                dry_min=float(d.get("dry_min", 0.0)),
                dry_max=float(d.get("dry_max", d.get("dry_min", 0.0))),
                rain_min=float(d.get("rain_min", 1.0)),
                rain_max=float(d.get("rain_max", d.get("rain_min", 1.0))),
                intensity=float(d.get("intensity_mm_per_min", 1.0)),
                dry_choices=d.get("dry_choices"),
                rain_choices=d.get("rain_choices"),
                intensity_choices=d.get("intensity_choices"),
            ))
        return RainProgram(tuple(ivs), float(data.get("epsilon", 0.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad rain program: {e}") from e


def load_program(path):
    with open(path) as f:
        return program_from_dict(json.load(f))


def save_program(program, path):
    with open(path, "w") as f:
        json.dump(program_to_dict(program), f, indent=2)
        f.write("\n")
