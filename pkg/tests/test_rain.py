import numpy as np
import pytest

from detpond.errors import ConfigError
from detpond.rain import (RainInterval, RainProgram, envelope_rate_at,
                          interval_windows, load_program, program_from_dict,
                          program_to_dict, sample_trace, save_program,
                          trace_from_segments, worst_case_envelope)

TABLE = [
    (210, 256, 27, 33, 0.01333),
    (64, 78, 21, 25, 0.03478),
    (1376, 1682, 49, 61, 0.02545),
    (168, 206, 23, 29, 0.02308),
    (203, 249, 208, 254, 0.00952),
]


def small_program():
    return RainProgram((
        RainInterval(2.0, 5.0, 3.0, 6.0, 0.2),
        RainInterval(1.0, 4.0, 2.0, 3.0, 0.5),
    ), epsilon=0.1)


def test_builtin_program_constants(cfg):
    prog = cfg.program
    assert prog.epsilon == 0.1
    assert prog.n_intervals == 5
    for iv, row in zip(prog.intervals, TABLE):
        assert (iv.dry_min, iv.dry_max) == (row[0], row[1])
        assert (iv.rain_min, iv.rain_max) == (row[2], row[3])
        assert iv.intensity == row[4]
    # every realization ends with a guaranteed-dry stretch over a fifth of
    # the horizon long: latest possible end of the last event
    _, _, _, end_max = interval_windows(prog)
    assert end_max[-1] == sum(r[1] + r[3] for r in TABLE) == 2873.0
    assert 4320.0 - end_max[-1] >= 1447.0


def test_interval_windows_prefix_arithmetic():
    prog = small_program()
    onset_min, onset_max, end_min, end_max = interval_windows(prog)
    assert onset_min[0] == 2.0 and onset_max[0] == 5.0
    assert end_min[0] == 5.0 and end_max[0] == 11.0
    assert onset_min[1] == 6.0 and onset_max[1] == 15.0
    assert end_min[1] == 8.0 and end_max[1] == 18.0


def test_interval_validation():
    with pytest.raises(ConfigError):
        RainInterval(5.0, 2.0, 1.0, 2.0, 0.1)
    with pytest.raises(ConfigError):
        RainInterval(0.0, 1.0, 0.0, 2.0, 0.1)
    with pytest.raises(ConfigError):
        RainInterval(0.0, 1.0, 1.0, 2.0, -0.5)
    with pytest.raises(ConfigError):
        RainProgram((), epsilon=0.0)
    with pytest.raises(ConfigError):
        RainProgram((RainInterval(0, 1, 1, 2, 0.1),), epsilon=1.0)


def test_choice_lists_override_bounds():
    iv = RainInterval(0, 0, 0, 0, 1.0, dry_choices=(3, 1), rain_choices=(2, 4),
                      intensity_choices=(0.5, 2.0))
    assert (iv.dry_min, iv.dry_max) == (1.0, 3.0)
    assert (iv.rain_min, iv.rain_max) == (2.0, 4.0)
    assert iv.intensity_bound(0.3) == 2.0
    cont = RainInterval(0, 1, 1, 2, 1.0)
    assert cont.intensity_bound(0.1) == pytest.approx(1.1)


def test_sample_trace_determinism_and_bounds():
    prog = small_program()
    t1 = sample_trace(prog, seed=np.random.SeedSequence(42))
    t2 = sample_trace(prog, seed=np.random.SeedSequence(42))
    np.testing.assert_array_equal(t1.times, t2.times)
    np.testing.assert_array_equal(t1.rates, t2.rates)
    for s in range(200):
        tr = sample_trace(prog, seed=np.random.SeedSequence([1, s]))
        # reconstruct each event's segments from the switch points
        for i, iv in enumerate(prog.intervals):
            idx = np.where((tr.seg_interval == i) & (tr.seg_raining == 1))[0]
            assert len(idx) == 1
            j = idx[0]
            dur = tr.times[j + 1] - tr.times[j]
            assert iv.rain_min - 1e-9 <= dur <= iv.rain_max + 1e-9
            rate = tr.rates[j]
            lo = iv.intensity * (1.0 - prog.epsilon)
            hi = iv.intensity * (1.0 + prog.epsilon)
            assert lo - 1e-12 <= rate <= hi + 1e-12
        # permanently dry tail
        assert tr.seg_interval[-1] == prog.n_intervals
        assert tr.rates[-1] == 0.0


def test_sample_trace_choice_program():
    prog = RainProgram((
        RainInterval(0, 0, 0, 0, 1.0, dry_choices=(1.0, 2.0),
                     rain_choices=(1.0, 3.0), intensity_choices=(0.5, 1.5)),
    ))
    seen = set()
    for s in range(100):
        tr = sample_trace(prog, seed=np.random.SeedSequence([2, s]))
        onset = tr.times[1] if tr.rates[0] == 0.0 else 0.0
        j = 1 if tr.rates[0] == 0.0 else 0
        dur = tr.times[j + 1] - tr.times[j]
        assert onset in (1.0, 2.0)
        assert dur in (1.0, 3.0)
        assert tr.rates[j] in (0.5, 1.5)
        seen.add((onset, dur, tr.rates[j]))
    assert len(seen) == 8


def test_trace_right_continuity():
    tr = trace_from_segments([(2.0, 0.0, False, 0), (3.0, 0.7, True, 0)], 1)
    assert tr.phase_at(0.0) == (False, 0, 0.0, 0.0)
    # at the switch instant the new segment is already in force
    assert tr.phase_at(2.0) == (True, 0, 0.0, 0.7)
    assert tr.phase_at(5.0 - 1e-9)[0] is True
    raining, interval, elapsed, rate = tr.phase_at(5.0)
    assert (raining, interval, rate) == (False, 1, 0.0)
    # zero-length segments are dropped
    tr2 = trace_from_segments([(0.0, 0.0, False, 0), (1.0, 0.3, True, 0)], 1)
    assert tr2.phase_at(0.0) == (True, 0, 0.0, 0.3)


def test_envelope_soundness_smoke():
    prog = small_program()
    times, rates = worst_case_envelope(prog, horizon=40.0)
    grid = np.arange(0.0, 40.0, 0.25)
    for s in range(300):
        tr = sample_trace(prog, seed=np.random.SeedSequence([3, s]))
        idx = np.searchsorted(tr.times, grid, side="right") - 1
        tr_rates = tr.rates[idx]
        env = np.array([envelope_rate_at(times, rates, t) for t in grid])
        assert np.all(tr_rates <= env + 1e-12)


def test_envelope_uses_intensity_bound():
    prog = small_program()
    times, rates = worst_case_envelope(prog, horizon=40.0)
    # inside the first event's tightest rain window the envelope must be
    # at least that event's maximal intensity
    assert envelope_rate_at(times, rates, 5.5) >= 0.2 * 1.1 - 1e-12


def test_program_dict_roundtrip(tmp_path):
    prog = small_program()
    d = program_to_dict(prog)
    back = program_from_dict(d)
    assert back == prog
    p = tmp_path / "prog.json"
    save_program(prog, p)
    assert load_program(p) == prog
    choice = RainProgram((RainInterval(0, 0, 0, 0, 1.0, dry_choices=(1, 2),
                                       rain_choices=(1,), intensity_choices=(2.0,)),))
    assert program_from_dict(program_to_dict(choice)) == choice


def test_program_from_dict_validation():
    with pytest.raises(ConfigError):
        program_from_dict({"epsilon": 0.1, "intervals": []})
    with pytest.raises(ConfigError):
        program_from_dict({"epsilon": 2.0, "intervals": [
            {"dry_min": 0, "dry_max": 1, "rain_min": 1, "rain_max": 2,
             "intensity_mm_per_min": 0.1}]})
