import dataclasses
import math

import pytest

import oracles
from edramcap.calibration import (
    IN_RANGE,
    OVER_RANGE,
    UNDER_RANGE,
    Abacus,
    accuracy_report,
    build_abacus,
    estimate_capacitance,
    fingerprint,
    sweep_grid,
)
from edramcap.converter import ConverterParams
from edramcap.errors import CalibrationError, FingerprintMismatch
from edramcap.netlist import ParasiticConfig

ANALYTIC = oracles.step_boundaries(30.0, 1.8, 0.45, 200.0, ConverterParams().delta_i, 20)


def test_sweep_grid():
    g = sweep_grid(10, 55, 0.25)
    assert len(g) == 181 and g[0] == 10 and g[-1] == 55
    assert len(sweep_grid(10, 10.5, 0.2)) == 3
    for bad in [(5, 5, 1), (5, 6, 0), (-1, 5, 1)]:
        with pytest.raises(CalibrationError):
            sweep_grid(*bad)


def test_default_sweep_is_monotone_and_complete(abacus):
    steps = [s for _, s in abacus.entries]
    assert steps == sorted(steps)
    assert set(steps) == set(range(21))
    assert steps[0] == 0 and steps[-1] == 20
    assert [b.step for b in abacus.bins] == list(range(21))


def test_boundaries_match_analytic(abacus):
    # grid-limited edges sit within one resolution of the closed-form ones
    for s in range(1, 21):
        assert abs(abacus.bin(s).lo - ANALYTIC[s - 1]) <= 0.25
    assert ANALYTIC[0] == pytest.approx(15.371, abs=1e-3)
    assert ANALYTIC[-1] == pytest.approx(55.0, abs=1e-6)


def test_refined_boundaries(params):
    ab = build_abacus(params, (10, 55, 1.0), refine=True)
    for s in range(1, 21):
        assert abs(ab.bin(s).lo - ANALYTIC[s - 1]) <= 2e-6


def test_sub_range_sweeps(params):
    low = build_abacus(params, (0, 10, 0.5))
    assert {s for _, s in low.entries} == {0}
    high = build_abacus(params, (55, 80, 1.0))
    assert {s for _, s in high.entries} == {20}


def test_estimates(abacus):
    e0 = estimate_capacitance(abacus, 0)
    assert e0.point is None and e0.flag == UNDER_RANGE
    assert e0.interval == (0.0, abacus.bin(1).lo)
    e20 = estimate_capacitance(abacus, 20)
    assert e20.point is None and e20.flag == OVER_RANGE
    assert e20.interval[1] == math.inf and e20.interval[0] == abacus.bin(19).hi
    e7 = estimate_capacitance(abacus, 7)
    assert e7.flag == IN_RANGE and e7.interval[0] <= 30.0 < e7.interval[1]
    assert e7.point == pytest.approx(sum(e7.interval) / 2)
    for bad in (-1, 21, 2.0):
        with pytest.raises(ValueError):
            estimate_capacitance(abacus, bad)


def test_estimate_checks_fingerprint(abacus, params):
    estimate_capacitance(abacus, 5, params)
    with pytest.raises(FingerprintMismatch):
        estimate_capacitance(abacus, 5, dataclasses.replace(params, k=210.0, delta_i=None))
    with pytest.raises(FingerprintMismatch):
        abacus.check(params, ParasiticConfig(plate_fF=1.0))


def test_fingerprint_sensitivity(params):
    base = fingerprint(params)
    assert fingerprint(ConverterParams()) == base
    assert fingerprint(dataclasses.replace(params, n_steps=30, delta_i=None)) != base
    assert fingerprint(params, ParasiticConfig(bitline_fF=2.0)) != base


def test_round_trip(tmp_path, params):
    ab = build_abacus(params, (10, 55, 1.0), refine=True)
    ab.dump(tmp_path / "a.json", tmp_path / "a.csv")
    back = Abacus.load(tmp_path / "a.json")
    assert back == ab
    csv = (tmp_path / "a.csv").read_text().splitlines()
    assert csv[0] == "c_m_fF,step" and len(csv) == len(ab.entries) + 1


def test_malformed_abacus():
    with pytest.raises(CalibrationError):
        Abacus.from_dict({"bins": []})
    with pytest.raises(CalibrationError):
        Abacus(((1.0, 3), (2.0, 2)), (), 20, "x", (1, 2, 1))


def test_accuracy_within_six_percent(abacus):
    rep = accuracy_report(abacus)
    assert rep.max_full_scale <= 0.06
    assert rep.max_full_scale == pytest.approx(0.0278, abs=5e-4)
    assert rep.max_relative == pytest.approx(0.0807, abs=5e-4)
    assert rep.range_covered[0] == pytest.approx(ANALYTIC[0], abs=0.25)
    assert len(rep.per_step) == 19
    assert rep.to_dict()["n_points"] == rep.n_points


def test_single_point_sweep_has_zero_error(params):
    ab = build_abacus(params, (30, 30.2, 0.25))
    assert len(ab.entries) == 1
    rep = accuracy_report(ab)
    assert rep.max_full_scale == 0.0 and rep.max_relative == 0.0


def test_finer_ramp_is_more_accurate(params):
    fine = dataclasses.replace(params, n_steps=40, delta_i=None)
    e20 = accuracy_report(build_abacus(params, (10, 55, 0.25))).max_full_scale
    e40 = accuracy_report(build_abacus(fine, (10, 55, 0.25))).max_full_scale
    assert e40 < e20


def test_ordering_20_vs_40(abacus):
    s20 = next(s for c, s in abacus.entries if c == 20.0)
    s40 = next(s for c, s in abacus.entries if c == 40.0)
    assert (s20, s40) == (2, 13)


def test_non_monotone_curve_rejected(params, monkeypatch):
    from edramcap import calibration

    seq = iter([3, 4, 2, 5])

    class Fake:
        def __init__(self, *a):
            pass

        def __call__(self, c):
            return next(seq)

    monkeypatch.setattr(calibration, "_Probe", Fake)
    with pytest.raises(CalibrationError):
        build_abacus(params, (10, 13, 1.0))


def test_larger_reference_array_gives_same_abacus(params, abacus):
    ab = build_abacus(params, dims=(3, 3), target=(1, 2), background=45.0)
    assert ab.entries == abacus.entries
