import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saishift.bench import (
    CSV_HEADER,
    BenchRecord,
    BenchResult,
    ConfigError,
    RunConfig,
    crossover,
    crossover_report,
    emit_csv,
    read_csv,
    run_benchmark,
)

SMALL = dict(n=14, num_vectors=4, max_iters=150)
TIME_FIELDS = ("wall_time_s", "cumulative_time_s")


def strip_times(records):
    return [{k: v for k, v in dataclasses.asdict(r).items() if k not in TIME_FIELDS} for r in records]


@pytest.fixture(scope="module")
def runs():
    return {s: run_benchmark(RunConfig(strategy=s, K=15, **SMALL)) for s in ("fixed", "optimize_and_run", "incremental")}


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# aniso panel\nproblem = aniso\nn = 32  # grid\nt = 0.1\ntol = 1e-8\nstrategy = incremental\n")
    cfg = RunConfig.from_file(path, ["n=16", "reorthogonalize = yes"])
    assert cfg.problem == "aniso" and cfg.n == 16 and cfg.t == 0.1
    assert cfg.reorthogonalize is True
    assert cfg.delta == 0.07 and cfg.upper == 0.07
    assert RunConfig().delta == 0.1


@pytest.mark.parametrize(
    "text",
    ["bogus = 1", "n = ten", "strategy = magic", "tol = -1", "just words", "lo = 0.2", "reorthogonalize = maybe"],
)
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text + "\n")
    with pytest.raises(ConfigError):
        RunConfig.from_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "nope.cfg")


def test_zero_vectors():
    res = run_benchmark(RunConfig(strategy="optimize_and_run", n=8, num_vectors=0))
    assert res.records == []
    assert res.summary["total_lu"] == 0
    assert res.summary["total_arnoldi_iters"] == 0
    assert res.summary["mean_arnoldi_iters"] == 0.0


def test_lu_accounting(runs):
    fixed = runs["fixed"]
    assert fixed.summary["total_lu"] == 1
    assert [r.vector_index for r in fixed.records] == [1, 2, 3, 4]

    opt = runs["optimize_and_run"]
    s = opt.summary["evals"]
    assert opt.records[0].vector_index == 0
    assert opt.records[0].lu_count == s
    assert opt.summary["total_lu"] == s + 1

    inc = runs["incremental"]
    # four vectors never finish the bisection, so every one paid a factorization
    assert inc.summary["phase1_length"] == 4
    assert inc.summary["total_lu"] == 4


def test_incremental_phase_two_accounting():
    res = run_benchmark(RunConfig(strategy="incremental", n=20, num_vectors=17, max_iters=150))
    assert res.summary["phase1_length"] == 14
    assert res.summary["total_lu"] == 15
    assert res.summary["missing_derivatives"] == 0
    assert {r.delta_used for r in res.records[14:]} == {res.summary["delta_star"]}


def test_reorthogonalization_rescues_tiny_grid():
    # on a 10x10 grid small shifts squeeze the SAI spectrum into [0.47, 1]; single-pass
    # MGS then loses orthogonality and the residual blows up, which the second pass avoids
    plain = run_benchmark(RunConfig(strategy="incremental", n=10, num_vectors=17, max_iters=150))
    assert plain.summary["unconverged"]
    fixed = run_benchmark(RunConfig(strategy="incremental", n=10, num_vectors=17, max_iters=150, reorthogonalize=True))
    assert fixed.summary["unconverged"] == []
    assert fixed.summary["phase1_length"] == 14


def test_record_invariants(runs):
    for res in runs.values():
        times = [r.cumulative_time_s for r in res.records]
        assert times == sorted(times)
        for r in res.vector_records:
            assert r.residual_norm < res.config.tol
        assert res.summary["unconverged"] == []


def test_unconverged_vector_is_flagged():
    res = run_benchmark(RunConfig(n=10, num_vectors=2, max_iters=2))
    assert res.summary["unconverged"] == [1, 2]
    assert len(res.records) == 2


def test_full_run_deterministic(tmp_path, runs):
    for strategy in ("optimize_and_run", "incremental"):
        again = run_benchmark(RunConfig(strategy=strategy, K=15, **SMALL))
        assert strip_times(again.records) == strip_times(runs[strategy].records)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(again, a)
        emit_csv(runs[strategy], b)
        assert strip_times(read_csv(a).records) == strip_times(read_csv(b).records)


def test_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv(BenchResult(None, [], {}), path)
    assert path.read_text() == CSV_HEADER + "\n"


def test_csv_single_record(tmp_path):
    path = tmp_path / "one.csv"
    rec = BenchRecord(1, 0.1, 42, 1, 0.5, 3e-7, 0.5)
    emit_csv(BenchResult(None, [rec], {"mean_arnoldi_iters": 42.0}), path)
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1] == "1,0.1,42,1,0.5,3e-07,0.5"
    assert lines[2:] == ["# summary.mean_arnoldi_iters = 42.0"]


floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), floats, st.integers(0, 10**6), st.integers(0, 10**6),
                          floats, floats, floats), max_size=8))
def test_csv_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "rt.csv"
    records = [BenchRecord(*row) for row in rows]
    emit_csv(BenchResult(None, records, {"strategy": "fixed"}), path)
    back = read_csv(path)
    assert back.records == records
    assert back.summary == {"strategy": "fixed"}


def test_csv_round_trip_of_run(tmp_path, runs):
    path = tmp_path / "run.csv"
    emit_csv(runs["optimize_and_run"], path)
    back = read_csv(path)
    assert back.records == runs["optimize_and_run"].records
    assert back.config["strategy"] == "optimize_and_run"
    assert back.config["fixed_delta"] == "0.1"


def rec(i, iters, lu, cum):
    return BenchRecord(i, 0.1, iters, lu, 0.0, 0.0, cum)


def test_crossover_from_first_vector():
    fixed = [rec(1, 10, 1, 1.0), rec(2, 10, 1, 2.0)]
    adaptive = [rec(1, 5, 1, 0.5), rec(2, 5, 1, 1.0)]
    assert crossover(fixed, adaptive) == {"m_min_time": 1, "m_min_iters": 1}


def test_crossover_identical_is_none():
    fixed = [rec(1, 10, 1, 1.0), rec(2, 10, 1, 2.0)]
    assert crossover(fixed, list(fixed)) == {"m_min_time": None, "m_min_iters": None}


def test_crossover_with_offset():
    fixed = [rec(i, 10, 1, float(i)) for i in range(1, 6)]
    adaptive = [rec(0, 12, 5, 2.5)] + [rec(i, 6, 6, 2.5 + 0.5 * i) for i in range(1, 6)]
    res = crossover(fixed, adaptive)
    # time: 2.5 + 0.5m < m from m = 6, never within 5; iterations: 12 + 6m < 10m from m = 4
    assert res == {"m_min_time": None, "m_min_iters": 4}
    assert crossover(fixed, adaptive, lu_weight=10.0)["m_min_iters"] is None


def test_crossover_report_checks_configs(tmp_path):
    a = run_benchmark(RunConfig(n=8, num_vectors=2))
    b = run_benchmark(RunConfig(n=8, num_vectors=2, seed=1, strategy="optimize_and_run", K=5))
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(a, pa)
    emit_csv(b, pb)
    with pytest.raises(ConfigError):
        crossover_report(pa, pb)
    emit_csv(run_benchmark(RunConfig(n=8, num_vectors=2, strategy="optimize_and_run", K=5)), pb)
    res, table = crossover_report(pa, pb)
    assert "M_min by wall time" in table
    assert set(res) == {"m_min_time", "m_min_iters"}


def test_baseline_summary(runs):
    res = run_benchmark(RunConfig(strategy="optimize_and_run", K=15, **SMALL), baseline=runs["fixed"])
    assert "m_min_iters" in res.summary
    assert np.isfinite(res.summary["mean_arnoldi_iters"])
