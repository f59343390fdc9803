import logging

import pytest

from salientbox import bench
from salientbox.bench import THROUGHPUT_BUDGETS, run_bench
from salientbox.cli import EXIT_INVALID, EXIT_OK, main
from salientbox.errors import InvalidParameterError


def test_larger_profile_is_slower():
    small = run_bench(224, 30)
    large = run_bench(448, 30)
    assert large.median_us > small.median_us
    assert small.p99_us >= small.median_us
    assert small.budget_decodes_per_sec == THROUGHPUT_BUDGETS[224] == 500.0
    assert large.budget_decodes_per_sec == THROUGHPUT_BUDGETS[448] == 100.0
    assert small.meets_budget == (small.decodes_per_sec >= 500.0)


def test_missed_budget_is_logged(monkeypatch, caplog):
    monkeypatch.setitem(bench.THROUGHPUT_BUDGETS, 224, 1e12)
    with caplog.at_level(logging.WARNING, logger="salientbox.bench"):
        report = run_bench(224, 5)
    assert not report.meets_budget
    assert "below the" in caplog.text
    assert report.model_dump()["meets_budget"] is False


def test_enforced_budget_sets_exit_code(monkeypatch):
    argv = ["--log-level", "ERROR", "bench", "--n", "5", "--profile", "224"]
    monkeypatch.setitem(bench.THROUGHPUT_BUDGETS, 224, 1e12)
    assert main(argv) == EXIT_OK
    assert main([*argv, "--enforce-budget"]) == EXIT_INVALID
    monkeypatch.setitem(bench.THROUGHPUT_BUDGETS, 224, 1e-6)
    assert main([*argv, "--enforce-budget"]) == EXIT_OK


def test_iterations_must_be_positive():
    with pytest.raises(InvalidParameterError):
        run_bench(224, 0)
