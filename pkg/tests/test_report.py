import pytest

from ckptagg.report import Row, comparison_table, emit_plot_series, emit_report, parse_report, sig6
from ckptagg.simulator import sweep
from ckptagg.config import ExperimentConfig


@pytest.fixture(scope="module")
def rows():
    cfg = ExperimentConfig.from_dict({
        "checkpoint_size": 1000000,
        "grid": {"node_count": [2, 3], "ranks_per_node": [1, 2]},
    })
    return comparison_table(sweep(cfg.scenarios()))


def test_sig6():
    assert sig6(123456789.0) == 123457000.0
    assert sig6(0.000123456789) == 0.000123457


def test_table_shape(rows):
    assert len(rows) == 2 * 2 * 4
    assert len({r.key for r in rows}) == len(rows)


def test_duplicate_rows_rejected(rows):
    cfg = ExperimentConfig.from_dict({"strategy": "posix_aggregate"})
    pair = sweep(cfg.scenarios())[0]
    with pytest.raises(ValueError):
        comparison_table([pair, pair])


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_round_trip(rows, fmt):
    text = emit_report(rows, fmt)
    assert parse_report(text, fmt) == rows
    assert "\r" not in text


def test_csv_layout(rows):
    lines = emit_report(rows, "csv").split("\n")
    assert lines[0].startswith("strategy,node_count,ranks_per_node,local_throughput")
    assert lines[-1] == "" and len(lines) == len(rows) + 2


def test_emit_errors(rows):
    with pytest.raises(ValueError):
        emit_report(rows, "xml")
    with pytest.raises(ValueError):
        emit_report([], "csv")


def test_plot_series(rows):
    series = emit_plot_series(rows, "flush_throughput", node_count=2)
    assert set(series) == {"file_per_process", "posix_aggregate", "collective_aggregate",
                           "leader_aggregate"}
    assert [x for x, _ in series["posix_aggregate"]] == [1, 2]
    with pytest.raises(ValueError):
        emit_plot_series(rows, "flush_throughput")
    with pytest.raises(ValueError):
        emit_plot_series(rows, "nope", node_count=2)


def test_row_key():
    r = Row("posix_aggregate", 2, 4, 1.0, 2.0, 3, 4, 0.0, 0.0)
    assert r.key == ("posix_aggregate", 2, 4)
