import csv
import io
import json

import numpy as np
import pytest

from octofrontier.metrics import (
    ITERATION_COLUMNS, VOLUME_COLUMNS, CsvStream, IterationMetrics, MetricsLog, VolumeSample, summarize,
    summary_from_csv, usec, write_summary,
)


class TestRows:
    def test_iteration_row(self):
        m = IterationMetrics(3, 100, 20, 10, 4, 0.0012341, 0.002, 0.003, 0.0004)
        m.t_octo = usec(m.t_octo)
        m.target, m.gain = (1.0, 2.5, 3.25), 0.125
        row = m.row()
        assert len(row) == len(ITERATION_COLUMNS)
        assert row[:5] == ["3", "100", "20", "10", "4"]
        assert row[5] == "0.001234"
        assert row[9] == "0.006634"
        assert row[10:] == ["1.000000", "2.500000", "3.250000", "0.125"]

    def test_no_target(self):
        assert IterationMetrics(0, 0, 0, 0, 0).row()[-4:] == ["", "", "", ""]

    def test_total_is_phase_sum(self, rng):
        for _ in range(100):
            m = IterationMetrics(0, 1, 1, 1, 1, *[usec(v) for v in rng.uniform(0, 0.1, 4)])
            assert m.t_total == pytest.approx(m.t_octo + m.t_detect + m.t_cluster + m.t_select, abs=1e-9)

    def test_volume_row(self):
        row = VolumeSample(1.5, 0.25, 0.125, 0.625).row()
        assert row == ["1.500", "0.250000000000", "0.125000000000", "0.625000000000"]
        assert len(row) == len(VOLUME_COLUMNS)


class TestSummary:
    def test_statistics(self, rng):
        totals = list(rng.uniform(0, 1, 25))
        s = summarize(totals)
        assert s["planner_time_mean"] == pytest.approx(np.mean(totals), abs=1e-12)
        assert s["planner_time_sd"] == pytest.approx(np.std(totals, ddof=1), abs=1e-12)

    def test_empty_and_single(self):
        assert summarize([])["planner_time_mean"] == 0.0
        assert summarize([0.5])["planner_time_sd"] == 0.0

    def test_csv_round_trip(self, tmp_path, rng):
        log = MetricsLog()
        for j in range(30):
            log.iterations.append(IterationMetrics(j, 5, 5, 3, 2, *[usec(v) for v in rng.uniform(0, 0.2, 4)]))
        path = tmp_path / "metrics.csv"
        with open(path, "w", newline="") as fh:
            stream = CsvStream(fh, ITERATION_COLUMNS)
            for m in log.iterations:
                stream.write(m.row())
        printed = log.summary()
        again = summary_from_csv(path)
        assert again["planner_time_mean"] == pytest.approx(printed["planner_time_mean"], abs=1e-9)
        assert again["planner_time_sd"] == pytest.approx(printed["planner_time_sd"], abs=1e-9)

    def test_stream_is_flushed_per_row(self, tmp_path):
        path = tmp_path / "v.csv"
        fh = open(path, "w", newline="")
        stream = CsvStream(fh, VOLUME_COLUMNS)
        stream.write(VolumeSample(0.0, 0.0, 0.0, 1.0).row())
        # readable before close: a crash would leave complete rows behind
        with open(path) as reader:
            rows = list(csv.reader(reader))
        fh.close()
        assert rows == [VOLUME_COLUMNS, ["0.000", "0.000000000000", "0.000000000000", "1.000000000000"]]

    def test_summary_json(self):
        log = MetricsLog(termination="frontier_empty", sim_time=12.5)
        log.volumes.append(VolumeSample(12.5, 0.5, 0.25, 0.25))
        buf = io.StringIO()
        write_summary(buf, log.summary())
        data = json.loads(buf.getvalue())
        assert data["termination"] == "frontier_empty"
        assert data["final_unknown"] == 0.25
        assert data["iterations"] == 0
