import csv
import json

import pytest

from fedkemf.costs import (
    GB, MB, PAYLOAD_PRESETS_MB, CostModel, RoundRecord, communication_cost,
    emit_metrics, format_gb, speedup,
)

# Published cost-table rows: (rounds, payload MB, sampled clients, total GB).
BASELINE_ROWS = [
    (163, 2.1, 12, 4.01),
    (183, 3.2, 12, 6.86),
    (166, 42.0, 12, 81.70),
    (400, 2.1, 35, 28.71),
    (400, 3.2, 35, 43.75),
    (109, 2.1, 50, 11.18),
    (109, 3.2, 50, 17.03),
]
KNOWLEDGE_NET_ROWS = [
    (76, 2.1, 12, 1.87),
    (87, 2.1, 12, 2.14),
    (65, 2.1, 12, 1.60),
    (188, 2.1, 35, 13.49),
    (40, 2.1, 35, 2.87),
    (53, 2.1, 50, 5.43),
    (45, 2.1, 50, 4.61),
]


class TestCommunicationCost:
    def test_flagship_row(self):
        total = communication_cost(163, 2.1 * MB, 12)
        assert total / MB == pytest.approx(4107.6)
        assert total / GB == pytest.approx(4.01, rel=0.01)

    def test_zero_rounds(self):
        assert communication_cost(0, 2.1 * MB, 12) == 0

    @pytest.mark.parametrize("rounds,payload_mb,clients,expected_gb",
                             BASELINE_ROWS + KNOWLEDGE_NET_ROWS)
    def test_published_rows_within_one_percent(self, rounds, payload_mb, clients, expected_gb):
        total = communication_cost(rounds, payload_mb * MB, clients)
        assert total / GB == pytest.approx(expected_gb, rel=0.01)


class TestSpeedup:
    def test_large_model_vs_knowledge_net(self):
        assert speedup(81.70, 1.60) == pytest.approx(51.1, rel=0.01)

    def test_identity(self):
        assert speedup(3.5, 3.5) == 1.0

    def test_moderate_row(self):
        assert speedup(4.01, 1.87) == pytest.approx(2.14, rel=0.01)

    def test_rejects_zero_method(self):
        with pytest.raises(ValueError):
            speedup(1.0, 0.0)


def test_payload_presets():
    assert PAYLOAD_PRESETS_MB["resnet20"] == 2.1
    assert PAYLOAD_PRESETS_MB["resnet32"] == 3.2
    assert PAYLOAD_PRESETS_MB["vgg11"] == 42.0


class TestCostModel:
    def test_single_direction_default(self):
        cm = CostModel(payload_bytes=100)
        assert cm.round_bytes(12) == 1200

    def test_up_and_down_doubles(self):
        cm = CostModel(payload_bytes=100, directions="up_and_down")
        assert cm.round_bytes(12) == 2400

    def test_rejects_bad_payload(self):
        with pytest.raises(ValueError):
            CostModel(payload_bytes=0)


def make_records(accs, bytes_per_round=1000):
    return [
        RoundRecord(round=i + 1, sampled_clients=4, global_test_accuracy=a,
                    mean_client_val_accuracy=a, mean_train_loss=1.0 - a,
                    distill_loss=0.1, cumulative_bytes=(i + 1) * bytes_per_round,
                    wall_seconds=0.5)
        for i, a in enumerate(accs)
    ]


class TestEmitMetrics:
    def test_empty_records(self, tmp_path):
        path = tmp_path / "metrics.csv"
        summary = emit_metrics([], path)
        with open(path) as f:
            rows = list(csv.reader(f))
        assert len(rows) == 1  # header only
        assert summary["final_acc"] is None
        assert summary["best_acc"] is None
        assert summary["rounds_to_target"] is None
        assert summary["total_bytes"] == 0

    def test_rows_and_summary(self, tmp_path):
        path = tmp_path / "metrics.csv"
        summary = emit_metrics(make_records([0.5, 0.66, 0.7]), path, target_accuracy=0.65)
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["round", "sampled_clients", "global_test_acc",
                           "mean_client_val_acc", "mean_train_loss", "distill_loss",
                           "cumulative_bytes", "wall_seconds"]
        assert len(rows) == 4
        assert summary["rounds_to_target"] == 2
        assert summary["final_acc"] == pytest.approx(0.7)
        assert summary["best_acc"] == pytest.approx(0.7)
        sidecar = json.loads((tmp_path / "metrics.json").read_text())
        assert sidecar["rounds_to_target"] == 2

    def test_cumulative_bytes_linear_under_constant_sampling(self, tmp_path):
        records = make_records([0.1, 0.2, 0.3], bytes_per_round=250)
        assert [r.cumulative_bytes for r in records] == [250, 500, 750]

    def test_byte_stable_given_identical_records(self, tmp_path):
        records = make_records([0.25, 0.5])
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        emit_metrics(records, a)
        emit_metrics(records, b)
        assert a.read_bytes() == b.read_bytes()


def test_format_gb():
    assert format_gb(4.01 * GB) == "4.01 GB"
