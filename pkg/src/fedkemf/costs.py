"""Communication-cost accounting and metrics emission."""

import csv
import json
from dataclasses import dataclass

MB = 1024 ** 2
GB = 1024 ** 3

# Per-round per-client payloads (MB) of commonly modeled architectures, for
# reproducing published cost tables without training those models.
PAYLOAD_PRESETS_MB = {
    "resnet20": 2.1,
    "resnet32": 3.2,
    "vgg11": 42.0,
}


@dataclass
class CostModel:
    payload_bytes: int  # per client per round; measured checkpoint size by default
    directions: str = "upload_only"  # or "up_and_down"

    def __post_init__(self):
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be positive")
        if self.directions not in ("upload_only", "up_and_down"):
            raise ValueError("directions must be upload_only or up_and_down")

    def round_bytes(self, sampled_clients: int) -> int:
        factor = 2 if self.directions == "up_and_down" else 1
        return factor * self.payload_bytes * sampled_clients


@dataclass
class RoundRecord:
    round: int
    sampled_clients: int
    global_test_accuracy: float
    mean_client_val_accuracy: float
    mean_train_loss: float
    distill_loss: float
    cumulative_bytes: int
    wall_seconds: float


class WireAudit:
    """Records every network crossing the client/server boundary."""

    def __init__(self):
        self.uploads = []    # (round, client_id, arch, nbytes)
        self.downloads = []  # (round, client_id, arch, nbytes)

    def record_upload(self, round_index, client_id, arch, nbytes):
        self.uploads.append((round_index, client_id, arch, nbytes))

    def record_download(self, round_index, client_id, arch, nbytes):
        self.downloads.append((round_index, client_id, arch, nbytes))

    def crossing_archs(self):
        return [a for _, _, a, _ in self.uploads + self.downloads]

    def uploaded_bytes(self):
        return sum(n for _, _, _, n in self.uploads)


def communication_cost(rounds: int, payload_bytes: float, sampled_clients: int) -> float:
    """Total bytes: rounds x per-client-per-round payload x sampled clients."""
    if rounds < 0 or payload_bytes < 0 or sampled_clients < 0:
        raise ValueError("cost inputs must be non-negative")
    return rounds * payload_bytes * sampled_clients


def speedup(baseline_bytes: float, method_bytes: float) -> float:
    if method_bytes <= 0:
        raise ValueError("method_bytes must be positive")
    return baseline_bytes / method_bytes


def format_gb(nbytes: float) -> str:
    return f"{nbytes / GB:.2f} GB"


CSV_HEADER = [
    "round", "sampled_clients", "global_test_acc", "mean_client_val_acc",
    "mean_train_loss", "distill_loss", "cumulative_bytes", "wall_seconds",
]


def emit_metrics(records, csv_path, target_accuracy=None, extra_summary=None):
    """Write the per-round CSV and a sibling JSON summary; returns the summary dict."""
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([
                r.round, r.sampled_clients,
                f"{r.global_test_accuracy:.6f}", f"{r.mean_client_val_accuracy:.6f}",
                f"{r.mean_train_loss:.6f}", f"{r.distill_loss:.6f}",
                r.cumulative_bytes, f"{r.wall_seconds:.3f}",
            ])

    rounds_to_target = None
    if target_accuracy is not None:
        for r in records:
            if r.global_test_accuracy >= target_accuracy:
                rounds_to_target = r.round
                break
    summary = {
        "final_acc": records[-1].global_test_accuracy if records else None,
        "best_acc": max((r.global_test_accuracy for r in records), default=None),
        "rounds_to_target": rounds_to_target,
        "total_bytes": records[-1].cumulative_bytes if records else 0,
    }
    if extra_summary:
        summary.update(extra_summary)
    summary_path = str(csv_path).rsplit(".", 1)[0] + ".json"
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary
