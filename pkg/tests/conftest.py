import copy
import json

import pytest

# A hand-built manifest used across tests: one baseline (two seeds) and
# one filtered source at matching step counts.
BASE_MANIFEST = {
    "baseline_id": "full_replay",
    "training_model": {"param_count": 7_000_000_000},
    "geometry": {
        "batch_size": 256,
        "sequence_length": 8192,
        "upsample_ratio": 0.1,
        "epochs": 1.0,
    },
    "sources": {
        "med_filter": {
            "kind": "mbf",
            "mbf_recall": 22.0,
            "annotator_per_token_flops": 2e8,
        }
    },
    "runs": [
        {
            "source_id": "full_replay",
            "seed": 0,
            "steps": 1000,
            "scores": [
                {"task_id": "mmlu_anatomy", "metric": "brier", "value": 0.50, "n_examples": 135},
                {"task_id": "mmlu_college_biology", "metric": "brier", "value": 0.60, "n_examples": 144},
            ],
        },
        {
            "source_id": "full_replay",
            "seed": 1,
            "steps": 1000,
            "scores": [
                {"task_id": "mmlu_anatomy", "metric": "brier", "value": 0.52, "n_examples": 135},
                {"task_id": "mmlu_college_biology", "metric": "brier", "value": 0.62, "n_examples": 144},
            ],
        },
        {
            "source_id": "med_filter",
            "seed": 0,
            "steps": 1000,
            "scores": [
                {"task_id": "mmlu_anatomy", "metric": "brier", "value": 0.45, "n_examples": 135},
                {"task_id": "mmlu_college_biology", "metric": "brier", "value": 0.55, "n_examples": 144},
            ],
            "metadata": {"start_lr": "1.515e-04"},
        },
    ],
}


def manifest_dict():
    return copy.deepcopy(BASE_MANIFEST)


@pytest.fixture
def write_manifest(tmp_path):
    def _write(data, name="manifest.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write
