import json

import numpy as np
import pytest

from oralscan.dataset import DatasetManifest, ManifestEntry, load_manifest
from oralscan.imaging import ALL_TIERS, ResolutionTier, gen_synthetic
from oralscan.network import ClassLabel, ModelConfig, build
from oralscan.sweep import run_sweep
from oralscan.trainer import load_checkpoint, save_checkpoint


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweepcorpus")
    manifest = gen_synthetic(4, seed=77, out_dir=root)
    return manifest


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "m.ckpt"
    model = build(ModelConfig(input_size=8, conv_stages=((2, 3),), hidden_units=4, seed=5))
    rng = np.random.default_rng(5)
    for _, arr in model.parameters():
        arr += rng.normal(0, 0.2, arr.shape).astype(np.float32)
    save_checkpoint(model, path, {"seed": 5})
    return load_checkpoint(path)


def test_sweep_prediction_count(corpus, checkpoint):
    report = run_sweep(corpus, checkpoint)
    assert len(report.predictions) == len(corpus) * 5
    for tier in ALL_TIERS:
        assert sum(1 for p in report.predictions if p.tier == tier.name) == len(corpus)


def test_sweep_rows_and_accuracy_bounds(corpus, checkpoint):
    report = run_sweep(corpus, checkpoint)
    assert len(report.tiers) == 5
    for t in report.tiers:
        assert set(t.per_class) == {"cancerous", "non_cancerous", "negative"}
        for cell in t.per_class.values():
            assert 0.0 <= cell["accuracy"] <= 1.0
        assert 0.0 <= t.overall_accuracy <= 1.0
        # per-class accuracy is recall: correct/total of that class
        for c in ClassLabel:
            mine = [p for p in report.predictions
                    if p.tier == t.tier.name and p.truth == c.wire_name]
            correct = sum(1 for p in mine if p.label == p.truth)
            assert t.per_class[c.wire_name]["correct"] == correct
            assert t.per_class[c.wire_name]["total"] == len(mine)


def test_sweep_records_native_geometry(corpus, checkpoint):
    report = run_sweep(corpus, checkpoint)
    for p in report.predictions:
        assert p.height >= 1 and p.width >= 1
        tier = ResolutionTier[p.tier]
        if p.native:
            assert p.height <= tier.height or p.height == tier.height
        else:
            assert p.height == tier.height


def test_sweep_single_tier_omits_fit(corpus, checkpoint):
    report = run_sweep(corpus, checkpoint, tiers=[ResolutionTier.R144])
    assert report.fit is None
    assert "fewer than 2" in report.fit_notice
    assert len(report.predictions) == len(corpus)


def test_sweep_fit_present_with_all_tiers(corpus, checkpoint):
    report = run_sweep(corpus, checkpoint)
    assert report.fit is not None
    assert 0.0 <= report.fit.r2 <= 1.0


def test_sweep_metadata_and_json_shape(corpus, checkpoint, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    report = run_sweep(corpus, checkpoint)
    doc = json.loads(report.to_json())
    assert doc["metadata"]["checkpoint_digest"] == checkpoint.digest
    assert doc["metadata"]["manifest_digest"] == corpus.digest
    assert doc["metadata"]["per_class_accuracy_definition"] == "recall"
    assert doc["metadata"]["timestamp"] == "2023-11-14T22:13:20Z"
    assert len(doc["predictions"]) == len(corpus) * 5
    assert doc["hardware_breakdown"] is None


def test_sweep_csv_layout(corpus, checkpoint):
    report = run_sweep(corpus, checkpoint)
    lines = report.to_csv().strip().split("\n")
    assert lines[0] == "tier,height,pixel_count,class,accuracy"
    assert len(lines) == 1 + 5 * 4  # 3 classes + overall, per tier
    first = lines[1].split(",")
    assert first[0] == "R144" and first[1] == "144" and first[2] == str(256 * 144)
    assert {line.split(",")[3] for line in lines[1:]} == {
        "cancerous", "non_cancerous", "negative", "overall",
    }


def test_sweep_hardware_breakdown(tmp_path, checkpoint):
    manifest = gen_synthetic(2, seed=78, out_dir=tmp_path)
    tagged = []
    for i, e in enumerate(manifest.entries):
        tagged.append(ManifestEntry(e.path, e.label, "with" if i % 2 == 0 else "without"))
    manifest = DatasetManifest.from_entries(manifest.root, tagged)
    report = run_sweep(manifest, checkpoint, tiers=[ResolutionTier.R360])
    assert set(report.hardware_breakdown) == {"with", "without"}
    cell = report.hardware_breakdown["with"]["R360"]
    assert cell["n"] == 3
    assert 0.0 <= cell["overall_accuracy"] <= 1.0


def test_sweep_deterministic_bytes(corpus, checkpoint, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    a = run_sweep(corpus, checkpoint)
    b = run_sweep(corpus, checkpoint)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()


def test_sweep_rejects_empty_inputs(corpus, checkpoint):
    empty = DatasetManifest.from_entries(corpus.root, [])
    with pytest.raises(ValueError):
        run_sweep(empty, checkpoint)
    with pytest.raises(ValueError):
        run_sweep(corpus, checkpoint, tiers=[])
