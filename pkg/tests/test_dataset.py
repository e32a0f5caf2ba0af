import json

import numpy as np
import pytest

from oralscan.dataset import (
    DatasetManifest,
    ManifestEntry,
    ManifestError,
    load_manifest,
    load_samples,
    save_manifest,
    validate,
)
from oralscan.imaging import Image, encode_ppm, gen_synthetic
from oralscan.network import ClassLabel


def write_manifest(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def entry_line(path, label, hardware=None):
    return json.dumps({"path": path, "label": label, "hardware": hardware})


def write_image(root, name, w=4, h=4):
    img = Image(w, h, np.zeros((h, w, 3), dtype=np.uint8))
    (root / name).write_bytes(encode_ppm(img))


def test_load_three_valid_lines(tmp_path):
    write_manifest(
        tmp_path / "m.jsonl",
        [
            entry_line("a.ppm", "cancerous"),
            entry_line("b.ppm", "non_cancerous", "with"),
            entry_line("c.ppm", "negative", "without"),
        ],
    )
    manifest = load_manifest(tmp_path / "m.jsonl")
    assert len(manifest) == 3
    assert manifest.entries[0].label is ClassLabel.CANCEROUS
    assert manifest.entries[1].hardware == "with"
    assert manifest.entries[2].hardware == "without"
    assert manifest.root == tmp_path


def test_duplicate_path_names_line(tmp_path):
    write_manifest(
        tmp_path / "m.jsonl",
        [entry_line("a.ppm", "cancerous"), entry_line("a.ppm", "negative")],
    )
    with pytest.raises(ManifestError, match="line 2"):
        load_manifest(tmp_path / "m.jsonl")


def test_unknown_label(tmp_path):
    write_manifest(tmp_path / "m.jsonl", [entry_line("a.ppm", "benign")])
    with pytest.raises(ManifestError, match="benign"):
        load_manifest(tmp_path / "m.jsonl")


def test_malformed_json_names_line(tmp_path):
    write_manifest(tmp_path / "m.jsonl", [entry_line("a.ppm", "negative"), "{nope"])
    with pytest.raises(ManifestError, match="line 2"):
        load_manifest(tmp_path / "m.jsonl")


def test_bad_hardware_tag(tmp_path):
    write_manifest(tmp_path / "m.jsonl", [entry_line("a.ppm", "negative", "maybe")])
    with pytest.raises(ManifestError, match="hardware"):
        load_manifest(tmp_path / "m.jsonl")


def test_absolute_and_traversal_paths_rejected(tmp_path):
    write_manifest(tmp_path / "m.jsonl", [entry_line("/etc/passwd", "negative")])
    with pytest.raises(ManifestError, match="absolute"):
        load_manifest(tmp_path / "m.jsonl")
    write_manifest(tmp_path / "m.jsonl", [entry_line("../a.ppm", "negative")])
    with pytest.raises(ManifestError, match="traversal"):
        load_manifest(tmp_path / "m.jsonl")


def test_digest_tracks_entry_list(tmp_path):
    lines = [entry_line("a.ppm", "cancerous"), entry_line("b.ppm", "negative")]
    write_manifest(tmp_path / "m.jsonl", lines)
    d1 = load_manifest(tmp_path / "m.jsonl").digest
    # same content reloaded -> same digest
    assert load_manifest(tmp_path / "m.jsonl").digest == d1
    # different entry list -> different digest
    write_manifest(tmp_path / "m.jsonl", lines[::-1])
    assert load_manifest(tmp_path / "m.jsonl").digest != d1


def test_save_load_round_trip(tmp_path):
    manifest = DatasetManifest.from_entries(
        tmp_path,
        [
            ManifestEntry("x.ppm", ClassLabel.NEGATIVE, "with"),
            ManifestEntry("y.ppm", ClassLabel.CANCEROUS, None),
        ],
    )
    save_manifest(manifest, tmp_path / "out.jsonl")
    again = load_manifest(tmp_path / "out.jsonl")
    assert again.entries == manifest.entries
    assert again.digest == manifest.digest


def test_validate_clean_synthetic_corpus(tmp_path):
    manifest = gen_synthetic(3, seed=1, out_dir=tmp_path)
    report = validate(manifest)
    assert report.ok
    assert report.total == 9
    assert report.class_counts == {"cancerous": 3, "non_cancerous": 3, "negative": 3}
    assert report.hardware_counts["untagged"] == 9


def test_validate_reports_missing_file(tmp_path):
    write_image(tmp_path, "ok.ppm")
    write_manifest(
        tmp_path / "m.jsonl",
        [entry_line("ok.ppm", "negative"), entry_line("gone.ppm", "cancerous")],
    )
    report = validate(load_manifest(tmp_path / "m.jsonl"))
    assert len(report.problems) == 1
    assert "gone.ppm" in report.problems[0]


def test_validate_reports_undecodable_file(tmp_path):
    (tmp_path / "bad.ppm").write_bytes(b"P6 9 9 255\n123")
    write_manifest(tmp_path / "m.jsonl", [entry_line("bad.ppm", "negative")])
    report = validate(load_manifest(tmp_path / "m.jsonl"))
    assert len(report.problems) == 1
    assert "bad.ppm" in report.problems[0]


def test_validate_full_corpus_counts(tmp_path):
    # full-size corpus: 3275 oral images across the two oral classes + 1018 negatives
    lines = []
    for i in range(1638):
        lines.append(entry_line(f"c{i}.ppm", "cancerous"))
    for i in range(1637):
        lines.append(entry_line(f"n{i}.ppm", "non_cancerous"))
    for i in range(1018):
        lines.append(entry_line(f"g{i}.ppm", "negative"))
    write_manifest(tmp_path / "m.jsonl", lines)
    report = validate(load_manifest(tmp_path / "m.jsonl"))
    assert report.total == 4293
    assert report.class_counts["cancerous"] + report.class_counts["non_cancerous"] == 3275
    assert report.class_counts["negative"] == 1018


def test_validate_does_not_mutate_manifest(tmp_path):
    manifest = gen_synthetic(2, seed=3, out_dir=tmp_path)
    before = (manifest.entries, manifest.digest)
    validate(manifest)
    assert (manifest.entries, manifest.digest) == before


def test_load_samples_shapes_and_labels(tmp_path):
    manifest = gen_synthetic(2, seed=4, out_dir=tmp_path)
    samples = load_samples(manifest, side=16)
    assert len(samples) == 6
    for x, label in samples:
        assert x.shape == (3, 16, 16)
        assert x.dtype == np.float32
        assert 0 <= label <= 2
