import numpy as np
import pytest

from dyscut.segments import Segment
from dyscut.store import (
    ClipManifest,
    EmbeddingFormatError,
    EmbeddingTruncatedError,
    EmbeddingValueError,
    ManifestError,
    manifest_path,
    read_corpus_index,
    read_embeddings,
    write_corpus_index,
    write_embeddings,
)
from dyscut.windows import WindowConfig


def make_manifest(duration=5.0, gt=None):
    return ClipManifest(
        clip_id="clip00001",
        speaker_id="spk001",
        duration_s=duration,
        window_config=WindowConfig(0.75, 0.1),
        weak_labels=("repetition",),
        gt_segments=gt,
    )


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    matrix = rng.normal(size=(43, 1280)).astype(np.float32)
    manifest = make_manifest(gt=(Segment(1.0, 2.0, "repetition"),))
    path = tmp_path / "clip.emb"
    write_embeddings(matrix, manifest, path)
    back, manifest2 = read_embeddings(path)
    assert np.array_equal(back, matrix)
    assert manifest2 == manifest
    # writing what was read reproduces the file byte for byte
    pay1 = path.read_bytes()
    write_embeddings(back, manifest2, tmp_path / "clip2.emb")
    assert (tmp_path / "clip2.emb").read_bytes() == pay1


def test_file_size_is_header_plus_float32_payload(tmp_path):
    matrix = np.zeros((43, 1280), dtype=np.float32)
    path = tmp_path / "clip.emb"
    write_embeddings(matrix, make_manifest(), path)
    assert path.stat().st_size == 16 + 4 * 43 * 1280
    assert manifest_path(path).exists()


def test_row_count_must_match_windows(tmp_path):
    matrix = np.zeros((10, 8), dtype=np.float32)
    with pytest.raises(ValueError, match="43 windows"):
        write_embeddings(matrix, make_manifest(), tmp_path / "clip.emb")


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "clip.emb"
    write_embeddings(np.zeros((43, 4), dtype=np.float32), make_manifest(), path)
    data = bytearray(path.read_bytes())
    data[:8] = b"NOTMAGIC"
    path.write_bytes(bytes(data))
    with pytest.raises(EmbeddingFormatError):
        read_embeddings(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "clip.emb"
    write_embeddings(np.zeros((43, 4), dtype=np.float32), make_manifest(), path)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(EmbeddingTruncatedError):
        read_embeddings(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "clip.emb"
    write_embeddings(np.zeros((43, 4), dtype=np.float32), make_manifest(), path)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(EmbeddingFormatError):
        read_embeddings(path)


def test_non_finite_payload_rejected(tmp_path):
    path = tmp_path / "clip.emb"
    matrix = np.zeros((43, 4), dtype=np.float32)
    write_embeddings(matrix, make_manifest(), path)
    data = bytearray(path.read_bytes())
    data[16:20] = np.array([np.nan], dtype="<f4").tobytes()
    path.write_bytes(bytes(data))
    with pytest.raises(EmbeddingValueError):
        read_embeddings(path)
    with pytest.raises(EmbeddingValueError):
        write_embeddings(np.full((43, 4), np.inf, dtype=np.float32), make_manifest(), path)


def test_missing_or_bad_manifest(tmp_path):
    path = tmp_path / "clip.emb"
    write_embeddings(np.zeros((43, 4), dtype=np.float32), make_manifest(), path)
    manifest_path(path).unlink()
    with pytest.raises(ManifestError):
        read_embeddings(path)
    manifest_path(path).write_text("{not json")
    with pytest.raises(ManifestError):
        read_embeddings(path)


def test_weak_labels_are_a_sorted_set():
    m = ClipManifest(
        clip_id="c", speaker_id="s", duration_s=5.0,
        window_config=WindowConfig(), weak_labels=("b", "a", "b"),
    )
    assert m.weak_labels == ("a", "b")


def test_corpus_index_round_trip(tmp_path):
    clips = [
        {"clip_id": "c0", "speaker_id": "s0", "split": "train", "file": "c0.emb"},
        {"clip_id": "c1", "speaker_id": "s1", "split": "eval", "file": "c1.emb"},
    ]
    write_corpus_index(tmp_path, ["repetition", "block"], clips)
    index = read_corpus_index(tmp_path)
    assert index.classes == ("repetition", "block")
    assert index.clip_ids("train") == ["c0"]
    assert index.clip_ids("all") == ["c0", "c1"]
    assert index.speakers("eval") == ["s1"]
