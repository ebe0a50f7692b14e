"""Image IO, text primitives, and manifest handling."""

import json

import numpy as np
import pytest

from text2edit import (
    DatasetManifest,
    EditPair,
    ManifestRecord,
    ValidationError,
    Vocabulary,
    build_vocabulary,
    load_image,
    load_manifest,
    load_pair,
    reverse_pair,
    save_image,
    save_manifest,
    split_text,
    tokenize,
)
from text2edit.data import PAD_ID, UNK_ID, validate_image
from text2edit.errors import InvalidInputError


def _random_image(rng, h=8, w=8):
    return rng.random((h, w, 3)).astype(np.float32)


def test_validate_image_rejects_bad_shapes_and_ranges():
    with pytest.raises(ValidationError):
        validate_image(np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(ValidationError):
        validate_image(np.zeros((4, 4, 4), dtype=np.float32))
    with pytest.raises(ValidationError):
        validate_image(np.full((4, 4, 3), 1.5, dtype=np.float32))
    with pytest.raises(ValidationError):
        validate_image(np.full((4, 4, 3), -0.1, dtype=np.float32))


def test_image_save_load_round_trip_is_exact_for_quantized_values(tmp_path):
    rng = np.random.default_rng(0)
    img = np.round(rng.random((10, 6, 3)) * 255) / 255
    img = img.astype(np.float32)
    path = tmp_path / "img.png"
    save_image(img, path)
    back = load_image(path)
    assert back.shape == (10, 6, 3)
    assert back.dtype == np.float32
    np.testing.assert_allclose(back, img, atol=1e-7)


def test_save_image_quantizes_by_rounding(tmp_path):
    img = np.full((2, 2, 3), 100.4 / 255.0, dtype=np.float32)
    save_image(img, tmp_path / "a.png")
    assert np.allclose(load_image(tmp_path / "a.png"), 100 / 255)
    img = np.full((2, 2, 3), 100.6 / 255.0, dtype=np.float32)
    save_image(img, tmp_path / "b.png")
    assert np.allclose(load_image(tmp_path / "b.png"), 101 / 255)


def test_split_text_lowercases_and_separates_punctuation():
    assert split_text("Increase the Brightness!") == ["increase", "the", "brightness", "!"]
    assert split_text("it's   fine") == ["it", "'", "s", "fine"]
    assert split_text("") == []


def test_vocabulary_assigns_special_ids_and_falls_back_to_unknown():
    vocab = build_vocabulary(["make it brighter", "make it darker"], min_count=1)
    assert vocab.id_of("<pad>") == PAD_ID
    assert vocab.id_of("<unk>") == UNK_ID
    assert vocab.id_of("make") != UNK_ID
    assert vocab.id_of("zebra") == UNK_ID


def test_vocabulary_orders_by_frequency_then_alphabetically():
    vocab = build_vocabulary(["b b c a", "a"], min_count=1)
    # b appears twice; a twice; c once -> a before b on a tie, c last
    ids = {t: vocab.id_of(t) for t in ("a", "b", "c")}
    assert ids["a"] < ids["b"] < ids["c"]


def test_vocabulary_min_count_filters_rare_tokens():
    vocab = build_vocabulary(["rare common", "common"], min_count=2)
    assert vocab.id_of("common") != UNK_ID
    assert vocab.id_of("rare") == UNK_ID


def test_vocabulary_save_load_round_trip(tmp_path):
    vocab = build_vocabulary(["increase the saturation"], min_count=1)
    vocab.save(tmp_path / "v.json")
    back = Vocabulary.load(tmp_path / "v.json")
    assert back.tokens == vocab.tokens
    assert back.id_of("saturation") == vocab.id_of("saturation")


def test_tokenize_produces_ids_and_preserves_raw():
    vocab = build_vocabulary(["increase the saturation"], min_count=1)
    desc = tokenize("Increase the saturation", vocab)
    assert desc.raw == "Increase the saturation"
    assert desc.tokens == (
        vocab.id_of("increase"),
        vocab.id_of("the"),
        vocab.id_of("saturation"),
    )


def test_tokenize_rejects_empty_text():
    vocab = build_vocabulary(["something"], min_count=1)
    with pytest.raises(InvalidInputError):
        tokenize("   ", vocab)


def test_reverse_pair_swaps_images_and_drops_annotations():
    rng = np.random.default_rng(1)
    vocab = build_vocabulary(["brighten"], min_count=1)
    pair = EditPair(
        input=_random_image(rng),
        target=_random_image(rng),
        descriptions=(tokenize("brighten", vocab),),
        bucket_labels=frozenset({0}),
    )
    rev = reverse_pair(pair)
    np.testing.assert_array_equal(rev.input, pair.target)
    np.testing.assert_array_equal(rev.target, pair.input)
    assert rev.descriptions == ()
    assert rev.bucket_labels == frozenset()
    assert rev.reversed
    assert not reverse_pair(rev).reversed


def test_edit_pair_rejects_size_mismatch():
    rng = np.random.default_rng(2)
    with pytest.raises(ValidationError):
        EditPair(input=_random_image(rng, 8, 8), target=_random_image(rng, 8, 6), descriptions=())


def _write_corpus(tmp_path, n=3):
    rng = np.random.default_rng(3)
    records = []
    for i in range(n):
        inp, tgt = tmp_path / f"in_{i}.png", tmp_path / f"tgt_{i}.png"
        save_image(_random_image(rng), inp)
        save_image(_random_image(rng), tgt)
        records.append(
            ManifestRecord(
                input_path=inp,
                target_path=tgt,
                descriptions=(f"edit number {i}",),
                split="train" if i else "val",
                buckets=frozenset({i % 5}),
            )
        )
    return DatasetManifest(records=tuple(records))


def test_manifest_save_load_round_trip(tmp_path):
    manifest = _write_corpus(tmp_path)
    path = tmp_path / "manifest.jsonl"
    save_manifest(manifest, path)
    back = load_manifest(path)
    assert len(back.records) == 3
    assert back.split_counts == {"train": 2, "val": 1, "test": 0}
    for a, b in zip(back.records, manifest.records):
        assert a.descriptions == b.descriptions
        assert a.buckets == b.buckets
        assert a.input_path.resolve() == b.input_path.resolve()


def test_load_manifest_reports_line_numbers_on_errors(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"input": "a.png", "target": "b.png", "split": "train"}\n')
    with pytest.raises(ValidationError, match="line 1"):
        load_manifest(path, check_images=False)
    path.write_text(
        '{"input": "a.png", "target": "b.png", "descriptions": ["x"], "split": "nope"}\n'
    )
    with pytest.raises(ValidationError, match="line 1"):
        load_manifest(path, check_images=False)


def test_load_manifest_checks_image_existence_and_sizes(tmp_path):
    manifest = _write_corpus(tmp_path)
    path = tmp_path / "manifest.jsonl"
    save_manifest(manifest, path)
    assert load_manifest(path) is not None
    manifest.records[0].input_path.unlink()
    with pytest.raises(ValidationError, match="missing image"):
        load_manifest(path)


def test_load_pair_materializes_images_and_token_ids(tmp_path):
    manifest = _write_corpus(tmp_path)
    vocab = build_vocabulary(manifest.descriptions(), min_count=1)
    pair = load_pair(manifest.records[0], vocab)
    assert pair.input.shape == (8, 8, 3)
    assert pair.descriptions[0].raw == "edit number 0"
    assert all(isinstance(t, int) for t in pair.descriptions[0].tokens)
    assert pair.bucket_labels == manifest.records[0].buckets
