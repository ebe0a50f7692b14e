"""Synthetic transforms, bucket statistics, and corpus generation."""

import numpy as np
import pytest

from text2edit import (
    EditPair,
    GlobalTransform,
    InstructionTemplateBank,
    apply_transform,
    assign_buckets,
    generate_corpus,
    load_manifest,
    load_template_bank,
    luminance,
    make_texture,
)
from text2edit.errors import InvalidInputError, ValidationError
from text2edit.synth import (
    DIRECTIONS,
    KINDS,
    PARAM_RANGES,
    BucketThresholds,
    _draw_transform,
    load_template_payload,
)


def _img(seed, h=8, w=8):
    return np.random.default_rng(seed).random((h, w, 3)).astype(np.float32)


def test_brightness_is_a_per_pixel_gain():
    img = _img(0)
    out = apply_transform(img, GlobalTransform("brightness", gain=1.3))
    np.testing.assert_allclose(out, np.clip(1.3 * img, 0, 1), atol=1e-7)


def test_contrast_pivots_around_mid_gray():
    img = _img(1)
    out = apply_transform(img, GlobalTransform("contrast", contrast=1.5))
    np.testing.assert_allclose(out, np.clip(0.5 + 1.5 * (img - 0.5), 0, 1), atol=1e-7)
    # mid-gray is a fixed point at any strength
    gray = np.full((4, 4, 3), 0.5, dtype=np.float32)
    np.testing.assert_allclose(
        apply_transform(gray, GlobalTransform("contrast", contrast=1.8)), gray, atol=1e-7
    )


def test_saturation_interpolates_toward_luma():
    img = _img(2)
    luma = (0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2])[..., None]
    out = apply_transform(img, GlobalTransform("saturation", saturation=1.4))
    np.testing.assert_allclose(out, np.clip(luma + 1.4 * (img - luma), 0, 1), atol=1e-6)
    # zero saturation collapses to a gray image with equal channels
    gray = apply_transform(img, GlobalTransform("saturation", saturation=0.0))
    np.testing.assert_allclose(gray[..., 0], gray[..., 1], atol=1e-7)
    np.testing.assert_allclose(gray[..., 0], gray[..., 2], atol=1e-7)


def test_white_balance_scales_channels_independently():
    img = _img(3)
    gains = (1.2, 1.0, 0.8)
    out = apply_transform(img, GlobalTransform("white_balance", channel_gains=gains))
    want = np.clip(img * np.asarray(gains, dtype=img.dtype), 0, 1)
    np.testing.assert_allclose(out, want, atol=1e-7)


def test_identity_transform_is_a_fixed_point():
    img = _img(4)
    out = apply_transform(img, GlobalTransform("identity"))
    np.testing.assert_array_equal(out, img)
    assert out is not img  # a copy, so later edits cannot alias


def test_unit_parameters_change_nothing():
    img = _img(5)
    for t in (
        GlobalTransform("brightness", gain=1.0),
        GlobalTransform("contrast", contrast=1.0),
        GlobalTransform("saturation", saturation=1.0),
        GlobalTransform("white_balance", channel_gains=(1.0, 1.0, 1.0)),
    ):
        np.testing.assert_allclose(apply_transform(img, t), img, atol=1e-6)


def test_outputs_are_clamped():
    bright = np.full((4, 4, 3), 0.9, dtype=np.float32)
    out = apply_transform(bright, GlobalTransform("brightness", gain=1.6))
    assert out.max() == 1.0 and out.min() >= 0.0


def test_parameters_outside_the_allowed_ranges_are_rejected():
    img = _img(6)
    with pytest.raises(InvalidInputError):
        apply_transform(img, GlobalTransform("brightness", gain=0.5))
    with pytest.raises(InvalidInputError):
        apply_transform(img, GlobalTransform("contrast", contrast=2.0))
    with pytest.raises(InvalidInputError):
        apply_transform(img, GlobalTransform("saturation", saturation=2.5))
    with pytest.raises(InvalidInputError):
        apply_transform(img, GlobalTransform("white_balance", channel_gains=(1.5, 1.0, 1.0)))
    with pytest.raises(InvalidInputError):
        GlobalTransform("sharpen")


def test_luminance_weights():
    img = np.zeros((2, 2, 3), dtype=np.float64)
    img[..., 0] = 1.0
    np.testing.assert_allclose(luminance(img), 0.299)
    img = np.ones((2, 2, 3))
    np.testing.assert_allclose(luminance(img), 1.0, atol=1e-12)


def _pair(base, transform):
    return EditPair(input=base, target=apply_transform(base, transform), descriptions=())


def test_bucket_assignment_per_kind():
    rng = np.random.default_rng(7)
    base = make_texture(rng, 16, 16)
    assert assign_buckets(_pair(base, GlobalTransform("brightness", gain=1.4))) >= {0}
    assert assign_buckets(_pair(base, GlobalTransform("brightness", gain=0.7))) >= {1}
    assert 2 in assign_buckets(_pair(base, GlobalTransform("saturation", saturation=1.9)))
    assert 3 in assign_buckets(_pair(base, GlobalTransform("saturation", saturation=0.1)))
    wb = GlobalTransform("white_balance", channel_gains=(1.2, 1.0, 0.8))
    assert 4 in assign_buckets(_pair(base, wb))
    assert assign_buckets(_pair(base, GlobalTransform("identity"))) == frozenset()


def test_bucket_four_requires_stable_brightness():
    # a pure gain shifts gray strongly, so bucket 4 must not fire even
    # though channel means move apart after clamping
    base = make_texture(np.random.default_rng(8), 16, 16)
    buckets = assign_buckets(_pair(base, GlobalTransform("brightness", gain=1.6)))
    assert 4 not in buckets


def test_bucket_statistics_match_hand_computation():
    base = np.zeros((2, 2, 3), dtype=np.float64)
    base[..., :] = (0.4, 0.5, 0.6)
    target = base * 1.2
    pair = EditPair(input=base, target=np.clip(target, 0, 1), descriptions=())
    d_gray = luminance(target).mean() - luminance(base).mean()
    assert d_gray > 0.03
    assert 0 in assign_buckets(pair)
    # tighter thresholds flip the outcome
    assert 0 not in assign_buckets(pair, BucketThresholds(gray=d_gray + 0.01))


def test_texture_is_seeded_and_quantized():
    a = make_texture(np.random.default_rng(9), 12, 10)
    b = make_texture(np.random.default_rng(9), 12, 10)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (12, 10, 3)
    assert a.min() >= 0.0 and a.max() <= 1.0
    np.testing.assert_array_equal(np.round(a * 255), a * 255)


def test_template_bank_covers_every_kind_and_direction():
    bank = load_template_bank()
    for kind in ("brightness", "contrast", "saturation", "white_balance"):
        for direction in DIRECTIONS[kind]:
            assert len(bank.templates(kind, direction)) >= 2


def test_template_bank_validation():
    with pytest.raises(ValidationError, match="unknown kind"):
        InstructionTemplateBank({"sharpen": {"up": ("a", "b")}})
    with pytest.raises(ValidationError, match="direction"):
        InstructionTemplateBank({"brightness": {"warm": ("a", "b")}})
    with pytest.raises(ValidationError, match="at least 2"):
        InstructionTemplateBank({"brightness": {"up": ("only one",)}})
    small = InstructionTemplateBank({"brightness": {"up": ("a", "b")}})
    with pytest.raises(InvalidInputError):
        small.templates("contrast", "up")


def test_template_sampling_is_seeded_without_replacement():
    bank = load_template_bank()
    picks = bank.sample("brightness", "up", np.random.default_rng(0), 2)
    again = bank.sample("brightness", "up", np.random.default_rng(0), 2)
    assert picks == again
    assert len(set(picks)) == 2
    # asking for more than the pool holds returns the whole pool
    pool = bank.templates("brightness", "up")
    many = bank.sample("brightness", "up", np.random.default_rng(1), 99)
    assert sorted(many) == sorted(pool)


def test_identity_template_payload_shape():
    payload = load_template_payload()
    aug = payload["identity_augmentation"]
    assert aug["templates"] and aug["slots"]
    for name in ("subject", "praise", "noun"):
        assert name in aug["slots"]


def test_draw_transform_respects_direction_and_ranges():
    rng = np.random.default_rng(10)
    for _ in range(20):
        up = _draw_transform("brightness", "up", rng)
        down = _draw_transform("brightness", "down", rng)
        assert up.gain > 1.0 and down.gain < 1.0
        lo, hi = PARAM_RANGES["brightness"]
        assert lo <= up.gain <= hi and lo <= down.gain <= hi
        warm = _draw_transform("white_balance", "warm", rng)
        r, g, b = warm.channel_gains
        assert r > 1.0 and g == 1.0 and b < 1.0
        assert r - 1.0 == pytest.approx(1.0 - b, abs=1e-12)


def test_generate_corpus_layout_and_splits(tmp_path):
    manifest = generate_corpus(20, seed=3, out_dir=tmp_path, image_size=(16, 16))
    assert len(manifest.records) == 20
    assert (tmp_path / "manifest.jsonl").exists()
    splits = [r.split for r in manifest.records]
    assert splits.count("train") == 14  # round(0.7 * 20)
    assert splits.count("val") == 3
    assert splits.count("test") == 3
    for record in manifest.records:
        assert record.input_path.exists() and record.target_path.exists()
        assert 1 <= len(record.descriptions) <= 2


def test_generate_corpus_is_byte_reproducible(tmp_path):
    generate_corpus(6, seed=5, out_dir=tmp_path / "a", image_size=(16, 16))
    generate_corpus(6, seed=5, out_dir=tmp_path / "b", image_size=(16, 16))
    text_a = (tmp_path / "a" / "manifest.jsonl").read_bytes()
    text_b = (tmp_path / "b" / "manifest.jsonl").read_bytes()
    assert text_a.replace(b"/a/", b"/b/") == text_b
    for img in sorted((tmp_path / "a" / "images").iterdir()):
        assert img.read_bytes() == (tmp_path / "b" / "images" / img.name).read_bytes()


def test_generate_corpus_round_trips_through_the_manifest(tmp_path):
    generate_corpus(4, seed=1, out_dir=tmp_path, image_size=(16, 16))
    loaded = load_manifest(tmp_path / "manifest.jsonl")
    assert len(loaded.records) == 4


def test_generate_corpus_restricts_kinds(tmp_path):
    bank = load_template_bank()
    manifest = generate_corpus(
        8, kinds=("brightness",), seed=2, out_dir=tmp_path, image_size=(16, 16), bank=bank
    )
    up = set(bank.templates("brightness", "up"))
    down = set(bank.templates("brightness", "down"))
    for record in manifest.records:
        assert all(d in up | down for d in record.descriptions)
        # a gain always moves mean gray, so bucket 0 or 1 fires (a gain also
        # scales chroma, so 2/3 may co-fire; 4 requires stable brightness)
        assert record.buckets & {0, 1}
        assert 4 not in record.buckets


def test_generate_corpus_validation(tmp_path):
    with pytest.raises(InvalidInputError):
        generate_corpus(0, out_dir=tmp_path)
    with pytest.raises(InvalidInputError):
        generate_corpus(2, kinds=("bogus",), out_dir=tmp_path)


def test_generate_corpus_custom_image_source(tmp_path):
    flat = np.full((16, 16, 3), 0.5, dtype=np.float32)
    manifest = generate_corpus(
        2,
        kinds=("brightness",),
        image_source=lambda rng, h, w: flat,
        seed=0,
        out_dir=tmp_path,
        image_size=(16, 16),
    )
    from text2edit import load_image

    np.testing.assert_allclose(load_image(manifest.records[0].input_path), flat, atol=1 / 255)


def test_kind_constants_are_consistent():
    assert set(PARAM_RANGES) == set(KINDS) - {"identity"}
    for kind in KINDS:
        assert kind in DIRECTIONS
