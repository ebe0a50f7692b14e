"""Synthetic edit corpus: closed-form global transforms, templated text.

Each pair is produced by applying one parametric transform to a procedurally
generated (or user-supplied) base image, paired with 1-2 instruction template
phrasings for the transform's direction. Because the transforms are closed
forms, every generated pair has an exact oracle for what the edit did, which
is what the desk-scale training and evaluation checks rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .data import (
    DatasetManifest,
    EditPair,
    ManifestRecord,
    load_image,
    save_image,
    save_manifest,
    validate_image,
)
from .errors import InvalidInputError, ValidationError

KINDS = ("brightness", "contrast", "saturation", "white_balance", "identity")

DIRECTIONS = {
    "brightness": ("up", "down"),
    "contrast": ("up", "down"),
    "saturation": ("up", "down"),
    "white_balance": ("warm", "cool"),
    "identity": ("none",),
}

# allowed parameter intervals, checked on application
PARAM_RANGES = {
    "brightness": (0.6, 1.6),
    "contrast": (0.5, 1.8),
    "saturation": (0.0, 2.0),
    "white_balance": (0.7, 1.4),
}

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

NUM_BUCKETS = 5

_ASSETS = Path(__file__).parent / "assets"


@dataclass(frozen=True)
class GlobalTransform:
    """One parametric whole-image edit; only the kind's own field applies."""

    kind: str
    gain: float = 1.0
    contrast: float = 1.0
    saturation: float = 1.0
    channel_gains: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown transform kind {self.kind!r}")


def _check_range(kind: str, *values: float) -> None:
    lo, hi = PARAM_RANGES[kind]
    for v in values:
        if not lo <= v <= hi:
            raise InvalidInputError(f"{kind} parameter {v} outside [{lo}, {hi}]")


def luminance(image: np.ndarray) -> np.ndarray:
    """Per-pixel luma under the standard-definition weighting."""
    r, g, b = LUMA_WEIGHTS
    return r * image[..., 0] + g * image[..., 1] + b * image[..., 2]


def apply_transform(image: np.ndarray, t: GlobalTransform) -> np.ndarray:
    """Apply one global edit, clamping the result to [0, 1]."""
    img = validate_image(image)
    if t.kind == "identity":
        return img.copy()
    if t.kind == "brightness":
        _check_range("brightness", t.gain)
        out = t.gain * img
    elif t.kind == "contrast":
        _check_range("contrast", t.contrast)
        out = 0.5 + t.contrast * (img - 0.5)
    elif t.kind == "saturation":
        _check_range("saturation", t.saturation)
        luma = luminance(img)[..., None]
        out = luma + t.saturation * (img - luma)
    else:
        _check_range("white_balance", *t.channel_gains)
        out = img * np.asarray(t.channel_gains, dtype=img.dtype)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class BucketThresholds:
    """Decision margins for the bucket-assignment statistics."""

    gray: float = 0.03
    spread: float = 0.02
    color: float = 0.03


def _mean_gray(image: np.ndarray) -> float:
    return float(luminance(image).mean())


def _mean_spread(image: np.ndarray) -> float:
    # mean absolute chroma: how far channels sit from their pixel's luma
    luma = luminance(image)[..., None]
    return float(np.abs(image - luma).mean())


def _color_deviation(image: np.ndarray) -> np.ndarray:
    means = image.reshape(-1, 3).mean(axis=0)
    return means - means.mean()


def assign_buckets(pair: EditPair, thresholds: BucketThresholds | None = None) -> frozenset[int]:
    """Classify an edit by image statistics into zero or more buckets.

    0 brightens, 1 darkens, 2 saturates, 3 desaturates, 4 shifts color
    balance without a brightness change. Identity-like pairs match nothing.
    """
    th = thresholds or BucketThresholds()
    d_gray = _mean_gray(pair.target) - _mean_gray(pair.input)
    d_spread = _mean_spread(pair.target) - _mean_spread(pair.input)
    d_color = float(np.linalg.norm(_color_deviation(pair.target) - _color_deviation(pair.input)))
    buckets = set()
    if d_gray > th.gray:
        buckets.add(0)
    if d_gray < -th.gray:
        buckets.add(1)
    if d_spread > th.spread:
        buckets.add(2)
    if d_spread < -th.spread:
        buckets.add(3)
    if d_color > th.color and abs(d_gray) <= th.gray:
        buckets.add(4)
    return frozenset(buckets)


class InstructionTemplateBank:
    """Instruction phrasings per (transform kind, direction)."""

    def __init__(self, instructions: dict[str, dict[str, tuple[str, ...]]]):
        for kind, directions in instructions.items():
            if kind not in KINDS:
                raise ValidationError(f"template bank names unknown kind {kind!r}")
            for direction, templates in directions.items():
                if direction not in DIRECTIONS[kind]:
                    raise ValidationError(f"unknown direction {direction!r} for {kind}")
                if len(templates) < 2:
                    raise ValidationError(f"{kind}/{direction} needs at least 2 templates")
        self.instructions = instructions

    def templates(self, kind: str, direction: str) -> tuple[str, ...]:
        try:
            return tuple(self.instructions[kind][direction])
        except KeyError as exc:
            raise InvalidInputError(f"no templates for {kind}/{direction}") from exc

    def sample(self, kind: str, direction: str, rng: np.random.Generator, count: int) -> list[str]:
        pool = self.templates(kind, direction)
        count = min(count, len(pool))
        picks = rng.choice(len(pool), size=count, replace=False)
        return [pool[int(i)] for i in picks]


def load_template_payload(path: str | Path | None = None) -> dict:
    """Read the shipped template JSON (instructions + identity phrasings)."""
    payload = json.loads(Path(path or _ASSETS / "templates.json").read_text())
    return payload


def load_template_bank(path: str | Path | None = None) -> InstructionTemplateBank:
    payload = load_template_payload(path)
    instructions = {
        kind: {d: tuple(ts) for d, ts in directions.items()}
        for kind, directions in payload["instructions"].items()
    }
    return InstructionTemplateBank(instructions)


def make_texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Seeded gradient-plus-noise texture, quantized to 8-bit levels.

    Channel means stay near mid-gray so the default transform parameter
    ranges produce unambiguous bucket statistics.
    """
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    ys = ys / max(height - 1, 1)
    xs = xs / max(width - 1, 1)
    c0 = rng.uniform(0.3, 0.7, size=3)
    c1 = rng.uniform(0.3, 0.7, size=3)
    direction = rng.uniform(-1.0, 1.0, size=2)
    ramp = direction[0] * xs + direction[1] * ys
    span = ramp.max() - ramp.min()
    ramp = (ramp - ramp.min()) / (span if span > 0 else 1.0)
    img = c0[None, None, :] + ramp[..., None] * (c1 - c0)[None, None, :]
    freq = rng.uniform(1.0, 4.0, size=2)
    phase = rng.uniform(0.0, 2 * np.pi)
    stripes = 0.08 * np.sin(2 * np.pi * (freq[0] * xs + freq[1] * ys) + phase)
    img = img + stripes[..., None] * rng.uniform(0.4, 1.0, size=3)[None, None, :]
    img = img + rng.uniform(-0.05, 0.05, size=img.shape)
    img = np.clip(img, 0.02, 0.98)
    return np.round(img * 255.0) / 255.0


def _draw_transform(kind: str, direction: str, rng: np.random.Generator) -> GlobalTransform:
    if kind == "brightness":
        gain = rng.uniform(1.2, 1.6) if direction == "up" else rng.uniform(0.6, 0.85)
        return GlobalTransform(kind, gain=gain)
    if kind == "contrast":
        c = rng.uniform(1.25, 1.8) if direction == "up" else rng.uniform(0.5, 0.8)
        return GlobalTransform(kind, contrast=c)
    if kind == "saturation":
        s = rng.uniform(1.3, 2.0) if direction == "up" else rng.uniform(0.0, 0.7)
        return GlobalTransform(kind, saturation=s)
    if kind == "white_balance":
        # push red and blue in opposite directions; luma stays near τ_g
        d = rng.uniform(0.12, 0.26)
        gains = (1.0 + d, 1.0, 1.0 - d) if direction == "warm" else (1.0 - d, 1.0, 1.0 + d)
        return GlobalTransform(kind, channel_gains=gains)
    return GlobalTransform("identity")


def _base_image_loader(image_source, image_size: tuple[int, int]):
    height, width = image_size
    if image_source is None:
        return lambda rng: make_texture(rng, height, width)
    if callable(image_source):
        return lambda rng: validate_image(image_source(rng, height, width))
    source = Path(image_source)
    files = sorted(p for p in source.glob("*") if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise InvalidInputError(f"image source {source} holds no PNG/JPEG files")

    def load_base(rng: np.random.Generator) -> np.ndarray:
        img = load_image(files[int(rng.integers(len(files)))])
        if img.shape[:2] != (height, width):
            resized = PILImage.fromarray((img * 255).astype(np.uint8)).resize(
                (width, height), PILImage.BILINEAR
            )
            img = np.asarray(resized, dtype=np.float32) / 255.0
        return img

    return load_base


def generate_corpus(
    n_pairs: int,
    kinds: tuple[str, ...] | None = None,
    image_source=None,
    seed: int = 0,
    out_dir: str | Path = "synth-data",
    image_size: tuple[int, int] = (64, 64),
    bank: InstructionTemplateBank | None = None,
) -> DatasetManifest:
    """Generate a seeded corpus of edit pairs under ``out_dir``.

    Images land in ``out_dir/images`` and the manifest in
    ``out_dir/manifest.jsonl``, split 70/15/15 by a seeded permutation.
    Every record carries 1-2 template phrasings and its bucket labels.
    """
    if n_pairs < 1:
        raise InvalidInputError("n_pairs must be >= 1")
    kinds = tuple(kinds) if kinds else ("brightness", "contrast", "saturation", "white_balance")
    for kind in kinds:
        if kind not in KINDS:
            raise InvalidInputError(f"unknown transform kind {kind!r}")
    bank = bank or load_template_bank()
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    n_train = round(0.70 * n_pairs)
    n_val = round(0.15 * n_pairs)
    order = np.random.default_rng(seed).permutation(n_pairs)
    split_of = {}
    for rank, idx in enumerate(order):
        split_of[int(idx)] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")

    load_base = _base_image_loader(image_source, image_size)
    records = []
    for i in range(n_pairs):
        rng = np.random.default_rng([seed, i])
        base = load_base(rng)
        kind = kinds[int(rng.integers(len(kinds)))]
        direction = DIRECTIONS[kind][int(rng.integers(len(DIRECTIONS[kind])))]
        transform = _draw_transform(kind, direction, rng)
        target = apply_transform(base, transform)
        descriptions = bank.sample(kind, direction, rng, int(rng.integers(1, 3)))
        input_path = images_dir / f"pair_{i:05d}_in.png"
        target_path = images_dir / f"pair_{i:05d}_tgt.png"
        save_image(base, input_path)
        save_image(target, target_path)
        pair = EditPair(
            input=load_image(input_path), target=load_image(target_path), descriptions=()
        )
        records.append(
            ManifestRecord(
                input_path=input_path,
                target_path=target_path,
                descriptions=tuple(descriptions),
                split=split_of[i],
                buckets=assign_buckets(pair),
            )
        )
    manifest = DatasetManifest(records=tuple(records))
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest
