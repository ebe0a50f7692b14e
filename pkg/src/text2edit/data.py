"""Core data types: images, instructions, edit pairs, manifests, vocabulary.

Images are numpy arrays of shape (H, W, 3), float values in [0, 1], sRGB
channel order. They are stored on disk as 8-bit PNG/JPEG and converted by
division by 255.
"""

from __future__ import annotations

import json
import os
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import FormatError, InvalidInputError, ValidationError

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_SPLITS = ("train", "val", "test")

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def validate_image(pixels: np.ndarray) -> np.ndarray:
    """Check the (H, W, 3) / [0, 1] image contract, returning the array."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"image must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"image must be at least 1x1, got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        raise ValidationError(f"image must be float-valued, got dtype {arr.dtype}")
    lo, hi = float(arr.min()), float(arr.max())
    if lo < 0.0 or hi > 1.0:
        raise ValidationError(f"image values must lie in [0, 1], got [{lo}, {hi}]")
    return arr


def load_image(path: str | Path) -> np.ndarray:
    """Load a PNG/JPEG file as an (H, W, 3) float32 array in [0, 1]."""
    with PILImage.open(path) as im:
        rgb = im.convert("RGB")
        return np.asarray(rgb, dtype=np.float32) / 255.0


def save_image(pixels: np.ndarray, path: str | Path) -> None:
    """Write an image as 8-bit PNG/JPEG (format chosen by extension)."""
    arr = validate_image(pixels)
    quantized = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(quantized, mode="RGB").save(path)


@dataclass(frozen=True)
class TextDescription:
    """A tokenized instruction plus its raw source string."""

    raw: str
    tokens: tuple[int, ...]

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise InvalidInputError("description must contain at least one token")

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token/id mapping with reserved PAD=0 and UNK=1 ids."""

    tokens: tuple[str, ...]  # index == id; tokens[0] is PAD, tokens[1] is UNK
    min_count: int = 1
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if len(self.tokens) < 2 or self.tokens[0] != PAD_TOKEN or self.tokens[1] != UNK_TOKEN:
            raise ValidationError("vocabulary must start with the PAD and UNK specials")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValidationError("vocabulary tokens must be unique")
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def save(self, path: str | Path) -> None:
        payload = {"tokens": list(self.tokens), "min_count": self.min_count}
        Path(path).write_text(json.dumps(payload, indent=None, separators=(",", ":")))

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        try:
            payload = json.loads(Path(path).read_text())
            return cls(tokens=tuple(payload["tokens"]), min_count=int(payload["min_count"]))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise FormatError(f"not a vocabulary file: {path}: {exc}") from exc


def split_text(raw: str) -> list[str]:
    """Lowercase and split into word and punctuation tokens."""
    return _TOKEN_RE.findall(raw.lower())


def tokenize(raw: str, vocab: Vocabulary) -> TextDescription:
    """Map a raw instruction to vocabulary ids; unknown words become UNK."""
    if not raw or not raw.strip():
        raise InvalidInputError("cannot tokenize an empty instruction")
    pieces = split_text(raw)
    return TextDescription(raw=raw, tokens=tuple(vocab.id_of(p) for p in pieces))


def build_vocabulary(corpus: list[str], min_count: int = 1) -> Vocabulary:
    """Build a vocabulary over tokens appearing at least ``min_count`` times.

    Ordering is deterministic: descending frequency, ties broken
    lexicographically, so the result is independent of corpus order.
    """
    if not corpus:
        raise InvalidInputError("cannot build a vocabulary from an empty corpus")
    if min_count < 1:
        raise InvalidInputError("min_count must be >= 1")
    counts = Counter()
    for raw in corpus:
        counts.update(split_text(raw))
    kept = [tok for tok, c in counts.items() if c >= min_count]
    kept.sort(key=lambda tok: (-counts[tok], tok))
    return Vocabulary(tokens=(PAD_TOKEN, UNK_TOKEN, *kept), min_count=min_count)


@dataclass(frozen=True)
class EditPair:
    """One training record: an input/target image pair plus instructions.

    ``descriptions`` may be empty only on freshly reversed pairs, which
    await new annotations (reverse-direction text is never derived from
    the forward text).
    """

    input: np.ndarray
    target: np.ndarray
    descriptions: tuple[TextDescription, ...]
    bucket_labels: frozenset[int] = frozenset()
    reversed: bool = False

    def __post_init__(self):
        validate_image(self.input)
        validate_image(self.target)
        if self.input.shape != self.target.shape:
            raise ValidationError(
                f"input/target size mismatch: {self.input.shape} vs {self.target.shape}"
            )


def reverse_pair(pair: EditPair) -> EditPair:
    """Swap input and target to represent the reverse transformation.

    Descriptions and bucket labels are dropped: they describe the forward
    direction and the reverse direction needs fresh annotations.
    """
    return replace(
        pair,
        input=pair.target,
        target=pair.input,
        descriptions=(),
        bucket_labels=frozenset(),
        reversed=not pair.reversed,
    )


@dataclass(frozen=True)
class ManifestRecord:
    """One line of the JSON-lines dataset manifest."""

    input_path: Path
    target_path: Path
    descriptions: tuple[str, ...]
    split: str
    buckets: frozenset[int] = frozenset()
    reversed: bool = False


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]

    @property
    def split_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in _SPLITS}
        for rec in self.records:
            counts[rec.split] += 1
        return counts

    def split(self, name: str) -> tuple[ManifestRecord, ...]:
        if name not in _SPLITS:
            raise InvalidInputError(f"unknown split {name!r}")
        return tuple(r for r in self.records if r.split == name)

    def descriptions(self) -> list[str]:
        out: list[str] = []
        for rec in self.records:
            out.extend(rec.descriptions)
        return out


def _parse_record(obj: dict, base: Path, line_no: int) -> ManifestRecord:
    try:
        input_path = base / obj["input"]
        target_path = base / obj["target"]
        descriptions = tuple(obj["descriptions"])
        split = obj["split"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"manifest line {line_no}: missing field {exc}") from exc
    if split not in _SPLITS:
        raise ValidationError(f"manifest line {line_no}: bad split {split!r}")
    if not descriptions or not all(isinstance(d, str) and d.strip() for d in descriptions):
        raise ValidationError(f"manifest line {line_no}: descriptions must be non-empty strings")
    return ManifestRecord(
        input_path=input_path,
        target_path=target_path,
        descriptions=descriptions,
        split=split,
        buckets=frozenset(int(b) for b in obj.get("buckets", [])),
        reversed=bool(obj.get("reversed", False)),
    )


def load_manifest(path: str | Path, check_images: bool = True) -> DatasetManifest:
    """Parse and validate a JSON-lines manifest.

    Each line holds one record: {"input": path, "target": path,
    "descriptions": [str, ...], "split": "train"|"val"|"test",
    "buckets": [int, ...]?, "reversed": bool?}. Paths are resolved
    relative to the manifest's directory. With ``check_images`` the
    referenced files must exist and each pair must decode to equal sizes.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    base = path.parent
    records = []
    size_cache: dict[Path, tuple[int, int]] = {}

    def image_size(p: Path, line_no: int) -> tuple[int, int]:
        if p not in size_cache:
            if not p.exists():
                raise ValidationError(f"manifest line {line_no}: missing image {p}")
            try:
                with PILImage.open(p) as im:
                    size_cache[p] = im.size
            except Exception as exc:
                raise ValidationError(f"manifest line {line_no}: cannot decode {p}: {exc}") from exc
        return size_cache[p]

    with path.open() as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"manifest line {line_no}: invalid JSON: {exc}") from exc
            rec = _parse_record(obj, base, line_no)
            if check_images:
                in_size = image_size(rec.input_path, line_no)
                tgt_size = image_size(rec.target_path, line_no)
                if in_size != tgt_size:
                    raise ValidationError(
                        f"manifest line {line_no}: image size mismatch "
                        f"{in_size} vs {tgt_size}"
                    )
            records.append(rec)
    return DatasetManifest(records=tuple(records))


def load_pair(record: ManifestRecord, vocab: Vocabulary) -> EditPair:
    """Materialize a manifest record: decode images and tokenize text."""
    return EditPair(
        input=load_image(record.input_path),
        target=load_image(record.target_path),
        descriptions=tuple(tokenize(d, vocab) for d in record.descriptions),
        bucket_labels=record.buckets,
        reversed=record.reversed,
    )


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest as JSON lines with paths relative to the file."""
    path = Path(path)
    base = path.parent
    lines = []
    for rec in manifest.records:
        obj = {
            "input": os.path.relpath(rec.input_path, base),
            "target": os.path.relpath(rec.target_path, base),
            "descriptions": list(rec.descriptions),
            "split": rec.split,
        }
        if rec.buckets:
            obj["buckets"] = sorted(rec.buckets)
        if rec.reversed:
            obj["reversed"] = True
        lines.append(json.dumps(obj, separators=(",", ":")))
    path.write_text("\n".join(lines) + "\n")
