"""Text-aware conditional discriminator and its training-instance machinery.

The discriminator scores (input image, candidate image, text) triples. Each
training pair expands into four labeled instances: the ground-truth edit under
its own description is the lone positive; the generated image and a mismatched
"random" description supply three negatives. Random descriptions are drawn so
their frequent unigrams never co-occur with the query's, which keeps the
negative texts semantically unrelated rather than merely different.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .backbone import LEAKY_SLOPE, image_to_tensor
from .data import TextDescription, split_text, validate_image
from .errors import InvalidInputError, ShapeError

POSITIVE = "positive"
NEGATIVE = "negative"

# function words only; edit-relevant vocabulary (more, less, left...) stays in
STOPWORDS = frozenset(
    "a an the of to in on at by for with and or but "
    "is are was were be been it its this that these".split()
)

DEFAULT_TOP_M = 100


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Shape of the conv trunk and where the text vector enters it."""

    stage_widths: tuple[int, ...] = (64, 128, 256, 512)
    text_dim: int = 256
    text_stage: int = 2

    def __post_init__(self):
        if len(self.stage_widths) < 1:
            raise InvalidInputError("discriminator needs at least one conv stage")
        if not 0 <= self.text_stage <= len(self.stage_widths):
            raise InvalidInputError(
                f"text_stage {self.text_stage} outside 0..{len(self.stage_widths)}"
            )

    @property
    def num_stages(self) -> int:
        return len(self.stage_widths)

    @property
    def spatial_multiple(self) -> int:
        return 2 ** self.num_stages

    def to_dict(self) -> dict:
        return {
            "stage_widths": list(self.stage_widths),
            "text_dim": self.text_dim,
            "text_stage": self.text_stage,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DiscriminatorConfig":
        return cls(
            stage_widths=tuple(payload["stage_widths"]),
            text_dim=int(payload["text_dim"]),
            text_stage=int(payload["text_stage"]),
        )


class TextAwareDiscriminator(nn.Module):
    """Patch discriminator over depth-concatenated (input, candidate) images.

    The text vector is tiled over the feature map and depth-concatenated once
    the image has been downsampled ``text_stage`` times. A 1-channel conv head
    produces a patch score map whose spatial mean passes through a sigmoid.
    """

    def __init__(self, config: DiscriminatorConfig | None = None, dtype=torch.float32):
        super().__init__()
        self.config = config or DiscriminatorConfig()
        widths = self.config.stage_widths
        stages = []
        in_ch = 6
        for i, width in enumerate(widths):
            if i == self.config.text_stage:
                in_ch += self.config.text_dim
            layers = [nn.Conv2d(in_ch, width, 4, stride=2, padding=1, dtype=dtype)]
            if i < len(widths) - 1:
                # last stage can reach 1x1 spatially, where InstanceNorm is undefined
                layers.append(nn.InstanceNorm2d(width, dtype=dtype))
            layers.append(nn.LeakyReLU(LEAKY_SLOPE))
            stages.append(nn.Sequential(*layers))
            in_ch = width
        if self.config.text_stage == len(widths):
            in_ch += self.config.text_dim
        self.stages = nn.ModuleList(stages)
        self.head = nn.Conv2d(in_ch, 1, 1, dtype=dtype)
        self.dtype = dtype

    def check_inputs(self, x_input: torch.Tensor, candidate: torch.Tensor) -> None:
        if x_input.shape != candidate.shape:
            raise ShapeError(
                f"input {tuple(x_input.shape)} and candidate "
                f"{tuple(candidate.shape)} differ in shape"
            )
        if x_input.dim() != 4 or x_input.shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W) images, got {tuple(x_input.shape)}")
        m = self.config.spatial_multiple
        h, w = x_input.shape[-2:]
        if h % m != 0 or w % m != 0:
            raise ShapeError(f"image size {h}x{w} is not a multiple of {m}")

    def _tile_text(self, text: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
        if text.dim() != 2 or text.shape[1] != self.config.text_dim:
            raise ShapeError(
                f"expected text vectors of shape (B, {self.config.text_dim}), "
                f"got {tuple(text.shape)}"
            )
        b, _, h, w = like.shape
        return text[:, :, None, None].expand(b, text.shape[1], h, w)

    def forward(
        self, x_input: torch.Tensor, candidate: torch.Tensor, text: torch.Tensor
    ) -> torch.Tensor:
        """Score a batch of triples; returns probabilities of shape (B,)."""
        self.check_inputs(x_input, candidate)
        x = torch.cat([x_input, candidate], dim=1)
        for i, stage in enumerate(self.stages):
            if i == self.config.text_stage:
                x = torch.cat([x, self._tile_text(text, x)], dim=1)
            x = stage(x)
        if self.config.text_stage == len(self.stages):
            x = torch.cat([x, self._tile_text(text, x)], dim=1)
        patch_map = self.head(x)
        score = torch.sigmoid(patch_map.mean(dim=(1, 2, 3)))
        # sigmoid can round to exactly 0 or 1 in float; keep the log terms finite
        eps = 1e-7
        return score.clamp(eps, 1.0 - eps)


def score(
    disc: TextAwareDiscriminator,
    x_input: np.ndarray,
    candidate: np.ndarray,
    text: torch.Tensor | np.ndarray,
) -> float:
    """Score one (input, candidate, text vector) triple."""
    validate_image(x_input)
    validate_image(candidate)
    vec = torch.as_tensor(text, dtype=disc.dtype).reshape(1, -1)
    with torch.no_grad():
        out = disc(
            image_to_tensor(x_input, dtype=disc.dtype),
            image_to_tensor(candidate, dtype=disc.dtype),
            vec,
        )
    return float(out[0])


@dataclass(frozen=True)
class LabeledInstance:
    """One discriminator training triple with its positive/negative label."""

    input: np.ndarray
    candidate: np.ndarray
    text: TextDescription
    label: str

    def __post_init__(self):
        if self.label not in (POSITIVE, NEGATIVE):
            raise InvalidInputError(f"label must be positive or negative, got {self.label!r}")
        if self.input.shape != self.candidate.shape:
            raise ShapeError(
                f"instance images differ in shape: {self.input.shape} vs {self.candidate.shape}"
            )

    @property
    def positive(self) -> bool:
        return self.label == POSITIVE


def build_instances(
    pair,
    generated: np.ndarray,
    random_text: TextDescription,
    description: TextDescription | None = None,
) -> list[LabeledInstance]:
    """Expand one edit pair into the four labeled discriminator instances.

    The pattern is positional: (gt, description) is the only positive, and the
    generated image and the mismatched text supply the three negatives. Pass
    ``description`` to select one of the pair's phrasings; the first is used
    otherwise.
    """
    validate_image(generated)
    if generated.shape != pair.input.shape:
        raise ShapeError(
            f"generated image shape {generated.shape} does not match pair {pair.input.shape}"
        )
    if description is None:
        if not pair.descriptions:
            raise InvalidInputError("pair carries no description to build instances from")
        description = pair.descriptions[0]
    if random_text.raw == description.raw:
        raise InvalidInputError("random text must differ from the pair's description")
    return [
        LabeledInstance(pair.input, pair.target, description, POSITIVE),
        LabeledInstance(pair.input, generated, description, NEGATIVE),
        LabeledInstance(pair.input, pair.target, random_text, NEGATIVE),
        LabeledInstance(pair.input, generated, random_text, NEGATIVE),
    ]


def discriminator_loss(
    disc: TextAwareDiscriminator, instances: list[LabeledInstance], text_encoder
) -> torch.Tensor:
    """Binary cross-entropy summed over the labeled instances."""
    if not instances:
        raise InvalidInputError("discriminator loss needs at least one instance")
    vectors = {}
    for inst in instances:
        if inst.text.raw not in vectors:
            vectors[inst.text.raw] = text_encoder.encode(inst.text)
    x_input = torch.cat([image_to_tensor(i.input, dtype=disc.dtype) for i in instances])
    candidate = torch.cat([image_to_tensor(i.candidate, dtype=disc.dtype) for i in instances])
    text = torch.stack([vectors[i.text.raw] for i in instances])
    scores = disc(x_input, candidate, text)
    total = scores.new_zeros(())
    for inst, s in zip(instances, scores):
        total = total - (torch.log(s) if inst.positive else torch.log(1.0 - s))
    return total


@dataclass(frozen=True)
class UnigramCooccurrence:
    """Top-M unigrams and how often each pair shares a description.

    The matrix is symmetric with non-negative integer counts; the diagonal
    holds the number of descriptions containing each unigram.
    """

    unigrams: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        m = len(self.unigrams)
        if self.counts.shape != (m, m):
            raise ShapeError(f"counts shape {self.counts.shape} does not match {m} unigrams")
        object.__setattr__(self, "_index", {u: i for i, u in enumerate(self.unigrams)})

    def index_of(self, unigram: str) -> int:
        idx = self._index.get(unigram)
        if idx is None:
            raise InvalidInputError(f"unigram {unigram!r} is not among the tracked top-M")
        return idx

    def tracks(self, unigram: str) -> bool:
        return unigram in self._index

    def count(self, a: str, b: str) -> int:
        return int(self.counts[self.index_of(a), self.index_of(b)])

    def tracked_in(self, description: TextDescription) -> list[int]:
        """Indices of the description's tracked unigrams, in matrix order."""
        words = split_text(description.raw)
        return sorted({self._index[w] for w in words if w in self._index})

    def to_dict(self) -> dict:
        return {"unigrams": list(self.unigrams), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "UnigramCooccurrence":
        return cls(
            unigrams=tuple(payload["unigrams"]),
            counts=np.asarray(payload["counts"], dtype=np.int64),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "UnigramCooccurrence":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_cooccurrence(
    corpus: list[TextDescription], top_m: int = DEFAULT_TOP_M
) -> UnigramCooccurrence:
    """Count description-level co-occurrence among the top-M corpus unigrams."""
    if not corpus:
        raise InvalidInputError("cannot build co-occurrence from an empty corpus")
    freq = Counter()
    for desc in corpus:
        freq.update(w for w in split_text(desc.raw) if w not in STOPWORDS)
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    unigrams = tuple(token for token, _ in ranked[:top_m])
    index = {u: i for i, u in enumerate(unigrams)}
    presence = np.zeros((len(corpus), len(unigrams)), dtype=np.int64)
    for row, desc in enumerate(corpus):
        for word in set(split_text(desc.raw)):
            col = index.get(word)
            if col is not None:
                presence[row, col] = 1
    return UnigramCooccurrence(unigrams=unigrams, counts=presence.T @ presence)


def sample_random_text(
    desc: TextDescription,
    corpus: list[TextDescription],
    cooc: UnigramCooccurrence,
    rng_seed: int,
) -> TextDescription:
    """Draw a corpus description semantically unrelated to ``desc``.

    Candidates contain at least one tracked unigram that never co-occurs with
    any of the query's tracked unigrams; the seeded generator picks uniformly
    among them. With no such candidate the description minimizing total
    co-occurrence wins. The query itself is never returned.
    """
    if len(corpus) < 2:
        raise InvalidInputError("random-text sampling needs a corpus of at least 2 descriptions")
    others = [d for d in corpus if d.raw != desc.raw]
    if not others:
        raise InvalidInputError("corpus holds no description different from the query")
    rng = np.random.default_rng(rng_seed)
    query = cooc.tracked_in(desc)
    if not query:
        return others[int(rng.integers(len(others)))]
    candidates = []
    for d in others:
        tracked = cooc.tracked_in(d)
        if any(all(cooc.counts[u, q] == 0 for q in query) for u in tracked):
            candidates.append(d)
    if candidates:
        return candidates[int(rng.integers(len(candidates)))]
    totals = [
        sum(int(cooc.counts[u, q]) for u in cooc.tracked_in(d) for q in query) for d in others
    ]
    return others[int(np.argmin(totals))]
