"""Assembled edit models: generator + text encoder + vocabulary, persisted.

A bundle is everything inference needs. Its config describes the
architecture so a checkpoint can be rebuilt from scratch, and apply_edit
wraps the full image path: resize to the model's spatial multiple, encode
the instruction, run the generator, resize back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .backbone import FULL_ENCODER_WIDTHS, BackboneConfig, resize_for_model, resize_to
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import TextDescription, Vocabulary, tokenize
from .errors import InvalidInputError
from .generators import (
    NUM_BRANCHES,
    BucketGenerator,
    EndToEndGenerator,
    FilterBankGenerator,
    bucket_forward,
    e2e_forward,
    filterbank_forward,
)
from .textenc import EMBED_DIM, HIDDEN_DIM, BiGruEncoder, GraphGruEncoder


@dataclass(frozen=True)
class BundleConfig:
    """Architecture description stored inside every checkpoint."""

    kind: str  # bucket | e2e | filterbank
    encoder_widths: tuple[int, ...] = FULL_ENCODER_WIDTHS
    skip_connections: bool = True
    branches: int = NUM_BRANCHES
    embed_dim: int = EMBED_DIM
    hidden_dim: int = HIDDEN_DIM
    text_encoder: str = "bigru"  # bigru | graph

    def __post_init__(self):
        if self.kind not in ("bucket", "e2e", "filterbank"):
            raise InvalidInputError(f"unknown model kind {self.kind!r}")
        if self.text_encoder not in ("bigru", "graph"):
            raise InvalidInputError(f"unknown text encoder {self.text_encoder!r}")
        if self.branches < 1:
            raise InvalidInputError("need at least one branch")

    @property
    def text_dim(self) -> int:
        return 2 * self.hidden_dim

    @property
    def backbone_config(self) -> BackboneConfig:
        return BackboneConfig(
            encoder_widths=self.encoder_widths, skip_connections=self.skip_connections
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "encoder_widths": list(self.encoder_widths),
            "skip_connections": self.skip_connections,
            "branches": self.branches,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "text_encoder": self.text_encoder,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BundleConfig":
        return cls(
            kind=payload["kind"],
            encoder_widths=tuple(payload["encoder_widths"]),
            skip_connections=bool(payload["skip_connections"]),
            branches=int(payload["branches"]),
            embed_dim=int(payload["embed_dim"]),
            hidden_dim=int(payload["hidden_dim"]),
            text_encoder=payload["text_encoder"],
        )


def build_generator(config: BundleConfig, dtype=torch.float32):
    bb = config.backbone_config
    if config.kind == "bucket":
        return BucketGenerator(bb, text_dim=config.text_dim, num_buckets=config.branches, dtype=dtype)
    if config.kind == "e2e":
        return EndToEndGenerator(bb, text_dim=config.text_dim, dtype=dtype)
    return FilterBankGenerator(bb, text_dim=config.text_dim, num_filters=config.branches, dtype=dtype)


def build_text_encoder(config: BundleConfig, vocab: Vocabulary, dtype=torch.float32):
    cls = BiGruEncoder if config.text_encoder == "bigru" else GraphGruEncoder
    return cls(vocab.size, embed_dim=config.embed_dim, hidden_dim=config.hidden_dim, dtype=dtype)


@dataclass
class ModelBundle:
    """A ready-to-run edit model."""

    config: BundleConfig
    generator: torch.nn.Module
    text_encoder: torch.nn.Module
    vocab: Vocabulary
    metadata: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.config.kind

    @property
    def spatial_multiple(self) -> int:
        return self.config.backbone_config.spatial_multiple

    def encode_text(self, instruction: str) -> tuple[TextDescription, torch.Tensor]:
        desc = tokenize(instruction, self.vocab)
        with torch.no_grad():
            vec = self.text_encoder.encode(desc)
        return desc, vec


def build_bundle(config: BundleConfig, vocab: Vocabulary, dtype=torch.float32) -> ModelBundle:
    return ModelBundle(
        config=config,
        generator=build_generator(config, dtype=dtype),
        text_encoder=build_text_encoder(config, vocab, dtype=dtype),
        vocab=vocab,
    )


def _state_arrays(module: torch.nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.{name}": tensor.detach().cpu().numpy().copy()
        for name, tensor in module.state_dict().items()
    }


def save_model(path: str | Path, bundle: ModelBundle, metadata: dict | None = None) -> Path:
    """Persist a bundle as a deterministic checkpoint archive."""
    arrays = {}
    arrays.update(_state_arrays(bundle.generator, "generator"))
    arrays.update(_state_arrays(bundle.text_encoder, "text_encoder"))
    ckpt = Checkpoint(
        kind=bundle.kind,
        config=bundle.config.to_dict(),
        arrays=arrays,
        vocab=bundle.vocab,
        metadata=metadata if metadata is not None else bundle.metadata,
    )
    save_checkpoint(path, ckpt)
    return Path(path)


def _load_state(module: torch.nn.Module, arrays: dict[str, np.ndarray], prefix: str) -> None:
    state = {}
    for name, tensor in module.state_dict().items():
        key = f"{prefix}.{name}"
        if key not in arrays:
            raise InvalidInputError(f"checkpoint is missing array {key}")
        state[name] = torch.as_tensor(arrays[key]).to(tensor.dtype).reshape(tensor.shape)
    module.load_state_dict(state)


def load_model(path: str | Path) -> ModelBundle:
    """Rebuild a bundle from its checkpoint archive."""
    ckpt = load_checkpoint(path)
    if ckpt.vocab is None:
        raise InvalidInputError(f"checkpoint {path} carries no vocabulary")
    config = BundleConfig.from_dict(ckpt.config)
    bundle = build_bundle(config, ckpt.vocab)
    _load_state(bundle.generator, ckpt.arrays, "generator")
    _load_state(bundle.text_encoder, ckpt.arrays, "text_encoder")
    bundle.metadata = dict(ckpt.metadata)
    bundle.generator.eval()
    bundle.text_encoder.eval()
    return bundle


def apply_edit(
    bundle: ModelBundle,
    image: np.ndarray,
    instruction: str,
    mode: str = "fusion",
) -> tuple[np.ndarray, np.ndarray | None]:
    """Edit one image per a textual instruction.

    The image is resized to the model's spatial multiple, edited, and
    resized back to its original dimensions. Returns the edited image and
    the branch weights (None for the end-to-end model).
    """
    _, vec = bundle.encode_text(instruction)
    resized, original = resize_for_model(image, multiple=bundle.spatial_multiple)
    if bundle.kind == "bucket":
        edited, weights = bucket_forward(bundle.generator, resized, vec, mode=mode)
    elif bundle.kind == "filterbank":
        edited, weights = filterbank_forward(bundle.generator, resized, vec)
    else:
        edited, weights = e2e_forward(bundle.generator, resized, vec), None
    return resize_to(edited, original), weights
