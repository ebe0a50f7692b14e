"""Generator loss stack: content, adversarial, perceptual, and their blend.

All three components return 0-d torch tensors so gradients flow during
training, while accepting plain numpy images for offline evaluation. Numpy
inputs keep their dtype, so float64 test oracles are matched at full
precision.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .errors import DomainError, FormatError, InvalidInputError, NumericError, ShapeError

logger = logging.getLogger(__name__)

# ImageNet statistics expected by the pretrained classifier backbone
_VGG_MEAN = (0.485, 0.456, 0.406)
_VGG_STD = (0.229, 0.224, 0.225)

# 19-layer VGG feature stack up to the first rectification of block 4;
# numbers are channel widths, "M" is a 2x2 max-pool
_VGG_LAYOUT = (64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M", 512)

# post-activation taps: first ReLU of blocks 2, 3, 4
_TAP_INDICES = (6, 11, 20)


@dataclass(frozen=True)
class LossWeights:
    """Mixing coefficients for the combined generator loss."""

    adversarial: float = 1.0
    perceptual: float = 0.02

    def __post_init__(self):
        if self.adversarial < 0 or self.perceptual < 0:
            raise InvalidInputError("loss weights must be non-negative")


def _to_tensor(image) -> torch.Tensor:
    if isinstance(image, torch.Tensor):
        return image
    return torch.from_numpy(np.ascontiguousarray(image))


def _check_same_shape(a, b) -> None:
    if tuple(a.shape) != tuple(b.shape):
        raise ShapeError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def _channels_first(t: torch.Tensor) -> torch.Tensor:
    # accept (H, W, 3) images as well as batched (B, 3, H, W) tensors
    if t.dim() == 3 and t.shape[-1] == 3:
        return t.permute(2, 0, 1).unsqueeze(0)
    if t.dim() == 3:
        return t.unsqueeze(0)
    if t.dim() != 4:
        raise ShapeError(f"expected an image or a batched tensor, got shape {tuple(t.shape)}")
    return t


class StubFeatureExtractor:
    """Identity features: the flattened image itself.

    Stands in for the pretrained backbone when its weights are unavailable;
    keeps the full loss stack runnable and exactly testable.
    """

    min_size = 1
    pretrained = False

    def features(self, image) -> torch.Tensor:
        return _to_tensor(image).reshape(-1)


class Vgg19FeatureExtractor(nn.Module):
    """Frozen 19-layer classifier trunk tapped after blocks 2, 3, and 4.

    Inputs in [0,1] are renormalized to the classifier's training statistics
    internally. Feature maps from the three taps are flattened and
    concatenated into a single vector.
    """

    min_size = 8
    pretrained = True

    def __init__(self):
        super().__init__()
        layers: list[nn.Module] = []
        in_ch = 3
        for item in _VGG_LAYOUT:
            if item == "M":
                layers.append(nn.MaxPool2d(2, 2))
            else:
                layers.append(nn.Conv2d(in_ch, item, 3, padding=1))
                layers.append(nn.ReLU(inplace=False))
                in_ch = item
        self.layers = nn.Sequential(*layers)
        mean = torch.tensor(_VGG_MEAN).view(1, 3, 1, 1)
        std = torch.tensor(_VGG_STD).view(1, 3, 1, 1)
        self.register_buffer("mean", mean)
        self.register_buffer("std", std)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def load_weights(self, path: str | Path) -> None:
        state = torch.load(path, map_location="cpu", weights_only=True)
        remapped = {}
        for key, value in state.items():
            name = key[len("features.") :] if key.startswith("features.") else key
            parts = name.split(".")
            if len(parts) != 2 or not parts[0].isdigit():
                continue
            if int(parts[0]) < len(self.layers) and parts[1] in ("weight", "bias"):
                remapped[f"layers.{name}"] = value
        expected = {k for k, _ in self.named_parameters()}
        if not expected.issubset(remapped):
            raise FormatError(f"weights at {path} do not cover the required conv layers")
        self.load_state_dict(remapped, strict=False)
        for p in self.parameters():
            p.requires_grad_(False)

    def features(self, image) -> torch.Tensor:
        x = _channels_first(_to_tensor(image)).to(torch.float32)
        if x.shape[-2] < self.min_size or x.shape[-1] < self.min_size:
            raise ShapeError(f"extractor needs images of at least {self.min_size} pixels per side")
        x = (x - self.mean) / self.std
        taps = []
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i in _TAP_INDICES:
                taps.append(x.reshape(-1))
        return torch.cat(taps)

    forward = features


def load_feature_extractor(weights_path: str | Path | None = None):
    """Return the pretrained extractor, or the identity stub when weights are absent."""
    if weights_path is not None and Path(weights_path).exists():
        extractor = Vgg19FeatureExtractor()
        extractor.load_weights(weights_path)
        return extractor
    if weights_path is not None:
        logger.warning(
            "perceptual weights not found at %s; using identity-feature stub", weights_path
        )
    else:
        logger.warning("no perceptual weights configured; using identity-feature stub")
    return StubFeatureExtractor()


def content_loss(generated, target) -> torch.Tensor:
    """Mean absolute per-element difference between the two images."""
    g = _to_tensor(generated)
    t = _to_tensor(target)
    _check_same_shape(g, t)
    return (g - t).abs().mean()


def adversarial_loss(score) -> torch.Tensor:
    """1 - log(score): small when the discriminator is fooled."""
    s = score if isinstance(score, torch.Tensor) else torch.as_tensor(float(score))
    if float(s.detach()) <= 0.0:
        raise DomainError(f"adversarial loss needs a score in (0, 1], got {float(s.detach())}")
    return 1.0 - torch.log(s)


def perceptual_loss(extractor, generated, target) -> torch.Tensor:
    """Euclidean feature-space distance, normalized by the feature length."""
    g = _to_tensor(generated)
    t = _to_tensor(target)
    _check_same_shape(g, t)
    f_g = extractor.features(g)
    f_t = extractor.features(t)
    return torch.linalg.vector_norm(f_t - f_g) / f_g.numel()


def generator_loss(content, adversarial, perceptual, weights: LossWeights | None = None):
    """Weighted blend of the three generator loss components."""
    weights = weights or LossWeights()
    for name, value in (("content", content), ("adversarial", adversarial), ("perceptual", perceptual)):
        scalar = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
        if not math.isfinite(scalar):
            raise NumericError(f"{name} loss component is not finite: {scalar}")
    return content + weights.adversarial * adversarial + weights.perceptual * perceptual
