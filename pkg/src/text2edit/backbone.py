"""Fully-convolutional encoder-decoder backbone with optional skip routing.

All stages are 4x4 stride-2 convolutions: the encoder halves the spatial
size per stage, the decoder (transposed convolutions) doubles it back.
Instance normalization and leaky-ReLU follow every convolution except the
innermost encoder stage, whose map can be 1x1 where per-instance
statistics degenerate. Skip connections concatenate encoder stage i
depth-wise into the decoder stage working at the same resolution; the
decoder widths are chosen so each stage's output matches the incoming
skip, giving the production profile

    encoder 64-128-256-512-512-512-512-512
    decoder inputs 512-1024-1024-1024-1024-512-256-128

The final 1x1 projection maps to 3 channels through tanh, affinely
rescaled to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeError

FULL_ENCODER_WIDTHS = (64, 128, 256, 512, 512, 512, 512, 512)
LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class BackboneConfig:
    """Architecture knobs; tests scale stage count and widths down together."""

    encoder_widths: tuple[int, ...] = FULL_ENCODER_WIDTHS
    skip_connections: bool = True

    def __post_init__(self):
        if len(self.encoder_widths) < 2:
            raise ValueError("backbone needs at least 2 stages")

    @property
    def num_stages(self) -> int:
        return len(self.encoder_widths)

    @property
    def spatial_multiple(self) -> int:
        return 2 ** self.num_stages

    @property
    def bottleneck_width(self) -> int:
        return self.encoder_widths[-1]

    @property
    def decoder_out_widths(self) -> tuple[int, ...]:
        e = self.encoder_widths
        n = self.num_stages
        return tuple(e[n - 1 - j] for j in range(1, n)) + (e[0],)

    @property
    def decoder_in_widths(self) -> tuple[int, ...]:
        e = self.encoder_widths
        n = self.num_stages
        outs = self.decoder_out_widths
        widths = [e[n - 1]]
        for j in range(2, n + 1):
            skip = e[n - j] if self.skip_connections else 0
            widths.append(outs[j - 2] + skip)
        return tuple(widths)

    def to_dict(self) -> dict:
        return {
            "encoder_widths": list(self.encoder_widths),
            "skip_connections": self.skip_connections,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "BackboneConfig":
        return cls(
            encoder_widths=tuple(obj["encoder_widths"]),
            skip_connections=bool(obj["skip_connections"]),
        )


def _conv_stage(in_ch, out_ch, norm, dtype):
    layers = [nn.Conv2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1, dtype=dtype)]
    if norm:
        layers.append(nn.InstanceNorm2d(out_ch, dtype=dtype))
    layers.append(nn.LeakyReLU(LEAKY_SLOPE))
    return nn.Sequential(*layers)


def _deconv_stage(in_ch, out_ch, dtype):
    return nn.Sequential(
        nn.ConvTranspose2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1, dtype=dtype),
        nn.InstanceNorm2d(out_ch, dtype=dtype),
        nn.LeakyReLU(LEAKY_SLOPE),
    )


class Backbone(nn.Module):
    """Encoder-decoder over (B, 3, H, W) tensors with values in [0, 1]."""

    def __init__(self, config: BackboneConfig = BackboneConfig(), dtype=torch.float32):
        super().__init__()
        self.config = config
        n = config.num_stages
        enc = []
        in_ch = 3
        for i, width in enumerate(config.encoder_widths):
            # innermost stage un-normalized: its map may be 1x1
            enc.append(_conv_stage(in_ch, width, norm=(i < n - 1), dtype=dtype))
            in_ch = width
        self.encoder_stages = nn.ModuleList(enc)
        self.decoder_stages = nn.ModuleList(
            _deconv_stage(cin, cout, dtype)
            for cin, cout in zip(config.decoder_in_widths, config.decoder_out_widths)
        )
        self.output_proj = nn.Conv2d(config.decoder_out_widths[-1], 3, kernel_size=1, dtype=dtype)
        self.frozen = False

    @property
    def spatial_multiple(self) -> int:
        return self.config.spatial_multiple

    def check_input(self, x: torch.Tensor) -> None:
        m = self.spatial_multiple
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W) input, got {tuple(x.shape)}")
        if x.shape[2] % m or x.shape[3] % m:
            raise ShapeError(
                f"spatial dims {tuple(x.shape[2:])} must be multiples of {m}; "
                "use resize_for_model first"
            )

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """Return (bottleneck, per-stage skip activations, outermost first)."""
        self.check_input(x)
        skips = []
        h = x
        for stage in self.encoder_stages:
            h = stage(h)
            skips.append(h)
        return h, skips[:-1]

    def decode(self, bottleneck: torch.Tensor, skips: list[torch.Tensor]) -> torch.Tensor:
        h = bottleneck
        for j, stage in enumerate(self.decoder_stages):
            if j > 0 and self.config.skip_connections:
                h = torch.cat([h, skips[-j]], dim=1)
            h = stage(h)
        return (torch.tanh(self.output_proj(h)) + 1.0) / 2.0

    def forward(self, x: torch.Tensor, bottleneck_hook=None) -> torch.Tensor:
        bottleneck, skips = self.encode(x)
        if bottleneck_hook is not None:
            bottleneck = bottleneck_hook(bottleneck)
        return self.decode(bottleneck, skips)

    def freeze(self) -> None:
        self.requires_grad_(False)
        self.frozen = True


def image_to_tensor(image: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """(H, W, 3) numpy in [0, 1] -> (1, 3, H, W) tensor."""
    return torch.as_tensor(np.ascontiguousarray(image), dtype=dtype).permute(2, 0, 1).unsqueeze(0)


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """(1, 3, H, W) tensor -> (H, W, 3) float32 numpy clipped to [0, 1]."""
    arr = t.detach().squeeze(0).permute(1, 2, 0).cpu().numpy()
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def backbone_forward(backbone: Backbone, image: np.ndarray, bottleneck_hook=None) -> np.ndarray:
    """Single-image forward pass; spatial dims must satisfy the backbone's multiple."""
    x = image_to_tensor(image, dtype=next(backbone.parameters()).dtype)
    with torch.no_grad():
        y = backbone(x, bottleneck_hook=bottleneck_hook)
    return tensor_to_image(y)


def resize_for_model(image: np.ndarray, multiple: int = 256) -> tuple[np.ndarray, tuple[int, int]]:
    """Bilinearly resize so both dims are the nearest multiple (minimum one).

    Returns the resized image and the original (H, W) for the inverse
    resize after editing.
    """
    h, w = image.shape[0], image.shape[1]
    new_h = max(multiple, round(h / multiple) * multiple)
    new_w = max(multiple, round(w / multiple) * multiple)
    return resize_to(image, (new_h, new_w)), (h, w)


def resize_to(image: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Bilinear resize to exact (H, W), clamped back to [0, 1]."""
    if (image.shape[0], image.shape[1]) == dims:
        return image
    t = image_to_tensor(image, dtype=torch.float32)
    out = F.interpolate(t, size=dims, mode="bilinear", align_corners=False)
    return tensor_to_image(out)
