"""The three text-conditioned generators built on the shared backbone.

* Bucket: independent backbones, one per transformation family; the text
  vector is mapped to softmax weights that either blend the branch
  outputs (fusion) or pick the strongest branch (argmax).
* End-to-end: a single backbone; the text vector is tiled over the
  bottleneck, depth-concatenated, and projected back to bottleneck width.
* Filter bank: a single shared backbone with a small bank of learned
  3x3 bottleneck convolutions; the text weights the per-filter decodes.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .backbone import Backbone, BackboneConfig, image_to_tensor, tensor_to_image

NUM_BRANCHES = 5  # production bucket and filter counts


GATE_INIT_GAIN = 8.0


class WeightHead(nn.Module):
    """Affine map from a text vector to a softmax distribution over branches."""

    def __init__(self, text_dim: int, num_branches: int, dtype=torch.float32):
        super().__init__()
        self.proj = nn.Linear(text_dim, num_branches, dtype=dtype)
        # the default linear init leaves the softmax near-uniform, which traps
        # joint training in a symmetric state where every branch learns the
        # same average mapping and the gate has no signal to differentiate;
        # a sharper start gives each input a winning branch to specialize
        with torch.no_grad():
            self.proj.weight.mul_(GATE_INIT_GAIN)
            self.proj.bias.mul_(GATE_INIT_GAIN)

    def forward(self, text: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.proj(text), dim=-1)


def blend_branches(branches: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Per-pixel convex combination: branches (K, B, 3, H, W), weights (B, K)."""
    return torch.einsum("kbchw,bk->bchw", branches, weights)


def argmax_branches(branches: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Select each batch element's maximal-weight branch (first index on ties)."""
    idx = torch.argmax(weights, dim=-1)
    return torch.stack([branches[idx[b], b] for b in range(branches.shape[1])])


class BucketGenerator(nn.Module):
    """Independent per-bucket backbones blended by text-derived weights."""

    kind = "bucket"

    def __init__(
        self,
        backbone_config: BackboneConfig = BackboneConfig(),
        text_dim: int = 256,
        num_buckets: int = NUM_BRANCHES,
        dtype=torch.float32,
    ):
        super().__init__()
        self.backbones = nn.ModuleList(
            Backbone(backbone_config, dtype=dtype) for _ in range(num_buckets)
        )
        self.weight_head = WeightHead(text_dim, num_buckets, dtype=dtype)
        self.num_branches = num_buckets
        self.backbone_config = backbone_config

    @property
    def spatial_multiple(self) -> int:
        return self.backbone_config.spatial_multiple

    def forward(self, x: torch.Tensor, text: torch.Tensor, mode: str = "fusion"):
        if mode not in ("fusion", "argmax"):
            raise ValueError(f"mode must be 'fusion' or 'argmax', got {mode!r}")
        weights = self.weight_head(text)
        branches = torch.stack([bb(x) for bb in self.backbones])
        if mode == "fusion":
            out = blend_branches(branches, weights)
        else:
            out = argmax_branches(branches, weights)
        return out, weights


class EndToEndGenerator(nn.Module):
    """Single backbone with the text vector fused at the bottleneck."""

    kind = "e2e"

    def __init__(
        self,
        backbone_config: BackboneConfig = BackboneConfig(),
        text_dim: int = 256,
        dtype=torch.float32,
    ):
        super().__init__()
        self.backbone = Backbone(backbone_config, dtype=dtype)
        width = backbone_config.bottleneck_width
        self.fusion_proj = nn.Conv2d(width + text_dim, width, kernel_size=1, dtype=dtype)
        self.text_dim = text_dim
        self.backbone_config = backbone_config

    @property
    def spatial_multiple(self) -> int:
        return self.backbone_config.spatial_multiple

    def fuse(self, bottleneck: torch.Tensor, text: torch.Tensor) -> torch.Tensor:
        b, _, h, w = bottleneck.shape
        tiled = text.view(b, self.text_dim, 1, 1).expand(b, self.text_dim, h, w)
        return self.fusion_proj(torch.cat([bottleneck, tiled], dim=1))

    def forward(self, x: torch.Tensor, text: torch.Tensor) -> torch.Tensor:
        bottleneck, skips = self.backbone.encode(x)
        return self.backbone.decode(self.fuse(bottleneck, text), skips)


class FilterBankGenerator(nn.Module):
    """Shared backbone with learned bottleneck filters weighted by text."""

    kind = "filterbank"

    def __init__(
        self,
        backbone_config: BackboneConfig = BackboneConfig(),
        text_dim: int = 256,
        num_filters: int = NUM_BRANCHES,
        dtype=torch.float32,
    ):
        super().__init__()
        self.backbone = Backbone(backbone_config, dtype=dtype)
        width = backbone_config.bottleneck_width
        self.filters = nn.ModuleList(
            nn.Conv2d(width, width, kernel_size=3, padding=1, dtype=dtype)
            for _ in range(num_filters)
        )
        self.weight_head = WeightHead(text_dim, num_filters, dtype=dtype)
        self.num_branches = num_filters
        self.backbone_config = backbone_config

    @property
    def spatial_multiple(self) -> int:
        return self.backbone_config.spatial_multiple

    def branch_outputs(self, x: torch.Tensor) -> torch.Tensor:
        """Decode the bottleneck once per filter; (K, B, 3, H, W)."""
        bottleneck, skips = self.backbone.encode(x)
        return torch.stack(
            [self.backbone.decode(f(bottleneck), skips) for f in self.filters]
        )

    def forward(self, x: torch.Tensor, text: torch.Tensor):
        weights = self.weight_head(text)
        return blend_branches(self.branch_outputs(x), weights), weights

    def probe(self, x: torch.Tensor, k: int) -> torch.Tensor:
        """Branch k alone (weights forced one-hot)."""
        if not 0 <= k < self.num_branches:
            raise IndexError(f"filter index {k} out of range [0, {self.num_branches})")
        bottleneck, skips = self.backbone.encode(x)
        return self.backbone.decode(self.filters[k](bottleneck), skips)


def bucket_forward(
    model: BucketGenerator, image: np.ndarray, text: torch.Tensor, mode: str = "fusion"
) -> tuple[np.ndarray, np.ndarray]:
    """Single-image bucket edit; returns (edited image, branch weights)."""
    x = image_to_tensor(image, dtype=next(model.parameters()).dtype)
    with torch.no_grad():
        out, weights = model(x, text.unsqueeze(0), mode=mode)
    return tensor_to_image(out), weights.squeeze(0).detach().cpu().numpy()


def e2e_forward(model: EndToEndGenerator, image: np.ndarray, text: torch.Tensor) -> np.ndarray:
    x = image_to_tensor(image, dtype=next(model.parameters()).dtype)
    with torch.no_grad():
        out = model(x, text.unsqueeze(0))
    return tensor_to_image(out)


def filterbank_forward(
    model: FilterBankGenerator, image: np.ndarray, text: torch.Tensor
) -> tuple[np.ndarray, np.ndarray]:
    x = image_to_tensor(image, dtype=next(model.parameters()).dtype)
    with torch.no_grad():
        out, weights = model(x, text.unsqueeze(0))
    return tensor_to_image(out), weights.squeeze(0).detach().cpu().numpy()


def probe_filter(model: FilterBankGenerator, image: np.ndarray, k: int) -> np.ndarray:
    """Output of filter branch k alone on one image."""
    x = image_to_tensor(image, dtype=next(model.parameters()).dtype)
    with torch.no_grad():
        out = model.probe(x, k)
    return tensor_to_image(out)
