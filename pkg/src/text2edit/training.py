"""Adversarial training loop: alternating updates, plateau schedule, identity
augmentation, per-branch pretraining for the bucket model, and history output.

The loop is deliberately plain: one discriminator update then one generator
update per batch, Adam on both sides, and a learning rate that halves whenever
the validation loss fails to improve its best. All data-order and sampling
randomness flows from numpy generators seeded per epoch, so a fixed seed
reproduces a run exactly.
"""

from __future__ import annotations

import csv
import itertools
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .backbone import Backbone, BackboneConfig, image_to_tensor, tensor_to_image
from .data import (
    DatasetManifest,
    EditPair,
    TextDescription,
    Vocabulary,
    build_vocabulary,
    load_pair,
    tokenize,
)
from .discriminator import (
    DiscriminatorConfig,
    TextAwareDiscriminator,
    UnigramCooccurrence,
    build_cooccurrence,
    build_instances,
    discriminator_loss,
    sample_random_text,
)
from .errors import InvalidInputError, NumericError
from .losses import (
    LossWeights,
    adversarial_loss,
    content_loss,
    generator_loss,
    load_feature_extractor,
    perceptual_loss,
)
from .models import BundleConfig, ModelBundle, build_bundle, save_model
from .synth import load_template_payload

_SLOT_RE = re.compile(r"\{(\w+)\}")

HISTORY_COLUMNS = ("epoch", "lr", "train_d_loss", "train_g_loss", "val_g_loss", "wall_seconds")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; architecture lives in the bundle config."""

    epochs: int = 100
    batch_size: int = 4
    lr: float = 0.001
    lr_floor: float = 1e-6
    identity_fraction: float = 0.15
    pretrain_epochs: int = 5
    seed: int = 0
    deterministic: bool = False
    weights: LossWeights = field(default_factory=LossWeights)
    disc_widths: tuple[int, ...] = (64, 128, 256, 512)
    disc_text_stage: int = 2
    mode: str = "fusion"

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be at least 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch size must be at least 1")
        if self.lr <= 0 or self.lr_floor <= 0:
            raise InvalidInputError("learning rate and its floor must be positive")
        if not 0.0 <= self.identity_fraction <= 1.0:
            raise InvalidInputError("identity fraction must lie in [0, 1]")
        if self.pretrain_epochs < 0:
            raise InvalidInputError("pretrain epochs must be non-negative")


class IdentityTemplateBank:
    """Slot-filling phrases describing an unchanged image."""

    def __init__(self, templates: tuple[str, ...], slots: dict[str, tuple[str, ...]]):
        if not templates:
            raise InvalidInputError("identity template bank must not be empty")
        for tpl in templates:
            for slot in _SLOT_RE.findall(tpl):
                if not slots.get(slot):
                    raise InvalidInputError(f"template {tpl!r} uses unknown slot {slot!r}")
        self.templates = tuple(templates)
        self.slots = {name: tuple(values) for name, values in slots.items()}

    @classmethod
    def from_payload(cls, payload: dict | None = None) -> "IdentityTemplateBank":
        payload = payload or load_template_payload()["identity_augmentation"]
        return cls(tuple(payload["templates"]), {k: tuple(v) for k, v in payload["slots"].items()})

    def expansions(self) -> list[str]:
        """Every phrase the bank can produce."""
        out = []
        for tpl in self.templates:
            names = sorted(set(_SLOT_RE.findall(tpl)))
            for combo in itertools.product(*(self.slots[n] for n in names)):
                out.append(tpl.format(**dict(zip(names, combo))))
        return out

    def sample(self, rng: np.random.Generator) -> str:
        tpl = self.templates[int(rng.integers(len(self.templates)))]
        # sorted slot order keeps the rng draw sequence independent of
        # string hashing, so a fixed seed means one phrase everywhere
        fills = {
            name: self.slots[name][int(rng.integers(len(self.slots[name])))]
            for name in sorted(set(_SLOT_RE.findall(tpl)))
        }
        return tpl.format(**fills)


def augment_identity(
    pairs: list[EditPair],
    fraction: float,
    bank: IdentityTemplateBank,
    vocab: Vocabulary,
    seed: int = 0,
) -> list[EditPair]:
    """Append ceil(fraction * N) pairs whose target equals their input.

    Inputs are drawn from the existing pairs and described by seeded template
    instantiations, teaching the models that "leave it alone" is an edit too.
    """
    if not 0.0 <= fraction <= 1.0:
        raise InvalidInputError("identity fraction must lie in [0, 1]")
    out = list(pairs)
    extra = math.ceil(fraction * len(pairs))
    rng = np.random.default_rng(seed)
    for _ in range(extra):
        src = pairs[int(rng.integers(len(pairs)))]
        phrase = bank.sample(rng)
        out.append(
            EditPair(
                input=src.input,
                target=src.input,
                descriptions=(tokenize(phrase, vocab),),
            )
        )
    return out


class PlateauSchedule:
    """Halve the learning rate on any epoch whose validation loss fails to
    drop below the previous epoch's. Comparing against the last value rather
    than the running best lets one noisy epoch cost a single halving instead
    of poisoning every later comparison."""

    def __init__(self, initial: float, floor: float = 1e-6):
        if initial <= 0 or floor <= 0:
            raise InvalidInputError("learning rate and floor must be positive")
        self.lr = initial
        self.floor = floor
        self.previous = math.inf

    def observe(self, val_loss: float) -> float:
        if val_loss >= self.previous:
            self.lr = max(self.lr * 0.5, self.floor)
        self.previous = val_loss
        return self.lr


@dataclass(frozen=True)
class PreparedExample:
    """One pair with its sampled description and mismatched text."""

    pair: EditPair
    description: TextDescription
    random_text: TextDescription


@dataclass
class TrainState:
    """Everything a single optimization step needs."""

    bundle: ModelBundle
    disc: TextAwareDiscriminator
    extractor: object
    weights: LossWeights
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    mode: str = "fusion"


def make_train_state(
    bundle: ModelBundle,
    disc: TextAwareDiscriminator,
    extractor=None,
    weights: LossWeights | None = None,
    lr: float = 0.001,
    mode: str = "fusion",
) -> TrainState:
    gen_params = [p for p in bundle.generator.parameters() if p.requires_grad]
    gen_params += list(bundle.text_encoder.parameters())
    return TrainState(
        bundle=bundle,
        disc=disc,
        extractor=extractor if extractor is not None else load_feature_extractor(),
        weights=weights or LossWeights(),
        opt_g=torch.optim.Adam(gen_params, lr=lr),
        opt_d=torch.optim.Adam(disc.parameters(), lr=lr),
        mode=mode,
    )


def set_learning_rate(state: TrainState, lr: float) -> None:
    for opt in (state.opt_g, state.opt_d):
        for group in opt.param_groups:
            group["lr"] = lr


def _forward_generator(bundle: ModelBundle, x: torch.Tensor, vec: torch.Tensor, mode: str):
    v = vec.unsqueeze(0)
    if bundle.kind == "bucket":
        out, _ = bundle.generator(x, v, mode=mode)
    elif bundle.kind == "filterbank":
        out, _ = bundle.generator(x, v)
    else:
        out = bundle.generator(x, v)
    return out


def generator_components(
    state: TrainState, pair: EditPair, description: TextDescription
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Content, adversarial, perceptual losses for one pair, grads attached."""
    dtype = state.disc.dtype
    x = image_to_tensor(pair.input, dtype=dtype)
    t = image_to_tensor(pair.target, dtype=dtype)
    vec = state.bundle.text_encoder.encode(description)
    out = _forward_generator(state.bundle, x, vec, state.mode)
    c = content_loss(out, t)
    a = adversarial_loss(state.disc(x, out, vec.unsqueeze(0))[0])
    p = perceptual_loss(state.extractor, out, t)
    return c, a, p


def train_step(state: TrainState, batch: list[PreparedExample]) -> dict[str, float]:
    """One discriminator update then one generator update on a batch.

    Returns the batch-mean losses, including the generator components so the
    logged g_loss can be recomposed from them.
    """
    if not batch:
        raise InvalidInputError("training step needs a non-empty batch")

    d_total = None
    for ex in batch:
        with torch.no_grad():
            vec = state.bundle.text_encoder.encode(ex.description)
            x = image_to_tensor(ex.pair.input, dtype=state.disc.dtype)
            out = _forward_generator(state.bundle, x, vec, state.mode)
        generated = tensor_to_image(out)
        instances = build_instances(ex.pair, generated, ex.random_text, description=ex.description)
        loss = discriminator_loss(state.disc, instances, state.bundle.text_encoder)
        d_total = loss if d_total is None else d_total + loss
    d_loss = d_total / len(batch)
    if not math.isfinite(float(d_loss.detach())):
        raise NumericError(f"discriminator loss is not finite: {float(d_loss.detach())}")
    state.opt_d.zero_grad()
    d_loss.backward()
    state.opt_d.step()

    sums = {"content": 0.0, "adversarial": 0.0, "perceptual": 0.0}
    g_total = None
    for ex in batch:
        c, a, p = generator_components(state, ex.pair, ex.description)
        g = generator_loss(c, a, p, state.weights)
        g_total = g if g_total is None else g_total + g
        sums["content"] += float(c.detach())
        sums["adversarial"] += float(a.detach())
        sums["perceptual"] += float(p.detach())
    g_loss = g_total / len(batch)
    state.opt_g.zero_grad()
    g_loss.backward()
    state.opt_g.step()

    n = len(batch)
    return {
        "d_loss": float(d_loss.detach()),
        "g_loss": float(g_loss.detach()),
        "content": sums["content"] / n,
        "adversarial": sums["adversarial"] / n,
        "perceptual": sums["perceptual"] / n,
    }


def _batches(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def pretrain_buckets(
    partitions: list[list[EditPair]],
    config: TrainConfig,
    backbone_config: BackboneConfig,
    text_dim: int,
    extractor=None,
) -> list[Backbone]:
    """Train one backbone per bucket partition without text, then freeze them.

    Each backbone sees only its bucket's pairs and optimizes the full
    content + adversarial + perceptual stack against a text-blind
    discriminator (the text slot is fed a zero vector).
    """
    extractor = extractor if extractor is not None else load_feature_extractor()
    backbones = []
    for b, pairs in enumerate(partitions):
        if not pairs:
            raise InvalidInputError(f"bucket {b} has no training pairs to pretrain on")
        torch.manual_seed(config.seed + b)
        backbone = Backbone(backbone_config)
        disc = TextAwareDiscriminator(
            DiscriminatorConfig(
                stage_widths=config.disc_widths,
                text_dim=text_dim,
                text_stage=config.disc_text_stage,
            )
        )
        opt_g = torch.optim.Adam(backbone.parameters(), lr=config.lr)
        opt_d = torch.optim.Adam(disc.parameters(), lr=config.lr)
        zero = torch.zeros(1, text_dim, dtype=disc.dtype)
        for epoch in range(config.pretrain_epochs):
            rng = np.random.default_rng([config.seed, b, epoch])
            order = [int(i) for i in rng.permutation(len(pairs))]
            for batch_idx in _batches(order, config.batch_size):
                d_total, g_total = None, None
                for i in batch_idx:
                    x = image_to_tensor(pairs[i].input, dtype=disc.dtype)
                    t = image_to_tensor(pairs[i].target, dtype=disc.dtype)
                    with torch.no_grad():
                        fake = backbone(x)
                    s_real = disc(x, t, zero)[0]
                    s_fake = disc(x, fake, zero)[0]
                    d = -torch.log(s_real) - torch.log(1.0 - s_fake)
                    d_total = d if d_total is None else d_total + d
                d_loss = d_total / len(batch_idx)
                opt_d.zero_grad()
                d_loss.backward()
                opt_d.step()
                for i in batch_idx:
                    x = image_to_tensor(pairs[i].input, dtype=disc.dtype)
                    t = image_to_tensor(pairs[i].target, dtype=disc.dtype)
                    out = backbone(x)
                    c = content_loss(out, t)
                    a = adversarial_loss(disc(x, out, zero)[0])
                    p = perceptual_loss(extractor, out, t)
                    g = generator_loss(c, a, p, config.weights)
                    g_total = g if g_total is None else g_total + g
                g_loss = g_total / len(batch_idx)
                opt_g.zero_grad()
                g_loss.backward()
                opt_g.step()
        backbone.freeze()
        backbones.append(backbone)
    return backbones


@dataclass
class TrainResult:
    checkpoint_path: Path
    history_path: Path
    history: list[dict]
    bundle: ModelBundle


def _prepare_epoch(
    train_pairs: list[EditPair],
    corpus: list[TextDescription],
    cooc: UnigramCooccurrence,
    rng: np.random.Generator,
) -> list[PreparedExample]:
    prepared = []
    for idx in rng.permutation(len(train_pairs)):
        pair = train_pairs[int(idx)]
        desc = pair.descriptions[int(rng.integers(len(pair.descriptions)))]
        random_text = sample_random_text(desc, corpus, cooc, int(rng.integers(2**31)))
        prepared.append(PreparedExample(pair=pair, description=desc, random_text=random_text))
    return prepared


def _validation_loss(state: TrainState, val_pairs: list[EditPair]) -> tuple[float, float]:
    """Mean (full generator loss, content loss) over the validation split.

    The full loss is what the history records; the content component is what
    the schedule and best-checkpoint selection watch. The adversarial term
    tracks the discriminator's current strength, not the generator's quality,
    so its warm-up drift would otherwise mask every content improvement.
    """
    g_total, c_total = 0.0, 0.0
    with torch.no_grad():
        for pair in val_pairs:
            c, a, p = generator_components(state, pair, pair.descriptions[0])
            g_total += float(generator_loss(c, a, p, state.weights))
            c_total += float(c)
    return g_total / len(val_pairs), c_total / len(val_pairs)


def write_history(path: str | Path, history: list[dict]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in HISTORY_COLUMNS])
    return path


def run_training(
    manifest: DatasetManifest,
    bundle_config: BundleConfig,
    config: TrainConfig,
    out_dir: str | Path,
    extractor=None,
) -> TrainResult:
    """Full training run: returns the best-validation checkpoint and history.

    The vocabulary is built over the manifest's descriptions plus every
    identity-template expansion, so augmented phrases never hit the unknown
    token. Mismatched text for the discriminator is resampled each epoch.
    """
    train_records = manifest.split("train")
    val_records = manifest.split("val")
    if not train_records or not val_records:
        raise InvalidInputError("training needs non-empty train and val splits")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    bank = IdentityTemplateBank.from_payload()
    vocab = build_vocabulary(list(manifest.descriptions()) + bank.expansions(), min_count=1)
    train_pairs = [load_pair(r, vocab) for r in train_records]
    val_pairs = [load_pair(r, vocab) for r in val_records]
    train_pairs = augment_identity(
        train_pairs, config.identity_fraction, bank, vocab, seed=config.seed
    )
    corpus = [d for pair in train_pairs for d in pair.descriptions]
    cooc = build_cooccurrence(corpus)

    torch.manual_seed(config.seed)
    bundle = build_bundle(bundle_config, vocab)
    extractor = extractor if extractor is not None else load_feature_extractor()

    if bundle_config.kind == "bucket":
        partitions = [
            [p for p in train_pairs if b in p.bucket_labels]
            for b in range(bundle_config.branches)
        ]
        backbones = pretrain_buckets(
            partitions, config, bundle_config.backbone_config, bundle_config.text_dim, extractor
        )
        for trained, slot in zip(backbones, bundle.generator.backbones):
            slot.load_state_dict(trained.state_dict())
            slot.freeze()

    disc = TextAwareDiscriminator(
        DiscriminatorConfig(
            stage_widths=config.disc_widths,
            text_dim=bundle_config.text_dim,
            text_stage=config.disc_text_stage,
        )
    )
    state = make_train_state(
        bundle, disc, extractor=extractor, weights=config.weights, lr=config.lr, mode=config.mode
    )
    schedule = PlateauSchedule(config.lr, config.lr_floor)

    ckpt_path = out_dir / "model.ckpt"
    history: list[dict] = []
    best_val = math.inf
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        rng = np.random.default_rng([config.seed, epoch])
        prepared = _prepare_epoch(train_pairs, corpus, cooc, rng)
        d_sum, g_sum, seen = 0.0, 0.0, 0
        for batch in _batches(prepared, config.batch_size):
            metrics = train_step(state, batch)
            d_sum += metrics["d_loss"] * len(batch)
            g_sum += metrics["g_loss"] * len(batch)
            seen += len(batch)
        val_g, val_content = _validation_loss(state, val_pairs)
        if val_content < best_val:
            best_val = val_content
            save_model(
                ckpt_path,
                bundle,
                metadata={"epoch": epoch, "val_g_loss": val_g, "seed": config.seed},
            )
        lr_used = schedule.lr
        history.append(
            {
                "epoch": epoch,
                "lr": lr_used,
                "train_d_loss": d_sum / seen,
                "train_g_loss": g_sum / seen,
                "val_g_loss": val_g,
                "wall_seconds": 0.0 if config.deterministic else time.perf_counter() - t0,
            }
        )
        new_lr = schedule.observe(val_content)
        if new_lr != lr_used:
            set_learning_rate(state, new_lr)

    history_path = write_history(out_dir / "history.csv", history)
    return TrainResult(
        checkpoint_path=ckpt_path, history_path=history_path, history=history, bundle=bundle
    )
