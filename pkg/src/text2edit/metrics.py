"""Evaluation metrics and reports.

Lab distances quantify edit quality, the remap-spread statistic separates
global per-level color maps from local edits, the filter report summarizes
what each learned filter does, and the rating-task exporter produces
anonymized human-study files. Everything here is pure and seeded.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import save_image, validate_image
from .errors import InvalidInputError, ShapeError
from .generators import FilterBankGenerator, probe_filter
from .synth import luminance

# sRGB (D65) to XYZ; rows sum to the white point so pure white lands on it
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.array(
    [
        [3.2404542, -1.5371385, -0.4985314],
        [-0.9692660, 1.8760108, 0.0415560],
        [0.0556434, -0.2040259, 1.0572252],
    ]
)
_WHITE = _RGB_TO_XYZ.sum(axis=1)  # D65 reference white
_DELTA = 6.0 / 29.0


def _linearize(srgb: np.ndarray) -> np.ndarray:
    return np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)


def _delinearize(linear: np.ndarray) -> np.ndarray:
    linear = np.clip(linear, 0.0, None)
    return np.where(
        linear <= 0.0031308, 12.92 * linear, 1.055 * linear ** (1.0 / 2.4) - 0.055
    )


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3.0 * _DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA, t**3, 3.0 * _DELTA**2 * (t - 4.0 / 29.0))


def srgb_to_lab(image: np.ndarray) -> np.ndarray:
    """Convert an sRGB image in [0,1] to CIE L*a*b* (D65), float64."""
    validate_image(image)
    linear = _linearize(image.astype(np.float64))
    xyz = linear @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of srgb_to_lab, clipped back into [0,1]."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE
    linear = xyz @ _XYZ_TO_RGB.T
    return np.clip(_delinearize(linear), 0.0, 1.0).astype(np.float32)


def lab_l2(image_a: np.ndarray, image_b: np.ndarray) -> float:
    """Mean per-pixel Euclidean distance between the images' Lab triplets."""
    validate_image(image_a)
    validate_image(image_b)
    if image_a.shape != image_b.shape:
        raise ShapeError(f"image shapes differ: {image_a.shape} vs {image_b.shape}")
    diff = srgb_to_lab(image_a) - srgb_to_lab(image_b)
    return float(np.sqrt((diff**2).sum(axis=-1)).mean())


@dataclass(frozen=True)
class RemapSpreadReport:
    """Conditional output statistics per 256 input levels, per channel.

    ``spread`` is the mean conditional standard deviation over occupied bins,
    pooled across channels: zero for any deterministic per-level color map,
    positive when equal input levels map to different outputs.
    """

    counts: np.ndarray  # (3, 256) int64
    means: np.ndarray  # (3, 256), zero where unoccupied
    stds: np.ndarray  # (3, 256), zero where unoccupied
    spread: float

    def occupied(self, channel: int) -> np.ndarray:
        return self.counts[channel] > 0


def remap_spread(image_in: np.ndarray, image_out: np.ndarray) -> RemapSpreadReport:
    """Bin each channel's input levels and measure output spread per bin."""
    validate_image(image_in)
    validate_image(image_out)
    if image_in.shape != image_out.shape:
        raise ShapeError(f"image shapes differ: {image_in.shape} vs {image_out.shape}")
    counts = np.zeros((3, 256), dtype=np.int64)
    means = np.zeros((3, 256))
    stds = np.zeros((3, 256))
    for c in range(3):
        levels = np.rint(image_in[..., c].astype(np.float64) * 255.0).astype(np.int64).ravel()
        out = image_out[..., c].astype(np.float64).ravel()
        cnt = np.bincount(levels, minlength=256)
        occ = cnt > 0
        mean = np.zeros(256)
        mean[occ] = np.bincount(levels, weights=out, minlength=256)[occ] / cnt[occ]
        # two-pass variance: immune to cancellation on near-constant bins
        sq_dev = np.bincount(levels, weights=(out - mean[levels]) ** 2, minlength=256)
        var = np.zeros(256)
        var[occ] = sq_dev[occ] / cnt[occ]
        counts[c] = cnt
        means[c] = mean
        stds[c] = np.sqrt(var)
    spread = float(stds[counts > 0].mean()) if (counts > 0).any() else 0.0
    return RemapSpreadReport(counts=counts, means=means, stds=stds, spread=spread)


def _quantize(image: np.ndarray) -> np.ndarray:
    # 8-bit round-trip, identical to what lands in a saved PNG
    return (np.rint(np.clip(image, 0.0, 1.0) * 255.0) / 255.0).astype(np.float32)


def _chroma_spread(image: np.ndarray) -> float:
    return float(np.abs(image - luminance(image)[..., None]).mean())


@dataclass(frozen=True)
class FilterEffectReport:
    """Per-filter probe statistics plus where the serialized forms live.

    The grid PNG lays images out row-per-input: the original in column 0,
    then one column per filter probe, each cell the image's full size.
    """

    rows: tuple[dict, ...]
    csv_path: Path
    grid_path: Path


def filter_effect_report(
    model: FilterBankGenerator, images: list[np.ndarray], out_dir: str | Path
) -> FilterEffectReport:
    """Probe every filter on every image and summarize what each one does.

    Statistics are computed on the 8-bit-quantized probes, so recomputing
    them from the saved grid reproduces the CSV exactly.
    """
    if not images:
        raise InvalidInputError("filter report needs at least one image")
    for img in images:
        validate_image(img)
        if img.shape != images[0].shape:
            raise InvalidInputError("all report images must share one shape")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    num_filters = len(model.filters)
    rows = []
    grid_rows = []
    for i, img in enumerate(images):
        base = _quantize(img)
        cells = [base]
        for k in range(num_filters):
            probe = _quantize(probe_filter(model, img, k))
            cells.append(probe)
            rows.append(
                {
                    "image": i,
                    "filter": k,
                    "d_luminance": float(luminance(probe).mean() - luminance(base).mean()),
                    "d_spread": _chroma_spread(probe) - _chroma_spread(base),
                }
            )
        grid_rows.append(np.concatenate(cells, axis=1))
    grid = np.concatenate(grid_rows, axis=0)
    grid_path = out_dir / "filter_grid.png"
    save_image(grid, grid_path)
    csv_path = out_dir / "filter_stats.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image", "filter", "d_luminance", "d_spread"])
        for row in rows:
            writer.writerow([row["image"], row["filter"], repr(row["d_luminance"]), repr(row["d_spread"])])
    return FilterEffectReport(rows=tuple(rows), csv_path=csv_path, grid_path=grid_path)


@dataclass(frozen=True)
class StudyRecord:
    """One rating unit: an input, its instruction, and model outputs by id."""

    input: str
    instruction: str
    outputs: dict[str, str] = field(default_factory=dict)


def _labels(n: int) -> list[str]:
    return [chr(ord("A") + i) for i in range(n)]


def export_rating_tasks(
    records: list[StudyRecord],
    kind: str,
    seed: int = 0,
    path: str | Path | None = None,
) -> dict:
    """Build anonymized, seeded-shuffled rating tasks for a human study.

    ``standalone`` yields one task per record with all its outputs as
    shuffled anonymous items; ``pairwise`` yields one task per unordered
    output pair. The returned payload's ``key`` section maps every task item
    back to its (record, model), kept separate so it can be withheld from
    raters.
    """
    if kind not in ("standalone", "pairwise"):
        raise InvalidInputError(f"unknown study kind {kind!r}")
    if not records:
        raise InvalidInputError("study export needs at least one record")
    minimum = 2 if kind == "pairwise" else 1
    for i, rec in enumerate(records):
        if len(rec.outputs) < minimum:
            raise InvalidInputError(
                f"record {i} has {len(rec.outputs)} outputs; {kind} needs at least {minimum}"
            )
    rng = np.random.default_rng(seed)
    question = (
        "How well does the edited image follow the instructions? (1-5 stars)"
        if kind == "standalone"
        else "Pick the image that fits the text better."
    )
    tasks = []
    key: dict[str, dict[str, dict]] = {}
    for r_idx, rec in enumerate(records):
        model_ids = sorted(rec.outputs)
        if kind == "standalone":
            groups = [model_ids]
        else:
            groups = [
                [model_ids[i], model_ids[j]]
                for i in range(len(model_ids))
                for j in range(i + 1, len(model_ids))
            ]
        for group in groups:
            order = [group[int(i)] for i in rng.permutation(len(group))]
            task_id = f"t{len(tasks):04d}"
            labels = _labels(len(order))
            tasks.append(
                {
                    "id": task_id,
                    "input": rec.input,
                    "instruction": rec.instruction,
                    "question": question,
                    "items": [
                        {"label": lab, "image": rec.outputs[m]} for lab, m in zip(labels, order)
                    ],
                }
            )
            key[task_id] = {
                lab: {"record": r_idx, "model": m} for lab, m in zip(labels, order)
            }
    shuffled = [tasks[int(i)] for i in rng.permutation(len(tasks))]
    payload = {"kind": kind, "seed": seed, "tasks": shuffled, "key": key}
    if path is not None:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))
    return payload
