"""Last-hidden-layer feature extraction from a pre-trained DenseNet-121."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .ptrz import write_ptrz

log = logging.getLogger("repcause_ingest")

IMAGE_SIZE = 224


@dataclass
class ImageJob:
    input_path: str  # CSV manifest: path,label[,patient_id]
    output_path: str
    model: str = "densenet121"
    batch_size: int = 32
    dedup_by: str | None = None
    untrained: bool = False
    seed: int = 0


def read_image_manifest(path: str | Path, dedup_by: str | None):
    base = Path(path).parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"path", "label"} <= set(reader.fieldnames):
            raise ValueError("image manifest needs a CSV header with path,label")
        if dedup_by and dedup_by not in reader.fieldnames:
            raise ValueError(f"manifest has no {dedup_by!r} column to dedup by")
        rows = list(reader)
    if not rows:
        raise ValueError("empty manifest: no images to extract")
    if dedup_by:
        seen = set()
        unique = []
        for row in rows:
            key = row[dedup_by]
            if key in seen:
                continue
            seen.add(key)
            unique.append(row)
        rows = unique
    paths = [base / row["path"] for row in rows]
    labels = np.asarray([int(row["label"]) for row in rows])
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0/1")
    return paths, labels


def load_image_model(job: ImageJob):
    from torchvision import models

    if job.model != "densenet121":
        raise ValueError(f"unsupported image model {job.model!r}")
    if job.untrained:
        torch.manual_seed(job.seed)
        return models.densenet121(weights=None)
    try:
        return models.densenet121(weights="DEFAULT")
    except Exception as exc:
        raise RuntimeError(
            f"could not load densenet121 weights: {exc}. Pre-download them "
            f"(`python -c \"from torchvision import models; "
            f"models.densenet121(weights='DEFAULT')\"`) or run with "
            f"--untrained for a smoke test."
        ) from exc


def _load_image_tensor(path: Path) -> torch.Tensor:
    from PIL import Image

    with Image.open(path) as img:
        img = img.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE))
        arr = np.asarray(img, dtype=np.float32) / 255.0
    # channel-first, normalized with the torchvision defaults
    mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
    std = np.array([0.229, 0.224, 0.225], dtype=np.float32)
    arr = (arr - mean) / std
    return torch.from_numpy(arr.transpose(2, 0, 1))


def extract_image(job: ImageJob, model=None) -> dict:
    """One 1024-wide row per readable image (per patient with --dedup-by);
    unreadable files are skipped with a logged warning."""
    paths, labels = read_image_manifest(job.input_path, job.dedup_by)
    model = model if model is not None else load_image_model(job)
    model.eval()
    tensors, kept, skipped = [], [], 0
    for i, path in enumerate(paths):
        try:
            tensors.append(_load_image_tensor(path))
            kept.append(i)
        except OSError as exc:
            skipped += 1
            log.warning("skipping unreadable image %s (%s)", path, exc)
    if not tensors:
        raise ValueError("no readable images in the manifest")
    rows = []
    with torch.no_grad():
        for start in range(0, len(tensors), job.batch_size):
            batch = torch.stack(tensors[start:start + job.batch_size])
            feature_maps = model.features(batch)
            pooled = F.adaptive_avg_pool2d(F.relu(feature_maps), (1, 1))
            rows.append(pooled.flatten(1).numpy().astype(np.float32))
    features = np.vstack(rows)
    write_ptrz(job.output_path, features, labels[kept])
    log.info("wrote %s: n=%d d=%d (skipped %d)", job.output_path,
             features.shape[0], features.shape[1], skipped)
    return {"n": features.shape[0], "d": features.shape[1],
            "skipped": skipped, "out": str(job.output_path)}
