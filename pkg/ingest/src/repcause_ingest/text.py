"""[CLS]-token representation extraction from BERT-style encoders."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .ptrz import write_ptrz

log = logging.getLogger("repcause_ingest")

DEFAULT_TEXT_MODEL = "bert-base-uncased"


@dataclass
class TextJob:
    input_path: str
    output_path: str
    model: str = DEFAULT_TEXT_MODEL
    max_length: int = 128
    batch_size: int = 32
    untrained: bool = False
    seed: int = 0


def read_text_corpus(path: str | Path) -> tuple[list[str], np.ndarray]:
    """CSV corpus with a ``text,label`` header; labels are binary."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"text", "label"} <= set(reader.fieldnames):
            raise ValueError("text corpus needs a CSV header with text,label columns")
        texts, labels = [], []
        for row in reader:
            texts.append(row["text"])
            labels.append(int(row["label"]))
    if not texts:
        raise ValueError("empty corpus: no rows to extract")
    labels = np.asarray(labels)
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0/1")
    return texts, labels


def load_text_model(job: TextJob):
    from transformers import AutoModel, AutoTokenizer, BertConfig, BertModel

    if job.untrained:
        # randomly initialized architecture for offline smoke runs; the
        # pipeline, shapes and file contract are identical
        torch.manual_seed(job.seed)
        config = BertConfig(vocab_size=30522, hidden_size=768,
                            num_hidden_layers=2, num_attention_heads=4,
                            intermediate_size=512)
        model = BertModel(config)
        tokenizer = _whitespace_tokenizer(config.vocab_size)
        return tokenizer, model
    try:
        tokenizer = AutoTokenizer.from_pretrained(job.model)
        model = AutoModel.from_pretrained(job.model)
    except OSError as exc:
        raise RuntimeError(
            f"could not load model {job.model!r}: {exc}. Download it first "
            f"(e.g. `python -c \"from transformers import AutoModel; "
            f"AutoModel.from_pretrained('{job.model}')\"`) or pass a local "
            f"directory via --model."
        ) from exc
    return tokenizer, model


class _whitespace_tokenizer:
    """Deterministic hash tokenizer for --untrained runs (no vocab download)."""

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def __call__(self, texts, max_length, **_):
        batch = []
        for text in texts:
            ids = [101]  # [CLS]
            for token in text.split():
                ids.append(2000 + (hash(token) % (self.vocab_size - 3000)))
                if len(ids) >= max_length - 1:
                    break
            ids.append(102)  # [SEP]
            batch.append(ids)
        width = max(len(ids) for ids in batch)
        input_ids = torch.zeros((len(batch), width), dtype=torch.long)
        attention = torch.zeros((len(batch), width), dtype=torch.long)
        for i, ids in enumerate(batch):
            input_ids[i, : len(ids)] = torch.tensor(ids)
            attention[i, : len(ids)] = 1
        return {"input_ids": input_ids, "attention_mask": attention}


def extract_text(job: TextJob, model_bundle=None) -> dict:
    """Extract one [CLS] row per document and write the PTRZ file.

    Documents are tokenized with the model's subword tokenizer, truncated
    to ``max_length`` tokens and padded per batch; inference runs in eval
    mode with gradients disabled, so repeat runs are bit-identical.
    """
    texts, labels = read_text_corpus(job.input_path)
    tokenizer, model = model_bundle or load_text_model(job)
    model.eval()
    rows = []
    with torch.no_grad():
        for start in range(0, len(texts), job.batch_size):
            chunk = texts[start:start + job.batch_size]
            encoded = tokenizer(chunk, max_length=job.max_length,
                                truncation=True, padding=True,
                                return_tensors="pt")
            if not isinstance(encoded, dict):
                encoded = dict(encoded)
            encoded.pop("token_type_ids", None)
            output = model(**encoded)
            cls = output.last_hidden_state[:, 0, :]
            rows.append(cls.numpy().astype(np.float32))
    features = np.vstack(rows)
    write_ptrz(job.output_path, features, labels)
    log.info("wrote %s: n=%d d=%d", job.output_path, *features.shape)
    return {"n": features.shape[0], "d": features.shape[1],
            "out": str(job.output_path)}
