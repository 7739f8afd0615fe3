"""STPCN Package - Parallel convolutional embedder, margin loss, training and model files."""

from .loss import arcface_loss, cosine_logits
from .model import EMBED_DIM, StpcnModel, embed, embed_batch, stack_examples
from .persistence import (
    FORMAT_VERSION,
    load_model,
    read_embeddings_csv,
    read_model_header,
    save_model,
    write_embeddings_csv,
)
from .training import train

__all__ = [
    "EMBED_DIM",
    "FORMAT_VERSION",
    "StpcnModel",
    "arcface_loss",
    "cosine_logits",
    "embed",
    "embed_batch",
    "load_model",
    "read_embeddings_csv",
    "read_model_header",
    "save_model",
    "stack_examples",
    "train",
    "write_embeddings_csv",
]
