"""Synth Package - Labeled synthetic flow datasets from class profiles."""

from .generator import (
    check_profiles,
    default_profiles,
    generate_dataset,
    load_profiles,
    near_duplicate,
    save_profiles,
)

__all__ = [
    "check_profiles",
    "default_profiles",
    "generate_dataset",
    "load_profiles",
    "near_duplicate",
    "save_profiles",
]
