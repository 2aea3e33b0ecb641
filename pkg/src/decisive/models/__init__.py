"""Bundled example models."""

from __future__ import annotations

from pathlib import Path

MODEL_DIR = Path(__file__).resolve().parent


def model_path(name: str) -> Path:
    """Path of a bundled model, by stem (``"pacman"``) or file name."""
    p = MODEL_DIR / (name if name.endswith(".shs") else name + ".shs")
    if not p.exists():
        raise FileNotFoundError(f"no bundled model {name!r}")
    return p


def load(name: str):
    from decisive.shs.modelfile import load_model
    return load_model(model_path(name))
