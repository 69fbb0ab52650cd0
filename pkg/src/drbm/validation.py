"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_batch(v, n_features: int, name: str = "v"):
    """Coerce a single sample or a batch to a 2-D float64 array.

    Returns (array of shape (batch, n_features), was_single) where
    was_single tells the caller whether to squeeze its result back to
    one dimension.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    if single:
        v = v[None, :]
    if v.ndim != 2 or v.shape[1] != n_features:
        raise ValueError(
            f"{name} must have {n_features} features, got shape {v.shape}"
        )
    return v, single


def check_value_range(v, n_levels: int, name: str = "v") -> None:
    """Reject entries outside [0, n_levels]."""
    v = np.asarray(v)
    if v.size and (np.min(v) < 0 or np.max(v) > n_levels):
        raise ValueError(
            f"{name} entries must lie in [0, {n_levels}], "
            f"got range [{np.min(v)}, {np.max(v)}]"
        )


def as_generator(rng) -> np.random.Generator:
    """Coerce seeds, stream handles, and generators to a Generator.

    Accepts an ``np.random.Generator`` (returned unchanged), an
    ``RngStream``-like object exposing ``.generator()``, an integer seed,
    or None for OS entropy.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    if hasattr(rng, "generator"):
        return rng.generator()
    return np.random.default_rng(rng)
