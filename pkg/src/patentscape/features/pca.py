"""PCA over dense embedding vectors, used to compress pooled embeddings
before handing them to an SVM."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError

log = logging.getLogger(__name__)

PROJECTION_FORMAT = "patentscape-pca"
PROJECTION_VERSION = 1


@dataclass(frozen=True)
class PcaProjection:
    """Mean vector plus the top-k principal directions (rows)."""

    mean: np.ndarray
    components: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        comp = np.asarray(self.components, dtype=np.float64)
        if mean.ndim != 1 or comp.ndim != 2 or comp.shape[1] != mean.shape[0]:
            raise ConfigError("components must be a (k, d) matrix matching the mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comp)

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": PROJECTION_FORMAT,
                "version": PROJECTION_VERSION,
                "mean": self.mean.tolist(),
                "components": self.components.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PcaProjection":
        data = json.loads(text)
        if data.get("format") != PROJECTION_FORMAT or data.get("version") != PROJECTION_VERSION:
            raise ConfigError(
                f"unsupported projection file: format={data.get('format')!r} "
                f"version={data.get('version')!r}"
            )
        return cls(np.array(data["mean"], dtype=np.float64),
                   np.array(data["components"], dtype=np.float64))

    def save(self, path: str | os.PathLike[str]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> "PcaProjection":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def pca_fit(vectors: Iterable[Sequence[float]] | np.ndarray, k: int = 50) -> PcaProjection:
    """Fit a k-component PCA on the rows of `vectors`.

    k is clamped to min(d, n-1) with a warning; constant data is an error
    because no principal direction is defined.
    """
    data = np.asarray(list(vectors) if not isinstance(vectors, np.ndarray) else vectors,
                      dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ConfigError("PCA needs at least 2 training vectors of equal dimension")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    n, d = data.shape
    limit = min(d, n - 1)
    if k > limit:
        log.warning("PCA k=%d exceeds min(d, n-1)=%d; clamping", k, limit)
        k = limit

    mean = data.mean(axis=0)
    centered = data - mean
    if not np.any(np.abs(centered) > 1e-12):
        raise ConfigError("PCA input has zero variance; no principal directions exist")

    # Rows of vt are the principal directions ordered by singular value.
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    # SVD leaves each direction's sign arbitrary; pin it so fits are
    # reproducible across runs and BLAS builds.
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaProjection(mean=mean, components=components)


def pca_project(v: Sequence[float] | np.ndarray, proj: PcaProjection) -> np.ndarray:
    vec = np.asarray(v, dtype=np.float64)
    if vec.shape != (proj.input_dim,):
        raise ConfigError(
            f"vector has dimension {vec.shape}, projection expects ({proj.input_dim},)"
        )
    return proj.components @ (vec - proj.mean)
