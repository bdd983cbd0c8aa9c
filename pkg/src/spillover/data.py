"""Dataset container, CSV ingestion and synthetic Gaussian clusters."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when a dataset cannot be built or parsed."""


@dataclass(frozen=True)
class Dataset:
    """An ``n x m`` real feature matrix with stable sample identifiers."""

    values: np.ndarray
    feature_names: Optional[list[str]] = None
    sample_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"expected a 2-D matrix, got shape {values.shape}")
        n, m = values.shape
        # n >= 2 is enforced by the consumers (clustering, depth); a single
        # draw is still a valid dataset.
        if n < 1 or m < 1:
            raise DataError(f"need n >= 1 samples and m >= 1 features, got {n}x{m}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {bad[0]}, col {bad[1]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        ids = list(self.sample_ids) if self.sample_ids else list(range(n))
        if len(ids) != n:
            raise DataError(f"{len(ids)} sample ids for {n} rows")
        if len(set(ids)) != n:
            raise DataError("sample ids must be unique")
        object.__setattr__(self, "sample_ids", ids)

        if self.feature_names is not None and len(self.feature_names) != m:
            raise DataError(f"{len(self.feature_names)} feature names for {m} columns")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def with_row(self, index: int, row: np.ndarray) -> "Dataset":
        """Copy of the dataset with one row replaced."""
        values = self.values.copy()
        values[index] = row
        return Dataset(values, self.feature_names, self.sample_ids)

    def subset(self, mask) -> "Dataset":
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return Dataset(self.values[idx], self.feature_names, [self.sample_ids[i] for i in idx])


@dataclass(frozen=True)
class GaussianSpec:
    """Isotropic Gaussian blob: ``count`` draws around ``center`` with scale ``std``."""

    center: Sequence[float]
    std: float
    count: int

    def __post_init__(self):
        if not self.std > 0:
            raise DataError(f"std must be positive, got {self.std}")
        if self.count < 1:
            raise DataError(f"count must be >= 1, got {self.count}")


def load_csv(path, has_header: bool = False) -> Dataset:
    """Read a plain comma-separated numeric matrix.

    No quoting is supported. Errors carry 0-based data-row and column
    indices (the header row, if any, is not counted).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"empty file: {path}")

    names = None
    if has_header:
        names = [c.strip() for c in lines[0].split(",")]
        lines = lines[1:]
        if not lines:
            raise DataError(f"no data rows in {path}")

    rows = []
    width = None
    for r, line in enumerate(lines):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(f"ragged row {r}: {len(cells)} columns, expected {width}")
        row = []
        for c, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"parse error at row {r}, col {c}: {cell.strip()!r}") from None
            if not np.isfinite(v):
                raise DataError(f"non-finite value at row {r}, col {c}")
            row.append(v)
        rows.append(row)

    if names is not None and len(names) != width:
        raise DataError(f"header has {len(names)} names, data has {width} columns")
    return Dataset(np.array(rows), names)


def save_csv(dataset: Dataset, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            names = dataset.feature_names or [f"x{j}" for j in range(dataset.m)]
            fh.write(",".join(names) + "\n")
        for row in dataset.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def synth_gaussians(specs: Sequence[GaussianSpec], seed: int) -> Dataset:
    """Draw each spec's samples in order from one seeded generator."""
    if not specs:
        raise DataError("need at least one GaussianSpec")
    dims = {len(s.center) for s in specs}
    if len(dims) != 1:
        raise DataError(f"dimension mismatch across specs: {sorted(dims)}")
    rng = np.random.default_rng(seed)
    blocks = [
        np.asarray(s.center, dtype=float) + s.std * rng.standard_normal((s.count, len(s.center)))
        for s in specs
    ]
    return Dataset(np.vstack(blocks))


TOY_SPECS = (
    GaussianSpec(center=(1.0, 0.0), std=1.45, count=100),
    GaussianSpec(center=(5.0, 0.0), std=0.75, count=100),
)


def toy_dataset(seed: int) -> Dataset:
    """Two 2-D blobs: wide one at (1, 0), tight one at (5, 0)."""
    return synth_gaussians(TOY_SPECS, seed)


def toy_labels() -> np.ndarray:
    return np.repeat([0, 1], [s.count for s in TOY_SPECS])


def random_pair(seed: int) -> Dataset:
    """Two unit-variance Gaussian blobs with random dimension, sizes and gap.

    Dimension is drawn from {2, 5, 10}. The first blob (which holds row 0)
    has 2..12 points and the second 5..200, with a centre gap in [1, 4]:
    the constructive spill certificate only bites when the source cluster
    is small and touches the other one.
    """
    rng = np.random.default_rng(seed)
    m = int(rng.choice([2, 5, 10]))
    n1 = int(rng.integers(2, 13))
    n2 = int(rng.integers(5, 201))
    direction = rng.standard_normal(m)
    direction /= np.linalg.norm(direction)
    gap = rng.uniform(1.0, 4.0)
    specs = [GaussianSpec(np.zeros(m), 1.0, n1), GaussianSpec(gap * direction, 1.0, n2)]
    return synth_gaussians(specs, int(rng.integers(2**31)))


PAIR_GAP = 2.5


def close_pair(seed: int, count: int = 30) -> Dataset:
    """Two unit 2-D blobs ``PAIR_GAP`` apart, ``count`` points each."""
    specs = [GaussianSpec((0.0, 0.0), 1.0, count), GaussianSpec((PAIR_GAP, 0.0), 1.0, count)]
    return synth_gaussians(specs, seed)


SYNTH = {"toy": toy_dataset, "random": random_pair, "pair": close_pair}


def synth_named(name: str, seed: int) -> Dataset:
    try:
        return SYNTH[name](seed)
    except KeyError:
        raise DataError(f"unknown synthetic dataset {name!r}; choose from {sorted(SYNTH)}") from None
