"""Basins of attraction on a 2-D grid, compared against the Voronoi partition."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsConfig, PrototypeSet
from .inference import infer, nearest

# indexed colors for the raster output, cycled when k is larger
PALETTE = np.array([
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189),
    (140, 86, 75), (227, 119, 194), (127, 127, 127), (188, 189, 34), (23, 190, 207),
], dtype=np.uint8)


@dataclass(frozen=True)
class BasinGrid:
    """Labels on a ``h x w`` raster (row 0 is the top edge, ``y = ymax``).

    ``bounds`` is ``(xmin, xmax, ymin, ymax)``; ``resolution`` is ``(w, h)``.
    """

    bounds: tuple
    resolution: tuple
    basin_labels: np.ndarray
    voronoi_labels: np.ndarray
    agreement: float
    memories: np.ndarray

    def cell_centers(self) -> np.ndarray:
        return cell_centers(self.bounds, self.resolution)


def default_bounds(memories, pad: float = 0.2) -> tuple:
    """Bounding box of the memories, each side padded by ``pad`` of its extent."""
    lo, hi = memories.min(axis=0), memories.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    lo, hi = lo - pad * span, hi + pad * span
    return (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))


def cell_centers(bounds, resolution) -> np.ndarray:
    xmin, xmax, ymin, ymax = bounds
    w, h = resolution
    xs = xmin + (np.arange(w) + 0.5) * (xmax - xmin) / w
    ys = ymax - (np.arange(h) + 0.5) * (ymax - ymin) / h
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def compute_basins(protos: PrototypeSet, dyn: DynamicsConfig, bounds=None, resolution=(200, 200)) -> BasinGrid:
    """Run the recursion from every cell center and label it by the memory
    nearest to where it lands."""
    if protos.d != 2:
        raise ValueError(f"basin maps need 2-D memories, got d={protos.d}")
    w, h = (int(r) for r in resolution)
    if w < 1 or h < 1:
        raise ValueError("resolution must be positive")
    bounds = default_bounds(protos.memories) if bounds is None else tuple(float(b) for b in bounds)
    if not (bounds[1] > bounds[0] and bounds[3] > bounds[2]):
        raise ValueError("bounds must satisfy xmin < xmax and ymin < ymax")
    pts = cell_centers(bounds, (w, h))
    basin = infer(pts, protos, dyn).labels.reshape(h, w)
    voronoi = nearest(pts, protos.memories)[0].reshape(h, w)
    return BasinGrid(bounds, (w, h), basin, voronoi, float(np.mean(basin == voronoi)), np.array(protos.memories))


def write_ppm(path, labels) -> None:
    """Plain (ASCII, P3) PPM with one indexed color per label."""
    labels = np.asarray(labels)
    h, w = labels.shape
    rgb = PALETTE[labels % len(PALETTE)]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P3\n{w} {h}\n255\n")
        for row in rgb:
            fh.write(" ".join(f"{r} {g} {b}" for r, g, b in row))
            fh.write("\n")


def read_ppm(path) -> np.ndarray:
    """Parse a plain PPM back into an ``h x w x 3`` uint8 array."""
    with open(path, encoding="ascii") as fh:
        tokens = [t for line in fh for t in line.split("#")[0].split()]
    if tokens[0] != "P3":
        raise ValueError("not a plain PPM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array(tokens[4:4 + 3 * w * h], dtype=np.int64)
    return data.reshape(h, w, 3).astype(np.uint8 if maxval < 256 else np.uint16)


def write_grid_csv(path, grid: BasinGrid) -> None:
    """One row per cell: x, y, basin label, Voronoi label."""
    pts = grid.cell_centers()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "basin", "voronoi"])
        for (x, y), b, v in zip(pts, grid.basin_labels.ravel(), grid.voronoi_labels.ravel()):
            writer.writerow([repr(float(x)), repr(float(y)), int(b), int(v)])


def write_memories_csv(path, memories) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["memory", "x", "y"])
        for i, (x, y) in enumerate(np.asarray(memories)):
            writer.writerow([i, repr(float(x)), repr(float(y))])


def random_memories(k: int = 3, seed: int = 0) -> PrototypeSet:
    """k memories uniform in the unit square."""
    return PrototypeSet(np.random.default_rng(seed).uniform(0.0, 1.0, size=(k, 2)))
