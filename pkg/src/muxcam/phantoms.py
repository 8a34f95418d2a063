"""Synthetic test scenes with known structure.

The still phantoms are exactly piecewise constant (their gradients vanish
off a sparse set of edges), which makes them the natural ground truth for
TV-regularized recovery benchmarks.  The video phantom translates a
square across a static background so spatio-temporal recovery has real
inter-frame redundancy to exploit.  All generators are deterministic in
their seed and return intensities inside [0, 1].
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "blocks_phantom",
    "disks_phantom",
    "bars_phantom",
    "translating_square_video",
]


def blocks_phantom(size: int = 128, n_blocks: int = 4, seed: int = 0) -> np.ndarray:
    """Axis-aligned rectangles of random level over a flat background."""
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    img = np.full((size, size), 0.1)
    for _ in range(n_blocks):
        h = int(rng.integers(size // 6, size // 2))
        w = int(rng.integers(size // 6, size // 2))
        r = int(rng.integers(0, size - h))
        c = int(rng.integers(0, size - w))
        img[r:r + h, c:c + w] = rng.uniform(0.25, 1.0)
    return img


def disks_phantom(size: int = 128, n_disks: int = 3, seed: int = 0) -> np.ndarray:
    """Filled circles of random level over a flat background."""
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    img = np.full((size, size), 0.05)
    rr, cc = np.mgrid[0:size, 0:size]
    for _ in range(n_disks):
        radius = int(rng.integers(size // 8, size // 3))
        r0 = int(rng.integers(radius, size - radius))
        c0 = int(rng.integers(radius, size - radius))
        mask = (rr - r0) ** 2 + (cc - c0) ** 2 <= radius ** 2
        img[mask] = rng.uniform(0.3, 1.0)
    return img


def bars_phantom(size: int = 128, n_bars: int = 4, seed: int = 0) -> np.ndarray:
    """Alternating horizontal and vertical bars of random level."""
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    img = np.full((size, size), 0.15)
    for k in range(n_bars):
        width = int(rng.integers(size // 10, size // 4))
        pos = int(rng.integers(0, size - width))
        level = rng.uniform(0.3, 0.95)
        if k % 2 == 0:
            img[pos:pos + width, :] = level
        else:
            img[:, pos:pos + width] = level
    return img


def translating_square_video(
    size: int = 64,
    n_frames: int = 16,
    square: int = 16,
    step: int = 1,
    background: float = 0.05,
    level: float = 0.9,
) -> np.ndarray:
    """A bright square moving diagonally by ``step`` pixels per frame.

    Returns a (n_frames, size, size) stack; the trajectory stays inside
    the field of view for every frame.
    """
    if size < 8 or n_frames < 1:
        raise ValueError("size must be >= 8 and n_frames >= 1")
    travel = (n_frames - 1) * step + square
    if travel > size:
        raise ValueError(
            f"square leaves the field of view: {n_frames} frames x step {step} "
            f"+ side {square} > {size}"
        )
    frames = np.full((n_frames, size, size), background)
    for t in range(n_frames):
        r = t * step
        c = t * step
        frames[t, r:r + square, c:c + square] = level
    return frames
