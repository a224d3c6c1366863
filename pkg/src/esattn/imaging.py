"""Raster presentation utilities: masked-scene preparation, the two-panel
in-context layout, and heatmap rendering of attention columns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ShapeError
from .geometry import GRAY, Raster

# Fixed 256-entry monotone black -> red -> yellow -> white ramp, built with
# integer arithmetic only so rendered heatmaps are bit-reproducible.
_V = np.arange(256)
HEAT_RAMP = np.stack([
    np.minimum(255, 3 * _V),
    np.clip(3 * _V - 255, 0, 255),
    np.clip(3 * _V - 510, 0, 255),
], axis=1).astype(np.uint8)
del _V


@dataclass(frozen=True)
class InContextPair:
    """Side-by-side guidance input: the appearance reference on the left,
    the masked scene on the right, plus the doubled-width pair mask that is
    all zero over the reference panel."""

    reference_panel: Raster
    scene_panel: Raster
    pair_mask: np.ndarray

    def composite(self) -> np.ndarray:
        """The horizontally concatenated [reference | scene] image."""
        return np.concatenate([self.reference_panel.pixels, self.scene_panel.pixels], axis=1)


@dataclass(frozen=True)
class Heatmap:
    """Normalised scalar field in [0, 1] together with its colour render."""

    values: np.ndarray
    rendered: np.ndarray

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def prepare_masked_scene(scene: Raster, source_mask: Raster, target_mask: Raster) -> Raster:
    """Blank the union of source and target regions to neutral gray.

    All other pixels are untouched; the result's mask records the blanked
    region, and the operation is idempotent.
    """
    if not (scene.pixels.shape[:2] == source_mask.mask.shape == target_mask.mask.shape):
        raise ShapeError("scene, source mask and target mask must share dimensions")
    union = source_mask.mask | target_mask.mask
    pixels = scene.pixels.copy()
    pixels[union] = GRAY
    return Raster(pixels=pixels, mask=union)


def compose_incontext(reference: Raster, masked_scene: Raster, target_mask: Raster) -> InContextPair:
    """Build the in-context pair from equally sized panels."""
    if not (reference.pixels.shape == masked_scene.pixels.shape
            and target_mask.mask.shape == reference.pixels.shape[:2]):
        raise ShapeError("reference, masked scene and target mask must share dimensions")
    h, w = reference.mask.shape
    pair_mask = np.concatenate([np.zeros((h, w), dtype=bool), target_mask.mask], axis=1)
    return InContextPair(
        reference_panel=reference.copy(),
        scene_panel=masked_scene.copy(),
        pair_mask=pair_mask,
    )


def attention_heatmap(attention: np.ndarray, key: int, layout: tuple[int, int]) -> Heatmap:
    """Reshape one key column to ``layout`` (row-major), max-normalise and
    colour it; an all-zero column renders all zero."""
    arr = np.asarray(attention, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError("attention must be a (queries x keys) matrix")
    if not 0 <= key < arr.shape[1]:
        raise IndexError(f"key {key} out of range for {arr.shape[1]} columns")
    h, w = int(layout[0]), int(layout[1])
    if h * w != arr.shape[0]:
        raise ShapeError(f"layout {h}x{w} does not tile {arr.shape[0]} query tokens")
    grid = arr[:, key].reshape(h, w)
    peak = grid.max()
    values = grid / peak if peak > 0.0 else np.zeros_like(grid)
    idx = np.clip(np.rint(values * 255.0), 0, 255).astype(np.intp)
    return Heatmap(values=values, rendered=HEAT_RAMP[idx])


def heatmap_filename(stem: str, strategy: str, key: int) -> str:
    return f"{stem}__{strategy}__k{key}.png"


def save_image(path, pixels: np.ndarray) -> None:
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="RGB").save(path)


def save_mask(path, mask: np.ndarray) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_image(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))


def load_mask(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L")) >= 128


def load_raster(image_path, mask_path=None) -> Raster:
    pixels = load_image(image_path)
    if mask_path is None:
        mask = np.zeros(pixels.shape[:2], dtype=bool)
    else:
        mask = load_mask(mask_path)
    return Raster(pixels=pixels, mask=mask)
