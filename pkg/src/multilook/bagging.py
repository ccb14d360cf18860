"""Bagged deep-decoder projection over non-overlapping patch tilings.

For each patch size in the plan the image is tiled, an independent
decoder is fitted to every tile, and the tiles are placed back; the
per-size estimates are then averaged.  Per-patch seeds are derived from
(base seed, scale index, patch index), so results do not depend on
execution order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import decoder
from .errors import ValidationError

log = logging.getLogger(__name__)

DEFAULT_PATCH_SIZES = ((32, 32), (64, 64), (128, 128))
# smallest Table-style budget column, indexed by patch side
DEFAULT_BUDGETS = {32: 200, 64: 300, 128: 400}


@dataclass
class BaggingPlan:
    """Patch sizes, per-size fit budgets, architecture and seeding for one image."""

    patch_sizes: tuple[tuple[int, int], ...] = DEFAULT_PATCH_SIZES
    budgets: dict[int, int] = field(default_factory=lambda: dict(DEFAULT_BUDGETS))
    arch: decoder.DecoderArch = field(default_factory=decoder.sophisticated_arch)
    lr: float = 1e-3
    base_seed: int = 0

    def for_image(self, height: int, width: int) -> "BaggingPlan":
        """Keep only scales that tile the image; warn about dropped ones."""
        kept = []
        for h, w in self.patch_sizes:
            if h % decoder.UPSAMPLE_FACTOR or w % decoder.UPSAMPLE_FACTOR:
                log.warning("dropping patch size %dx%d (not divisible by 8)", h, w)
            elif height % h or width % w:
                log.warning("dropping patch size %dx%d (does not tile %dx%d)",
                            h, w, height, width)
            elif (h, w) not in kept:
                kept.append((h, w))
        if not kept:
            raise ValidationError(
                f"no patch size in {self.patch_sizes} tiles a {height}x{width} image")
        return BaggingPlan(patch_sizes=tuple(kept), budgets=dict(self.budgets),
                           arch=self.arch, lr=self.lr, base_seed=self.base_seed)

    def budget_for(self, size: tuple[int, int]) -> int:
        return self.budgets.get(size[0], DEFAULT_BUDGETS.get(size[0], 300))


def partition(image: np.ndarray, size: tuple[int, int]):
    """Tile the image into non-overlapping patches; yields (y0, x0, patch)."""
    h, w = size
    height, width = image.shape
    if height % h or width % w:
        raise ValidationError(
            f"patch size {h}x{w} does not divide image {height}x{width}")
    return [(y0, x0, image[y0:y0 + h, x0:x0 + w])
            for y0 in range(0, height, h)
            for x0 in range(0, width, w)]


def reassemble(patches, shape) -> np.ndarray:
    out = np.empty(shape)
    for y0, x0, patch in patches:
        out[y0:y0 + patch.shape[0], x0:x0 + patch.shape[1]] = patch
    return out


def _patch_seed(base_seed: int, scale_idx: int, patch_idx: int) -> int:
    return int(np.random.SeedSequence(
        entropy=base_seed, spawn_key=(scale_idx, patch_idx)).generate_state(1)[0])


def project_scale(image: np.ndarray, size: tuple[int, int], plan: BaggingPlan,
                  scale_idx: int = 0) -> np.ndarray:
    """Fit one decoder per tile of the given size and place the tiles back."""
    fitted = []
    for idx, (y0, x0, patch) in enumerate(partition(image, size)):
        seed = _patch_seed(plan.base_seed, scale_idx, idx)
        try:
            _, out = decoder.fit(patch, plan.arch, plan.budget_for(size),
                                 lr=plan.lr, seed=seed)
        except Exception as e:
            raise type(e)(f"patch {idx} at ({y0},{x0}) size {size}: {e}") from e
        fitted.append((y0, x0, out))
    return reassemble(fitted, image.shape)


def bagged_project(image: np.ndarray, plan: BaggingPlan) -> np.ndarray:
    """Average of the per-scale tiled estimates."""
    plan = plan.for_image(*image.shape)
    if not plan.patch_sizes:
        raise ValidationError("empty bagging plan")
    acc = np.zeros_like(image, dtype=float)
    for scale_idx, size in enumerate(plan.patch_sizes):
        acc += project_scale(image, size, plan, scale_idx)
    return acc / len(plan.patch_sizes)
