"""Procedural dishes: ingredient blobs with per-class appearance modes and exact masks."""

import colorsys
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from food_vocab_seg import config as settings
from food_vocab_seg.config import BACKGROUND_CLASS
from food_vocab_seg.datagen.models import SHAPES, TEXTURES, AppearanceMode, DatagenConfig, IngredientClass, SegSample
from food_vocab_seg.errors import DatasetError
from food_vocab_seg.numcore import RngState

logger = logging.getLogger(__name__)

FOOD_NAMES = (
    "egg", "rice", "tomato", "carrot", "broccoli", "potato", "onion", "mushroom",
    "chicken", "beef", "shrimp", "salmon", "noodle", "bread", "cheese", "lettuce",
    "cucumber", "corn", "pepper", "pumpkin", "tofu", "bacon", "lemon", "strawberry",
    "banana", "apple", "spinach", "eggplant", "sausage", "avocado", "olive", "cabbage",
)
PLATE_COLOR = (236, 232, 222)


def class_names_for(n_classes: int) -> List[str]:
    """Background followed by ``n_classes`` single-word ingredient names."""
    names = list(FOOD_NAMES[:n_classes])
    names += [f"ingredient{i}" for i in range(len(names), n_classes)]
    return [BACKGROUND_CLASS] + names


def _palette(count: int, rng: RngState) -> List[Tuple[int, int, int]]:
    """``count`` distinct saturated colours in shuffled order, none close to the plate."""
    colors = []
    for i in range(count):
        hue = i / count
        saturation = 0.85 if i % 2 == 0 else 0.6
        value = 0.9 if i % 3 != 2 else 0.6
        rgb = tuple(int(round(255 * c)) for c in colorsys.hsv_to_rgb(hue, saturation, value))
        while rgb in colors:
            rgb = (rgb[0], rgb[1], (rgb[2] + 7) % 256)
        colors.append(rgb)
    return [colors[i] for i in rng.permutation(count)]


def make_classes(n_classes: int, n_modes: int, rng: RngState) -> List[IngredientClass]:
    """Ingredient classes 1..n, each with ``n_modes`` modes of a unique colour.

    Modes of one class use different shapes while fewer modes than shapes exist.

    Raises:
        DatasetError: If fewer than 4 classes are requested
    """
    if n_classes < 4:
        raise DatasetError(f"need at least 4 classes, got {n_classes}")
    names = class_names_for(n_classes)
    colors = _palette(n_classes * n_modes, rng.child("palette"))
    classes = []
    for index in range(1, n_classes + 1):
        class_rng = rng.child(index)
        shapes = class_rng.permutation(len(SHAPES))
        modes = []
        for m in range(n_modes):
            color = colors[(index - 1) * n_modes + m]
            accent = tuple(int(c * 0.55) for c in color)
            texture = TEXTURES[int(class_rng.integers(0, len(TEXTURES)))]
            modes.append(AppearanceMode(SHAPES[shapes[m % len(SHAPES)]], texture, color, accent))
        classes.append(IngredientClass(index=index, name=names[index], modes=tuple(modes)))
    return classes


def _shape_mask(shape: str, center: Tuple[float, float], radii: Tuple[float, float], size: int) -> np.ndarray:
    canvas = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(canvas)
    cx, cy = center
    rx, ry = radii
    box = (cx - rx, cy - ry, cx + rx, cy + ry)
    if shape == "ellipse":
        draw.ellipse(box, fill=255)
    elif shape == "rectangle":
        draw.rectangle(box, fill=255)
    elif shape == "triangle":
        draw.polygon([(cx, cy - ry), (cx + rx, cy + ry), (cx - rx, cy + ry)], fill=255)
    else:
        draw.polygon([(cx, cy - ry), (cx + rx, cy), (cx, cy + ry), (cx - rx, cy)], fill=255)
    return np.array(canvas) > 0


def _texture(mode: AppearanceMode, size: int, phase: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    if mode.texture == "stripes":
        accent = ((xx + yy + phase) // 3) % 2 == 1
    elif mode.texture == "dots":
        accent = ((xx + phase) % 5 - 2) ** 2 + ((yy + phase) % 5 - 2) ** 2 <= 2
    elif mode.texture == "checker":
        accent = ((xx + phase) // 4 + yy // 4) % 2 == 1
    else:
        accent = np.zeros((size, size), dtype=bool)
    return np.where(accent[..., None], np.array(mode.accent), np.array(mode.color))


def dish_caption(names: Sequence[str]) -> str:
    """``"a dish with egg rice and tomato"``, ingredients sorted by name."""
    names = sorted(names)
    if not names:
        return "an empty plate"
    listed = names[0] if len(names) == 1 else " ".join(names[:-1]) + " and " + names[-1]
    return f"a dish with {listed}"


def render_sample(index: int, classes: Sequence[IngredientClass], cfg: DatagenConfig, rng: RngState) -> SegSample:
    """Draw sample ``index`` from its own stream ``rng.child(index)``.

    The first chosen class is ``index mod n`` and is painted last, so it is
    always visible; the others may be partly or fully occluded.
    """
    sample_rng = rng.child(index)
    size = cfg.image_size
    n_blobs = int(sample_rng.integers(1, cfg.max_blobs + 1))
    chosen = [classes[index % len(classes)]]
    chosen += [classes[int(i)] for i in sample_rng.integers(0, len(classes), size=n_blobs - 1)]

    image = np.empty((size, size, 3), dtype=np.float64)
    image[:] = PLATE_COLOR
    mask = np.zeros((size, size), dtype=np.uint8)
    for ingredient in reversed(chosen):
        mode = ingredient.modes[int(sample_rng.integers(0, len(ingredient.modes)))]
        rx, ry = sample_rng.uniform((2,), size * 0.12, size * 0.28)
        cx = sample_rng.uniform((), rx, size - rx)
        cy = sample_rng.uniform((), ry, size - ry)
        region = _shape_mask(mode.shape, (float(cx), float(cy)), (float(rx), float(ry)), size)
        pattern = _texture(mode, size, int(sample_rng.integers(0, 8)))
        image[region] = pattern[region]
        mask[region] = ingredient.index

    if cfg.noise_std > 0:
        image = image + sample_rng.normal(image.shape, cfg.noise_std)
    image = np.clip(np.round(image), 0, 255).astype(np.uint8)

    by_index = {c.index: c.name for c in classes}
    present = [by_index[int(c)] for c in np.unique(mask) if c != 0]
    return SegSample(index=index, image=image, mask=mask, present_classes=present, caption=dish_caption(present))


def gen_corpus(
    n_classes: int,
    n_samples: int,
    rng: RngState,
    cfg: Optional[DatagenConfig] = None,
    classes: Optional[Sequence[IngredientClass]] = None,
) -> List[SegSample]:
    """Render ``n_samples`` dishes in parallel; the result depends only on the seed.

    Args:
        n_classes: Ingredient classes (background excluded)
        n_samples: Number of samples
        rng: Root stream; classes come from ``rng.child("classes")`` unless given
        cfg: Rendering settings
        classes: Pre-built classes shared with another corpus

    Returns:
        Samples in index order
    """
    cfg = cfg or DatagenConfig(n_classes=n_classes)
    classes = list(classes) if classes is not None else make_classes(n_classes, cfg.n_modes, rng.child("classes"))
    if len(classes) != n_classes:
        raise DatasetError(f"{len(classes)} classes given for n_classes={n_classes}")
    sample_rng = rng.child("samples")
    workers = max(1, settings.OVFS_THREADS)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        samples = list(pool.map(lambda i: render_sample(i, classes, cfg, sample_rng), range(n_samples)))
    logger.info(f"Rendered {n_samples} samples over {n_classes} classes with {workers} workers")
    return samples
