"""Open-vocabulary inference: class maps for arbitrary class-name lists."""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from PIL import Image

from food_vocab_seg import config
from food_vocab_seg.encoders import ToyClip
from food_vocab_seg.errors import InvalidInputError
from food_vocab_seg.numcore import no_grad
from food_vocab_seg.segmentation.model import OpenVocabSegmenter
from food_vocab_seg.segmentation.models import PredictionSidecar, ProposalSet, nearest_resize
from food_vocab_seg.segmentation.text import Templates, static_embeddings

logger = logging.getLogger(__name__)


def vote_masks(proposals: ProposalSet, index: int = 0) -> np.ndarray:
    """Per-pixel argmax over classes of sum_p P_cls[p, c] * sigmoid(mask[p]), at mask resolution."""
    probs = proposals.class_probs.numpy()[index][:, :proposals.num_classes]
    masks = 1.0 / (1.0 + np.exp(-proposals.mask_logits.numpy()[index]))
    votes = np.einsum("pc,phw->chw", probs, masks)
    return np.argmax(votes, axis=0)


def segment_images(
    segmenter: OpenVocabSegmenter,
    clip: ToyClip,
    images: np.ndarray,
    class_names: Sequence[str],
    templates: Optional[Templates] = None,
) -> np.ndarray:
    """Class maps [B, H, W] with values indexing ``class_names``.

    No parameter depends on the class list, so classes unseen in training
    are handled by embedding their names.
    """
    images = np.asarray(images)
    if images.ndim != 4:
        raise InvalidInputError(f"expected [B, H, W, 3] images, got {images.shape}")
    if not class_names:
        raise InvalidInputError("class list is empty")
    templates = segmenter.config.templates if templates is None else templates
    return _segment_with(segmenter, clip, images, static_embeddings(clip, class_names, templates))


def _segment_with(segmenter: OpenVocabSegmenter, clip: ToyClip, images: np.ndarray, e_static: np.ndarray) -> np.ndarray:
    height, width = images.shape[1:3]
    with no_grad():
        _, proposals = segmenter(clip.encode_image(images), e_static)
    return np.stack([
        nearest_resize(vote_masks(proposals, i), height, width) for i in range(images.shape[0])
    ]).astype(np.int64)


def segment_image(
    segmenter: OpenVocabSegmenter,
    clip: ToyClip,
    image: np.ndarray,
    class_names: Sequence[str],
    templates: Optional[Templates] = None,
) -> np.ndarray:
    """Class map [H, W] of one [H, W, 3] image."""
    return segment_images(segmenter, clip, np.asarray(image)[None], class_names, templates)[0]


def segment_many(
    segmenter: OpenVocabSegmenter,
    clip: ToyClip,
    images: np.ndarray,
    class_names: Sequence[str],
    templates: Optional[Templates] = None,
    chunk: int = 16,
) -> np.ndarray:
    """``segment_images`` over chunks on a thread pool; results keep input order."""
    if len(images) == 0:
        return np.zeros((0,) + tuple(images.shape[1:3]), dtype=np.int64)
    if not class_names:
        raise InvalidInputError("class list is empty")
    # threads share one embedding table; the prompt cache is not touched concurrently
    e_static = static_embeddings(clip, class_names, segmenter.config.templates if templates is None else templates)
    starts = list(range(0, len(images), chunk))
    with ThreadPoolExecutor(max_workers=max(1, config.OVFS_THREADS)) as pool:
        parts = list(pool.map(lambda s: _segment_with(segmenter, clip, images[s:s + chunk], e_static), starts))
    return np.concatenate(parts)


def write_prediction(
    class_map: np.ndarray,
    class_names: Sequence[str],
    directory: Union[str, Path],
    name: str,
) -> List[Path]:
    """Write ``<name>.png`` (single-channel class indices) and ``<name>.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if int(class_map.max(initial=0)) > 255:
        raise InvalidInputError("class maps with more than 256 classes cannot be stored as 8-bit PNG")
    png = directory / f"{name}.png"
    Image.fromarray(class_map.astype(np.uint8), mode="L").save(png)
    sidecar = directory / f"{name}.json"
    sidecar.write_text(
        PredictionSidecar(image=png.name, classes=dict(enumerate(class_names))).model_dump_json(indent=2)
    )
    logger.debug(f"Wrote prediction {png}")
    return [png, sidecar]
