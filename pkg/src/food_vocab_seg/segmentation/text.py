"""Class-name prompts, static text embeddings and image-informed fusion."""

import logging
from typing import List, Sequence, Union

import numpy as np

from food_vocab_seg.encoders import TextBatch, ToyClip, resolve_templates
from food_vocab_seg.encoders.prompts import apply_template
from food_vocab_seg.errors import InvalidInputError, ShapeError
from food_vocab_seg.foodlearner import EnrichedTokens, TokenKind
from food_vocab_seg.numcore import Linear, Tensor, as_tensor

logger = logging.getLogger(__name__)

Templates = Union[str, Sequence[str]]


def build_prompts(class_names: Sequence[str], templates: Templates) -> List[List[str]]:
    """Prompted strings per class, one per template; the bare name when no template is given.

    Raises:
        InvalidInputError: If ``class_names`` is empty
        TokenizerError: If a template is malformed
    """
    if not class_names:
        raise InvalidInputError("class list is empty")
    resolved = resolve_templates(templates)
    if not resolved:
        return [[name] for name in class_names]
    return [[apply_template(t, name) for t in resolved] for name in class_names]


def build_text_tokens(clip: ToyClip, class_names: Sequence[str], templates: Templates) -> List[TextBatch]:
    """One TextBatch per template, row c holding class ``c``."""
    prompts = build_prompts(class_names, templates)
    per_template = list(zip(*prompts))
    return [clip.tokenizer.batch(list(rows)) for rows in per_template]


def static_embeddings(clip: ToyClip, class_names: Sequence[str], templates: Templates) -> np.ndarray:
    """Frozen text embeddings E_text [C, d], averaged over templates per class."""
    prompts = build_prompts(class_names, templates)
    n_templates = len(prompts[0])
    flat = [p for per_class in prompts for p in per_class]
    embedded = clip.embed_prompts(flat).reshape(len(class_names), n_templates, -1)
    logger.debug(f"Static embeddings for {len(class_names)} classes x {n_templates} templates")
    return embedded.mean(axis=1)


def pool_queries(enriched: EnrichedTokens, projection: Linear) -> Tensor:
    """Average the enriched query tokens over Q, then project to the text width.

    Accepts [Q, d_q] (returns [d]) or [B, Q, d_q] (returns [B, d]).

    Raises:
        InvalidInputError: If the tokens are not enriched query tokens
    """
    if enriched.kind is not TokenKind.ENRICHED_QUERY:
        raise InvalidInputError(f"expected enriched query tokens, got {enriched.kind.value}")
    return projection(enriched.value.mean(axis=-2))


def fuse(e_hat: Tensor, e_static: Tensor) -> Tensor:
    """Element-wise sum of pooled visual knowledge and static text embeddings.

    Raises:
        ShapeError: If the embedding widths differ
    """
    e_hat, e_static = as_tensor(e_hat), as_tensor(e_static)
    if e_hat.shape[-1] != e_static.shape[-1]:
        raise ShapeError(f"cannot fuse widths {e_hat.shape[-1]} and {e_static.shape[-1]}")
    return e_hat + e_static
