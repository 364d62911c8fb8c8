"""Paired toy image/text encoders with archive I/O and a static-embedding cache."""

import json
import logging
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from cachetools import LRUCache

from food_vocab_seg.encoders.image_encoder import ImageEncoder
from food_vocab_seg.encoders.models import EncoderConfig, TextBatch, TextEmbedding, VisualEmbedding
from food_vocab_seg.encoders.text_encoder import TextEncoder
from food_vocab_seg.encoders.tokenizer import Tokenizer
from food_vocab_seg.errors import ArchiveError
from food_vocab_seg.numcore import RngState, Tensor, load_archive, no_grad, save_archive, strip_prefix, with_prefix

logger = logging.getLogger(__name__)

ARCHIVE_PREFIX = "encoders"
EMBEDDING_CACHE_SIZE = 4096


class ToyClip:
    """The frozen vision-language backbone shared by both training stages."""

    def __init__(self, tokenizer: Tokenizer, config: EncoderConfig, rng: RngState):
        """Initialize randomly from ``rng``.

        Args:
            tokenizer: Vocabulary used by the text encoder
            config: Encoder sizes
            rng: Stream for parameter initialisation
        """
        self.tokenizer = tokenizer
        self.config = config
        self.image_encoder = ImageEncoder(config, rng.child("image"))
        self.text_encoder = TextEncoder(tokenizer.vocab_size, config, rng.child("text"))
        self._text_cache: LRUCache = LRUCache(maxsize=EMBEDDING_CACHE_SIZE)

    # --- freezing ---
    def freeze(self) -> "ToyClip":
        self.image_encoder.freeze()
        self.text_encoder.freeze()
        self._text_cache.clear()
        return self

    def unfreeze(self) -> "ToyClip":
        self.image_encoder.unfreeze()
        self.text_encoder.unfreeze()
        self._text_cache.clear()
        return self

    @property
    def frozen(self) -> bool:
        return self.image_encoder.frozen and self.text_encoder.frozen

    # --- encoding ---
    def encode_image(self, image: np.ndarray) -> VisualEmbedding:
        """Patch tokens for one [H, W, 3] image or a [B, H, W, 3] batch."""
        return self.image_encoder(image)

    def encode_text(self, batch: TextBatch) -> List[TextEmbedding]:
        """One pooled embedding per row of ``batch``."""
        pooled = self.text_encoder(batch)
        return [TextEmbedding(value=pooled[i]) for i in range(batch.batch_size)]

    def embed_prompts(self, prompts: Sequence[str]) -> np.ndarray:
        """Pooled embeddings [n, d] of prompt strings, cached while frozen."""
        if not self.frozen:
            with no_grad():
                return self.text_encoder(self.tokenizer.batch(prompts)).numpy()

        missing = [p for p in dict.fromkeys(prompts) if p not in self._text_cache]
        if missing:
            with no_grad():
                values = self.text_encoder(self.tokenizer.batch(missing)).numpy()
            for prompt, value in zip(missing, values):
                self._text_cache[prompt] = value
        return np.stack([self._text_cache[p] for p in prompts]) if prompts else np.zeros((0, self.config.d_text))

    # --- persistence ---
    def state_dict(self):
        state = with_prefix(self.image_encoder.state_dict(), "image")
        state.update(with_prefix(self.text_encoder.state_dict(), "text"))
        return with_prefix(state, ARCHIVE_PREFIX)

    def save(self, directory: Union[str, Path]) -> Path:
        """Write ``encoders.safetensors`` and ``vocab.txt`` into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "encoders.safetensors"
        header = {"encoder_config": self.config.model_dump_json(), "vocab_size": str(self.tokenizer.vocab_size)}
        save_archive(path, self.state_dict(), header)
        self.tokenizer.to_file(directory / "vocab.txt")
        return path

    @classmethod
    def load(cls, directory: Union[str, Path], freeze: bool = True) -> "ToyClip":
        """Rebuild from a directory written by ``save``.

        Raises:
            ArchiveError: If the archive does not fit its recorded config
        """
        directory = Path(directory)
        arrays, header = load_archive(directory / "encoders.safetensors")
        tokenizer = Tokenizer.from_file(directory / "vocab.txt")
        if int(header.get("vocab_size", -1)) != tokenizer.vocab_size:
            raise ArchiveError("vocab.txt does not match the encoder archive")
        config = EncoderConfig(**json.loads(header["encoder_config"]))

        clip = cls(tokenizer, config, RngState(0))
        state = strip_prefix(arrays, ARCHIVE_PREFIX)
        clip.image_encoder.load_state_dict(strip_prefix(state, "image"))
        clip.text_encoder.load_state_dict(strip_prefix(state, "text"))
        logger.info(f"Loaded encoders from {directory}")
        return clip.freeze() if freeze else clip

    def parameter_snapshot(self) -> dict:
        """Copies of every encoder parameter, for freezing checks."""
        return {name: array for name, array in self.state_dict().items()}

    def pooled_image(self, images: np.ndarray) -> Tensor:
        return self.image_encoder.pooled(self.image_encoder(images))
