"""Word-level tokenizer over a closed vocabulary."""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from food_vocab_seg.config import BOS_TOKEN, EOS_TOKEN, PAD_TOKEN, UNK_TOKEN
from food_vocab_seg.encoders.models import TextBatch
from food_vocab_seg.errors import TokenizerError

logger = logging.getLogger(__name__)

RESERVED = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = range(4)


def split_words(text: str) -> List[str]:
    return text.lower().split()


class Tokenizer:
    """Maps lower-cased whitespace-separated words to ids; line number = id in the vocabulary file."""

    def __init__(self, tokens: Sequence[str]):
        """Initialize from an ordered token list.

        Args:
            tokens: Vocabulary whose first four entries are PAD, BOS, EOS, UNK

        Raises:
            TokenizerError: If reserved ids are wrong or tokens repeat
        """
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED:
            raise TokenizerError(f"Vocabulary must start with {RESERVED}, got {tokens[:4]}")
        if len(set(tokens)) != len(tokens):
            raise TokenizerError("Vocabulary contains duplicate tokens")
        self.tokens: List[str] = tokens
        self.index: Dict[str, int] = {token: i for i, token in enumerate(tokens)}

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Tokenizer":
        """Collect every word of ``texts`` into a sorted vocabulary."""
        words = sorted({word for text in texts for word in split_words(text)} - set(RESERVED))
        logger.info(f"Built vocabulary of {len(words) + len(RESERVED)} tokens")
        return cls(list(RESERVED) + words)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Tokenizer":
        path = Path(path)
        if not path.exists():
            raise TokenizerError(f"Vocabulary file not found: {path}")
        return cls(path.read_text(encoding="utf-8").splitlines())

    def to_file(self, path: Union[str, Path]) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.index

    def tokenize(self, text: str) -> List[int]:
        """Return ``[BOS, ids..., EOS]``; unknown words map to UNK."""
        return [BOS_ID] + [self.index.get(word, UNK_ID) for word in split_words(text)] + [EOS_ID]

    def detokenize(self, ids: Iterable[int]) -> str:
        words = [self.tokens[i] for i in ids if i not in (PAD_ID, BOS_ID, EOS_ID)]
        return " ".join(words)

    def batch(self, texts: Sequence[str], max_length: Optional[int] = None) -> TextBatch:
        """Tokenize and right-pad ``texts`` into a TextBatch.

        Raises:
            TokenizerError: If a text is longer than ``max_length`` tokens
        """
        sequences = [self.tokenize(text) for text in texts]
        longest = max((len(s) for s in sequences), default=2)
        width = max_length or longest
        if longest > width:
            raise TokenizerError(f"Text of {longest} tokens exceeds max length {width}")

        ids = np.full((len(sequences), width), PAD_ID, dtype=np.int64)
        pad = np.ones((len(sequences), width), dtype=bool)
        for row, sequence in enumerate(sequences):
            ids[row, :len(sequence)] = sequence
            pad[row, :len(sequence)] = False
        return TextBatch(token_ids=ids, pad_mask=pad, vocab_size=self.vocab_size)
